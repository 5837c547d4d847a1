#pragma once

namespace arteeg::detail {

inline double one_channel_mse(const double* a, const double* b, int samples) {
    double s = 0.0;
    for (int j = 0; j < samples; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s / static_cast<double>(samples);
}

// Mean over channels of the per-channel mean squared difference.
// Training loss and evaluation reuse this exact accumulation order so the
// numbers they report for the same pair of segments are bit-identical.
inline double mean_of_channel_mses(const double* a, const double* b, int channels, int samples) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c)
        acc += one_channel_mse(a + static_cast<long>(c) * samples,
                               b + static_cast<long>(c) * samples, samples);
    return acc / static_cast<double>(channels);
}

} // namespace arteeg::detail
