#include "arteeg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "arteeg/errors.hpp"
#include "arteeg/mse_accum.hpp"

namespace arteeg {

std::vector<double> channel_mse(const RowMat& z, const RowMat& ref) {
    if (z.rows() != ref.rows() || z.cols() != ref.cols())
        throw ShapeMismatch("channel_mse: shapes differ");
    const int c = static_cast<int>(z.rows());
    const int t = static_cast<int>(z.cols());
    std::vector<double> out(c);
    for (int i = 0; i < c; ++i)
        out[i] = detail::one_channel_mse(z.row(i).data(), ref.row(i).data(), t);
    return out;
}

double ssvep_snr(const Eigen::VectorXd& x, double f_stim, double fs, double band_lo,
                 double band_hi, int nperseg) {
    if (f_stim <= 0.0) throw UsageError("ssvep_snr: stimulus frequency must be positive");
    if (3.0 * f_stim >= fs / 2.0) throw UsageError("ssvep_snr: third harmonic above Nyquist");
    const PowerSpectrum ps = power_spectrum(x, fs, nperseg);

    std::set<int> harmonic_bins;
    for (int h = 1; h <= 3; ++h) harmonic_bins.insert(nearest_bin(ps, h * f_stim));
    double s = 0.0;
    for (int k : harmonic_bins) s += ps.power[k];
    s /= static_cast<double>(harmonic_bins.size());

    double n_sum = 0.0;
    long n_count = 0;
    for (int k = 0; k < static_cast<int>(ps.freq.size()); ++k) {
        if (ps.freq[k] < band_lo || ps.freq[k] > band_hi) continue;
        bool excluded = false;
        for (int hb : harmonic_bins)
            if (std::abs(k - hb) <= 1) excluded = true;
        if (excluded) continue;
        n_sum += ps.power[k];
        ++n_count;
    }
    if (n_count == 0) throw UsageError("ssvep_snr: noise band is empty");
    return 10.0 * std::log10(s / (n_sum / static_cast<double>(n_count) + 1e-12));
}

double erp_snr(const std::vector<RowMat>& epochs, SampleWindow signal, SampleWindow baseline) {
    if (epochs.size() < 2) throw UsageError("erp_snr: need at least 2 epochs");
    const RowMat& first = epochs.front();
    for (const RowMat& e : epochs)
        if (e.rows() != first.rows() || e.cols() != first.cols())
            throw ShapeMismatch("erp_snr: epochs differ in shape");
    for (const SampleWindow& w : {signal, baseline})
        if (w.lo < 0 || w.hi <= w.lo || w.hi > first.cols())
            throw UsageError("erp_snr: window outside the epoch");

    RowMat avg = RowMat::Zero(first.rows(), first.cols());
    for (const RowMat& e : epochs) avg += e;
    avg /= static_cast<double>(epochs.size());

    auto window_power = [&](SampleWindow w) {
        return avg.middleCols(w.lo, w.hi - w.lo).array().square().mean();
    };
    return 10.0 * std::log10(window_power(signal) / (window_power(baseline) + 1e-12));
}

namespace {

// Kurtosis a perfectly single-channel topography reaches for n weights.
double one_hot_kurtosis(int n) {
    const double m = static_cast<double>(n - 1);
    return (m * m * m + 1.0) / (static_cast<double>(n) * m);
}

} // namespace

Classification classify_component(const Eigen::VectorXd& s, const Eigen::VectorXd& topography,
                                  double fs) {
    if (topography.size() < 2) throw UsageError("classify_component: topography too short");
    if (s.size() < static_cast<long>(4.0 * fs))
        throw UsageError("classify_component: need at least 4 s of signal");

    const double var = (s.array() - s.mean()).square().mean();
    if (var <= 1e-24) return {SourceKind::other, 0.0};

    const PowerSpectrum ps = power_spectrum(s, fs, 256);
    auto band_mean = [&](double lo, double hi) {
        double acc = 0.0;
        long n = 0;
        for (std::size_t k = 1; k < ps.freq.size(); ++k)
            if (ps.freq[k] >= lo && ps.freq[k] <= hi) {
                acc += ps.power[k];
                ++n;
            }
        return n ? acc / static_cast<double>(n) : 0.0;
    };
    auto band_sum = [&](double lo, double hi) {
        double acc = 0.0;
        for (std::size_t k = 1; k < ps.freq.size(); ++k)
            if (ps.freq[k] >= lo && ps.freq[k] <= hi) acc += ps.power[k];
        return acc;
    };

    const double total = band_sum(ps.df, fs / 2.0);
    const double topo_kurt = kurtosis(topography);
    const double topo_peaked_at = 0.75 * one_hot_kurtosis(static_cast<int>(topography.size()));
    if (total <= 0.0) return {SourceKind::other, 0.0};

    // Eye: slow biphasic pulses dominate below 5 Hz and project broadly.
    const double low_frac = band_sum(ps.df, 5.0 - 1e-9) / total;
    if (low_frac >= 0.6 && topo_kurt < topo_peaked_at) return {SourceKind::eye, low_frac};

    // Muscle: the 20-45 Hz band carries at least half the power.
    const double emg_frac = band_sum(20.0, 45.0) / total;
    if (emg_frac >= 0.5) return {SourceKind::muscle, emg_frac};

    // Heart: autocorrelation peak above 0.5 inside the 0.8-1.5 Hz beat range,
    // and periodic (stronger at the full period than at half of it).
    const int lag_lo = static_cast<int>(std::ceil(fs / 1.5));
    const int lag_hi = static_cast<int>(std::floor(fs / 0.8));
    if (lag_hi > lag_lo && lag_hi < s.size() - 1) {
        const std::vector<double> r = autocorrelation(s, lag_hi);
        int peak_lag = lag_lo;
        for (int l = lag_lo; l <= lag_hi; ++l)
            if (r[l] > r[peak_lag]) peak_lag = l;
        if (r[peak_lag] > 0.5 && r[peak_lag] > r[peak_lag / 2])
            return {SourceKind::heart, r[peak_lag]};
    }

    // Channel noise: essentially one sensor carries the component.
    if (topo_kurt > topo_peaked_at) {
        const double dominance =
            topography.array().square().maxCoeff() / topography.array().square().sum();
        return {SourceKind::channel_noise, dominance};
    }

    // Brain: an 8-12 Hz bump standing above its spectral neighborhood on a
    // low-frequency-heavy background.
    const double alpha = band_mean(8.0, 12.0);
    const double neighbors = band_mean(4.0, 7.0) * 0.5 + band_mean(13.0, 18.0) * 0.5;
    const double prominence = neighbors > 0.0 ? alpha / neighbors : 0.0;
    const double slope_ratio =
        band_mean(25.0, 45.0) > 0.0 ? band_mean(1.0, 10.0) / band_mean(25.0, 45.0) : 1e9;
    if (prominence > 1.15 && slope_ratio > 3.0)
        return {SourceKind::brain, std::min(1.0, prominence / 2.0)};

    return {SourceKind::other, 0.5};
}

int count_nonbrain(const RowMat& x, double fs, RngStream rng) {
    const int c = static_cast<int>(x.rows());
    RowMat xc = x;
    for (int i = 0; i < c; ++i) xc.row(i).array() -= xc.row(i).mean();
    Eigen::MatrixXd cov = xc * xc.transpose() / static_cast<double>(x.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("count_nonbrain: eigensolve failed");
    const double ev_max = es.eigenvalues()[c - 1];
    if (!(ev_max > 0.0)) return 0;
    int rank = 0;
    for (int i = 0; i < c; ++i)
        if (es.eigenvalues()[i] > 1e-10 * ev_max) ++rank;

    ComponentSet set = fastica(x, rank, rng);
    int count = 0;
    set.labels.resize(rank);
    set.scores.resize(rank);
    for (int i = 0; i < rank; ++i) {
        const Classification cls =
            classify_component(set.activations.row(i).transpose(), set.mixing.col(i), fs);
        set.labels[i] = cls.label;
        set.scores[i] = cls.score;
        if (cls.label != SourceKind::brain) ++count;
    }
    return count;
}

double shoelace_area(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw UsageError("shoelace_area: need at least 3 vertices");
    double acc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& [x0, y0] = points[i];
        const auto& [x1, y1] = points[(i + 1) % points.size()];
        acc += x0 * y1 - x1 * y0;
    }
    return std::abs(acc) / 2.0;
}

std::vector<std::pair<double, double>> spider_points(const std::vector<double>& values) {
    for (double v : values)
        if (v < 0.0) throw UsageError("spider_points: negative axis value");
    std::vector<std::pair<double, double>> pts(values.size());
    const double n = static_cast<double>(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / n;
        pts[k] = {values[k] * std::cos(ang), values[k] * std::sin(ang)};
    }
    return pts;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path);
    out.precision(17);
    return out;
}

} // namespace

void write_mse_csv(const std::string& path, const std::vector<double>& values) {
    auto out = open_csv(path);
    out << "channel,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << values[i] << '\n';
}

void write_snr_csv(const std::string& path,
                   const std::vector<std::pair<double, double>>& stim_snr_rows) {
    auto out = open_csv(path);
    out << "stim_hz,snr_db\n";
    for (const auto& [stim, snr] : stim_snr_rows) out << stim << ',' << snr << '\n';
}

void write_components_csv(const std::string& path, const std::vector<ComponentCountRow>& rows) {
    auto out = open_csv(path);
    out << "dataset,method,count\n";
    for (const auto& r : rows) out << r.dataset << ',' << r.method << ',' << r.count << '\n';
}

void write_bci_csv(const std::string& path, const std::vector<double>& accuracies) {
    auto out = open_csv(path);
    out << "run,accuracy\n";
    for (std::size_t i = 0; i < accuracies.size(); ++i) out << i << ',' << accuracies[i] << '\n';
}

void write_spider_csv(const std::string& path, const std::vector<double>& values, double area) {
    auto out = open_csv(path);
    out << "axis,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << values[i] << '\n';
    out << "area," << area << '\n';
}

} // namespace arteeg
