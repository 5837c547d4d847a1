#include "arteeg/signal.hpp"

#include <cmath>
#include <numbers>

namespace arteeg {

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw Error("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= static_cast<double>(n);
}

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

PowerSpectrum power_spectrum(const Eigen::VectorXd& x, double fs, int nperseg) {
    const int n = static_cast<int>(x.size());
    if (nperseg < 2) throw UsageError("power_spectrum: window must hold at least 2 samples");
    if (n < nperseg) throw UsageError("power_spectrum: signal shorter than one window");
    if (fs <= 0.0) throw UsageError("power_spectrum: sample rate must be positive");
    const int seg = nperseg;
    const int nfft = next_pow2(seg);
    const int nseg = n / seg;
    const int nbins = nfft / 2 + 1;

    const double mean = x.mean();
    PowerSpectrum ps;
    ps.df = fs / static_cast<double>(nfft);
    ps.freq.resize(nbins);
    for (int k = 0; k < nbins; ++k) ps.freq[k] = ps.df * k;
    ps.power.assign(nbins, 0.0);

    std::vector<std::complex<double>> buf(nfft);
    for (int s = 0; s < nseg; ++s) {
        for (int j = 0; j < nfft; ++j)
            buf[j] = j < seg ? std::complex<double>(x[s * seg + j] - mean, 0.0)
                             : std::complex<double>(0.0, 0.0);
        fft(buf);
        const double norm = 1.0 / (fs * static_cast<double>(seg));
        for (int k = 0; k < nbins; ++k) {
            double p = std::norm(buf[k]) * norm;
            if (k != 0 && k != nfft / 2) p *= 2.0;  // fold the negative frequencies
            ps.power[k] += p;
        }
    }
    for (auto& p : ps.power) p /= static_cast<double>(nseg);
    return ps;
}

double band_power(const PowerSpectrum& ps, double f_lo, double f_hi) {
    double acc = 0.0;
    for (std::size_t k = 0; k < ps.freq.size(); ++k)
        if (ps.freq[k] >= f_lo && ps.freq[k] <= f_hi) acc += ps.power[k] * ps.df;
    return acc;
}

int nearest_bin(const PowerSpectrum& ps, double f) {
    if (ps.df <= 0.0 || ps.freq.empty()) throw Error("nearest_bin: empty spectrum");
    int k = static_cast<int>(std::lround(f / ps.df));
    if (k < 0) k = 0;
    if (k >= static_cast<int>(ps.freq.size())) k = static_cast<int>(ps.freq.size()) - 1;
    return k;
}

std::vector<double> autocorrelation(const Eigen::VectorXd& x, int max_lag) {
    const int n = static_cast<int>(x.size());
    if (n < 2) throw Error("autocorrelation: signal too short");
    if (max_lag >= n) max_lag = n - 1;
    const double mu = x.mean();
    Eigen::VectorXd d = x.array() - mu;
    const double denom = d.squaredNorm();
    std::vector<double> r(static_cast<std::size_t>(max_lag) + 1, 0.0);
    if (denom <= 0.0) {
        r[0] = 1.0;
        return r;
    }
    for (int l = 0; l <= max_lag; ++l) {
        double s = 0.0;
        for (int t = 0; t + l < n; ++t) s += d[t] * d[t + l];
        r[static_cast<std::size_t>(l)] = s / denom;
    }
    return r;
}

double kurtosis(const Eigen::VectorXd& x) {
    const double mu = x.mean();
    const Eigen::ArrayXd d = x.array() - mu;
    const double m2 = d.square().mean();
    if (m2 <= 0.0) return 0.0;
    const double m4 = d.square().square().mean();
    return m4 / (m2 * m2);
}

} // namespace arteeg
