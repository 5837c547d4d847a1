#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <numbers>

#include "arteeg/errors.hpp"
#include "arteeg/rng.hpp"
#include "arteeg/signal.hpp"

using namespace arteeg;

namespace {

Eigen::VectorXd tone(double f, double fs, int n, double amp = 1.0, double phase = 0.0) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * std::numbers::pi * f * i / fs + phase);
    return x;
}

Eigen::VectorXd noise(int n, std::uint64_t seed) {
    RngStream rng(seed);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.normal();
    return x;
}

} // namespace

TEST_CASE("fft inverts and matches the analytic transform of a delta") {
    std::vector<std::complex<double>> a(8, {0.0, 0.0});
    a[1] = {1.0, 0.0};
    std::vector<std::complex<double>> orig = a;
    fft(a);
    // delta at n=1: X_k = exp(-2 pi i k / 8), all magnitudes 1
    for (int k = 0; k < 8; ++k) CHECK(std::abs(a[k]) == doctest::Approx(1.0).epsilon(1e-12));
    fft(a, true);
    for (int k = 0; k < 8; ++k) {
        CHECK(a[k].real() == doctest::Approx(orig[k].real()).scale(1.0).epsilon(1e-12));
        CHECK(a[k].imag() == doctest::Approx(orig[k].imag()).scale(1.0).epsilon(1e-12));
    }
}

TEST_CASE("next_pow2") {
    CHECK(next_pow2(1) == 1);
    CHECK(next_pow2(2) == 2);
    CHECK(next_pow2(3) == 4);
    CHECK(next_pow2(256) == 256);
    CHECK(next_pow2(257) == 512);
}

TEST_CASE("spectrum integrates back to the signal variance") {
    Eigen::VectorXd x = noise(1024, 99);
    PowerSpectrum ps = power_spectrum(x, 256.0, 256);
    const Eigen::VectorXd centered = x.array() - x.mean();
    const double ms = centered.squaredNorm() / x.size();
    double integral = 0.0;
    for (double p : ps.power) integral += p * ps.df;
    CHECK(integral == doctest::Approx(ms).epsilon(1e-9));
}

TEST_CASE("pure tone lands its power in one bin") {
    const double fs = 256.0;
    Eigen::VectorXd x = tone(10.0, fs, 1024);
    PowerSpectrum ps = power_spectrum(x, fs, 256);
    CHECK(ps.df == doctest::Approx(1.0));
    const int bin = nearest_bin(ps, 10.0);
    CHECK(ps.freq[bin] == doctest::Approx(10.0));
    CHECK(ps.power[bin] * ps.df == doctest::Approx(0.5).epsilon(1e-9));
    // a neighbouring bin holds essentially nothing
    CHECK(ps.power[bin + 3] < 1e-12);
    CHECK(band_power(ps, 9.5, 10.5) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(band_power(ps, 20.0, 40.0) < 1e-12);
}

TEST_CASE("white noise spectrum is roughly flat") {
    Eigen::VectorXd x = noise(65536, 3);
    PowerSpectrum ps = power_spectrum(x, 256.0, 256);
    const double low = band_power(ps, 1.0, 40.0) / 39.0;
    const double high = band_power(ps, 60.0, 120.0) / 60.0;
    CHECK(low / high > 0.7);
    CHECK(low / high < 1.4);
}

TEST_CASE("power_spectrum input guards") {
    Eigen::VectorXd x = noise(100, 1);
    CHECK_THROWS_AS(power_spectrum(x, 256.0, 256), UsageError);  // shorter than one window
    CHECK_THROWS_AS(power_spectrum(x, 256.0, 1), UsageError);
    CHECK_THROWS_AS(power_spectrum(x, 0.0, 64), UsageError);
}

TEST_CASE("nearest_bin clamps to the grid") {
    PowerSpectrum ps = power_spectrum(noise(512, 5), 256.0, 256);
    CHECK(nearest_bin(ps, -10.0) == 0);
    CHECK(nearest_bin(ps, 1e6) == static_cast<int>(ps.freq.size()) - 1);
    CHECK(ps.freq[nearest_bin(ps, 10.4)] == doctest::Approx(10.0));
    CHECK(ps.freq[nearest_bin(ps, 10.6)] == doctest::Approx(11.0));
}

TEST_CASE("autocorrelation of a periodic signal peaks at its period") {
    const double fs = 256.0;
    Eigen::VectorXd x = tone(8.0, fs, 2048);  // period 32 samples
    std::vector<double> r = autocorrelation(x, 64);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r[32] == doctest::Approx(1.0).epsilon(0.05));   // biased estimate decays slightly
    CHECK(r[16] == doctest::Approx(-1.0).epsilon(0.05));  // antiphase at half period
    CHECK(std::abs(r[8]) < 0.05);                         // quadrature at quarter period

}

TEST_CASE("kurtosis separates peaked from flat") {
    RngStream rng(17);
    Eigen::VectorXd g(20000);
    for (int i = 0; i < g.size(); ++i) g[i] = rng.normal();
    CHECK(kurtosis(g) == doctest::Approx(3.0).epsilon(0.1));

    Eigen::VectorXd onehot = Eigen::VectorXd::Zero(8);
    onehot[3] = 1.0;
    // one active sample among n: kurtosis approaches n
    CHECK(kurtosis(onehot) == doctest::Approx(((8.0 - 1) * (8.0 - 1) * (8.0 - 1) + 1) /
                                              (8.0 * 7.0))
                                  .epsilon(1e-9));
    CHECK(kurtosis(Eigen::VectorXd::Constant(16, 2.5)) == 0.0);
}
