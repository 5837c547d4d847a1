#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "arteeg/errors.hpp"

namespace arteeg {

// In-place radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

int next_pow2(int n);

struct PowerSpectrum {
    std::vector<double> freq;   // Hz, one-sided incl. DC and Nyquist
    std::vector<double> power;  // density, units^2 / Hz
    double df = 0.0;
};

// Welch estimate with rectangular windows and no overlap. The signal's global
// mean is removed first; each segment is zero-padded to the next power of two.
// Invariant: sum(power) * df equals the de-meaned signal's mean square up to
// the segment-mean vs global-mean discrepancy (within 1% on stationary input).
PowerSpectrum power_spectrum(const Eigen::VectorXd& x, double fs, int nperseg = 256);

// Integrated density over [f_lo, f_hi] (inclusive bin ends).
double band_power(const PowerSpectrum& ps, double f_lo, double f_hi);

// Nearest bin index for a frequency.
int nearest_bin(const PowerSpectrum& ps, double f);

// Biased normalized autocorrelation, r[0] == 1.
std::vector<double> autocorrelation(const Eigen::VectorXd& x, int max_lag);

// Pearson kurtosis m4 / m2^2 (3 for a Gaussian).
double kurtosis(const Eigen::VectorXd& x);

} // namespace arteeg
