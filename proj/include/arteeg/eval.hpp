#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arteeg/ica.hpp"
#include "arteeg/rng.hpp"
#include "arteeg/signal.hpp"
#include "arteeg/synth.hpp"

namespace arteeg {

// Per-channel mean squared error. Its plain mean reproduces the training loss
// bit for bit (same accumulation order).
std::vector<double> channel_mse(const RowMat& z, const RowMat& ref);

// Harmonic SNR in dB: S is the mean power at the stimulus frequency and its
// second and third harmonics (nearest bins); N is the mean power over
// [band_lo, band_hi] with the harmonic bins and their +-1 neighbors removed.
double ssvep_snr(const Eigen::VectorXd& x, double f_stim, double fs, double band_lo = 1.0,
                 double band_hi = 50.0, int nperseg = 256);

struct SampleWindow {
    int lo = 0;  // inclusive
    int hi = 0;  // exclusive
};

// Event-locked SNR: epochs are averaged first, then the power of the average
// inside `signal` is compared against the power inside `baseline`.
double erp_snr(const std::vector<RowMat>& epochs, SampleWindow signal, SampleWindow baseline);

struct Classification {
    SourceKind label = SourceKind::other;
    double score = 0.0;
};

// Rule cascade over band powers, periodicity, and topography shape.
// Requires at least 4 s of signal.
Classification classify_component(const Eigen::VectorXd& s, const Eigen::VectorXd& topography,
                                  double fs);

// FastICA at the effective data rank, then the classifier; returns how many
// components land outside the brain label.
int count_nonbrain(const RowMat& x, double fs, RngStream rng);

double shoelace_area(const std::vector<std::pair<double, double>>& points);

// Radar-chart vertices: value k sits at angle 2*pi*k/n from the origin.
std::vector<std::pair<double, double>> spider_points(const std::vector<double>& values);

// Report writers. Schemas are stable interfaces.
void write_mse_csv(const std::string& path, const std::vector<double>& values);
void write_snr_csv(const std::string& path,
                   const std::vector<std::pair<double, double>>& stim_snr_rows);
struct ComponentCountRow {
    std::string dataset;
    std::string method;
    int count = 0;
};
void write_components_csv(const std::string& path, const std::vector<ComponentCountRow>& rows);
void write_bci_csv(const std::string& path, const std::vector<double>& accuracies);
void write_spider_csv(const std::string& path, const std::vector<double>& values, double area);

} // namespace arteeg
