#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "arteeg/rng.hpp"
#include "arteeg/synth.hpp"

namespace arteeg {

// Spatial filters from the generalized eigendecomposition of the trace-
// normalized class covariances, n_keep/2 from each spectral extreme.
// Rows are filters; class-a-dominant directions come first.
Eigen::MatrixXd csp_filters(const std::vector<RowMat>& class_a,
                            const std::vector<RowMat>& class_b, int n_keep = 4);

// Log of each filtered channel's variance share.
Eigen::VectorXd csp_features(const RowMat& trial, const Eigen::MatrixXd& filters);

struct LdaModel {
    Eigen::VectorXd w;
    double theta = 0.0;
};

LdaModel lda_fit(const std::vector<Eigen::VectorXd>& features_a,
                 const std::vector<Eigen::VectorXd>& features_b);
// True when x falls on the class-a side of the boundary.
bool lda_predict(const LdaModel& model, const Eigen::VectorXd& x);

struct BciResult {
    std::vector<double> accuracies;
    double mean = 0.0;
    double stddev = 0.0;
};

using TrialDenoiser = std::function<RowMat(const RowMat&)>;

// Repeated holdout: per run a seeded shuffle and 80/20 split per class, CSP
// and LDA fit on the training portion, accuracy on the test portion. When a
// denoiser is given, every trial is denoised before the runs.
BciResult bci_holdout(const std::vector<RowMat>& trials_a, const std::vector<RowMat>& trials_b,
                      const TrialDenoiser& denoiser, RngStream rng, int runs = 10,
                      double split = 0.8, int n_keep = 4);

} // namespace arteeg
