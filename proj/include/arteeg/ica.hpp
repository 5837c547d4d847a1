#pragma once

#include <vector>

#include <Eigen/Dense>

#include "arteeg/rng.hpp"
#include "arteeg/synth.hpp"

namespace arteeg {

struct ComponentSet {
    Eigen::MatrixXd w;           // n_comp x c unmixing in sensor space
    Eigen::MatrixXd mixing;      // c x n_comp, pseudo-inverse of w
    Eigen::MatrixXd activations; // n_comp x t, w * centered data
    bool converged = false;
    double achieved_tol = 0.0;   // last iteration's rotation residual
    int iterations = 0;
    // Filled by the labeling pass, empty straight out of fastica.
    std::vector<SourceKind> labels;
    std::vector<double> scores;
};

// Symmetric fixed-point FastICA with a tanh contrast over eigendecomposition
// whitening. Non-convergence is reported through the converged flag, not an
// error. Deterministic for a given stream.
ComponentSet fastica(const RowMat& x, int n_comp, RngStream rng, double tol = 1e-6,
                     int max_iter = 500);

} // namespace arteeg
