#include "arteeg/ica.hpp"

#include <cmath>

#include "arteeg/errors.hpp"

namespace arteeg {

namespace {

// W <- (W W^T)^{-1/2} W, making the rows orthonormal without preferring any.
void symmetric_orthogonalize(Eigen::MatrixXd& w) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w * w.transpose());
    if (es.info() != Eigen::Success) throw NumericalError("fastica: orthogonalization failed");
    Eigen::VectorXd d = es.eigenvalues();
    for (int i = 0; i < d.size(); ++i) {
        if (d[i] <= 0.0) throw NumericalError("fastica: degenerate rotation");
        d[i] = 1.0 / std::sqrt(d[i]);
    }
    w = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose() * w;
}

} // namespace

ComponentSet fastica(const RowMat& x, int n_comp, RngStream rng, double tol, int max_iter) {
    const int c = static_cast<int>(x.rows());
    const long t = x.cols();
    if (n_comp < 1 || n_comp > c) throw UsageError("fastica: component count out of range");
    if (t < 2 * c) throw UsageError("fastica: too few samples for the channel count");

    Eigen::MatrixXd xc = x;
    for (int i = 0; i < c; ++i) xc.row(i).array() -= xc.row(i).mean();

    // Whitening from the eigendecomposition of the channel covariance.
    Eigen::MatrixXd cov = xc * xc.transpose() / static_cast<double>(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("fastica: covariance eigensolve failed");
    const Eigen::VectorXd ev = es.eigenvalues();  // ascending
    const double ev_max = ev[c - 1];
    if (!(ev_max > 0.0)) throw NumericalError("fastica: zero-variance input");
    // Keep the top n_comp directions; a collapsed one means rank deficiency.
    Eigen::MatrixXd k(n_comp, c);
    for (int i = 0; i < n_comp; ++i) {
        const double lam = ev[c - 1 - i];
        if (lam <= 1e-12 * ev_max) throw NumericalError("fastica: rank-deficient input");
        k.row(i) = es.eigenvectors().col(c - 1 - i).transpose() / std::sqrt(lam);
    }
    Eigen::MatrixXd z = k * xc;  // n_comp x t, identity covariance

    Eigen::MatrixXd w(n_comp, n_comp);
    for (int i = 0; i < n_comp; ++i)
        for (int j = 0; j < n_comp; ++j) w(i, j) = rng.normal();
    symmetric_orthogonalize(w);

    ComponentSet out;
    const double inv_t = 1.0 / static_cast<double>(t);
    for (int iter = 1; iter <= max_iter; ++iter) {
        Eigen::MatrixXd y = w * z;                       // n_comp x t
        Eigen::MatrixXd g = y.array().tanh().matrix();   // contrast
        Eigen::VectorXd gp_mean(n_comp);                 // E[g'(y)] per component
        for (int i = 0; i < n_comp; ++i)
            gp_mean[i] = (1.0 - g.row(i).array().square()).mean();
        Eigen::MatrixXd w_new = g * z.transpose() * inv_t - gp_mean.asDiagonal() * w;
        symmetric_orthogonalize(w_new);

        double worst = 0.0;
        for (int i = 0; i < n_comp; ++i) {
            const double align = std::abs(w_new.row(i).dot(w.row(i)));
            worst = std::max(worst, std::abs(1.0 - align));
        }
        w = w_new;
        out.iterations = iter;
        out.achieved_tol = worst;
        if (worst < tol) {
            out.converged = true;
            break;
        }
    }

    out.w = w * k;  // back to sensor space
    out.activations = out.w * xc;
    // Rows of w*k are not orthonormal in sensor space; invert properly.
    out.mixing = out.w.completeOrthogonalDecomposition().pseudoInverse();
    return out;
}

} // namespace arteeg
