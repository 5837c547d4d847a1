#include "arteeg/bci.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arteeg/errors.hpp"

namespace arteeg {

namespace {

Eigen::MatrixXd mean_normalized_cov(const std::vector<RowMat>& trials) {
    const int c = static_cast<int>(trials.front().rows());
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
    for (const RowMat& x : trials) {
        RowMat d = x;
        for (int i = 0; i < c; ++i) d.row(i).array() -= d.row(i).mean();
        Eigen::MatrixXd cov = d * d.transpose();
        const double tr = cov.trace();
        if (!(tr > 0.0)) throw DegenerateChannel("csp: zero-variance trial");
        acc += cov / tr;
    }
    return acc / static_cast<double>(trials.size());
}

void add_ridge(Eigen::MatrixXd& cov) {
    cov += 1e-6 * cov.trace() * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
}

} // namespace

Eigen::MatrixXd csp_filters(const std::vector<RowMat>& class_a,
                            const std::vector<RowMat>& class_b, int n_keep) {
    if (class_a.size() < 2 || class_b.size() < 2)
        throw UsageError("csp_filters: need at least 2 trials per class");
    const int c = static_cast<int>(class_a.front().rows());
    for (const auto* cls : {&class_a, &class_b})
        for (const RowMat& x : *cls)
            if (x.rows() != c) throw ShapeMismatch("csp_filters: trials differ in channel count");
    if (n_keep < 2 || n_keep % 2 != 0 || n_keep > c)
        throw UsageError("csp_filters: n_keep must be even, >= 2, and <= channels");

    Eigen::MatrixXd ca = mean_normalized_cov(class_a);
    Eigen::MatrixXd cb = mean_normalized_cov(class_b);
    add_ridge(ca);
    add_ridge(cb);
    Eigen::MatrixXd composite = ca + cb;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(ca, composite);
    if (ges.info() != Eigen::Success)
        throw NumericalError("csp_filters: singular composite covariance");

    // Eigenvalues ascend; the top end maximizes class-a variance share.
    Eigen::MatrixXd filters(n_keep, c);
    for (int i = 0; i < n_keep / 2; ++i) {
        filters.row(i) = ges.eigenvectors().col(c - 1 - i).transpose();
        filters.row(n_keep / 2 + i) = ges.eigenvectors().col(i).transpose();
    }
    return filters;
}

Eigen::VectorXd csp_features(const RowMat& trial, const Eigen::MatrixXd& filters) {
    if (trial.rows() != filters.cols())
        throw ShapeMismatch("csp_features: trial channels do not match the filters");
    const int k = static_cast<int>(filters.rows());
    Eigen::MatrixXd y = filters * trial;
    Eigen::VectorXd vars(k);
    for (int i = 0; i < k; ++i) {
        const double mu = y.row(i).mean();
        vars[i] = (y.row(i).array() - mu).square().mean();
    }
    const double total = vars.sum();
    if (!(total > 0.0)) throw DegenerateChannel("csp_features: zero variance after filtering");
    Eigen::VectorXd f(k);
    for (int i = 0; i < k; ++i) {
        if (!(vars[i] > 0.0))
            throw DegenerateChannel("csp_features: zero variance after filtering");
        f[i] = std::log(vars[i] / total);
    }
    return f;
}

LdaModel lda_fit(const std::vector<Eigen::VectorXd>& features_a,
                 const std::vector<Eigen::VectorXd>& features_b) {
    if (features_a.size() < 2 || features_b.size() < 2)
        throw UsageError("lda_fit: need at least 2 samples per class");
    const long d = features_a.front().size();
    auto class_mean = [d](const std::vector<Eigen::VectorXd>& f) {
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
        for (const auto& x : f) mu += x;
        return Eigen::VectorXd(mu / static_cast<double>(f.size()));
    };
    const Eigen::VectorXd mu_a = class_mean(features_a);
    const Eigen::VectorXd mu_b = class_mean(features_b);

    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
    for (const auto& x : features_a) scatter += (x - mu_a) * (x - mu_a).transpose();
    for (const auto& x : features_b) scatter += (x - mu_b) * (x - mu_b).transpose();
    Eigen::MatrixXd cov =
        scatter / static_cast<double>(features_a.size() + features_b.size() - 2);
    add_ridge(cov);

    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("lda_fit: singular within-class covariance");
    LdaModel m;
    m.w = ldlt.solve(mu_a - mu_b);
    m.theta = m.w.dot(mu_a + mu_b) / 2.0;
    return m;
}

bool lda_predict(const LdaModel& model, const Eigen::VectorXd& x) {
    return model.w.dot(x) >= model.theta;
}

BciResult bci_holdout(const std::vector<RowMat>& trials_a, const std::vector<RowMat>& trials_b,
                      const TrialDenoiser& denoiser, RngStream rng, int runs, double split,
                      int n_keep) {
    if (trials_a.size() < 5 || trials_b.size() < 5)
        throw UsageError("bci_holdout: need at least 5 trials per class");
    if (runs < 1) throw UsageError("bci_holdout: run count must be positive");
    if (!(split > 0.0 && split < 1.0)) throw UsageError("bci_holdout: split must be in (0, 1)");

    std::vector<RowMat> a = trials_a, b = trials_b;
    if (denoiser) {
        for (RowMat& x : a) x = denoiser(x);
        for (RowMat& x : b) x = denoiser(x);
    }

    BciResult result;
    for (int run = 0; run < runs; ++run) {
        RngStream run_rng = rng.sub("run", static_cast<std::uint64_t>(run));
        auto split_class = [&](const std::vector<RowMat>& trials, std::vector<RowMat>& train,
                               std::vector<RowMat>& test) {
            std::vector<int> idx(trials.size());
            std::iota(idx.begin(), idx.end(), 0);
            run_rng.shuffle(idx);
            const std::size_t n_train = std::max<std::size_t>(
                1, std::min(trials.size() - 1,
                            static_cast<std::size_t>(split * static_cast<double>(trials.size()))));
            for (std::size_t i = 0; i < idx.size(); ++i)
                (i < n_train ? train : test).push_back(trials[idx[i]]);
        };
        std::vector<RowMat> train_a, test_a, train_b, test_b;
        split_class(a, train_a, test_a);
        split_class(b, train_b, test_b);

        const Eigen::MatrixXd filters = csp_filters(train_a, train_b, n_keep);
        auto features = [&](const std::vector<RowMat>& trials) {
            std::vector<Eigen::VectorXd> f;
            for (const RowMat& x : trials) f.push_back(csp_features(x, filters));
            return f;
        };
        const LdaModel lda = lda_fit(features(train_a), features(train_b));

        long correct = 0, total = 0;
        for (const RowMat& x : test_a) {
            correct += lda_predict(lda, csp_features(x, filters)) ? 1 : 0;
            ++total;
        }
        for (const RowMat& x : test_b) {
            correct += lda_predict(lda, csp_features(x, filters)) ? 0 : 1;
            ++total;
        }
        result.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(total));
    }

    for (double acc : result.accuracies) result.mean += acc;
    result.mean /= static_cast<double>(runs);
    if (runs > 1) {
        double sq = 0.0;
        for (double acc : result.accuracies) sq += (acc - result.mean) * (acc - result.mean);
        result.stddev = std::sqrt(sq / static_cast<double>(runs - 1));
    }
    return result;
}

} // namespace arteeg
