#include "arteeg/ops.hpp"

#include <algorithm>
#include <cmath>

namespace arteeg {

double grad_check(const std::function<Tensor(const Tensor&)>& loss_fn, const Tensor& x,
                  double eps, double floor) {
    Tensor xc = Tensor::from_flat(x.shape(), x.values());
    xc.set_requires_grad(true);
    Tensor loss = loss_fn(xc);
    if (loss.size() != 1) throw ShapeError("grad_check: loss function must return a scalar");
    backward(loss);
    Eigen::ArrayXd analytic = xc.grad();

    double worst = 0.0;
    {
        NoGradGuard ng;
        Eigen::ArrayXd base = x.values();
        for (long i = 0; i < base.size(); ++i) {
            Eigen::ArrayXd v = base;
            v[i] = base[i] + eps;
            const double fp = loss_fn(Tensor::from_flat(x.shape(), v)).scalar();
            v[i] = base[i] - eps;
            const double fm = loss_fn(Tensor::from_flat(x.shape(), v)).scalar();
            const double numeric = (fp - fm) / (2.0 * eps);
            const double rel = std::abs(analytic[i] - numeric) /
                               std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace arteeg
