#include "posefuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace posefuse {

GradCheckReport check_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& analytic_grad,
                               double step) {
  if (analytic_grad.size() != x.size()) throw Error(Errc::DimMismatch, "gradient length");
  GradCheckReport rep;
  rep.numeric.resize(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double fp = f(probe);
    probe(i) = x(i) - step;
    const double fm = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw Error(Errc::NonFiniteEvaluation, "f", static_cast<long>(i));
    const double num = (fp - fm) / (2.0 * step);
    rep.numeric(i) = num;
    const double err = std::abs(analytic_grad(i) - num) / std::max(1.0, std::abs(num));
    if (rep.worst_index < 0 || err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace posefuse
