#pragma once

#include "posefuse/common.hpp"

#include <functional>

namespace posefuse {

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::VectorXd numeric;
};

/// Central differences, compared as |a - n| / max(1, |n|).
/// Throws NonFiniteEvaluation if f is non-finite at any probe.
GradCheckReport check_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& analytic_grad,
                               double step = 1e-5);

}  // namespace posefuse
