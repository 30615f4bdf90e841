#pragma once

#include <Eigen/Dense>

namespace driftfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

} // namespace driftfit
