#pragma once

#include <Eigen/Dense>

namespace factorlasso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

} // namespace factorlasso
