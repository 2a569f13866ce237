#ifndef PSLIB_TYPES_HPP
#define PSLIB_TYPES_HPP

#include <Eigen/Dense>

namespace pslib {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One particle / one subject per row, contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace pslib

#endif
