#pragma once

#include <Eigen/Core>

namespace gmenet {

using Index = Eigen::Index;

// All numerics are double precision, row-major storage.
using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecX = Eigen::VectorXd;
using RowVecX = Eigen::RowVectorXd;
using Vec2 = Eigen::Vector2d;

}  // namespace gmenet
