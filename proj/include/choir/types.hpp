#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace choir {

using Index = Eigen::Index;

template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Vec6d = Eigen::Matrix<double, 6, 1>;

// N x 3 arrays of positions / directions, one row per point.
template <typename Scalar> using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points = PointsT<double>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

} // namespace choir
