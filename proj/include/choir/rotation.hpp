#pragma once

#include "choir/types.hpp"

#include <cmath>

namespace choir {

template <typename Scalar> Mat3<Scalar> skew(Vec3<Scalar> const &w)
{
  Mat3<Scalar> k;
  k << Scalar(0), -w.z(), w.y(),
       w.z(), Scalar(0), -w.x(),
       -w.y(), w.x(), Scalar(0);
  return k;
}

/// Axis-angle to rotation matrix. Uses the series expansion near zero so that derivatives stay
/// finite at the identity.
template <typename Scalar> Mat3<Scalar> rodrigues(Vec3<Scalar> const &w)
{
  using std::cos;
  using std::sin;
  using std::sqrt;
  Scalar const theta2 = w.squaredNorm();
  Scalar a, b; // sin(t)/t, (1 - cos t)/t^2
  if (theta2 < Scalar(1e-10)) {
    a = Scalar(1) - theta2 / Scalar(6);
    b = Scalar(0.5) - theta2 / Scalar(24);
  } else {
    Scalar const theta = sqrt(theta2);
    a = sin(theta) / theta;
    b = (Scalar(1) - cos(theta)) / theta2;
  }
  Mat3<Scalar> const k = skew(w);
  return Mat3<Scalar>::Identity() + a * k + b * (k * k);
}

inline Vec3d rotationLog(Mat3d const &r)
{
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

} // namespace choir
