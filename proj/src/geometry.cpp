#include "planeloc/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "planeloc/error.hpp"

namespace planeloc {

namespace {

constexpr double kSmallAngle = 1e-8;

bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_from_vector(const Vec3& phi) {
  if (!all_finite(phi)) throw InvalidArgument("rotation_from_vector: non-finite orientation vector");
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

RotationMatrix rotation_from_vector(const OrientationVector& phi) {
  return RotationMatrix(rotation_from_vector(phi.phi));
}

Vec3 vector_from_rotation(const Mat3& r) {
  if (!r.allFinite()) throw InvalidArgument("vector_from_rotation: non-finite matrix");
  const double orth_err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det_err = std::abs(r.determinant() - 1.0);
  if (orth_err > 1e-6 || det_err > 1e-6) {
    throw InvalidArgument("vector_from_rotation: matrix is not a rotation");
  }

  // v = sin(theta) * axis
  const Vec3 v(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)), 0.5 * (r(1, 0) - r(0, 1)));
  const double s = v.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) {
    // R ~= I + [phi]x
    return v;
  }
  if (c > -0.5) {
    return v * (theta / s);
  }

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part (R + R^T)/2 = cos I + (1 - cos) a a^T.
  const Mat3 aat = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  int k = 0;
  aat.diagonal().maxCoeff(&k);
  Vec3 axis = aat.col(k) / std::sqrt(aat(k, k));
  axis.normalize();
  if (s > 0.0) {
    if (axis.dot(v) < 0.0) axis = -axis;
  } else {
    // theta == pi exactly: +axis and -axis are the same rotation; keep the
    // first non-negligible component positive.
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return axis * theta;
}

OrientationVector vector_from_rotation(const RotationMatrix& r) {
  return OrientationVector(vector_from_rotation(r.r));
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transpose() * b;
  const Vec3 v(0.5 * (d(2, 1) - d(1, 2)), 0.5 * (d(0, 2) - d(2, 0)), 0.5 * (d(1, 0) - d(0, 1)));
  const double c = 0.5 * (d.trace() - 1.0);
  return std::atan2(v.norm(), c);
}

Mat3 left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < 1e-5) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * k +
         ((theta - std::sin(theta)) / (t2 * theta)) * k * k;
}

Pose Pose::from_rotation(const Mat3& r, const Vec3& t) { return {vector_from_rotation(r), t}; }

Mat3 Pose::rotation() const { return rotation_from_vector(phi); }

Vec6 Pose::vector() const {
  Vec6 w;
  w << phi, t;
  return w;
}

Pose Pose::from_vector(const Vec6& w) { return {w.head<3>(), w.tail<3>()}; }

Pose compose(const Pose& a, const Pose& b) {
  const Mat3 ra = a.rotation();
  return Pose::from_rotation(ra * b.rotation(), ra * b.t + a.t);
}

Pose invert(const Pose& a) {
  const Mat3 rt = a.rotation().transpose();
  return Pose::from_rotation(rt, -(rt * a.t));
}

Vec3 transform_point(const Pose& a, const Vec3& p) { return a.rotation() * p + a.t; }

Pose relative(const Pose& a, const Pose& b) {
  const Mat3 rt = a.rotation().transpose();
  return Pose::from_rotation(rt * b.rotation(), rt * (b.t - a.t));
}

}  // namespace planeloc
