#pragma once

#include <Eigen/Core>

namespace planeloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Axis-angle orientation vector: direction is the rotation axis, norm the
/// angle in radians. Canonical form keeps the norm in [0, pi].
struct OrientationVector {
  Vec3 phi = Vec3::Zero();

  OrientationVector() = default;
  explicit OrientationVector(const Vec3& v) : phi(v) {}
  double angle() const { return phi.norm(); }
};

/// Proper rotation matrix (orthonormal, det +1).
struct RotationMatrix {
  Mat3 r = Mat3::Identity();

  RotationMatrix() = default;
  explicit RotationMatrix(const Mat3& m) : r(m) {}
};

/// Rigid transform x_out = R(phi) * x_in + t. Translation in meters.
struct Pose {
  Vec3 phi = Vec3::Zero();
  Vec3 t = Vec3::Zero();

  Pose() = default;
  Pose(const Vec3& phi_, const Vec3& t_) : phi(phi_), t(t_) {}

  static Pose identity() { return {}; }
  static Pose from_rotation(const Mat3& r, const Vec3& t);

  Mat3 rotation() const;
  /// w = [phi; t]
  Vec6 vector() const;
  static Pose from_vector(const Vec6& w);
};

/// Gaussian pose belief. Covariance is ordered (phi, t).
struct PoseBelief {
  Pose mean;
  Mat6 cov = Mat6::Zero();
};

/// Rodrigues formula; Taylor branch below |phi| = 1e-8.
/// Throws InvalidArgument on non-finite input.
RotationMatrix rotation_from_vector(const OrientationVector& phi);
Mat3 rotation_from_vector(const Vec3& phi);

/// Inverse of rotation_from_vector. Throws InvalidArgument when R deviates
/// from a rotation by more than 1e-6.
OrientationVector vector_from_rotation(const RotationMatrix& r);
Vec3 vector_from_rotation(const Mat3& r);

/// Geodesic angle (radians) of the rotation taking a to b, i.e. angle of a^T b.
double rotation_angle_between(const Mat3& a, const Mat3& b);

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);
Vec3 transform_point(const Pose& a, const Vec3& p);

/// Pose of b expressed in a: invert(a) * b.
Pose relative(const Pose& a, const Pose& b);

Mat3 skew(const Vec3& v);

/// Left Jacobian of SO(3): R(phi + d) ~= exp([J_l(phi) d]x) R(phi).
Mat3 left_jacobian(const Vec3& phi);

/// (m + m^T) / 2
inline Mat6 symmetrized(const Mat6& m) { return 0.5 * (m + m.transpose()); }

}  // namespace planeloc
