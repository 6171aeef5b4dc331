#pragma once

// Random generators and small scene builders shared by the unit tests.

#include <random>

#include "planeloc/features.hpp"
#include "planeloc/geometry.hpp"
#include "planeloc/synthetic.hpp"

namespace testing {

using namespace planeloc;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

/// Uniform direction, angle uniform in [0, max_angle).
inline Vec3 random_phi(std::mt19937_64& rng, double max_angle = 3.0) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return random_unit(rng) * u(rng);
}

inline Pose random_pose(std::mt19937_64& rng, double max_angle = 3.0, double max_t = 2.0) {
  std::uniform_real_distribution<double> u(-max_t, max_t);
  return {random_phi(rng, max_angle), Vec3(u(rng), u(rng), u(rng))};
}

/// Feature with an arbitrary frame, spread and disturbance covariance.
inline SurfaceSegmentFeature random_feature(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurfaceSegmentFeature f;
  f.rotation = rotation_from_vector(random_phi(rng));
  f.centroid = Vec3(4 * u(rng) - 2, 4 * u(rng) - 2, 1 + 3 * u(rng));
  const double l1 = 0.01 + u(rng), l2 = 0.005 + u(rng) * l1;
  f.lambda = Vec2(std::max(l1, l2), std::min(l1, l2));
  f.sigma_q = Vec3(1e-4 + 1e-3 * u(rng), 1e-4 + 1e-3 * u(rng), 1e-6 + 1e-5 * u(rng));
  f.point_count = 500;
  return f;
}

/// Feature from a plane given by a frame (normal = third column).
inline SurfaceSegmentFeature plane_feature(const Mat3& frame, const Vec3& centroid, const Vec2& lambda,
                                           double var_r = kMinPlaneVariance) {
  SurfaceSegmentFeature f;
  f.rotation = frame;
  f.centroid = centroid;
  f.lambda = lambda;
  f.sigma_q = Vec3(var_r / (lambda[0] + var_r), var_r / (lambda[1] + var_r), var_r);
  f.point_count = 1000;
  return f;
}

/// Frame whose third column is `n`.
inline Mat3 frame_with_normal(const Vec3& n) {
  const Vec3 z = n.normalized();
  const Vec3 seed = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 x = (seed - z * z.dot(seed)).normalized();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return r;
}

/// Camera looking along +x of the world from (x, y, 0.6), level.
inline Pose level_camera(double x, double y, double yaw) {
  return compose(Pose(Vec3(0, 0, yaw), Vec3(x, y, 0)), default_camera_mount(0.6));
}

}  // namespace testing
