#pragma once

#include <span>
#include <vector>

#include "planeloc/geometry.hpp"
#include "planeloc/segmentation.hpp"
#include "planeloc/sensor_model.hpp"

namespace planeloc {

/// Plane n . p = rho with unit normal n.
struct PlaneParams {
  Vec3 n = Vec3::UnitZ();
  double rho = 0.0;
};

/// Total-least-squares plane fit of a point set.
struct PlaneFit {
  PlaneParams plane;
  Vec3 centroid = Vec3::Zero();
  /// In-plane covariance eigenvalues, lambda1 >= lambda2 >= 0 (m^2).
  Vec2 lambda = Vec2::Zero();
  /// Columns: in-plane eigenvectors (x for lambda1, y for lambda2) and the
  /// normal. Right-handed.
  Mat3 axes = Mat3::Identity();
  /// Smallest scatter eigenvalue: mean squared distance to the plane.
  double residual = 0.0;
};

/// Throws DegenerateInput for fewer than three points or collinear points.
PlaneFit fit_plane(std::span<const Vec3> points);

/// Planar surface segment feature: frame pose in its parent frame (camera
/// frame for scene features, local-model frame for model features), the
/// diagonal of the disturbance covariance over (s_x, s_y, r), and the
/// in-plane spread eigenvalues.
struct SurfaceSegmentFeature {
  Mat3 rotation = Mat3::Identity();  ///< columns: x, y, normal
  Vec3 centroid = Vec3::Zero();
  Vec3 sigma_q = Vec3::Ones();       ///< variances of s_x, s_y (unitless) and r (m^2)
  Vec2 lambda = Vec2::Zero();        ///< lambda1 >= lambda2, m^2
  std::size_t point_count = 0;

  Pose pose() const { return Pose::from_rotation(rotation, centroid); }
  Vec3 normal() const { return rotation.col(2); }
  Mat3 sigma_q_matrix() const { return sigma_q.asDiagonal(); }
  /// Area proxy pi * sqrt(lambda1 * lambda2).
  double area() const;
  /// Sigma_p in the feature frame.
  Mat2 sigma_p() const { return lambda.asDiagonal(); }
};

/// Variance floor applied to sigma_r^2 so noiseless inputs still produce a
/// strictly positive disturbance covariance.
inline constexpr double kMinPlaneVariance = 1e-12;

/// Scene feature from supporting points (camera frame). The normal is turned
/// toward the camera origin; sigma_r^2 = n^T Sigma_C(t_F) n and
/// sigma_s^2 = sigma_r^2 / (lambda + sigma_r^2).
SurfaceSegmentFeature build_feature(std::span<const Vec3> points, const Mat3& sigma_c_centroid);

/// Convenience overload evaluating Sigma_C at the centroid.
SurfaceSegmentFeature build_feature(std::span<const Vec3> points, const CameraIntrinsics& k, const NoiseModel& nm);

/// The measured plane in its own frame: n = (0,0,1), rho = 0.
PlaneParams nominal_plane(const SurfaceSegmentFeature& f);

/// Plane of a disturbed feature, its own frame: n ~ (s_x, s_y, 1), rho = r.
PlaneParams disturbed_plane(const Vec3& q);

/// Features of every segment of a labeling.
std::vector<SurfaceSegmentFeature> extract_features(const SegmentLabeling& labeling, const OrganizedCloud& cloud,
                                                    const CameraIntrinsics& k, const NoiseModel& nm);

/// segment_depth_image followed by extract_features.
std::vector<SurfaceSegmentFeature> detect_features(const DepthImage& img, const CameraIntrinsics& k,
                                                   const NoiseModel& nm, const SegmentationParams& params);

/// Expresses a feature in another frame: `to_parent` maps the feature's
/// current parent frame into the new one.
SurfaceSegmentFeature transform_feature(const SurfaceSegmentFeature& f, const Pose& to_parent);

}  // namespace planeloc
