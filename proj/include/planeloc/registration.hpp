#pragma once

#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "planeloc/features.hpp"
#include "planeloc/geometry.hpp"
#include "planeloc/map.hpp"

namespace planeloc {

/// chi-square, 3 degrees of freedom, 0.99 quantile.
inline constexpr double kGateChi2 = 11.345;

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Robot-frame pose uncertainty used for matching: zero mean, heading and
/// ground-plane position uncertainty, and floor unevenness that tilts and
/// lifts the robot.
struct MatchPrior {
  double sigma_alpha = deg2rad(20.0);  ///< heading, rad
  double sigma_t = 1.0;                ///< xy position, m
  double sigma_f = 0.005;              ///< floor flatness, m
  double wheelbase = 0.33;             ///< converts floor noise into tilt, m

  void validate() const;
  /// 2 sigma_f / wheelbase
  double sigma_tilt() const { return 2.0 * sigma_f / wheelbase; }
  /// diag(tilt^2, tilt^2, alpha^2 | t^2, t^2, f^2) in the robot frame
  /// (x forward, z up), ordered (phi, t).
  Mat6 robot_covariance() const;
};

/// Camera on a robot: optical axis along robot x, image x to the robot's
/// right, image y down, optical centre `height` m above the robot origin.
Pose default_camera_mount(double height = 0.6);

/// First-order propagation of a robot relative-motion covariance into the
/// camera frame: w_cam = Ad(mount^-1) w_robot.
Mat6 propagate_to_camera(const Mat6& robot_cov, const Pose& camera_mount);

/// Zero-mean pose belief of the camera relative to a local model frame.
PoseBelief camera_prior(const MatchPrior& prior, const Pose& camera_mount);

/// Scene plane (nominal n = (0,0,1), rho = 0 in its own frame) expressed in
/// the model feature frame `model_frame` under camera pose w
/// (x_model = R(phi) x_cam + t).
PlaneParams transform_plane(const SurfaceSegmentFeature& scene, const Pose& w, const Pose& model_frame);

/// Coplanarity constraint for disturbances q (scene) and q_model:
/// (n_x - n'_x, n_y - n'_y, rho - rho') in the model feature frame.
Vec3 coplanarity_constraint(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model, const Pose& w,
                            const Vec3& q, const Vec3& q_model);

/// Constraint at zero disturbances.
Vec3 coplanarity_residual(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model, const Pose& w);

struct CoplanarityLinearization {
  Vec3 h = Vec3::Zero();
  Eigen::Matrix<double, 3, 6> H_w = Eigen::Matrix<double, 3, 6>::Zero();  ///< d h / d (phi, t)
  Mat3 G = Mat3::Zero();                                                  ///< d h / d q
  Mat3 G_model = Mat3::Zero();                                            ///< d h / d q_model
};

/// Constraint value and analytic Jacobians.
CoplanarityLinearization linearize_coplanarity(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model,
                                               const Pose& w, const Vec3& q = Vec3::Zero(),
                                               const Vec3& q_model = Vec3::Zero());

struct MatchPair {
  SurfaceSegmentFeature scene;
  SurfaceSegmentFeature model;
  std::size_t scene_index = 0;
  std::size_t model_index = 0;
  double coplanarity_distance = 0.0;  ///< Mahalanobis h^T S^-1 h under the prior
  double overlap_score = 0.0;         ///< in [0, 1]

  double matched_area() const { return std::min(scene.area(), model.area()); }
};

struct UpdateResult {
  PoseBelief belief;
  bool accepted = false;     ///< false: gate rejected, belief unchanged
  double mahalanobis = 0.0;  ///< h^T S^-1 h of the innovation
};

/// Implicit-measurement EKF update with the coplanarity constraint of one
/// pair, linearized at the belief mean. Throws NumericalDegeneracy when the
/// innovation covariance has condition number above 1e12.
UpdateResult ekf_update(const PoseBelief& belief, const MatchPair& pair, double gate = kGateChi2);

/// As ekf_update but linearized at `linearization_point`.
UpdateResult ekf_update_at(const PoseBelief& belief, const Pose& linearization_point, const MatchPair& pair,
                           double gate = kGateChi2);

/// Runs the pair sequence from `prior` `passes` times; every pass after the
/// first relinearizes all pairs at the previous pass's estimate. Only the
/// last pass is gated; returns nullopt when a pair is rejected there.
std::optional<PoseBelief> iterated_update(const PoseBelief& prior, const std::vector<const MatchPair*>& pairs,
                                          int passes, double gate = kGateChi2);

struct RegistrationParams {
  double gate = kGateChi2;
  double min_overlap = 0.05;
  std::size_t max_hypotheses = 64;
  /// Smallest singular value of the seed's model-normal matrix.
  double min_seed_singular_value = 0.1;
  int ekf_passes = 3;
  /// Hypotheses less certain than this are discarded as degenerate.
  double max_orientation_std = deg2rad(10.0);
  double max_position_std = 0.5;
  /// Bounds on the normal-angle tolerance used when checking two pairs for
  /// mutual compatibility.
  double min_angle_tolerance = deg2rad(2.0);
  double max_angle_tolerance = deg2rad(15.0);
  /// Offset tolerance between near-parallel planes of two pairs, m.
  double parallel_offset_tolerance = 0.10;
  /// 0 = PLANELOC_THREADS or hardware concurrency.
  std::size_t threads = 0;
};

/// Every scene/model feature pair passing the coplanarity gate and the
/// overlap test, sorted by descending matched area.
std::vector<MatchPair> initial_match(const std::vector<SurfaceSegmentFeature>& scene, const LocalModel& model,
                                     const PoseBelief& prior, const RegistrationParams& params = {});

struct PoseHypothesis {
  int model_id = 0;
  PoseBelief belief;   ///< camera pose relative to the local model frame
  double consensus = 0.0;
  std::vector<MatchPair> pairs;
};

/// Hypotheses against one local model, descending consensus. Empty when no
/// triple of compatible pairs constrains all six degrees of freedom.
std::vector<PoseHypothesis> generate_hypotheses(const std::vector<SurfaceSegmentFeature>& scene,
                                                const LocalModel& model, const PoseBelief& prior,
                                                const RegistrationParams& params = {});

/// Total order used for ranking: consensus desc, covariance trace asc, model id asc.
bool hypothesis_ranks_before(const PoseHypothesis& a, const PoseHypothesis& b);

/// Registers the scene against every local model and merges the ranked lists.
std::vector<PoseHypothesis> localize(const std::vector<SurfaceSegmentFeature>& scene, const TopologicalMap& map,
                                     const MatchPrior& prior, const Pose& camera_mount,
                                     const RegistrationParams& params = {});

/// JSON array of {model_id, phi[3], t[3], cov[36], consensus, n_pairs}.
std::string hypotheses_to_json(const std::vector<PoseHypothesis>& hypotheses);

}  // namespace planeloc
