#include "planeloc/registration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <array>
#include <set>

#include "json_util.hpp"
#include "planeloc/error.hpp"
#include "planeloc/parallel.hpp"

namespace planeloc {

using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

// --- prior -------------------------------------------------------------------

void MatchPrior::validate() const {
  if (!(sigma_alpha >= 0.0) || !(sigma_t >= 0.0) || !(sigma_f >= 0.0)) {
    throw InvalidArgument("match prior: standard deviations must be non-negative");
  }
  if (!(wheelbase > 0.0)) throw InvalidArgument("match prior: wheelbase must be positive");
}

Mat6 MatchPrior::robot_covariance() const {
  const double tilt = sigma_tilt();
  Vec6 d;
  d << tilt * tilt, tilt * tilt, sigma_alpha * sigma_alpha, sigma_t * sigma_t, sigma_t * sigma_t, sigma_f * sigma_f;
  return d.asDiagonal();
}

Pose default_camera_mount(double height) {
  Mat3 r;
  // columns: camera x, y, z axes in the robot frame
  r << 0.0, 0.0, 1.0,
      -1.0, 0.0, 0.0,
       0.0, -1.0, 0.0;
  return Pose::from_rotation(r, Vec3(0.0, 0.0, height));
}

Mat6 propagate_to_camera(const Mat6& robot_cov, const Pose& camera_mount) {
  // mount^-1 * Exp(d) * mount ~= Exp(J d) with
  // J = [Rm^T, 0; -Rm^T [tm]x, Rm^T] in the (phi, t) ordering.
  const Mat3 rt = camera_mount.rotation().transpose();
  Mat6 j = Mat6::Zero();
  j.block<3, 3>(0, 0) = rt;
  j.block<3, 3>(3, 0) = -rt * skew(camera_mount.t);
  j.block<3, 3>(3, 3) = rt;
  return symmetrized(j * robot_cov * j.transpose());
}

PoseBelief camera_prior(const MatchPrior& prior, const Pose& camera_mount) {
  prior.validate();
  PoseBelief b;
  b.cov = propagate_to_camera(prior.robot_covariance(), camera_mount);
  return b;
}

// --- plane transform and coplanarity ------------------------------------------

PlaneParams transform_plane(const SurfaceSegmentFeature& scene, const Pose& w, const Pose& model_frame) {
  const Mat3 r = w.rotation();
  const Mat3 rm = model_frame.rotation();
  const Vec3 n_scene = scene.rotation.col(2);  // R_F * (0,0,1)
  PlaneParams out;
  out.n = rm.transpose() * r * n_scene;
  out.rho = n_scene.dot(scene.centroid + r.transpose() * (w.t - model_frame.t));
  return out;
}

namespace {

/// d n / d (s_x, s_y) for n = (s_x, s_y, 1) / |(s_x, s_y, 1)|.
Eigen::Matrix<double, 3, 2> normal_jacobian(const Vec3& q) {
  const Vec3 v(q[0], q[1], 1.0);
  const double len = v.norm();
  const Vec3 n = v / len;
  const Mat3 d = (Mat3::Identity() - n * n.transpose()) / len;
  return d.leftCols<2>();
}

}  // namespace

CoplanarityLinearization linearize_coplanarity(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model,
                                               const Pose& w, const Vec3& q, const Vec3& q_model) {
  const Mat3 r = w.rotation();
  const Mat3 jl = left_jacobian(w.phi);
  const Mat3& rf = scene.rotation;
  const Mat3& rm = model.rotation;

  const PlaneParams fp = disturbed_plane(q);
  const PlaneParams mp = disturbed_plane(q_model);
  const Vec3 c = rf * fp.n;                                       // scene normal, camera frame
  const Vec3 d = w.t - model.centroid;
  const Vec3 u = rf.transpose() * (scene.centroid + r.transpose() * d);
  const Vec3 n_model_frame = rm.transpose() * r * c;
  const double rho = fp.rho + fp.n.dot(u);

  CoplanarityLinearization lin;
  lin.h << n_model_frame.x() - mp.n.x(), n_model_frame.y() - mp.n.y(), rho - mp.rho;

  // pose
  const Mat3 dn_dphi = -rm.transpose() * skew(r * c) * jl;
  const Eigen::RowVector3d drho_dphi = c.transpose() * r.transpose() * skew(d) * jl;
  const Eigen::RowVector3d drho_dt = c.transpose() * r.transpose();
  lin.H_w.block<2, 3>(0, 0) = dn_dphi.topRows<2>();
  lin.H_w.block<1, 3>(2, 0) = drho_dphi;
  lin.H_w.block<1, 3>(2, 3) = drho_dt;

  // scene disturbance
  const Eigen::Matrix<double, 3, 2> dfn = normal_jacobian(q);
  lin.G.block<2, 2>(0, 0) = (rm.transpose() * r * rf * dfn).topRows<2>();
  lin.G.block<1, 2>(2, 0) = u.transpose() * dfn;
  lin.G(2, 2) = 1.0;

  // model disturbance
  const Eigen::Matrix<double, 3, 2> dmn = normal_jacobian(q_model);
  lin.G_model.block<2, 2>(0, 0) = -dmn.topRows<2>();
  lin.G_model(2, 2) = -1.0;
  return lin;
}

Vec3 coplanarity_constraint(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model, const Pose& w,
                            const Vec3& q, const Vec3& q_model) {
  return linearize_coplanarity(scene, model, w, q, q_model).h;
}

Vec3 coplanarity_residual(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model, const Pose& w) {
  const PlaneParams p = transform_plane(scene, w, model.pose());
  return {p.n.x(), p.n.y(), p.rho};
}

// --- EKF ---------------------------------------------------------------------

namespace {

Vec3 canonical_phi(const Vec3& phi) {
  if (phi.norm() <= std::numbers::pi) return phi;
  return vector_from_rotation(rotation_from_vector(phi));
}

Mat3 innovation_covariance(const CoplanarityLinearization& lin, const Mat6& p, const MatchPair& pair) {
  const Mat3 s = lin.H_w * p * lin.H_w.transpose() + lin.G * pair.scene.sigma_q_matrix() * lin.G.transpose() +
                 lin.G_model * pair.model.sigma_q_matrix() * lin.G_model.transpose();
  return 0.5 * (s + s.transpose());
}

/// Inverse of a symmetric innovation covariance; throws on ill-conditioning.
/// Inverse of S, conditioned after symmetric diagonal scaling: the normal
/// rows (rad^2) and the offset row (m^2) can differ by many orders without
/// S being close to singular.
Mat3 checked_inverse(const Mat3& s) {
  const Vec3 d = s.diagonal();
  if (!(d.minCoeff() > 0.0)) throw NumericalDegeneracy("innovation covariance is singular");
  const Vec3 scale = d.cwiseSqrt().cwiseInverse();
  const Mat3 c = scale.asDiagonal() * s * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(c, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()[0];
  const double hi = es.eigenvalues()[2];
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw NumericalDegeneracy("innovation covariance is singular or ill-conditioned");
  }
  return scale.asDiagonal() * c.inverse() * scale.asDiagonal();
}

}  // namespace

UpdateResult ekf_update_at(const PoseBelief& belief, const Pose& linearization_point, const MatchPair& pair,
                           double gate) {
  const CoplanarityLinearization lin = linearize_coplanarity(pair.scene, pair.model, linearization_point);
  const Vec6 dw = belief.mean.vector() - linearization_point.vector();
  const Vec3 h = lin.h + lin.H_w * dw;  // predicted constraint at the mean
  const Mat3 s = innovation_covariance(lin, belief.cov, pair);
  const Mat3 s_inv = checked_inverse(s);

  UpdateResult out;
  out.mahalanobis = h.dot(s_inv * h);
  if (!(out.mahalanobis <= gate)) {
    out.belief = belief;
    out.accepted = false;
    return out;
  }
  const Mat63 k = belief.cov * lin.H_w.transpose() * s_inv;
  const Vec6 w = belief.mean.vector() - k * h;
  const Mat6 ikh = Mat6::Identity() - k * lin.H_w;
  const Mat3 r = lin.G * pair.scene.sigma_q_matrix() * lin.G.transpose() +
                 lin.G_model * pair.model.sigma_q_matrix() * lin.G_model.transpose();
  out.belief.mean = Pose(canonical_phi(w.head<3>()), w.tail<3>());
  out.belief.cov = symmetrized(ikh * belief.cov * ikh.transpose() + k * r * k.transpose());
  out.accepted = true;
  return out;
}

UpdateResult ekf_update(const PoseBelief& belief, const MatchPair& pair, double gate) {
  return ekf_update_at(belief, belief.mean, pair, gate);
}

std::optional<PoseBelief> iterated_update(const PoseBelief& prior, const std::vector<const MatchPair*>& pairs,
                                          int passes, double gate) {
  PoseBelief estimate = prior;
  const int n = std::max(passes, 1);
  for (int pass = 0; pass < n; ++pass) {
    const Pose lin_point = estimate.mean;
    // earlier passes only move the linearization point; with near-exact
    // planes their second-order error would trip the gate
    const double g = pass + 1 == n ? gate : std::numeric_limits<double>::infinity();
    PoseBelief b = prior;
    for (const MatchPair* pair : pairs) {
      const UpdateResult r = pass == 0 ? ekf_update(b, *pair, g) : ekf_update_at(b, lin_point, *pair, g);
      if (!r.accepted) return std::nullopt;
      b = r.belief;
    }
    estimate = b;
  }
  return estimate;
}

// --- matching ------------------------------------------------------------------

namespace {

/// Mahalanobis distance between the model centroid and the scene centroid
/// mapped by the prior mean, within the model plane.
double overlap_distance_sq(const SurfaceSegmentFeature& scene, const SurfaceSegmentFeature& model,
                           const PoseBelief& prior) {
  const Mat3 r = prior.mean.rotation();
  const Vec3 mapped = r * scene.centroid + prior.mean.t;
  const Mat3 to_model = model.rotation.transpose();
  const Vec2 delta = (to_model * (model.centroid - mapped)).head<2>();

  const Mat3 scene_in_model = to_model * r * scene.rotation;
  const Mat3 scene_spread = scene_in_model.leftCols<2>() * scene.lambda.asDiagonal() *
                            scene_in_model.leftCols<2>().transpose();
  Mat36 jc;
  jc.leftCols<3>() = -skew(r * scene.centroid) * left_jacobian(prior.mean.phi);
  jc.rightCols<3>() = Mat3::Identity();
  const Mat3 pos = to_model * jc * prior.cov * jc.transpose() * to_model.transpose();

  const Mat2 c = Mat2(model.lambda.asDiagonal()) + scene_spread.topLeftCorner<2, 2>() + pos.topLeftCorner<2, 2>();
  const Eigen::LDLT<Mat2> ldlt(c);
  if (ldlt.info() != Eigen::Success || !(c.determinant() > 0.0)) return std::numeric_limits<double>::infinity();
  return delta.dot(ldlt.solve(delta));
}

}  // namespace

std::vector<MatchPair> initial_match(const std::vector<SurfaceSegmentFeature>& scene, const LocalModel& model,
                                     const PoseBelief& prior, const RegistrationParams& params) {
  std::vector<MatchPair> out;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    for (std::size_t j = 0; j < model.features.size(); ++j) {
      MatchPair pair;
      pair.scene = scene[i];
      pair.model = model.features[j];
      pair.scene_index = i;
      pair.model_index = j;
      const CoplanarityLinearization lin = linearize_coplanarity(pair.scene, pair.model, prior.mean);
      const Mat3 s = innovation_covariance(lin, prior.cov, pair);
      const Eigen::LDLT<Mat3> ldlt(s);
      if (ldlt.info() != Eigen::Success) continue;
      pair.coplanarity_distance = lin.h.dot(ldlt.solve(lin.h));
      if (!(pair.coplanarity_distance <= params.gate)) continue;
      pair.overlap_score = std::exp(-0.5 * overlap_distance_sq(pair.scene, pair.model, prior));
      if (!(pair.overlap_score >= params.min_overlap)) continue;
      out.push_back(std::move(pair));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MatchPair& a, const MatchPair& b) { return a.matched_area() > b.matched_area(); });
  return out;
}

// --- hypotheses ----------------------------------------------------------------

namespace {

double normal_variance(const SurfaceSegmentFeature& f) { return std::max(f.sigma_q[0], f.sigma_q[1]); }

double angle_between(const Vec3& a, const Vec3& b) { return std::acos(std::clamp(a.dot(b), -1.0, 1.0)); }

/// Two pairs can belong to one hypothesis: distinct features on both sides,
/// equal inter-normal angles, and equal separations for near-parallel planes.
bool compatible(const MatchPair& a, const MatchPair& b, const RegistrationParams& params) {
  if (a.scene_index == b.scene_index || a.model_index == b.model_index) return false;
  const double scene_angle = angle_between(a.scene.normal(), b.scene.normal());
  const double model_angle = angle_between(a.model.normal(), b.model.normal());
  const double var = normal_variance(a.scene) + normal_variance(b.scene) + normal_variance(a.model) +
                     normal_variance(b.model);
  const double tol = std::clamp(3.0 * std::sqrt(var), params.min_angle_tolerance, params.max_angle_tolerance);
  if (std::abs(scene_angle - model_angle) > tol) return false;

  const double parallel = deg2rad(15.0);
  if (scene_angle < parallel && model_angle < parallel) {
    const double scene_sep = a.scene.normal().dot(b.scene.centroid - a.scene.centroid);
    const double model_sep = a.model.normal().dot(b.model.centroid - a.model.centroid);
    const double var_r = a.scene.sigma_q[2] + b.scene.sigma_q[2] + a.model.sigma_q[2] + b.model.sigma_q[2];
    if (std::abs(scene_sep - model_sep) > params.parallel_offset_tolerance + 3.0 * std::sqrt(var_r)) return false;
  }
  return true;
}

bool spans_3d(const MatchPair& a, const MatchPair& b, const MatchPair& c, double min_sv) {
  Mat3 n;
  n.row(0) = a.model.normal().transpose();
  n.row(1) = b.model.normal().transpose();
  n.row(2) = c.model.normal().transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(n.transpose() * n, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()[0])) >= min_sv;
}

/// Seed triples (i < j < k) in order of increasing rank sum i + j + k, then
/// lexicographically.
std::vector<std::array<std::size_t, 3>> select_seeds(const std::vector<MatchPair>& pairs,
                                                     const RegistrationParams& params) {
  const std::size_t n = pairs.size();
  std::vector<std::array<std::size_t, 3>> seeds;
  if (n < 3 || params.max_hypotheses == 0) return seeds;
  std::vector<char> compat(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      compat[i * n + j] = compat[j * n + i] = compatible(pairs[i], pairs[j], params) ? 1 : 0;
    }
  }
  for (std::size_t sum = 3; sum + 3 <= 3 * n && seeds.size() < params.max_hypotheses; ++sum) {
    for (std::size_t i = 0; i < n && 3 * i + 3 <= sum; ++i) {
      for (std::size_t j = i + 1; j < n && i + 2 * j + 1 <= sum; ++j) {
        if (!compat[i * n + j]) continue;
        const std::size_t k = sum - i - j;
        if (k <= j || k >= n) continue;
        if (!compat[i * n + k] || !compat[j * n + k]) continue;
        if (!spans_3d(pairs[i], pairs[j], pairs[k], params.min_seed_singular_value)) continue;
        seeds.push_back({i, j, k});
        if (seeds.size() >= params.max_hypotheses) return seeds;
      }
    }
  }
  return seeds;
}

bool is_degenerate(const PoseBelief& b, const RegistrationParams& params) {
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(b.cov.topLeftCorner<3, 3>(), Eigen::EigenvaluesOnly);
  if (std::sqrt(std::max(0.0, es.eigenvalues()[2])) > params.max_orientation_std) return true;
  es.computeDirect(b.cov.bottomRightCorner<3, 3>(), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()[2])) > params.max_position_std;
}

}  // namespace

bool hypothesis_ranks_before(const PoseHypothesis& a, const PoseHypothesis& b) {
  if (a.consensus != b.consensus) return a.consensus > b.consensus;
  const double ta = a.belief.cov.trace();
  const double tb = b.belief.cov.trace();
  if (ta != tb) return ta < tb;
  return a.model_id < b.model_id;
}

std::vector<PoseHypothesis> generate_hypotheses(const std::vector<SurfaceSegmentFeature>& scene,
                                                const LocalModel& model, const PoseBelief& prior,
                                                const RegistrationParams& params) {
  const std::vector<MatchPair> pairs = initial_match(scene, model, prior, params);
  const auto seeds = select_seeds(pairs, params);

  std::vector<PoseHypothesis> out;
  std::set<std::vector<std::size_t>> seen;
  for (const auto& seed : seeds) {
    std::vector<const MatchPair*> accepted{&pairs[seed[0]], &pairs[seed[1]], &pairs[seed[2]]};
    std::optional<PoseBelief> belief;
    try {
      belief = iterated_update(prior, accepted, params.ekf_passes, params.gate);
    } catch (const NumericalDegeneracy&) {
      continue;
    }
    if (!belief) continue;

    std::vector<char> scene_used(scene.size(), 0), model_used(model.features.size(), 0);
    std::vector<std::size_t> members(seed.begin(), seed.end());
    for (const std::size_t s : seed) {
      scene_used[pairs[s].scene_index] = 1;
      model_used[pairs[s].model_index] = 1;
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const MatchPair& pair = pairs[p];
      if (scene_used[pair.scene_index] || model_used[pair.model_index]) continue;
      UpdateResult r;
      try {
        r = ekf_update(*belief, pair, params.gate);
      } catch (const NumericalDegeneracy&) {
        continue;
      }
      if (!r.accepted) continue;
      belief = r.belief;
      accepted.push_back(&pair);
      members.push_back(p);
      scene_used[pair.scene_index] = 1;
      model_used[pair.model_index] = 1;
    }

    std::sort(members.begin(), members.end());
    if (!seen.insert(members).second) continue;

    // Relinearize the full accepted set around the extended estimate.
    // Already gated during extension, so the refinement runs ungated.
    if (accepted.size() > 3) {
      try {
        PoseBelief estimate = *belief;
        for (int pass = 0; pass < std::max(params.ekf_passes, 1); ++pass) {
          PoseBelief b = prior;
          for (const MatchPair* pair : accepted) {
            b = ekf_update_at(b, estimate.mean, *pair, std::numeric_limits<double>::infinity()).belief;
          }
          estimate = b;
        }
        belief = estimate;
      } catch (const NumericalDegeneracy&) {
      }
    }
    if (is_degenerate(*belief, params)) continue;

    PoseHypothesis hyp;
    hyp.model_id = model.id;
    hyp.belief = *belief;
    for (const MatchPair* pair : accepted) {
      hyp.consensus += pair->matched_area();
      hyp.pairs.push_back(*pair);
    }
    out.push_back(std::move(hyp));
  }
  std::stable_sort(out.begin(), out.end(), hypothesis_ranks_before);
  return out;
}

std::vector<PoseHypothesis> localize(const std::vector<SurfaceSegmentFeature>& scene, const TopologicalMap& map,
                                     const MatchPrior& prior, const Pose& camera_mount,
                                     const RegistrationParams& params) {
  if (map.models.empty()) throw InvalidArgument("localize: empty map");
  const PoseBelief start = camera_prior(prior, camera_mount);
  std::vector<std::vector<PoseHypothesis>> per_model(map.models.size());
  parallel_for(map.models.size(), params.threads, [&](std::size_t i) {
    per_model[i] = generate_hypotheses(scene, map.models[i], start, params);
  });
  std::vector<PoseHypothesis> all;
  for (auto& v : per_model) {
    for (auto& h : v) all.push_back(std::move(h));
  }
  std::stable_sort(all.begin(), all.end(), hypothesis_ranks_before);
  return all;
}

std::string hypotheses_to_json(const std::vector<PoseHypothesis>& hypotheses) {
  detail::json arr = detail::json::array();
  for (const auto& h : hypotheses) {
    detail::json cov = detail::json::array();
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) cov.push_back(h.belief.cov(r, c));
    }
    arr.push_back({{"model_id", h.model_id},
                   {"phi", detail::to_json_array(h.belief.mean.phi)},
                   {"t", detail::to_json_array(h.belief.mean.t)},
                   {"cov", cov},
                   {"consensus", h.consensus},
                   {"n_pairs", h.pairs.size()}});
  }
  return arr.dump(1) + "\n";
}

}  // namespace planeloc
