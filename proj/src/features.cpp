#include "planeloc/features.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "planeloc/error.hpp"

namespace planeloc {

namespace {

/// Flip so the first component with magnitude above `eps` is positive.
Vec3 positive_leading(Vec3 v, double eps = 1e-9) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(v[i]) > eps) return v[i] < 0.0 ? Vec3(-v) : v;
  }
  return v;
}

/// For a degenerate in-plane spread: the unit in-plane direction with
/// lexicographically largest absolute components, i.e. the projection of the
/// first coordinate axis not parallel to the normal.
Vec3 tie_break_axis(const Vec3& n) {
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Unit(i);
    Vec3 p = e - n * n.dot(e);
    if (p.norm() > 1e-6) return positive_leading(p.normalized());
  }
  return Vec3::UnitX();
}

}  // namespace

PlaneFit fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) throw DegenerateInput("fit_plane: need at least three points");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - c;
    scatter += d * d.transpose();
  }
  scatter /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 ev = es.eigenvalues();  // ascending
  const double scale = std::max(ev[2], 0.0);
  if (!(scale > 0.0) || ev[1] <= 1e-12 * scale) throw DegenerateInput("fit_plane: points are collinear");

  PlaneFit fit;
  fit.centroid = c;
  const Vec3 n = es.eigenvectors().col(0).normalized();
  fit.lambda = Vec2(ev[2], std::max(ev[1], 0.0));
  fit.residual = std::max(ev[0], 0.0);

  Vec3 x;
  if (ev[2] - ev[1] <= 1e-12 * scale) {
    x = tie_break_axis(n);
  } else {
    x = es.eigenvectors().col(2);
    x = positive_leading(x - n * n.dot(x)).normalized();
  }
  const Vec3 y = n.cross(x);
  fit.axes.col(0) = x;
  fit.axes.col(1) = y;
  fit.axes.col(2) = n;
  fit.plane = {n, n.dot(c)};
  return fit;
}

double SurfaceSegmentFeature::area() const {
  return std::numbers::pi * std::sqrt(std::max(0.0, lambda[0]) * std::max(0.0, lambda[1]));
}

SurfaceSegmentFeature build_feature(std::span<const Vec3> points, const Mat3& sigma_c_centroid) {
  const PlaneFit fit = fit_plane(points);
  SurfaceSegmentFeature f;
  Vec3 x = fit.axes.col(0);
  Vec3 n = fit.plane.n;
  if (n.dot(fit.centroid) > 0.0) {
    // Face the observer; rotate the frame by pi about x to stay right-handed.
    n = -n;
  }
  f.rotation.col(0) = x;
  f.rotation.col(1) = n.cross(x);
  f.rotation.col(2) = n;
  f.centroid = fit.centroid;
  f.lambda = fit.lambda;
  f.point_count = points.size();

  const double var_r = std::max(n.dot(sigma_c_centroid * n), kMinPlaneVariance);
  f.sigma_q = Vec3(var_r / (fit.lambda[0] + var_r), var_r / (fit.lambda[1] + var_r), var_r);
  return f;
}

SurfaceSegmentFeature build_feature(std::span<const Vec3> points, const CameraIntrinsics& k, const NoiseModel& nm) {
  const PlaneFit fit = fit_plane(points);
  return build_feature(points, point_covariance(fit.centroid, k, nm));
}

PlaneParams nominal_plane(const SurfaceSegmentFeature&) { return {Vec3::UnitZ(), 0.0}; }

PlaneParams disturbed_plane(const Vec3& q) {
  return {Vec3(q[0], q[1], 1.0) / std::sqrt(q[0] * q[0] + q[1] * q[1] + 1.0), q[2]};
}

std::vector<SurfaceSegmentFeature> extract_features(const SegmentLabeling& labeling, const OrganizedCloud& cloud,
                                                    const CameraIntrinsics& k, const NoiseModel& nm) {
  std::vector<SurfaceSegmentFeature> out;
  out.reserve(labeling.segments.size());
  for (std::size_t s = 0; s < labeling.segments.size(); ++s) {
    const std::vector<Vec3> pts = segment_points(labeling, cloud, s);
    try {
      out.push_back(build_feature(pts, k, nm));
    } catch (const DegenerateInput&) {
      // A segment on a single image line cannot carry a plane.
    }
  }
  return out;
}

std::vector<SurfaceSegmentFeature> detect_features(const DepthImage& img, const CameraIntrinsics& k,
                                                   const NoiseModel& nm, const SegmentationParams& params) {
  const OrganizedCloud cloud = backproject(img, k);
  const TriangleMesh mesh = split_triangulate(cloud, params, nm, k.mean_focal());
  const SegmentLabeling labels = merge_hierarchical(mesh, cloud, params, nm, k.mean_focal());
  return extract_features(labels, cloud, k, nm);
}

SurfaceSegmentFeature transform_feature(const SurfaceSegmentFeature& f, const Pose& to_parent) {
  SurfaceSegmentFeature out = f;
  const Mat3 r = to_parent.rotation();
  out.rotation = r * f.rotation;
  out.centroid = r * f.centroid + to_parent.t;
  return out;
}

}  // namespace planeloc
