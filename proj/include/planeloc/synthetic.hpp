#pragma once

#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "planeloc/map.hpp"
#include "planeloc/registration.hpp"
#include "planeloc/sensor_model.hpp"

namespace planeloc {

/// Bounded planar rectangle: points center + a u + b v with |a| <= half_u,
/// |b| <= half_v. u and v are orthonormal.
struct Rectangle {
  Vec3 center = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  double half_u = 0.5;
  double half_v = 0.5;

  Vec3 normal() const { return u.cross(v); }
  /// Throws InvalidArgument for non-positive extents or non-orthonormal axes.
  void validate() const;
};

struct SyntheticWorld {
  std::vector<Rectangle> planes;
  std::uint64_t rng_seed = 0;
};

/// Axis-aligned room [-hx, hx] x [-hy, hy] x [0, height]: four walls and the
/// floor, optionally the ceiling.
void add_room(SyntheticWorld& world, double hx, double hy, double height, bool ceiling = false);

/// Closed box standing on the floor: footprint centered at (x, y), rotated
/// by yaw about z.
void add_box(SyntheticWorld& world, const Vec2& center, const Vec3& size, double yaw);

/// Nearest ray hit distance along the optical axis (depth), or 0.
double cast_depth(const SyntheticWorld& world, const Pose& camera, const Vec3& ray_camera);

/// Index of the rectangle seen by every pixel, -1 where nothing is hit.
std::vector<int> render_plane_ids(const SyntheticWorld& world, const Pose& camera, const CameraIntrinsics& k);

struct RenderOptions {
  double dropout = 0.0;
  double min_depth = 0.4;  ///< closer hits are reported as missing, m
  double max_depth = 6.0;  ///< farther hits are reported as missing, m
  std::uint64_t stream = 0;  ///< mixed with the world seed for the noise draws
};

/// Ray-cast depth image, millimeters. Gaussian axial noise k_z z^2,
/// independent per-pixel dropout. Deterministic in (world.rng_seed, stream).
DepthImage render_depth(const SyntheticWorld& world, const Pose& camera, const CameraIntrinsics& k,
                        const NoiseModel& nm, const RenderOptions& options = {});

struct BenchmarkConfig {
  std::uint64_t seed = 1;
  double room_hx = 4.0;
  double room_hy = 3.0;
  double room_height = 2.6;
  int wall_boxes = 8;          ///< furniture along the walls
  int center_boxes = 2;        ///< furniture inside the loop
  double loop_a = 2.4;         ///< mapping ellipse semi-axes, m
  double loop_b = 1.5;
  double frame_step = 0.1;     ///< mapping frame spacing along the path, m
  std::vector<double> query_scales{0.9, 1.1};
  double query_phase = 0.15;   ///< start-angle offset of query loops, rad
  double query_spacing = 0.5;  ///< m
  double query_spacing_deg = 5.0;
  double camera_height = 0.6;
  CameraIntrinsics intrinsics;
  NoiseModel noise;
  double dropout = 0.05;
  KeyframePolicy keyframes;
  FeatureConfig features;

  void validate() const;
};

struct QueryFrame {
  std::string frame_id;
  DepthImage depth;
  CameraIntrinsics intrinsics;
  Pose ground_truth;
};

struct SyntheticBenchmark {
  SyntheticWorld world;
  std::vector<MapFrame> mapping;
  std::vector<std::string> mapping_ids;
  BuildMapResult built;
  std::vector<QueryFrame> queries;
};

/// Camera poses of the robot moving counter-clockwise on an ellipse.
std::vector<Pose> ellipse_trajectory(double a, double b, double phase, double step, const Pose& camera_mount);

/// Subsamples a pose sequence: keeps a pose when it differs from the last kept
/// one by at least `spacing` m or `spacing_deg` degrees.
std::vector<std::size_t> spaced_subset(const std::vector<Pose>& poses, double spacing, double spacing_deg);

SyntheticWorld make_benchmark_world(const BenchmarkConfig& config);

/// World, mapping traverse, map and query traverse. Deterministic in the config.
SyntheticBenchmark synth_benchmark(const BenchmarkConfig& config);

/// Writes mapping/*.pgm, queries/*.pgm, intrinsics.json, mapping.jsonl,
/// queries.jsonl and map.json into `dir`.
void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

}  // namespace planeloc
