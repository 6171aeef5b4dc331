#include "planeloc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "planeloc/dataset.hpp"
#include "planeloc/error.hpp"
#include "planeloc/parallel.hpp"

namespace planeloc {

void Rectangle::validate() const {
  if (!(half_u > 0.0) || !(half_v > 0.0)) throw InvalidArgument("rectangle: extents must be positive");
  if (std::abs(u.norm() - 1.0) > 1e-9 || std::abs(v.norm() - 1.0) > 1e-9 || std::abs(u.dot(v)) > 1e-9) {
    throw InvalidArgument("rectangle: axes must be orthonormal");
  }
}

void add_room(SyntheticWorld& world, double hx, double hy, double height, bool ceiling) {
  if (!(hx > 0.0) || !(hy > 0.0) || !(height > 0.0)) throw InvalidArgument("add_room: extents must be positive");
  const Vec3 z = Vec3::UnitZ();
  // walls, normals pointing inward
  world.planes.push_back({Vec3(hx, 0, height / 2), Vec3::UnitY(), z, hy, height / 2});
  world.planes.push_back({Vec3(-hx, 0, height / 2), -Vec3::UnitY(), z, hy, height / 2});
  world.planes.push_back({Vec3(0, hy, height / 2), -Vec3::UnitX(), z, hx, height / 2});
  world.planes.push_back({Vec3(0, -hy, height / 2), Vec3::UnitX(), z, hx, height / 2});
  world.planes.push_back({Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), hx, hy});
  if (ceiling) world.planes.push_back({Vec3(0, 0, height), Vec3::UnitY(), Vec3::UnitX(), hy, hx});
}

void add_box(SyntheticWorld& world, const Vec2& center, const Vec3& size, double yaw) {
  if (!(size.minCoeff() > 0.0)) throw InvalidArgument("add_box: size must be positive");
  const Vec3 ex(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 ey(-std::sin(yaw), std::cos(yaw), 0.0);
  const Vec3 ez = Vec3::UnitZ();
  const Vec3 c(center.x(), center.y(), size.z() / 2);
  const double hx = size.x() / 2, hy = size.y() / 2, hz = size.z() / 2;
  world.planes.push_back({c + hx * ex, ey, ez, hy, hz});
  world.planes.push_back({c - hx * ex, -ey, ez, hy, hz});
  world.planes.push_back({c + hy * ey, -ex, ez, hx, hz});
  world.planes.push_back({c - hy * ey, ex, ez, hx, hz});
  world.planes.push_back({c + hz * ez, ex, ey, hx, hy});
}

namespace {

/// Nearest hit: (distance along the ray, rectangle index) or (inf, -1).
std::pair<double, int> nearest_hit(const SyntheticWorld& world, const Pose& camera, const Vec3& d) {
  double best = std::numeric_limits<double>::infinity();
  int index = -1;
  for (std::size_t i = 0; i < world.planes.size(); ++i) {
    const Rectangle& rect = world.planes[i];
    const Vec3 n = rect.normal();
    const double denom = n.dot(d);
    if (std::abs(denom) < 1e-12) continue;
    const double s = n.dot(rect.center - camera.t) / denom;
    if (!(s > 0.0) || s >= best) continue;
    const Vec3 rel = camera.t + s * d - rect.center;
    if (std::abs(rel.dot(rect.u)) > rect.half_u || std::abs(rel.dot(rect.v)) > rect.half_v) continue;
    best = s;
    index = static_cast<int>(i);
  }
  return {best, index};
}

}  // namespace

double cast_depth(const SyntheticWorld& world, const Pose& camera, const Vec3& ray_camera) {
  const auto [s, index] = nearest_hit(world, camera, camera.rotation() * ray_camera);
  return index >= 0 ? s * ray_camera.z() : 0.0;
}

std::vector<int> render_plane_ids(const SyntheticWorld& world, const Pose& camera, const CameraIntrinsics& k) {
  k.validate();
  const Mat3 r = camera.rotation();
  std::vector<int> ids(static_cast<std::size_t>(k.width) * k.height, -1);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      ids[static_cast<std::size_t>(v) * k.width + u] = nearest_hit(world, camera, r * ray).second;
    }
  }
  return ids;
}

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

DepthImage render_depth(const SyntheticWorld& world, const Pose& camera, const CameraIntrinsics& k,
                        const NoiseModel& nm, const RenderOptions& options) {
  k.validate();
  nm.validate();
  if (!(options.dropout >= 0.0 && options.dropout <= 1.0)) throw InvalidArgument("render_depth: dropout outside [0, 1]");
  auto rng = make_rng(world.rng_seed, options.stream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Mat3 r = camera.rotation();
  DepthImage img(k.width, k.height);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const auto [s, index] = nearest_hit(world, camera, r * ray);
      double z = index >= 0 ? s : 0.0;
      // fixed draw count per pixel keeps the noise stream aligned
      const double noise = gauss(rng);
      const double drop = unit(rng);
      if (z <= 0.0) continue;
      z += nm.axial_std(z) * noise;
      if (drop < options.dropout || z < options.min_depth || z > options.max_depth) continue;
      img.at(u, v) = static_cast<std::uint16_t>(std::clamp(std::lround(z * 1000.0), 0L, 65535L));
    }
  }
  return img;
}

void BenchmarkConfig::validate() const {
  if (!(room_hx > 0.0) || !(room_hy > 0.0) || !(room_height > 0.0)) {
    throw InvalidArgument("benchmark: room extents must be positive");
  }
  if (!(loop_a > 0.0) || !(loop_b > 0.0) || !(frame_step > 0.0)) {
    throw InvalidArgument("benchmark: trajectory parameters must be positive");
  }
  for (const double s : query_scales) {
    if (!(s > 0.0) || s * loop_a >= room_hx || s * loop_b >= room_hy) {
      throw InvalidArgument("benchmark: query loop leaves the room");
    }
  }
  if (loop_a >= room_hx || loop_b >= room_hy) throw InvalidArgument("benchmark: mapping loop leaves the room");
  if (!(query_spacing > 0.0) || !(query_spacing_deg > 0.0)) {
    throw InvalidArgument("benchmark: query spacing must be positive");
  }
  if (wall_boxes < 0 || center_boxes < 0) throw InvalidArgument("benchmark: negative box count");
  intrinsics.validate();
  noise.validate();
  keyframes.validate();
  features.segmentation.validate();
}

std::vector<Pose> ellipse_trajectory(double a, double b, double phase, double step, const Pose& camera_mount) {
  if (!(a > 0.0) || !(b > 0.0) || !(step > 0.0)) throw InvalidArgument("ellipse_trajectory: positive sizes required");
  constexpr int kSamples = 200000;
  const double dtheta = 2.0 * std::numbers::pi / kSamples;
  std::vector<Pose> out;
  double travelled = 0.0;
  double next = 0.0;
  Vec2 prev(a * std::cos(phase), b * std::sin(phase));
  for (int i = 0; i < kSamples; ++i) {
    const double th = phase + i * dtheta;
    const Vec2 p(a * std::cos(th), b * std::sin(th));
    travelled += (p - prev).norm();
    prev = p;
    if (travelled + 1e-12 < next) continue;
    next += step;
    const double yaw = std::atan2(b * std::cos(th), -a * std::sin(th));
    const Pose robot(Vec3(0.0, 0.0, yaw), Vec3(p.x(), p.y(), 0.0));
    out.push_back(compose(robot, camera_mount));
  }
  return out;
}

std::vector<std::size_t> spaced_subset(const std::vector<Pose>& poses, double spacing, double spacing_deg) {
  std::vector<std::size_t> keep;
  if (poses.empty()) return keep;
  keep.push_back(0);
  const double min_angle = deg2rad(spacing_deg);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const Pose& last = poses[keep.back()];
    const double dist = (poses[i].t - last.t).norm();
    const double angle = rotation_angle_between(last.rotation(), poses[i].rotation());
    if (dist >= spacing || angle >= min_angle) keep.push_back(i);
  }
  return keep;
}

SyntheticWorld make_benchmark_world(const BenchmarkConfig& config) {
  config.validate();
  SyntheticWorld world;
  world.rng_seed = config.seed;
  add_room(world, config.room_hx, config.room_hy, config.room_height);

  auto rng = make_rng(config.seed, 0xB0C5ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  for (int i = 0; i < config.wall_boxes; ++i) {
    const int wall = static_cast<int>(unit(rng) * 4.0) % 4;
    const double width = uniform(0.5, 1.4);
    const double depth = uniform(0.3, 0.6);
    const double height = uniform(0.5, 1.6);
    const double yaw_jitter = deg2rad(uniform(-12.0, 12.0));
    const bool along_x = wall >= 2;  // walls at y = +-hy run along x
    const double half_len = (along_x ? config.room_hx : config.room_hy) - 0.9;
    const double s = uniform(-half_len, half_len);
    const double inset = depth / 2 + 0.05;
    Vec2 c;
    double yaw;
    switch (wall) {
      case 0: c = {config.room_hx - inset, s}; yaw = 0.0; break;
      case 1: c = {-config.room_hx + inset, s}; yaw = 0.0; break;
      case 2: c = {s, config.room_hy - inset}; yaw = std::numbers::pi / 2; break;
      default: c = {s, -config.room_hy + inset}; yaw = std::numbers::pi / 2; break;
    }
    add_box(world, c, Vec3(depth, width, height), yaw + yaw_jitter);
  }
  for (int i = 0; i < config.center_boxes; ++i) {
    const double rad = uniform(0.0, 0.4);
    const double ang = uniform(0.0, 2.0 * std::numbers::pi);
    add_box(world, Vec2(rad * std::cos(ang), rad * std::sin(ang)),
            Vec3(uniform(0.3, 0.6), uniform(0.3, 0.6), uniform(0.5, 1.2)), uniform(0.0, std::numbers::pi));
  }
  for (const auto& p : world.planes) p.validate();
  return world;
}

SyntheticBenchmark synth_benchmark(const BenchmarkConfig& config) {
  SyntheticBenchmark bench;
  bench.world = make_benchmark_world(config);
  const Pose mount = default_camera_mount(config.camera_height);

  const std::vector<Pose> path = ellipse_trajectory(config.loop_a, config.loop_b, 0.0, config.frame_step, mount);
  bench.mapping.resize(path.size());
  bench.mapping_ids.resize(path.size());
  parallel_for(path.size(), 0, [&](std::size_t i) {
    RenderOptions opt;
    opt.dropout = config.dropout;
    opt.stream = i + 1;
    MapFrame& f = bench.mapping[i];
    f.depth = render_depth(bench.world, path[i], config.intrinsics, config.noise, opt);
    f.intrinsics = config.intrinsics;
    f.odometry = path[i];
    f.ground_truth = path[i];
  });
  for (std::size_t i = 0; i < path.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "m%04zu", i);
    bench.mapping_ids[i] = id;
  }
  bench.built = build_map(bench.mapping, config.keyframes, config.features);

  std::vector<Pose> query_poses;
  for (std::size_t l = 0; l < config.query_scales.size(); ++l) {
    const double s = config.query_scales[l];
    const auto fine = ellipse_trajectory(s * config.loop_a, s * config.loop_b,
                                         config.query_phase * static_cast<double>(l + 1), 0.01, mount);
    for (const std::size_t i : spaced_subset(fine, config.query_spacing, config.query_spacing_deg)) {
      query_poses.push_back(fine[i]);
    }
  }
  bench.queries.resize(query_poses.size());
  parallel_for(query_poses.size(), 0, [&](std::size_t i) {
    RenderOptions opt;
    opt.dropout = config.dropout;
    opt.stream = 1000000 + i;
    QueryFrame& q = bench.queries[i];
    char id[32];
    std::snprintf(id, sizeof id, "q%04zu", i);
    q.frame_id = id;
    q.depth = render_depth(bench.world, query_poses[i], config.intrinsics, config.noise, opt);
    q.intrinsics = config.intrinsics;
    q.ground_truth = query_poses[i];
  });
  return bench;
}

void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "mapping", ec);
  fs::create_directories(dir / "queries", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const CameraIntrinsics k = bench.mapping.empty() ? CameraIntrinsics{} : bench.mapping.front().intrinsics;
  write_intrinsics(dir / "intrinsics.json", k);

  std::vector<FrameRecord> mapping;
  for (std::size_t i = 0; i < bench.mapping.size(); ++i) {
    const fs::path rel = fs::path("mapping") / (bench.mapping_ids[i] + ".pgm");
    write_depth_pgm(dir / rel, bench.mapping[i].depth);
    mapping.push_back({bench.mapping_ids[i], rel, "intrinsics.json", bench.mapping[i].odometry,
                       bench.mapping[i].ground_truth});
  }
  write_manifest(dir / "mapping.jsonl", mapping);

  std::vector<FrameRecord> queries;
  for (const QueryFrame& q : bench.queries) {
    const fs::path rel = fs::path("queries") / (q.frame_id + ".pgm");
    write_depth_pgm(dir / rel, q.depth);
    queries.push_back({q.frame_id, rel, "intrinsics.json", std::nullopt, q.ground_truth});
  }
  write_manifest(dir / "queries.jsonl", queries);
  save_map(bench.built.map, dir / "map.json");
}

}  // namespace planeloc
