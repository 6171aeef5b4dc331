// planeloc command-line front end.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>

#include "planeloc/dataset.hpp"
#include "planeloc/error.hpp"
#include "planeloc/evaluation.hpp"
#include "planeloc/features.hpp"
#include "planeloc/map.hpp"
#include "planeloc/registration.hpp"
#include "planeloc/segmentation.hpp"
#include "planeloc/synthetic.hpp"

using namespace planeloc;
using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int cmd_segment(const std::string& depth_path, const std::string& intrinsics_path, const std::string& dump) {
  const DepthImage img = read_depth_pgm(depth_path);
  const CameraIntrinsics k = read_intrinsics(intrinsics_path);
  const NoiseModel nm;
  const SegmentationParams params;
  const OrganizedCloud cloud = backproject(img, k);
  const SegmentLabeling labels = segment_depth_image(img, k, nm, params);
  json segs = json::array();
  for (std::size_t s = 0; s < labels.segments.size(); ++s) {
    json entry = {{"id", s}, {"pixel_count", labels.segments[s].size()}};
    try {
      const auto f = build_feature(segment_points(labels, cloud, s), k, nm);
      entry["normal"] = vec_json(f.normal());
      entry["centroid"] = vec_json(f.centroid);
      entry["lambda"] = vec_json(f.lambda);
      entry["sigma_q"] = vec_json(f.sigma_q);
    } catch (const DegenerateInput&) {
    }
    segs.push_back(entry);
  }
  if (!dump.empty()) write_label_pgm(dump, labels);
  std::cout << json{{"width", labels.width}, {"height", labels.height}, {"segments", segs}}.dump(1) << "\n";
  return 0;
}

int cmd_build_map(const std::string& manifest, const std::string& out, double dmin, double thetamin) {
  KeyframePolicy policy;
  policy.d_min = dmin;
  policy.theta_min_deg = thetamin;
  const auto frames = load_map_frames(read_manifest(manifest));
  const BuildMapResult r = build_map(frames, policy, FeatureConfig{});
  save_map(r.map, out);
  std::cerr << "planeloc: " << r.map.models.size() << " local models from " << frames.size() << " frames\n";
  return 0;
}

int cmd_localize(const std::string& depth_path, const std::string& map_path, std::size_t top,
                 const std::string& intrinsics_path, double mount_height) {
  const DepthImage img = read_depth_pgm(depth_path);
  const CameraIntrinsics k = intrinsics_path.empty() ? CameraIntrinsics{} : read_intrinsics(intrinsics_path);
  const TopologicalMap map = load_map(map_path);
  const FeatureConfig fc;
  const auto scene = detect_features(img, k, fc.noise, fc.segmentation);
  auto hyps = localize(scene, map, MatchPrior{}, default_camera_mount(mount_height));
  if (hyps.size() > top) hyps.resize(top);
  std::cout << hypotheses_to_json(hyps);
  return 0;
}

int cmd_synth(std::uint64_t seed, const std::string& out) {
  BenchmarkConfig config;
  config.seed = seed;
  const SyntheticBenchmark bench = synth_benchmark(config);
  write_benchmark(bench, out);
  std::cerr << "planeloc: " << bench.built.map.models.size() << " local models, " << bench.queries.size()
            << " queries\n";
  return 0;
}

int cmd_evaluate(const std::string& manifest, const std::string& map_path, const std::string& out,
                 double mount_height) {
  const TopologicalMap map = load_map(map_path);
  EvalConfig config;
  config.camera_mount = default_camera_mount(mount_height);
  const EvalResult result = evaluate(read_manifest(manifest), map, config);
  write_report(out, result, config);
  const EvalSummary& s = result.summary;
  std::cerr << "planeloc: " << s.correct_hypothesis << "/" << s.total << " frames with a correct hypothesis\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global localization against a map of planar surface segments"};
  app.require_subcommand(1);

  std::string depth, intrinsics, dump, manifest, out, map_path;
  double dmin = 0.5, thetamin = 15.0, mount_height = 0.6;
  std::size_t top = 10;
  std::uint64_t seed = 1;

  auto* seg = app.add_subcommand("segment", "Segment a depth image into planar segments");
  seg->add_option("depth", depth, "16-bit PGM depth image (mm)")->required();
  seg->add_option("--intrinsics", intrinsics, "intrinsics JSON")->required();
  seg->add_option("--dump-labels", dump, "write an 8-bit label image");

  auto* bm = app.add_subcommand("build-map", "Build a topological map from a mapping traverse");
  bm->add_option("manifest", manifest, "JSONL manifest")->required();
  bm->add_option("-o", out, "output map JSON")->required();
  bm->add_option("--dmin", dmin, "keyframe distance, m");
  bm->add_option("--thetamin", thetamin, "keyframe rotation, degrees");

  auto* loc = app.add_subcommand("localize", "Rank pose hypotheses for one depth image");
  loc->add_option("depth", depth, "16-bit PGM depth image (mm)")->required();
  loc->add_option("--map", map_path, "map JSON")->required();
  loc->add_option("--top", top, "number of hypotheses to print");
  loc->add_option("--intrinsics", intrinsics, "intrinsics JSON (default 320x240, f = 262.5)");
  loc->add_option("--mount-height", mount_height, "camera height above the robot origin, m");

  auto* syn = app.add_subcommand("synth", "Generate a synthetic benchmark");
  syn->add_option("--seed", seed, "world seed");
  syn->add_option("-o", out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Evaluate localization over a query manifest");
  ev->add_option("manifest", manifest, "JSONL manifest with ground truth")->required();
  ev->add_option("--map", map_path, "map JSON")->required();
  ev->add_option("-o", out, "report directory")->required();
  ev->add_option("--mount-height", mount_height, "camera height above the robot origin, m");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*seg) return cmd_segment(depth, intrinsics, dump);
    if (*bm) return cmd_build_map(manifest, out, dmin, thetamin);
    if (*loc) return cmd_localize(depth, map_path, top, intrinsics, mount_height);
    if (*syn) return cmd_synth(seed, out);
    if (*ev) return cmd_evaluate(manifest, map_path, out, mount_height);
  } catch (const InvalidArgument& e) {
    std::cerr << "planeloc: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "planeloc: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
