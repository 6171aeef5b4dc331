#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "planeloc/features.hpp"
#include "planeloc/segmentation.hpp"

namespace planeloc {

inline constexpr std::string_view kMapFormat = "planeloc-map/1";

/// One location of the topological map: features in the model frame S_M,i.
/// reference_pose places S_M,i in the dataset world frame and is used for
/// evaluation only.
struct LocalModel {
  int id = 0;
  std::vector<SurfaceSegmentFeature> features;
  Pose reference_pose;
};

struct MapLink {
  int a = 0;
  int b = 0;
  Pose relative;  ///< pose of model b in model a
};

struct TopologicalMap {
  std::vector<LocalModel> models;
  std::vector<MapLink> links;

  /// Throws NotFound.
  const LocalModel& model(int id) const;
  bool contains(int id) const;
  /// Unique ids, non-empty feature lists, link endpoints exist. Throws InvalidArgument.
  void validate() const;
};

struct KeyframePolicy {
  double d_min = 0.5;          ///< meters
  double theta_min_deg = 15.0;  ///< degrees

  void validate() const;
  /// True when `candidate` is far enough from `latest` (translation or
  /// geodesic rotation angle) to become a new local model.
  bool is_keyframe(const Pose& latest, const Pose& candidate) const;
};

/// Noise model and segmentation settings shared by map building and localization.
struct FeatureConfig {
  NoiseModel noise;
  SegmentationParams segmentation;
};

struct MapFrame {
  DepthImage depth;
  CameraIntrinsics intrinsics;
  Pose odometry;
  std::optional<Pose> ground_truth;
};

struct BuildMapResult {
  TopologicalMap map;
  std::vector<std::size_t> model_frames;    ///< frame index of every model
  std::vector<std::size_t> skipped_frames;  ///< selected but featureless
};

/// Keyframe selection against the latest added model; consecutive models are
/// linked by their relative odometry. Featureless keyframes are skipped with
/// a warning on std::clog.
BuildMapResult build_map(std::span<const MapFrame> frames, const KeyframePolicy& policy, const FeatureConfig& config);

/// Same policy over odometry alone; `features_of(i)` extracts frame i's features
/// (in its camera frame) and `reference_of(i)` its reference pose.
BuildMapResult build_map(std::span<const Pose> odometry, const KeyframePolicy& policy,
                         const std::function<std::vector<SurfaceSegmentFeature>(std::size_t)>& features_of,
                         const std::function<Pose(std::size_t)>& reference_of);

void save_map(const TopologicalMap& map, const std::filesystem::path& path);
TopologicalMap load_map(const std::filesystem::path& path);
std::string map_to_json(const TopologicalMap& map);
/// `source` names the input in error messages.
TopologicalMap map_from_json(std::string_view text, std::string_view source = "<map>");

/// Models within `radius` link hops of `id`, excluding `id`, ordered by hop
/// count then id. Throws NotFound for an unknown id.
std::vector<std::reference_wrapper<const LocalModel>> neighbors(const TopologicalMap& map, int id, int radius);

}  // namespace planeloc
