#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "planeloc/geometry.hpp"
#include "planeloc/map.hpp"
#include "planeloc/sensor_model.hpp"

namespace planeloc {

/// One manifest line:
/// {"frame_id", "depth", "intrinsics", "odometry": {phi, t}, "ground_truth": {phi, t}}
/// with paths relative to the manifest's directory. odometry and
/// ground_truth are optional.
struct FrameRecord {
  std::string frame_id;
  std::filesystem::path depth;
  std::filesystem::path intrinsics;
  std::optional<Pose> odometry;
  std::optional<Pose> ground_truth;
};

/// Paths in the result are resolved against the manifest's directory.
/// Throws IoError (unreadable file) or ParseError naming the line.
std::vector<FrameRecord> read_manifest(const std::filesystem::path& path);

/// Records are written as given; paths should already be relative.
void write_manifest(const std::filesystem::path& path, const std::vector<FrameRecord>& records);

/// Loads every record's depth image and intrinsics; a record without
/// odometry is rejected.
std::vector<MapFrame> load_map_frames(const std::vector<FrameRecord>& records);

}  // namespace planeloc
