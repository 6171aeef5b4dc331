#include "planeloc/dataset.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "planeloc/error.hpp"

namespace planeloc {

using detail::FieldReader;
using detail::json;

std::vector<FrameRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<FrameRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const json doc = detail::parse_document(line, where);
    const FieldReader r(doc, where);
    FrameRecord rec;
    rec.frame_id = r.at("frame_id").string();
    rec.depth = base / r.at("depth").string();
    rec.intrinsics = base / r.at("intrinsics").string();
    if (r.has("odometry")) rec.odometry = r.at("odometry").pose();
    if (r.has("ground_truth")) rec.ground_truth = r.at("ground_truth").pose();
    out.push_back(std::move(rec));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<FrameRecord>& records) {
  std::ostringstream os;
  for (const auto& rec : records) {
    json j = {{"frame_id", rec.frame_id}, {"depth", rec.depth.generic_string()},
              {"intrinsics", rec.intrinsics.generic_string()}};
    if (rec.odometry) j["odometry"] = detail::pose_to_json(*rec.odometry);
    if (rec.ground_truth) j["ground_truth"] = detail::pose_to_json(*rec.ground_truth);
    os << j.dump() << "\n";
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << os.str();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MapFrame> load_map_frames(const std::vector<FrameRecord>& records) {
  std::vector<MapFrame> frames;
  frames.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.odometry) throw ParseError("manifest record " + rec.frame_id + " has no odometry");
    MapFrame f;
    f.depth = read_depth_pgm(rec.depth);
    f.intrinsics = read_intrinsics(rec.intrinsics);
    f.odometry = *rec.odometry;
    f.ground_truth = rec.ground_truth;
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace planeloc
