#include "planeloc/map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "planeloc/error.hpp"

namespace planeloc {

using detail::FieldReader;
using detail::json;

const LocalModel& TopologicalMap::model(int id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw NotFound("no local model with id " + std::to_string(id));
}

bool TopologicalMap::contains(int id) const {
  return std::any_of(models.begin(), models.end(), [id](const LocalModel& m) { return m.id == id; });
}

void TopologicalMap::validate() const {
  std::set<int> ids;
  for (const auto& m : models) {
    if (!ids.insert(m.id).second) throw InvalidArgument("duplicate local model id " + std::to_string(m.id));
    if (m.features.empty()) throw InvalidArgument("local model " + std::to_string(m.id) + " has no features");
  }
  for (const auto& l : links) {
    if (!ids.count(l.a) || !ids.count(l.b)) {
      throw InvalidArgument("link " + std::to_string(l.a) + "-" + std::to_string(l.b) + " names a missing model");
    }
  }
}

void KeyframePolicy::validate() const {
  if (!(d_min > 0.0) || !(theta_min_deg > 0.0)) throw InvalidArgument("keyframe thresholds must be positive");
}

bool KeyframePolicy::is_keyframe(const Pose& latest, const Pose& candidate) const {
  const double dist = (candidate.t - latest.t).norm();
  const double angle = rotation_angle_between(latest.rotation(), candidate.rotation()) * 180.0 / std::numbers::pi;
  return dist >= d_min || angle >= theta_min_deg;
}

BuildMapResult build_map(std::span<const Pose> odometry, const KeyframePolicy& policy,
                         const std::function<std::vector<SurfaceSegmentFeature>(std::size_t)>& features_of,
                         const std::function<Pose(std::size_t)>& reference_of) {
  policy.validate();
  if (odometry.empty()) throw InvalidArgument("build_map: empty frame sequence");
  BuildMapResult out;
  std::optional<std::size_t> latest;
  for (std::size_t i = 0; i < odometry.size(); ++i) {
    if (latest && !policy.is_keyframe(odometry[*latest], odometry[i])) continue;
    std::vector<SurfaceSegmentFeature> feats = features_of(i);
    if (feats.empty()) {
      std::clog << "planeloc: frame " << i << " has no planar features; not added to the map\n";
      out.skipped_frames.push_back(i);
      continue;
    }
    LocalModel m;
    m.id = static_cast<int>(out.map.models.size());
    m.features = std::move(feats);
    m.reference_pose = reference_of(i);
    if (latest) {
      out.map.links.push_back({m.id - 1, m.id, relative(odometry[*latest], odometry[i])});
    }
    out.map.models.push_back(std::move(m));
    out.model_frames.push_back(i);
    latest = i;
  }
  return out;
}

BuildMapResult build_map(std::span<const MapFrame> frames, const KeyframePolicy& policy, const FeatureConfig& config) {
  std::vector<Pose> odometry;
  odometry.reserve(frames.size());
  for (const auto& f : frames) odometry.push_back(f.odometry);
  return build_map(
      odometry, policy,
      [&](std::size_t i) {
        return detect_features(frames[i].depth, frames[i].intrinsics, config.noise, config.segmentation);
      },
      [&](std::size_t i) { return frames[i].ground_truth.value_or(frames[i].odometry); });
}

// --- persistence ------------------------------------------------------------

std::string map_to_json(const TopologicalMap& map) {
  json models = json::array();
  for (const auto& m : map.models) {
    json feats = json::array();
    for (const auto& f : m.features) {
      feats.push_back({{"pose", detail::pose_to_json(f.pose())},
                       {"sigma_q", detail::to_json_array(f.sigma_q)},
                       {"lambda", detail::to_json_array(f.lambda)},
                       {"point_count", f.point_count}});
    }
    models.push_back({{"id", m.id}, {"reference_pose", detail::pose_to_json(m.reference_pose)}, {"features", feats}});
  }
  json links = json::array();
  for (const auto& l : map.links) {
    links.push_back({{"a", l.a}, {"b", l.b}, {"relative", detail::pose_to_json(l.relative)}});
  }
  const json doc = {{"format", kMapFormat}, {"models", models}, {"links", links}};
  // nlohmann writes doubles in shortest round-trip form.
  return doc.dump(1) + "\n";
}

TopologicalMap map_from_json(std::string_view text, std::string_view source) {
  const json doc = detail::parse_document(text, source);
  const FieldReader root(doc, std::string(source));
  const std::string format = root.at("format").string();
  if (format != kMapFormat) {
    throw VersionError(std::string(source) + ": unsupported map format '" + format + "', expected '" +
                       std::string(kMapFormat) + "'");
  }
  TopologicalMap map;
  const FieldReader models = root.at("models");
  if (models.array_size() == 0) models.fail("map has no local models");
  for (std::size_t i = 0; i < models.array_size(); ++i) {
    const FieldReader mr = models.at(i);
    LocalModel m;
    m.id = static_cast<int>(mr.at("id").integer());
    m.reference_pose = mr.at("reference_pose").pose();
    const FieldReader feats = mr.at("features");
    if (feats.array_size() == 0) feats.fail("local model has no features");
    for (std::size_t k = 0; k < feats.array_size(); ++k) {
      const FieldReader fr = feats.at(k);
      SurfaceSegmentFeature f;
      const FieldReader pose_field = fr.at("pose");
      const Pose p = pose_field.pose();
      f.rotation = p.rotation();
      f.centroid = p.t;
      f.sigma_q = fr.at("sigma_q").vector<3>();
      if (!(f.sigma_q.array() > 0.0).all()) fr.at("sigma_q").fail("variances must be positive");
      f.lambda = fr.at("lambda").vector<2>();
      if (!(f.lambda[0] >= f.lambda[1] && f.lambda[1] >= 0.0)) fr.at("lambda").fail("expected lambda1 >= lambda2 >= 0");
      const long long n = fr.at("point_count").integer();
      if (n < 0) fr.at("point_count").fail("negative point count");
      f.point_count = static_cast<std::size_t>(n);
      m.features.push_back(f);
    }
    map.models.push_back(std::move(m));
  }
  const FieldReader links = root.at("links");
  for (std::size_t i = 0; i < links.array_size(); ++i) {
    const FieldReader lr = links.at(i);
    map.links.push_back({static_cast<int>(lr.at("a").integer()), static_cast<int>(lr.at("b").integer()),
                         lr.at("relative").pose()});
  }
  try {
    map.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
  return map;
}

void save_map(const TopologicalMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << map_to_json(map);
  if (!out) throw IoError("failed writing " + path.string());
}

TopologicalMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return map_from_json(ss.str(), path.string());
}

std::vector<std::reference_wrapper<const LocalModel>> neighbors(const TopologicalMap& map, int id, int radius) {
  if (!map.contains(id)) throw NotFound("no local model with id " + std::to_string(id));
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& l : map.links) {
    adj[l.a].push_back(l.b);
    adj[l.b].push_back(l.a);
  }
  std::unordered_map<int, int> hops{{id, 0}};
  std::vector<int> frontier{id};
  std::vector<std::pair<int, int>> found;  // (hop, id)
  for (int h = 1; h <= radius && !frontier.empty(); ++h) {
    std::vector<int> next;
    for (const int v : frontier) {
      for (const int n : adj[v]) {
        if (hops.count(n)) continue;
        hops[n] = h;
        next.push_back(n);
        found.emplace_back(h, n);
      }
    }
    frontier = std::move(next);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::reference_wrapper<const LocalModel>> out;
  for (const auto& [h, n] : found) out.emplace_back(map.model(n));
  return out;
}

}  // namespace planeloc
