#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "planeloc/error.hpp"
#include "planeloc/map.hpp"
#include "support.hpp"

using namespace planeloc;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "planeloc_unit";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<SurfaceSegmentFeature> one_feature(std::size_t) {
  return {testing::plane_feature(Mat3::Identity(), Vec3(0, 0, 2), Vec2(0.1, 0.05), 1e-6)};
}

std::vector<std::size_t> keyframes_of(const std::vector<Pose>& odo, const KeyframePolicy& policy) {
  const auto r = build_map(odo, policy, one_feature, [&](std::size_t i) { return odo[i]; });
  return r.model_frames;
}

TopologicalMap random_map(int n_models, std::mt19937_64& rng) {
  TopologicalMap m;
  for (int i = 0; i < n_models; ++i) {
    LocalModel lm;
    lm.id = i;
    lm.reference_pose = testing::random_pose(rng, 3.0, 50.0);
    const int nf = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < nf; ++k) {
      SurfaceSegmentFeature f = testing::random_feature(rng);
      f.rotation = rotation_from_vector(vector_from_rotation(f.rotation));
      f.point_count = static_cast<std::size_t>(rng() % 50000);
      lm.features.push_back(f);
    }
    m.models.push_back(std::move(lm));
    if (i > 0) m.links.push_back({i - 1, i, testing::random_pose(rng)});
  }
  return m;
}

/// Map with models 1..n on a chain plus explicit extra links.
TopologicalMap chain_map(int n) {
  TopologicalMap m;
  for (int i = 1; i <= n; ++i) {
    LocalModel lm;
    lm.id = i;
    lm.features = one_feature(0);
    m.models.push_back(lm);
    if (i > 1) m.links.push_back({i - 1, i, Pose()});
  }
  return m;
}

}  // namespace

TEST_CASE("keyframe policy simulation") {
  const KeyframePolicy policy;
  std::vector<Pose> line;
  for (int i = 0; i < 11; ++i) line.push_back(Pose(Vec3::Zero(), Vec3(0.3 * i, 0, 0)));
  CHECK(keyframes_of(line, policy) == std::vector<std::size_t>{0, 2, 4, 6, 8, 10});

  CHECK(keyframes_of({Pose()}, policy) == std::vector<std::size_t>{0});

  std::vector<Pose> spin;
  for (int i = 0; i < 10; ++i) spin.push_back(Pose(Vec3(0, 0, i * 16.0 * std::numbers::pi / 180.0), Vec3::Zero()));
  CHECK(keyframes_of(spin, policy).size() == 10);
}

TEST_CASE("consecutive models respect the keyframe thresholds") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<Pose> odo{Pose()};
  for (int i = 1; i < 300; ++i) {
    const Pose step(Vec3(0, 0, g(rng)), Vec3(0.1 + g(rng), g(rng), 0));
    odo.push_back(compose(odo.back(), step));
  }
  const KeyframePolicy policy;
  const auto r = build_map(odo, policy, one_feature, [&](std::size_t i) { return odo[i]; });
  REQUIRE(r.map.models.size() > 5);
  CHECK(r.map.links.size() == r.map.models.size() - 1);
  for (std::size_t m = 1; m < r.model_frames.size(); ++m) {
    CHECK(policy.is_keyframe(odo[r.model_frames[m - 1]], odo[r.model_frames[m]]));
    // and no frame in between qualified
    for (std::size_t f = r.model_frames[m - 1] + 1; f < r.model_frames[m]; ++f) {
      CHECK_FALSE(policy.is_keyframe(odo[r.model_frames[m - 1]], odo[f]));
    }
    const Pose rel = r.map.links[m - 1].relative;
    const Pose expect = relative(odo[r.model_frames[m - 1]], odo[r.model_frames[m]]);
    CHECK((rel.t - expect.t).norm() < 1e-12);
  }
}

TEST_CASE("featureless keyframes are skipped") {
  std::vector<Pose> line;
  for (int i = 0; i < 5; ++i) line.push_back(Pose(Vec3::Zero(), Vec3(0.6 * i, 0, 0)));
  const auto r = build_map(
      line, KeyframePolicy{},
      [](std::size_t i) { return i == 2 ? std::vector<SurfaceSegmentFeature>{} : one_feature(i); },
      [&](std::size_t i) { return line[i]; });
  CHECK(r.model_frames == std::vector<std::size_t>{0, 1, 3, 4});
  CHECK(r.skipped_frames == std::vector<std::size_t>{2});
}

TEST_CASE("map persistence is lossless") {
  std::mt19937_64 rng(32);
  const TopologicalMap m = random_map(142, rng);
  const fs::path p = temp_path("map142.json");
  save_map(m, p);
  const TopologicalMap r = load_map(p);
  REQUIRE(r.models.size() == 142);
  REQUIRE(r.links.size() == m.links.size());
  for (std::size_t i = 0; i < m.models.size(); ++i) {
    const auto& a = m.models[i];
    const auto& b = r.models[i];
    CHECK(a.id == b.id);
    CHECK(a.reference_pose.phi == b.reference_pose.phi);
    CHECK(a.reference_pose.t == b.reference_pose.t);
    REQUIRE(a.features.size() == b.features.size());
    for (std::size_t k = 0; k < a.features.size(); ++k) {
      CHECK((a.features[k].rotation - b.features[k].rotation).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(a.features[k].centroid == b.features[k].centroid);
      CHECK(a.features[k].sigma_q == b.features[k].sigma_q);
      CHECK(a.features[k].lambda == b.features[k].lambda);
      CHECK(a.features[k].point_count == b.features[k].point_count);
    }
  }
  for (std::size_t i = 0; i < m.links.size(); ++i) {
    CHECK(r.links[i].relative.phi == m.links[i].relative.phi);
    CHECK(r.links[i].relative.t == m.links[i].relative.t);
  }
}

TEST_CASE("map parse errors") {
  CHECK_THROWS_AS(map_from_json(R"({"format": "planeloc-map/1", "models": [], "links": []})"), ParseError);
  CHECK_THROWS_AS(map_from_json(R"({"format": "planeloc-map/9", "models": [], "links": []})"), VersionError);
  std::mt19937_64 rng(33);
  const std::string text = map_to_json(random_map(3, rng));
  CHECK_THROWS_AS(map_from_json(text.substr(0, text.size() / 2)), ParseError);
  try {
    map_from_json(R"({"format": "planeloc-map/1", "links": [],
      "models": [{"id": 0, "reference_pose": {"phi": [0,0,0], "t": [0,0]}, "features": []}]})");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("reference_pose.t") != std::string::npos);
  }
  CHECK_THROWS_AS(load_map(temp_path("no_such_map.json")), IoError);
}

TEST_CASE("neighbors") {
  const TopologicalMap chain = chain_map(3);
  CHECK(neighbors(chain, 2, 0).empty());
  const auto n1 = neighbors(chain, 2, 1);
  REQUIRE(n1.size() == 2);
  CHECK(n1[0].get().id == 1);
  CHECK(n1[1].get().id == 3);
  CHECK_THROWS_AS(neighbors(chain, 9, 1), NotFound);
  CHECK_THROWS_AS(chain.model(9), NotFound);

  // BFS oracle on a random graph
  std::mt19937_64 rng(34);
  TopologicalMap g = chain_map(30);
  g.links.clear();
  for (int i = 0; i < 60; ++i) {
    const int a = 1 + static_cast<int>(rng() % 30), b = 1 + static_cast<int>(rng() % 30);
    if (a != b) g.links.push_back({a, b, Pose()});
  }
  for (int i = 1; i < 30; ++i) g.links.push_back({i, i + 1, Pose()});
  std::vector<std::vector<int>> adj(31);
  for (const auto& l : g.links) {
    adj[static_cast<std::size_t>(l.a)].push_back(l.b);
    adj[static_cast<std::size_t>(l.b)].push_back(l.a);
  }
  for (int start = 1; start <= 30; start += 7) {
    std::vector<int> hop(31, -1);
    hop[static_cast<std::size_t>(start)] = 0;
    std::vector<int> q{start};
    for (std::size_t h = 0; h < q.size(); ++h) {
      for (const int n : adj[static_cast<std::size_t>(q[h])]) {
        if (hop[static_cast<std::size_t>(n)] < 0) {
          hop[static_cast<std::size_t>(n)] = hop[static_cast<std::size_t>(q[h])] + 1;
          q.push_back(n);
        }
      }
    }
    for (int radius = 1; radius <= 30; radius += 3) {
      std::vector<std::pair<int, int>> expect;
      for (int i = 1; i <= 30; ++i) {
        if (i != start && hop[static_cast<std::size_t>(i)] > 0 && hop[static_cast<std::size_t>(i)] <= radius) {
          expect.push_back({hop[static_cast<std::size_t>(i)], i});
        }
      }
      std::sort(expect.begin(), expect.end());
      const auto got = neighbors(g, start, radius);
      REQUIRE(got.size() == expect.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].get().id == expect[i].second);
    }
    CHECK(neighbors(g, start, 30).size() == 29);
  }
}

TEST_CASE("map validation") {
  TopologicalMap m = chain_map(2);
  m.models[1].id = 1;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m = chain_map(2);
  m.links.push_back({1, 7, Pose()});
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  KeyframePolicy p;
  p.d_min = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}
