#include "planeloc/segmentation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <unordered_map>

#include "planeloc/delaunay.hpp"
#include "planeloc/error.hpp"

namespace planeloc {

void SegmentationParams::validate() const {
  if (!(tau_split > 0.0) || !(tau_merge > 0.0) || min_points == 0 || !(depth_jump > 0.0) ||
      initial_step <= 0 || !(noise_sigmas >= 0.0)) {
    throw InvalidArgument("segmentation parameters must be strictly positive");
  }
}

namespace {

using Point2 = Delaunay2D::Point;

/// Per-pixel sensor noise, pre-decomposed so the variance along any unit
/// normal n is lateral + (axial - lateral) * (n . ray)^2.
struct PixelNoise {
  Vec3 ray = Vec3::UnitZ();
  double axial = 0.0;    // variance
  double lateral = 0.0;  // variance

  double along(const Vec3& n) const {
    const double c = n.dot(ray);
    return lateral + (axial - lateral) * c * c;
  }
  Mat3 covariance() const {
    const Mat3 rr = ray * ray.transpose();
    return axial * rr + lateral * (Mat3::Identity() - rr);
  }
};

std::vector<PixelNoise> pixel_noise(const OrganizedCloud& cloud, const NoiseModel& nm, double focal) {
  std::vector<PixelNoise> out(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (!p) continue;
    const double z = p->z();
    const double a = nm.k_z * z * z;
    const double l = nm.sigma_px * z / focal;
    out[i] = {p->normalized(), a * a, l * l};
  }
  return out;
}

/// Calls fn(pixel_index) for every pixel inside or on the ccw triangle.
template <typename Fn>
void rasterize(Point2 a, Point2 b, Point2 c, int width, int height, Fn&& fn) {
  const std::int64_t x0 = std::max<std::int64_t>(0, std::min({a.x, b.x, c.x}));
  const std::int64_t x1 = std::min<std::int64_t>(width - 1, std::max({a.x, b.x, c.x}));
  const std::int64_t y0 = std::max<std::int64_t>(0, std::min({a.y, b.y, c.y}));
  const std::int64_t y1 = std::min<std::int64_t>(height - 1, std::max({a.y, b.y, c.y}));
  for (std::int64_t y = y0; y <= y1; ++y) {
    for (std::int64_t x = x0; x <= x1; ++x) {
      const Point2 q{x, y};
      if (Delaunay2D::orient(a, b, q) >= 0 && Delaunay2D::orient(b, c, q) >= 0 &&
          Delaunay2D::orient(c, a, q) >= 0) {
        fn(static_cast<int>(y * width + x));
      }
    }
  }
}

struct SplitContext {
  const OrganizedCloud& cloud;
  const SegmentationParams& params;
  const std::vector<PixelNoise>& noise;
};

/// Pixel of maximum deviation from the plane through the triangle's
/// vertices among those outside the split tolerance, or -1.
int worst_point(const SplitContext& ctx, const Delaunay2D& dt, int tri, const std::vector<int>& vertex_of_pixel) {
  const auto& t = dt.triangle(tri);
  const auto& pts = dt.points();
  const int w = ctx.cloud.width;
  const Point2 a = pts[static_cast<std::size_t>(t.v[0])];
  const Point2 b = pts[static_cast<std::size_t>(t.v[1])];
  const Point2 c = pts[static_cast<std::size_t>(t.v[2])];
  const Vec3& pa = *ctx.cloud.points[static_cast<std::size_t>(a.y * w + a.x)];
  const Vec3& pb = *ctx.cloud.points[static_cast<std::size_t>(b.y * w + b.x)];
  const Vec3& pc = *ctx.cloud.points[static_cast<std::size_t>(c.y * w + c.x)];
  Vec3 n = (pb - pa).cross(pc - pa);
  const double len = n.norm();
  if (!(len > 0.0)) return -1;
  n /= len;

  int best = -1;
  double best_d = 0.0;
  rasterize(a, b, c, w, ctx.cloud.height, [&](int pix) {
    const auto& p = ctx.cloud.points[static_cast<std::size_t>(pix)];
    if (!p || vertex_of_pixel[static_cast<std::size_t>(pix)] >= 0) return;
    const double d = std::abs(n.dot(*p - pa));
    const double tol =
        ctx.params.tau_split + ctx.params.noise_sigmas * std::sqrt(ctx.noise[static_cast<std::size_t>(pix)].along(n));
    if (d > tol && d > best_d) {
      best_d = d;
      best = pix;
    }
  });
  return best;
}

/// Nearest valid pixel to (x, y) inside the lattice cell window, scan order on ties.
int lattice_vertex(const OrganizedCloud& cloud, int x, int y, int half) {
  const int w = cloud.width;
  if (cloud.points[static_cast<std::size_t>(y * w + x)]) return y * w + x;
  int best = -1;
  int best_d = 0;
  for (int yy = std::max(0, y - half); yy <= std::min(cloud.height - 1, y + half); ++yy) {
    for (int xx = std::max(0, x - half); xx <= std::min(w - 1, x + half); ++xx) {
      if (!cloud.points[static_cast<std::size_t>(yy * w + xx)]) continue;
      const int d = (xx - x) * (xx - x) + (yy - y) * (yy - y);
      if (best < 0 || d < best_d) {
        best = yy * w + xx;
        best_d = d;
      }
    }
  }
  return best;
}

std::vector<int> lattice_coords(int extent, int step) {
  std::vector<int> out;
  for (int v = 0; v < extent; v += step) out.push_back(v);
  if (out.back() != extent - 1) out.push_back(extent - 1);
  return out;
}

/// True when the depth profile along the edge jumps by more than the
/// allowed step between consecutive valid pixels (Bresenham traversal).
bool edge_discontinuous(const OrganizedCloud& cloud, Point2 a, Point2 b, double jump) {
  std::int64_t x = a.x, y = a.y;
  const std::int64_t dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const std::int64_t sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  std::int64_t err = dx + dy;
  double prev_z = -1.0;
  int gap = 0;
  while (true) {
    const auto& p = cloud.points[static_cast<std::size_t>(y * cloud.width + x)];
    if (p) {
      const double z = p->z();
      if (prev_z > 0.0) {
        const double zm = 0.5 * (z + prev_z);
        const double allowed = jump * std::max(1.0, zm * zm) * gap;
        if (std::abs(z - prev_z) > allowed) return true;
      }
      prev_z = z;
      gap = 0;
    }
    if (x == b.x && y == b.y) break;
    ++gap;
    const std::int64_t e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return false;
}

}  // namespace

TriangleMesh split_triangulate(const OrganizedCloud& cloud, const SegmentationParams& params,
                               const NoiseModel& nm, double focal) {
  params.validate();
  nm.validate();
  if (cloud.width <= 0 || cloud.height <= 0 ||
      cloud.points.size() != static_cast<std::size_t>(cloud.width) * cloud.height) {
    throw InvalidArgument("split_triangulate: malformed organized cloud");
  }
  TriangleMesh mesh;
  mesh.width = cloud.width;
  mesh.height = cloud.height;
  mesh.pixel_face.assign(cloud.points.size(), -1);
  if (cloud.valid_count() < 3) return mesh;

  const std::vector<PixelNoise> noise = pixel_noise(cloud, nm, focal);
  const SplitContext ctx{cloud, params, noise};
  const int w = cloud.width;

  Delaunay2D dt(std::max(cloud.width, cloud.height));
  std::vector<int> vertex_of_pixel(cloud.points.size(), -1);
  auto add_vertex = [&](int pix, int hint, std::vector<int>* created) {
    if (vertex_of_pixel[static_cast<std::size_t>(pix)] >= 0) return;
    const int vid = dt.insert(Point2{pix % w, pix / w}, hint, created);
    vertex_of_pixel[static_cast<std::size_t>(pix)] = vid;
  };

  // Coarse lattice, serpentine order for short location walks.
  const int step = params.initial_step;
  const std::vector<int> xs = lattice_coords(cloud.width, step);
  const std::vector<int> ys = lattice_coords(cloud.height, step);
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const std::size_t ix = (iy % 2 == 0) ? k : xs.size() - 1 - k;
      const int pix = lattice_vertex(cloud, xs[ix], ys[iy], step / 2);
      if (pix >= 0) add_vertex(pix, -1, nullptr);
    }
  }
  mesh.initial_vertices = dt.points().size() - Delaunay2D::kOuterVertices;
  if (mesh.initial_vertices < 3) return mesh;

  std::vector<int> pending;
  for (int i = 0; i < static_cast<int>(dt.triangles().size()); ++i) {
    if (dt.triangle(i).alive) pending.push_back(i);
  }
  while (!pending.empty()) {
    std::vector<std::pair<int, int>> candidates;  // (pixel, source triangle)
    for (const int tri : pending) {
      if (!dt.triangle(tri).alive || dt.is_outer(tri)) continue;
      const int pix = worst_point(ctx, dt, tri, vertex_of_pixel);
      if (pix >= 0) candidates.emplace_back(pix, tri);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                 [](const auto& l, const auto& r) { return l.first == r.first; }),
                     candidates.end());
    pending.clear();
    for (const auto& [pix, tri] : candidates) {
      if (vertex_of_pixel[static_cast<std::size_t>(pix)] >= 0) continue;
      add_vertex(pix, tri, &pending);
      ++mesh.inserted_vertices;
    }
    std::sort(pending.begin(), pending.end());
  }

  // Compact faces: alive triangles with three real vertices.
  std::vector<int> face_of_tri(dt.triangles().size(), -1);
  for (int i = 0; i < static_cast<int>(dt.triangles().size()); ++i) {
    if (dt.triangle(i).alive && !dt.is_outer(i)) {
      face_of_tri[static_cast<std::size_t>(i)] = static_cast<int>(mesh.faces.size());
      mesh.faces.emplace_back();
    }
  }
  mesh.vertex_pixel.resize(dt.points().size() - Delaunay2D::kOuterVertices);
  for (std::size_t v = Delaunay2D::kOuterVertices; v < dt.points().size(); ++v) {
    const Point2 p = dt.points()[v];
    mesh.vertex_pixel[v - Delaunay2D::kOuterVertices] = static_cast<int>(p.y * w + p.x);
  }

  std::unordered_map<std::uint64_t, bool> edge_cache;
  auto discontinuous = [&](int va, int vb) {
    const auto lo = static_cast<std::uint64_t>(std::min(va, vb));
    const auto hi = static_cast<std::uint64_t>(std::max(va, vb));
    const std::uint64_t key = (lo << 32) | hi;
    if (auto it = edge_cache.find(key); it != edge_cache.end()) return it->second;
    const bool d = edge_discontinuous(cloud, dt.points()[static_cast<std::size_t>(va)],
                                      dt.points()[static_cast<std::size_t>(vb)], params.depth_jump);
    edge_cache.emplace(key, d);
    return d;
  };

  for (int i = 0; i < static_cast<int>(dt.triangles().size()); ++i) {
    const int f = face_of_tri[static_cast<std::size_t>(i)];
    if (f < 0) continue;
    const auto& t = dt.triangle(i);
    auto& face = mesh.faces[static_cast<std::size_t>(f)];
    for (int k = 0; k < 3; ++k) {
      face.v[static_cast<std::size_t>(k)] = t.v[static_cast<std::size_t>(k)] - Delaunay2D::kOuterVertices;
      const int n = t.nbr[static_cast<std::size_t>(k)];
      face.nbr[static_cast<std::size_t>(k)] = n >= 0 ? face_of_tri[static_cast<std::size_t>(n)] : -1;
    }
    const Vec3& pa = *cloud.points[static_cast<std::size_t>(mesh.vertex_pixel[static_cast<std::size_t>(face.v[0])])];
    const Vec3& pb = *cloud.points[static_cast<std::size_t>(mesh.vertex_pixel[static_cast<std::size_t>(face.v[1])])];
    const Vec3& pc = *cloud.points[static_cast<std::size_t>(mesh.vertex_pixel[static_cast<std::size_t>(face.v[2])])];
    const Vec3 n = (pb - pa).cross(pc - pa);
    face.normal = n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3(Vec3::UnitZ());
    face.offset = face.normal.dot(pa);
    face.discontinuous = discontinuous(t.v[0], t.v[1]) || discontinuous(t.v[1], t.v[2]) ||
                         discontinuous(t.v[2], t.v[0]);

    const auto& pts = dt.points();
    rasterize(pts[static_cast<std::size_t>(t.v[0])], pts[static_cast<std::size_t>(t.v[1])],
              pts[static_cast<std::size_t>(t.v[2])], w, cloud.height, [&](int pix) {
                if (cloud.points[static_cast<std::size_t>(pix)] && mesh.pixel_face[static_cast<std::size_t>(pix)] < 0) {
                  mesh.pixel_face[static_cast<std::size_t>(pix)] = f;
                }
              });
  }
  return mesh;
}

namespace {

/// Additive moments of a point set.
struct Moments {
  double count = 0.0;
  Vec3 sum = Vec3::Zero();
  Mat3 outer = Mat3::Zero();
  Mat3 noise = Mat3::Zero();  // sum of per-point covariances

  Moments& operator+=(const Moments& o) {
    count += o.count;
    sum += o.sum;
    outer += o.outer;
    noise += o.noise;
    return *this;
  }
  Vec3 mean() const { return sum / count; }
  Mat3 scatter() const {
    const Vec3 m = mean();
    return outer / count - m * m.transpose();
  }
};

/// Mean squared residual along n beyond the expected sensor noise, with a
/// three-sigma allowance for the sampling spread of that variance estimate.
double excess_variance(const Moments& part, const Vec3& n, const Vec3& plane_point) {
  if (part.count <= 0.0) return 0.0;
  const Vec3 m = part.mean();
  const double off = n.dot(m - plane_point);
  const double mse = n.dot(part.scatter() * n) + off * off;
  const double expected = n.dot(part.noise * n) / part.count;
  return mse - expected * (1.0 + 3.0 * std::sqrt(2.0 / part.count));
}

double merge_cost(const Moments& a, const Moments& b) {
  Moments u = a;
  u += b;
  if (u.count < 3.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(u.scatter());
  const Vec3 n = es.eigenvectors().col(0);
  const Vec3 c = u.mean();
  const double e = std::max({excess_variance(u, n, c), excess_variance(a, n, c), excess_variance(b, n, c)});
  return std::sqrt(std::max(0.0, e));
}

struct MergeCandidate {
  double cost;
  int a;
  int b;
  std::uint32_t va;
  std::uint32_t vb;

  bool operator>(const MergeCandidate& o) const {
    if (cost != o.cost) return cost > o.cost;
    if (a != o.a) return a > o.a;
    return b > o.b;
  }
};

}  // namespace

SegmentLabeling merge_hierarchical(const TriangleMesh& mesh, const OrganizedCloud& cloud,
                                   const SegmentationParams& params, const NoiseModel& nm, double focal) {
  params.validate();
  SegmentLabeling out;
  out.width = mesh.width;
  out.height = mesh.height;
  out.labels.assign(static_cast<std::size_t>(mesh.width) * mesh.height, kNoSegment);
  if (mesh.empty()) return out;
  if (cloud.points.size() != out.labels.size()) {
    throw InvalidArgument("merge_hierarchical: cloud does not match mesh");
  }

  const std::size_t nf = mesh.faces.size();
  const std::vector<PixelNoise> noise = pixel_noise(cloud, nm, focal);
  std::vector<Moments> moments(nf);
  for (std::size_t pix = 0; pix < mesh.pixel_face.size(); ++pix) {
    const int f = mesh.pixel_face[pix];
    if (f < 0 || mesh.faces[static_cast<std::size_t>(f)].discontinuous) continue;
    const Vec3& p = *cloud.points[pix];
    auto& m = moments[static_cast<std::size_t>(f)];
    m.count += 1.0;
    m.sum += p;
    m.outer += p * p.transpose();
    m.noise += noise[pix].covariance();
  }

  std::vector<bool> alive(nf);
  std::vector<std::vector<int>> adj(nf);
  std::vector<std::uint32_t> version(nf, 0);
  std::vector<int> region_of(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    region_of[f] = static_cast<int>(f);
    alive[f] = !mesh.faces[f].discontinuous;
  }
  for (std::size_t f = 0; f < nf; ++f) {
    if (!alive[f]) continue;
    for (const int n : mesh.faces[f].nbr) {
      if (n >= 0 && alive[static_cast<std::size_t>(n)]) adj[f].push_back(n);
    }
    std::sort(adj[f].begin(), adj[f].end());
  }

  std::priority_queue<MergeCandidate, std::vector<MergeCandidate>, std::greater<>> queue;
  auto push = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    queue.push({merge_cost(moments[static_cast<std::size_t>(a)], moments[static_cast<std::size_t>(b)]), a, b,
                version[static_cast<std::size_t>(a)], version[static_cast<std::size_t>(b)]});
  };
  for (std::size_t f = 0; f < nf; ++f) {
    for (const int n : adj[f]) {
      if (static_cast<int>(f) < n) push(static_cast<int>(f), n);
    }
  }

  while (!queue.empty()) {
    const MergeCandidate top = queue.top();
    queue.pop();
    const auto ua = static_cast<std::size_t>(top.a);
    const auto ub = static_cast<std::size_t>(top.b);
    if (!alive[ua] || !alive[ub] || version[ua] != top.va || version[ub] != top.vb) continue;
    if (top.cost > params.tau_merge) break;

    // b joins a (a has the smaller id).
    moments[ua] += moments[ub];
    alive[ub] = false;
    region_of[ub] = top.a;
    std::vector<int> merged;
    std::set_union(adj[ua].begin(), adj[ua].end(), adj[ub].begin(), adj[ub].end(), std::back_inserter(merged));
    merged.erase(std::remove_if(merged.begin(), merged.end(), [&](int r) { return r == top.a || r == top.b; }),
                 merged.end());
    adj[ua] = std::move(merged);
    adj[ub].clear();
    ++version[ua];
    ++version[ub];
    for (const int n : adj[ua]) {
      auto& na = adj[static_cast<std::size_t>(n)];
      na.erase(std::remove(na.begin(), na.end(), top.b), na.end());
      if (!std::binary_search(na.begin(), na.end(), top.a)) na.insert(std::lower_bound(na.begin(), na.end(), top.a), top.a);
      push(top.a, n);
    }
  }

  auto find = [&](int f) {
    while (region_of[static_cast<std::size_t>(f)] != f) f = region_of[static_cast<std::size_t>(f)];
    return f;
  };

  std::vector<int> region_pixel(out.labels.size(), -1);
  for (std::size_t pix = 0; pix < mesh.pixel_face.size(); ++pix) {
    const int f = mesh.pixel_face[pix];
    if (f < 0 || mesh.faces[static_cast<std::size_t>(f)].discontinuous) continue;
    region_pixel[pix] = find(f);
  }

  // Keep the largest 4-connected component of every region.
  const int w = mesh.width;
  const int h = mesh.height;
  std::vector<int> component(out.labels.size(), -1);
  std::vector<std::vector<int>> components;
  std::vector<int> component_region;
  for (std::size_t start = 0; start < region_pixel.size(); ++start) {
    if (region_pixel[start] < 0 || component[start] >= 0) continue;
    const int r = region_pixel[start];
    const int cid = static_cast<int>(components.size());
    components.emplace_back();
    component_region.push_back(r);
    std::vector<int> stack{static_cast<int>(start)};
    component[start] = cid;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      components.back().push_back(p);
      const int x = p % w, y = p / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= w || q[1] < 0 || q[1] >= h) continue;
        const auto qi = static_cast<std::size_t>(q[1] * w + q[0]);
        if (region_pixel[qi] == r && component[qi] < 0) {
          component[qi] = cid;
          stack.push_back(static_cast<int>(qi));
        }
      }
    }
  }
  std::unordered_map<int, int> best_component;
  for (int c = 0; c < static_cast<int>(components.size()); ++c) {
    const int r = component_region[static_cast<std::size_t>(c)];
    auto it = best_component.find(r);
    if (it == best_component.end() ||
        components[static_cast<std::size_t>(c)].size() > components[static_cast<std::size_t>(it->second)].size()) {
      best_component[r] = c;
    }
  }
  std::vector<int> kept;
  for (const auto& [r, c] : best_component) {
    if (components[static_cast<std::size_t>(c)].size() >= params.min_points) kept.push_back(c);
  }
  // Components are discovered in scan order, so ascending id = ascending first pixel.
  std::sort(kept.begin(), kept.end());
  for (const int c : kept) {
    auto pixels = components[static_cast<std::size_t>(c)];
    std::sort(pixels.begin(), pixels.end());
    const auto label = static_cast<std::int32_t>(out.segments.size());
    for (const int p : pixels) out.labels[static_cast<std::size_t>(p)] = label;
    out.segments.push_back(std::move(pixels));
  }
  return out;
}

SegmentLabeling segment_depth_image(const DepthImage& img, const CameraIntrinsics& k, const NoiseModel& nm,
                                    const SegmentationParams& params) {
  const OrganizedCloud cloud = backproject(img, k);
  const TriangleMesh mesh = split_triangulate(cloud, params, nm, k.mean_focal());
  return merge_hierarchical(mesh, cloud, params, nm, k.mean_focal());
}

std::vector<Vec3> segment_points(const SegmentLabeling& labeling, const OrganizedCloud& cloud, std::size_t segment) {
  if (segment >= labeling.segments.size()) throw NotFound("segment_points: no segment " + std::to_string(segment));
  std::vector<Vec3> pts;
  pts.reserve(labeling.segments[segment].size());
  for (const int p : labeling.segments[segment]) pts.push_back(*cloud.points[static_cast<std::size_t>(p)]);
  return pts;
}

void write_label_pgm(const std::filesystem::path& path, const SegmentLabeling& labeling) {
  std::vector<std::uint8_t> px(labeling.labels.size(), 0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const std::int32_t l = labeling.labels[i];
    if (l != kNoSegment) px[i] = static_cast<std::uint8_t>(1 + (static_cast<std::uint32_t>(l) * 97u) % 255u);
  }
  write_gray8_pgm(path, labeling.width, labeling.height, px);
}

}  // namespace planeloc
