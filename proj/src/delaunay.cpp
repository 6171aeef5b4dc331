#include "planeloc/delaunay.hpp"

#include <algorithm>
#include <stdexcept>

namespace planeloc {

namespace {

using i128 = __int128;

}  // namespace

Delaunay2D::Delaunay2D(std::int64_t extent) {
  const std::int64_t m = std::max<std::int64_t>(extent, 1) * 16;
  points_.push_back({-m, -m});
  points_.push_back({5 * m, -m});
  points_.push_back({-m, 5 * m});
  tris_.push_back(Triangle{{0, 1, 2}, {-1, -1, -1}, true});
}

std::int64_t Delaunay2D::orient(Point a, Point b, Point c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

int Delaunay2D::incircle_sign(Point a, Point b, Point c, Point d) {
  const i128 adx = a.x - d.x, ady = a.y - d.y;
  const i128 bdx = b.x - d.x, bdy = b.y - d.y;
  const i128 cdx = c.x - d.x, cdy = c.y - d.y;
  const i128 alift = adx * adx + ady * ady;
  const i128 blift = bdx * bdx + bdy * bdy;
  const i128 clift = cdx * cdx + cdy * cdy;
  const i128 det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                   clift * (adx * bdy - bdx * ady);
  return det > 0 ? 1 : (det < 0 ? -1 : 0);
}

bool Delaunay2D::is_outer(int tri) const {
  const auto& t = tris_[static_cast<std::size_t>(tri)];
  return t.v[0] < kOuterVertices || t.v[1] < kOuterVertices || t.v[2] < kOuterVertices;
}

std::size_t Delaunay2D::alive_count() const {
  return static_cast<std::size_t>(std::count_if(tris_.begin(), tris_.end(), [](const Triangle& t) { return t.alive; }));
}

int Delaunay2D::locate(Point p, int hint) const {
  int cur = (hint >= 0 && tris_[static_cast<std::size_t>(hint)].alive) ? hint : last_;
  if (!tris_[static_cast<std::size_t>(cur)].alive) {
    for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i) {
      if (tris_[static_cast<std::size_t>(i)].alive) {
        cur = i;
        break;
      }
    }
  }
  // Visibility walk; terminates on Delaunay triangulations. The step
  // rotation avoids cycling on degenerate configurations.
  std::size_t guard = 0;
  int rot = 0;
  while (true) {
    const auto& t = tris_[static_cast<std::size_t>(cur)];
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = (k + rot) % 3;
      const Point a = points_[static_cast<std::size_t>(t.v[static_cast<std::size_t>((i + 1) % 3)])];
      const Point b = points_[static_cast<std::size_t>(t.v[static_cast<std::size_t>((i + 2) % 3)])];
      if (orient(a, b, p) < 0) {
        const int next = t.nbr[static_cast<std::size_t>(i)];
        if (next < 0) throw std::logic_error("Delaunay2D::locate: point outside the enclosing triangle");
        cur = next;
        moved = true;
        break;
      }
    }
    if (!moved) return cur;
    rot = (rot + 1) % 3;
    if (++guard > 4 * tris_.size() + 16) throw std::logic_error("Delaunay2D::locate: walk did not terminate");
  }
}

int Delaunay2D::insert(Point p, int hint, std::vector<int>* created) {
  // Callers must not insert a point twice.
  const int start = locate(p, hint);
  const int vid = static_cast<int>(points_.size());
  points_.push_back(p);

  // Cavity: triangles whose circumcircle strictly contains p, grown from the
  // containing triangle across shared edges.
  std::vector<int> cavity{start};
  std::vector<int> stack{start};
  auto in_cavity = [&](int id) { return std::find(cavity.begin(), cavity.end(), id) != cavity.end(); };
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& t = tris_[static_cast<std::size_t>(id)];
    for (int i = 0; i < 3; ++i) {
      const int n = t.nbr[static_cast<std::size_t>(i)];
      if (n < 0 || in_cavity(n)) continue;
      const auto& nt = tris_[static_cast<std::size_t>(n)];
      if (incircle_sign(points_[static_cast<std::size_t>(nt.v[0])], points_[static_cast<std::size_t>(nt.v[1])],
                        points_[static_cast<std::size_t>(nt.v[2])], p) > 0) {
        cavity.push_back(n);
        stack.push_back(n);
      }
    }
  }

  // Boundary edges (a, b) in ccw order of their cavity triangle, with the
  // outside neighbour.
  struct BoundaryEdge {
    int a, b, outside;
  };
  std::vector<BoundaryEdge> boundary;
  for (const int id : cavity) {
    const auto& t = tris_[static_cast<std::size_t>(id)];
    for (int i = 0; i < 3; ++i) {
      const int n = t.nbr[static_cast<std::size_t>(i)];
      if (n >= 0 && in_cavity(n)) continue;
      boundary.push_back({t.v[static_cast<std::size_t>((i + 1) % 3)], t.v[static_cast<std::size_t>((i + 2) % 3)], n});
    }
  }
  for (const int id : cavity) tris_[static_cast<std::size_t>(id)].alive = false;

  // New fan (a, b, p). Neighbour opposite p is the outside triangle; the
  // other two are fan triangles sharing vertex a or b.
  std::vector<int> fan(boundary.size());
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    const auto& e = boundary[k];
    fan[k] = static_cast<int>(tris_.size());
    tris_.push_back(Triangle{{e.a, e.b, vid}, {-1, -1, e.outside}, true});
    if (e.outside >= 0) {
      auto& o = tris_[static_cast<std::size_t>(e.outside)];
      for (int i = 0; i < 3; ++i) {
        const int n = o.nbr[static_cast<std::size_t>(i)];
        if (n >= 0 && !tris_[static_cast<std::size_t>(n)].alive &&
            o.v[static_cast<std::size_t>((i + 1) % 3)] == e.b && o.v[static_cast<std::size_t>((i + 2) % 3)] == e.a) {
          o.nbr[static_cast<std::size_t>(i)] = fan[k];
        }
      }
    }
  }
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    auto& t = tris_[static_cast<std::size_t>(fan[k])];
    for (std::size_t m = 0; m < boundary.size(); ++m) {
      if (m == k) continue;
      // edge (b, p) of k is shared with the fan triangle starting at b
      if (boundary[m].a == boundary[k].b) t.nbr[0] = fan[m];
      // edge (p, a) of k is shared with the fan triangle ending at a
      if (boundary[m].b == boundary[k].a) t.nbr[1] = fan[m];
    }
  }
  if (created) created->insert(created->end(), fan.begin(), fan.end());
  last_ = fan.empty() ? last_ : fan.back();
  return vid;
}

}  // namespace planeloc
