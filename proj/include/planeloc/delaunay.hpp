#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace planeloc {

/// Incremental Bowyer-Watson Delaunay triangulation over integer 2D
/// coordinates (image pixels). Predicates are evaluated exactly in 128-bit
/// integers, so co-circular pixel lattices are handled without tolerances.
///
/// The triangulation starts from a large enclosing triangle whose three
/// vertices occupy ids 0..2; user vertices start at id 3. Triangles touching
/// an enclosing vertex are reported by is_outer().
class Delaunay2D {
 public:
  struct Point {
    std::int64_t x = 0;
    std::int64_t y = 0;
  };

  /// Vertices counter-clockwise; nbr[i] is the triangle across the edge
  /// opposite v[i], or -1.
  struct Triangle {
    std::array<int, 3> v{};
    std::array<int, 3> nbr{-1, -1, -1};
    bool alive = true;
  };

  static constexpr int kOuterVertices = 3;

  /// `extent` bounds all coordinates that will be inserted: 0 <= x, y < extent.
  explicit Delaunay2D(std::int64_t extent);

  /// Inserts a point and returns its vertex id. `hint` is a triangle to start
  /// the point-location walk from (-1 = most recent triangle). Newly created
  /// triangle ids are appended to `created` when non-null.
  int insert(Point p, int hint = -1, std::vector<int>* created = nullptr);

  /// Triangle containing p (closed), found by a visibility walk.
  int locate(Point p, int hint = -1) const;

  const std::vector<Point>& points() const { return points_; }
  const std::vector<Triangle>& triangles() const { return tris_; }
  const Triangle& triangle(int id) const { return tris_[static_cast<std::size_t>(id)]; }
  bool is_outer(int tri) const;
  std::size_t alive_count() const;

  /// Exact orientation: > 0 when c lies left of a->b.
  static std::int64_t orient(Point a, Point b, Point c);
  /// Exact in-circle test for ccw (a, b, c): > 0 when d is strictly inside.
  static int incircle_sign(Point a, Point b, Point c, Point d);

 private:
  std::vector<Point> points_;
  std::vector<Triangle> tris_;
  int last_ = 0;
};

}  // namespace planeloc
