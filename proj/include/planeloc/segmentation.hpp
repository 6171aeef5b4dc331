#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "planeloc/sensor_model.hpp"

namespace planeloc {

struct SegmentationParams {
  /// Point-to-plane deviation (m) above which a triangle is split. The
  /// per-point test adds `noise_sigmas` standard deviations of sensor noise
  /// along the triangle normal.
  double tau_split = 0.010;
  /// Maximum plane-fit RMS (m) of a merged region, in excess of the expected
  /// sensor noise.
  double tau_merge = 0.008;
  std::size_t min_points = 100;
  /// Depth jump (m, scaled by z^2 for z > 1 m) per pixel step along a
  /// triangle edge that marks an occlusion boundary.
  double depth_jump = 0.050;
  /// Lattice spacing of the initial coarse triangulation, pixels.
  int initial_step = 8;
  double noise_sigmas = 3.0;

  void validate() const;
};

/// Result of the split phase: a Delaunay mesh over valid pixels whose
/// triangles are planar to within the split tolerance.
struct TriangleMesh {
  struct Face {
    std::array<int, 3> v{};    ///< vertex ids (index into vertex_pixel)
    std::array<int, 3> nbr{};  ///< adjacent face across the edge opposite v[i], or -1
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;       ///< plane through the vertices: normal . x = offset
    bool discontinuous = false;
  };

  int width = 0;
  int height = 0;
  std::vector<int> vertex_pixel;   ///< row-major pixel index of every vertex
  std::vector<Face> faces;
  std::vector<int> pixel_face;     ///< owning face per pixel, -1 if none
  std::size_t initial_vertices = 0;
  std::size_t inserted_vertices = 0;

  bool empty() const { return faces.empty(); }
};

inline constexpr std::int32_t kNoSegment = -1;

struct SegmentLabeling {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;          ///< segment id per pixel or kNoSegment
  std::vector<std::vector<int>> segments;    ///< sorted pixel indices per segment

  bool operator==(const SegmentLabeling&) const = default;
};

/// Iterative Delaunay refinement in image coordinates. Fewer than three valid
/// points yield an empty mesh.
TriangleMesh split_triangulate(const OrganizedCloud& cloud, const SegmentationParams& params,
                               const NoiseModel& nm = NoiseModel{0.0, 0.0}, double focal = 1.0);

/// Greedy agglomerative merging of adjacent mesh faces, cheapest merge first.
SegmentLabeling merge_hierarchical(const TriangleMesh& mesh, const OrganizedCloud& cloud,
                                   const SegmentationParams& params,
                                   const NoiseModel& nm = NoiseModel{0.0, 0.0}, double focal = 1.0);

SegmentLabeling segment_depth_image(const DepthImage& img, const CameraIntrinsics& k,
                                    const NoiseModel& nm, const SegmentationParams& params);

/// Supporting points of one segment, camera frame.
std::vector<Vec3> segment_points(const SegmentLabeling& labeling, const OrganizedCloud& cloud,
                                 std::size_t segment);

/// 8-bit label image; 0 = unlabeled, otherwise a stable index derived from the id.
void write_label_pgm(const std::filesystem::path& path, const SegmentLabeling& labeling);

}  // namespace planeloc
