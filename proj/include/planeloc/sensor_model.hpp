#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "planeloc/geometry.hpp"

namespace planeloc {

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 262.5;
  double fy = 262.5;
  double cx = 159.5;
  double cy = 119.5;
  int width = 320;
  int height = 240;

  /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies
  /// strictly inside the image.
  void validate() const;
  double mean_focal() const { return 0.5 * (fx + fy); }
};

/// Organized range image, millimeters, 0 = no depth.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;

  DepthImage() = default;
  DepthImage(int w, int h);

  std::uint16_t at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  std::uint16_t& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  std::size_t size() const { return data.size(); }
  bool operator==(const DepthImage&) const = default;
};

/// sigma_lateral = sigma_px * z / f, sigma_axial = k_z * z^2 (z in meters).
struct NoiseModel {
  double sigma_px = 0.5;
  double k_z = 2.85e-3;

  void validate() const;
  double axial_std(double z) const { return k_z * z * z; }
};

/// Per-pixel 3D points in the camera frame, meters. Row-major.
struct OrganizedCloud {
  int width = 0;
  int height = 0;
  std::vector<std::optional<Vec3>> points;

  const std::optional<Vec3>& at(int u, int v) const {
    return points[static_cast<std::size_t>(v) * width + u];
  }
  std::size_t valid_count() const;
};

OrganizedCloud backproject(const DepthImage& img, const CameraIntrinsics& k);

/// Projects a camera-frame point to (u, v) pixel coordinates.
Vec2 project(const Vec3& p, const CameraIntrinsics& k);

/// Position covariance of a measured point, camera frame, m^2.
/// Ray-aligned: axial variance along the viewing ray, lateral on the two
/// orthogonal axes. Throws InvalidArgument for p.z <= 0.
Mat3 point_covariance(const Vec3& p, const CameraIntrinsics& k, const NoiseModel& nm);

// --- file formats -----------------------------------------------------------

/// Binary PGM "P5", maxval 65535, big-endian samples.
DepthImage read_depth_pgm(const std::filesystem::path& path);
void write_depth_pgm(const std::filesystem::path& path, const DepthImage& img);

/// 8-bit binary PGM, used for label dumps.
void write_gray8_pgm(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels);

/// JSON object {"fx","fy","cx","cy","width","height"}.
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k);

}  // namespace planeloc
