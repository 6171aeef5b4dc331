#include "planeloc/sensor_model.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "planeloc/error.hpp"

namespace planeloc {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: image size must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw InvalidArgument("intrinsics: principal point outside the image");
  }
}

void NoiseModel::validate() const {
  if (!(sigma_px >= 0.0) || !(k_z >= 0.0)) throw InvalidArgument("noise model: negative coefficient");
}

DepthImage::DepthImage(int w, int h) : width(w), height(h) {
  if (w < 0 || h < 0) throw InvalidArgument("depth image: negative size");
  data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
}

std::size_t OrganizedCloud::valid_count() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.has_value() ? 1 : 0;
  return n;
}

OrganizedCloud backproject(const DepthImage& img, const CameraIntrinsics& k) {
  k.validate();
  if (img.width != k.width || img.height != k.height ||
      img.data.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw InvalidArgument("backproject: image and intrinsics dimensions disagree");
  }
  OrganizedCloud cloud;
  cloud.width = img.width;
  cloud.height = img.height;
  cloud.points.resize(img.data.size());
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const std::uint16_t d = img.at(u, v);
      if (d == 0) continue;
      const double z = d / 1000.0;
      cloud.points[static_cast<std::size_t>(v) * img.width + u] =
          Vec3(z * (u - k.cx) / k.fx, z * (v - k.cy) / k.fy, z);
    }
  }
  return cloud;
}

Vec2 project(const Vec3& p, const CameraIntrinsics& k) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Mat3 point_covariance(const Vec3& p, const CameraIntrinsics& k, const NoiseModel& nm) {
  if (!(p.z() > 0.0)) throw InvalidArgument("point_covariance: point must lie in front of the camera");
  const double z = p.z();
  const double lateral = nm.sigma_px * z / k.mean_focal();
  const double axial = nm.axial_std(z);
  const Vec3 ray = p.normalized();
  const Mat3 along = ray * ray.transpose();
  return axial * axial * along + lateral * lateral * (Mat3::Identity() - along);
}

// --- PGM --------------------------------------------------------------------

namespace {

std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c = in.get();
  while (in) {
    if (c == '#') {
      while (in && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (in && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (tok.empty()) throw ParseError(path.string() + ": truncated PGM header");
  // `c` is the single whitespace byte that terminates the header field.
  return tok;
}

int parse_header_int(const std::string& tok, const std::filesystem::path& path, const char* field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad PGM " + field + " '" + tok + "'");
  }
}

}  // namespace

DepthImage read_depth_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_token(in, path) != "P5") throw ParseError(path.string() + ": not a binary PGM (P5)");
  const int w = parse_header_int(next_token(in, path), path, "width");
  const int h = parse_header_int(next_token(in, path), path, "height");
  const int maxval = parse_header_int(next_token(in, path), path, "maxval");
  if (w <= 0 || h <= 0) throw ParseError(path.string() + ": non-positive PGM size");
  if (maxval != 65535) throw ParseError(path.string() + ": expected maxval 65535, got " + std::to_string(maxval));

  DepthImage img(w, h);
  std::vector<unsigned char> raw(img.size() * 2);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw ParseError(path.string() + ": truncated PGM pixel data");
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.data[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<unsigned char> raw(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(img.data[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(img.data[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_gray8_pgm(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("write_gray8_pgm: pixel count does not match size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": intrinsics field error: " + e.what());
  }
  try {
    k.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return k;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k) {
  const nlohmann::json j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
                            {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace planeloc
