#pragma once

// Internal JSON helpers shared by the map, dataset and report writers.

#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "planeloc/error.hpp"
#include "planeloc/geometry.hpp"

namespace planeloc::detail {

using nlohmann::json;

/// Field accessor that reports the full field path on failure.
class FieldReader {
 public:
  FieldReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  const json& node() const { return node_; }
  const std::string& path() const { return path_; }

  FieldReader at(std::string_view key) const {
    if (!node_.is_object()) fail("expected an object");
    auto it = node_.find(key);
    if (it == node_.end()) throw ParseError(path_ + "." + std::string(key) + ": missing field");
    return {*it, path_ + "." + std::string(key)};
  }
  FieldReader at(std::size_t i) const {
    if (!node_.is_array() || i >= node_.size()) fail("index out of range");
    return {node_[i], path_ + "[" + std::to_string(i) + "]"};
  }
  bool has(std::string_view key) const { return node_.is_object() && node_.contains(key); }
  std::size_t array_size() const {
    if (!node_.is_array()) fail("expected an array");
    return node_.size();
  }

  double number() const {
    if (!node_.is_number()) fail("expected a number");
    return node_.get<double>();
  }
  long long integer() const {
    if (!node_.is_number_integer()) fail("expected an integer");
    return node_.get<long long>();
  }
  std::string string() const {
    if (!node_.is_string()) fail("expected a string");
    return node_.get<std::string>();
  }
  template <int N>
  Eigen::Matrix<double, N, 1> vector() const {
    if (!node_.is_array() || node_.size() != static_cast<std::size_t>(N)) {
      fail("expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = at(static_cast<std::size_t>(i)).number();
    return v;
  }
  Pose pose() const { return {at("phi").vector<3>(), at("t").vector<3>()}; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_ + ": " + what); }

 private:
  const json& node_;
  std::string path_;
};

template <typename Derived>
json to_json_array(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json pose_to_json(const Pose& p) { return {{"phi", to_json_array(p.phi)}, {"t", to_json_array(p.t)}}; }

/// Parses text, converting parser errors into ParseError with a line number.
inline json parse_document(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < limit; ++i) line += text[i] == '\n' ? 1 : 0;
    throw ParseError(std::string(source) + ":" + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace planeloc::detail
