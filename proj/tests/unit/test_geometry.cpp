#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "planeloc/error.hpp"
#include "support.hpp"

using namespace planeloc;
using testing::random_phi;
using testing::random_pose;

namespace {

constexpr double kPi = std::numbers::pi;

/// Rodrigues rotation by matrix exponential series, independent of the
/// closed form under test.
Mat3 exp_series(const Vec3& phi) {
  const Mat3 k = skew(phi);
  Mat3 term = Mat3::Identity();
  Mat3 sum = Mat3::Identity();
  for (int i = 1; i < 40; ++i) {
    term = term * k / static_cast<double>(i);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("rotation_from_vector basic cases") {
  CHECK(rotation_from_vector(Vec3::Zero()).isApprox(Mat3::Identity(), 1e-15));
  const Mat3 r = rotation_from_vector(Vec3(0, 0, kPi / 2));
  CHECK((r * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
}

TEST_CASE("rotation_from_vector agrees with the exponential series") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vec3 phi = random_phi(rng, kPi);
    CHECK((rotation_from_vector(phi) - exp_series(phi)).norm() < 1e-12);
  }
}

TEST_CASE("rotation matrices are proper") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = rotation_from_vector(random_phi(rng, 10.0));
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("vector round trip") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 phi = random_phi(rng, kPi - 1e-6);
    CHECK((vector_from_rotation(rotation_from_vector(phi)) - phi).norm() < 1e-9);
  }
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = exp_series(random_phi(rng, kPi));
    CHECK((rotation_from_vector(vector_from_rotation(r)) - r).norm() < 1e-9);
  }
}

TEST_CASE("vector_from_rotation boundary angles") {
  CHECK(vector_from_rotation(Mat3::Identity()).norm() == 0.0);
  const Mat3 rx = Eigen::Vector3d(1, -1, -1).asDiagonal();
  CHECK((vector_from_rotation(rx) - Vec3(kPi, 0, 0)).norm() < 1e-12);
  // near pi the axis comes from the symmetric part
  const Vec3 phi = Vec3(1, 2, -2).normalized() * (kPi - 1e-7);
  CHECK((vector_from_rotation(rotation_from_vector(phi)) - phi).norm() < 1e-7);
  // tiny angles stay accurate
  const Vec3 small(1e-10, -2e-10, 3e-10);
  CHECK((vector_from_rotation(rotation_from_vector(small)) - small).norm() < 1e-20);
  CHECK((rotation_from_vector(small) - (Mat3::Identity() + skew(small))).norm() < 1e-19);
}

TEST_CASE("invalid rotation input") {
  Mat3 m = Mat3::Identity();
  m(0, 0) = 1.01;
  CHECK_THROWS_AS(vector_from_rotation(m), InvalidArgument);
  CHECK_THROWS_AS(vector_from_rotation(Mat3(-Mat3::Identity())), InvalidArgument);
  CHECK_THROWS_AS(rotation_from_vector(Vec3(std::nan(""), 0, 0)), InvalidArgument);
}

TEST_CASE("pose algebra") {
  const Vec3 p(0.3, -1.2, 2.0);
  CHECK(transform_point(Pose::identity(), p) == p);
  const Pose a(Vec3(0, 0, kPi / 2), Vec3(1, 0, 0));
  CHECK((transform_point(a, Vec3(1, 0, 0)) - Vec3(1, 1, 0)).norm() < 1e-15);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Pose x = random_pose(rng), y = random_pose(rng), z = random_pose(rng);
    CHECK((transform_point(compose(x, invert(x)), p) - p).norm() < 1e-12);
    const Pose l = compose(compose(x, y), z), r = compose(x, compose(y, z));
    CHECK((l.rotation() - r.rotation()).norm() < 1e-10);
    CHECK((l.t - r.t).norm() < 1e-10);
    CHECK((transform_point(compose(x, y), p) - transform_point(x, transform_point(y, p))).norm() < 1e-10);
    const Pose rel = relative(x, y);
    CHECK((compose(x, rel).t - y.t).norm() < 1e-10);
  }
}

TEST_CASE("rotation_angle_between is the geodesic angle") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Mat3 a = rotation_from_vector(random_phi(rng));
    const Vec3 d = random_phi(rng, kPi - 1e-3);
    CHECK(std::abs(rotation_angle_between(a, a * rotation_from_vector(d)) - d.norm()) < 1e-9);
  }
}

TEST_CASE("left Jacobian against finite differences") {
  std::mt19937_64 rng(6);
  const double eps = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = random_phi(rng, 3.0);
    const Mat3 r = rotation_from_vector(phi);
    Mat3 num;
    for (int k = 0; k < 3; ++k) {
      const Vec3 d = Vec3::Unit(k) * eps;
      const Vec3 plus = vector_from_rotation(Mat3(rotation_from_vector(Vec3(phi + d)) * r.transpose()));
      const Vec3 minus = vector_from_rotation(Mat3(rotation_from_vector(Vec3(phi - d)) * r.transpose()));
      num.col(k) = (plus - minus) / (2 * eps);
    }
    CHECK((num - left_jacobian(phi)).norm() < 1e-7);
  }
  CHECK((left_jacobian(Vec3(1e-9, 0, 0)) - Mat3::Identity()).norm() < 1e-9);
}
