// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dynavsr/resample.hpp"
#include "testutil.hpp"

using namespace dynavsr;

TEST_CASE("resize at scale 1 is the bit-exact identity") {
  Rng rng(21);
  Plane<double> x(9, 7);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  const Plane<double> y = resample::resize_plane(x, 1.0);
  REQUIRE((x - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("resize rows are affine-normalized: constants map to constants") {
  for (double scale : {0.5, 0.25, 2.0, 3.0, 1.0 / 3.0}) {
    const Plane<double> x = Plane<double>::Constant(24, 24, 0.37);
    const Plane<double> y = resample::resize_plane(x, scale);
    CHECK(y.rows() == resample::scaled_len(24, scale));
    CHECK((y.array() - 0.37).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("resize is linear in the input") {
  Rng rng(22);
  Plane<double> a(16, 20), b(16, 20);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
  for (int i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
  for (double scale : {0.5, 2.0}) {
    const Plane<double> lhs = resample::resize_plane<double>(2.0 * a - 3.0 * b, scale);
    const Plane<double> rhs = 2.0 * resample::resize_plane(a, scale) - 3.0 * resample::resize_plane(b, scale);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("upscaling reproduces quadratic ramps away from the borders") {
  // The a = -0.5 cubic kernel interpolates polynomials up to degree 2
  // exactly, so interior samples of an upscale must land back on the ramp.
  const int n = 24, s = 2;
  Plane<double> x(n, n);
  auto poly = [](double u, double v) { return 0.2 + 0.03 * u - 0.01 * v + 0.002 * u * v + 0.001 * u * u; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = poly(i, j);
  const Plane<double> y = resample::resize_plane(x, double(s));
  for (int i = 8; i < s * n - 8; ++i)
    for (int j = 8; j < s * n - 8; ++j) {
      const double u = (i + 0.5) / s - 0.5, v = (j + 0.5) / s - 0.5;
      REQUIRE(std::abs(y(i, j) - poly(u, v)) < 1e-9);
    }
}

TEST_CASE("downscale of a mirror-symmetric image stays mirror-symmetric") {
  Rng rng(23);
  const int n = 32;
  Plane<double> x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      // symmetric under 180-degree rotation
      const double v = rng.uniform();
      x(i, j) = v;
      x(n - 1 - i, n - 1 - j) = v;
    }
  const Plane<double> y = resample::resize_plane(x, 0.5);
  const int m = static_cast<int>(y.rows());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) CHECK(std::abs(y(i, j) - y(m - 1 - i, m - 1 - j)) < 1e-12);
}

TEST_CASE("antialiased downscale averages wider neighborhoods than naive sampling") {
  // A one-pixel impulse must spread over >= 4 output taps when halving.
  const int n = 32;
  Plane<double> x = Plane<double>::Zero(n, n);
  x(16, 16) = 1.0;
  const Plane<double> y = resample::resize_plane(x, 0.5);
  int touched = 0;
  for (int i = 0; i < y.rows(); ++i)
    for (int j = 0; j < y.cols(); ++j)
      if (std::abs(y(i, j)) > 1e-9) ++touched;
  CHECK(touched >= 16);
  CHECK(std::abs(y.sum() - 0.25) < 0.02);  // mass roughly scales with the area ratio
}

TEST_CASE("odd lengths round up and the operator stays normalized") {
  const Eigen::MatrixXd m = resample::resize_matrix(15, resample::scaled_len(15, 0.5), 0.5);
  REQUIRE(m.rows() == 8);
  for (int i = 0; i < m.rows(); ++i) CHECK(std::abs(m.row(i).sum() - 1.0) < 1e-12);
  CHECK_THROWS(resample::resize_matrix(0, 4, 0.5));
  CHECK_THROWS(resample::resize_matrix(4, 4, -1.0));
}

TEST_CASE("sequence resize preserves tier and frame count") {
  const FrameSequence<double> seq = testutil::scene(3, 4, 16, 16);
  const FrameSequence<double> half = resample::bicubic_resize(seq, 0.5);
  CHECK(half.length() == 4);
  CHECK(half.frames[0].height() == 8);
  CHECK(half.tier == seq.tier);
}
