// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "dynavsr/degrade.hpp"
#include "testutil.hpp"

using namespace dynavsr;

namespace {

// Independent blur reference: per-output-pixel double loop with its own
// reflected indexing, no shared padding code.
Plane<double> reference_blur(const Plane<double>& x, const kernels::Kernel& k) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  const int r = (static_cast<int>(k.rows()) - 1) / 2;
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
    return i;
  };
  Plane<double> out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int di = -r; di <= r; ++di)
        for (int dj = -r; dj <= r; ++dj)
          acc += k(di + r, dj + r) * x(mirror(i + di, h), mirror(j + dj, w));
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("blur matches the per-pixel reference on random kernels") {
  Rng rng(31);
  const FrameSequence<double> seq = testutil::scene(31, 1, 24, 20);
  for (int trial = 0; trial < 25; ++trial) {
    const auto spec = kernels::sample_kernel_spec(rng);
    const kernels::Kernel k = kernels::synth_kernel(spec);
    for (const auto& p : seq.frames[0].ch) {
      const Plane<double> got = degrade::blur_plane(p, k);
      const Plane<double> want = reference_blur(p, k);
      REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("blur is linear and exact on constant frames") {
  Rng rng(32);
  const kernels::Kernel k = kernels::synth_kernel({13, 1.1, 0.6, 0.4});
  Plane<double> a(20, 20), b(20, 20);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
  for (int i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
  const Plane<double> lhs = degrade::blur_plane<double>(1.7 * a + 0.3 * b, k);
  const Plane<double> rhs = 1.7 * degrade::blur_plane(a, k) + 0.3 * degrade::blur_plane(b, k);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  const Plane<double> c = Plane<double>::Constant(16, 16, 0.42);
  CHECK((degrade::blur_plane(c, k).array() - 0.42).abs().maxCoeff() < 1e-12);
}

TEST_CASE("blur rejects even, rectangular, and oversized kernels") {
  const Plane<double> x = Plane<double>::Zero(8, 8);
  CHECK_THROWS(degrade::blur_plane(x, kernels::Kernel::Constant(4, 4, 0.0625)));
  CHECK_THROWS(degrade::blur_plane(x, kernels::Kernel::Constant(3, 5, 1.0 / 15)));
  CHECK_THROWS(degrade::blur_plane(x, kernels::Kernel::Constant(9, 9, 1.0 / 81)));
}

TEST_CASE("direct decimation keeps every s-th sample from offset zero") {
  Plane<double> x(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) x(i, j) = 10 * i + j;
  const Plane<double> y = degrade::decimate_plane(x, 2);
  REQUIRE(y.rows() == 3);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(1, 2) == 24.0);
  CHECK(y(2, 1) == 42.0);
  CHECK_THROWS(degrade::decimate_plane(x, 4));
}

TEST_CASE("two direct degradation stages compose like one squared-scale stage") {
  // Away from reflection effects, (blur k, keep every s-th) twice equals a
  // single stage at s^2 whose kernel is k correlated with its s-dilated
  // copy. Verified on interior pixels.
  const int s = 2, n = 64;
  const FrameSequence<double> seq = testutil::scene(33, 1, n, n);
  const kernels::KernelSpec spec{9, 1.0, 0.5, 0.7};
  const kernels::Kernel k = kernels::synth_kernel(spec);

  // k2 = sum_t k[t] * shift(k upsampled by s) as a (size + s*(size-1)) tap filter
  const int size = 9, big = size + s * (size - 1);
  kernels::Kernel k2 = kernels::Kernel::Zero(big, big);
  for (int ai = 0; ai < size; ++ai)
    for (int aj = 0; aj < size; ++aj)
      for (int bi = 0; bi < size; ++bi)
        for (int bj = 0; bj < size; ++bj) k2(ai + s * bi, aj + s * bj) += k(ai, aj) * k(bi, bj);

  const Plane<double>& x = seq.frames[0].ch[0];
  const Plane<double> two_stage =
      degrade::decimate_plane(degrade::blur_plane(degrade::decimate_plane(degrade::blur_plane(x, k), s), k), s);
  // One-stage reference without any padding: valid region only.
  const int rb = (big - 1) / 2;
  const int m = n / (s * s);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const int ci = i * s * s, cj = j * s * s;
      if (ci - rb < 0 || cj - rb < 0 || ci + rb >= n || cj + rb >= n) continue;
      double acc = 0.0;
      for (int di = -rb; di <= rb; ++di)
        for (int dj = -rb; dj <= rb; ++dj) acc += k2(di + rb, dj + rb) * x(ci + di, cj + dj);
      REQUIRE(std::abs(two_stage(i, j) - acc) < 1e-9);
    }
}

TEST_CASE("task triples have consistent tiers, shapes, and kernels") {
  const FrameSequence<double> hr = testutil::scene(34, 5, 32, 32);
  const auto t = degrade::make_task_triple(hr, {13, 1.2, 0.9, 0.3}, 2,
                                           degrade::DownsampleMode::kDirect);
  CHECK(t.hr.tier == Tier::kHr);
  CHECK(t.lr.tier == Tier::kLr);
  CHECK(t.slr.tier == Tier::kSlr);
  CHECK(t.lr.height() == 16);
  CHECK(t.slr.height() == 8);
  CHECK(t.lr.length() == 5);
  CHECK(std::abs(t.kernel.sum() - 1.0) < 1e-12);

  FrameSequence<double> odd = testutil::scene(35, 3, 30, 32);
  CHECK_THROWS(degrade::make_task_triple(odd, {13, 1.0, 1.0, 0.0}, 2,
                                         degrade::DownsampleMode::kDirect));
}

TEST_CASE("bicubic-after-blur mode shrinks with the resampling operator") {
  const FrameSequence<double> hr = testutil::scene(36, 3, 32, 32);
  const kernels::Kernel k = kernels::synth_kernel({13, 0.9, 0.9, 0.0});
  const FrameSequence<double> lr =
      degrade::blur_downsample(hr, k, 2, degrade::DownsampleMode::kBicubicAfterBlur);
  const Plane<double> want =
      resample::resize_plane(degrade::blur_plane(hr.frames[1].ch[2], k), 0.5);
  CHECK((lr.frames[1].ch[2] - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training triples are the float cast of the 64-bit pipeline") {
  const FrameSequence<double> hr = testutil::scene(37, 5, 32, 32);
  const kernels::KernelSpec spec{13, 1.4, 0.5, -0.9};
  const auto t64 = degrade::make_task_triple(hr, spec, 2, degrade::DownsampleMode::kDirect);
  const auto t32 = degrade::make_training_triple(hr, spec, 2, degrade::DownsampleMode::kDirect);
  for (int f = 0; f < 5; ++f)
    for (int c = 0; c < 3; ++c) {
      const Plane<float> want = t64.slr.frames[f].ch[c].cast<float>();
      REQUIRE((t32.slr.frames[f].ch[c] - want).cwiseAbs().maxCoeff() == 0.0f);
    }
}
