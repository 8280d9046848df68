// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dynavsr/dataset.hpp"
#include "testutil.hpp"

using namespace dynavsr;
namespace fs = std::filesystem;

namespace {

struct TempRoot {
  fs::path root;
  explicit TempRoot(const std::string& name) : root(fs::path("dataset_test_tmp") / name) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempRoot() { fs::remove_all("dataset_test_tmp"); }
  std::string str() const { return root.string(); }
  std::string sub(const std::string& s) const { return (root / s).string(); }
};

// Frames whose every pixel encodes the frame index exactly on the 8-bit grid.
FrameSequence<double> indexed_frames(int n, int h, int w) {
  FrameSequence<double> seq;
  seq.tier = Tier::kHr;
  for (int t = 0; t < n; ++t) {
    Image<double> im;
    for (int c = 0; c < 3; ++c) im.ch.push_back(Plane<double>::Constant(h, w, t / 255.0));
    seq.frames.push_back(im);
  }
  return seq;
}

double quantized(double v) { return std::lround(std::min(1.0, std::max(0.0, v)) * 255.0) / 255.0; }

}  // namespace

TEST_CASE("scanning a root lists sequences sorted and skips non-clips") {
  TempRoot tr("scan");
  io::write_sequence(tr.sub("seq_b"), indexed_frames(6, 12, 10));
  io::write_sequence(tr.sub("seq_a"), indexed_frames(7, 12, 10));
  fs::create_directories(tr.sub("no_frames_here"));
  std::ofstream(tr.root / "notes.txt") << "not a sequence\n";

  const auto m = data::scan_dataset(tr.str(), 5, 8);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].id == "seq_a");
  CHECK(m.entries[1].id == "seq_b");
  CHECK(m.entries[0].frames == 7);
  CHECK(m.entries[1].frames == 6);
  CHECK(m.entries[0].height == 12);
  CHECK(m.entries[0].width == 10);
  CHECK(m.entries[0].channels == 3);
  CHECK(m.frames_per_sample == 5);
  CHECK(m.patch_size == 8);
}

TEST_CASE("scanning rejects malformed datasets with a pointed message") {
  SUBCASE("not a directory") {
    CHECK_THROWS_AS(data::scan_dataset("no_such_root_anywhere", 5, 8), std::runtime_error);
  }
  SUBCASE("no sequences at all") {
    TempRoot tr("empty");
    fs::create_directories(tr.sub("only_empty_dir"));
    CHECK_THROWS_WITH_AS(data::scan_dataset(tr.str(), 5, 8),
                         doctest::Contains("contains no sequences"), std::runtime_error);
  }
  SUBCASE("too few frames") {
    TempRoot tr("short");
    io::write_sequence(tr.sub("tiny"), indexed_frames(3, 12, 12));
    CHECK_THROWS_WITH_AS(data::scan_dataset(tr.str(), 5, 8), doctest::Contains("need at least 5"),
                         std::runtime_error);
  }
  SUBCASE("frames smaller than the patch") {
    TempRoot tr("small");
    io::write_sequence(tr.sub("thin"), indexed_frames(6, 12, 12));
    CHECK_THROWS_WITH_AS(data::scan_dataset(tr.str(), 5, 16),
                         doctest::Contains("smaller than the sampling patch"), std::runtime_error);
  }
  SUBCASE("mixed frame shapes") {
    TempRoot tr("mixed");
    io::write_sequence(tr.sub("warped"), indexed_frames(6, 12, 12));
    Image<double> odd;
    for (int c = 0; c < 3; ++c) odd.ch.push_back(Plane<double>::Constant(9, 12, 0.5));
    io::write_png((fs::path(tr.sub("warped")) / "00000099.png").string(), odd);
    CHECK_THROWS_WITH_AS(data::scan_dataset(tr.str(), 5, 8), doctest::Contains("mixed frame shapes"),
                         std::runtime_error);
  }
}

TEST_CASE("window sampling is uniform over sequences and contiguous in time") {
  TempRoot tr("sample");
  io::write_sequence(tr.sub("alpha"), indexed_frames(16, 16, 16));
  // Distinguish the clips by a constant offset of 32/255 on every frame.
  {
    auto seq = indexed_frames(16, 16, 16);
    for (auto& f : seq.frames)
      for (auto& p : f.ch) p.array() += 32.0 / 255.0;
    io::write_sequence(tr.sub("bravo"), seq);
  }
  data::WindowSampler sampler(data::scan_dataset(tr.str(), 5, 8));

  Rng rng(91);
  int from_bravo = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto win = sampler.sample(rng);
    REQUIRE(win.length() == 5);
    REQUIRE(win.frames[0].height() == 8);
    REQUIRE(win.frames[0].width() == 8);
    const double v0 = win.frames[0].ch[0](0, 0);
    const bool bravo = v0 >= 32.0 / 255.0 - 1e-9;
    from_bravo += bravo;
    const double base = bravo ? 32.0 / 255.0 : 0.0;
    // Frames advance by exactly one index inside a window.
    for (int k = 0; k < 5; ++k)
      REQUIRE(win.frames[k].ch[0](0, 0) == doctest::Approx(base + (std::lround(v0 * 255 - base * 255) + k) / 255.0).epsilon(1e-12));
  }
  // Both clips are drawn about equally often.
  CHECK(from_bravo > draws / 2 - 300);
  CHECK(from_bravo < draws / 2 + 300);
}

TEST_CASE("window sampling visits different patch positions") {
  TempRoot tr("positions");
  // Pixel value encodes the absolute position so a patch reveals its origin.
  FrameSequence<double> seq;
  seq.tier = Tier::kHr;
  for (int t = 0; t < 6; ++t) {
    Image<double> im;
    Plane<double> p(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) p(y, x) = (y * 16 + x) / 255.0;
    for (int c = 0; c < 3; ++c) im.ch.push_back(p);
    seq.frames.push_back(im);
  }
  io::write_sequence(tr.sub("grid"), seq);
  data::WindowSampler sampler(data::scan_dataset(tr.str(), 5, 8));
  Rng rng(92);
  std::set<long> origins;
  for (int i = 0; i < 64; ++i)
    origins.insert(std::lround(sampler.sample(rng).frames[0].ch[0](0, 0) * 255.0));
  CHECK(origins.size() > 8);
}

TEST_CASE("degradation triples survive the disk round trip") {
  TempRoot tr("triple");
  const auto hr = testutil::scene(93, 4, 16, 16);
  const kernels::KernelSpec spec{5, 0.9, 1.7, -0.4};
  auto t = degrade::make_task_triple(hr, spec, 2, degrade::DownsampleMode::kDirect);
  data::write_triple(tr.sub("task0"), t);
  const auto back = data::read_triple(tr.sub("task0"));

  CHECK(back.scale == 2);
  CHECK(back.mode == degrade::DownsampleMode::kDirect);
  CHECK(back.kernel_spec.size == 5);
  // The kernel text format is exact for doubles.
  CHECK(back.kernel_spec.sigma1 == spec.sigma1);
  CHECK(back.kernel_spec.sigma2 == spec.sigma2);
  CHECK(back.kernel_spec.theta == spec.theta);
  REQUIRE(back.kernel.rows() == t.kernel.rows());
  CHECK((back.kernel - t.kernel).cwiseAbs().maxCoeff() == 0.0);

  CHECK(back.hr.tier == Tier::kHr);
  CHECK(back.lr.tier == Tier::kLr);
  CHECK(back.slr.tier == Tier::kSlr);
  REQUIRE(back.hr.length() == 4);
  REQUIRE(back.lr.frames[0].height() == 8);
  REQUIRE(back.slr.frames[0].height() == 4);
  // Pixels come back exactly as their 8-bit quantization.
  for (const auto* pair : {&t.hr, &t.lr, &t.slr}) {
    const auto& stored = pair == &t.hr ? back.hr : (pair == &t.lr ? back.lr : back.slr);
    for (int f = 0; f < pair->length(); ++f)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < pair->frames[f].height(); ++y)
          for (int x = 0; x < pair->frames[f].width(); ++x)
            REQUIRE(stored.frames[f].ch[c](y, x) == quantized(pair->frames[f].ch[c](y, x)));
  }

  // The downsample mode tag rides along even when it is not the default.
  t.mode = degrade::DownsampleMode::kBicubicAfterBlur;
  data::write_triple(tr.sub("task1"), t);
  CHECK(data::read_triple(tr.sub("task1")).mode == degrade::DownsampleMode::kBicubicAfterBlur);

  // Partial directories are called out by their missing piece.
  fs::create_directories(tr.sub("hollow"));
  CHECK_THROWS_WITH_AS(data::read_triple(tr.sub("hollow")), doctest::Contains("kernel.txt"),
                       std::runtime_error);
  fs::create_directories(tr.sub("half"));
  std::ofstream(fs::path(tr.sub("half")) / "kernel.txt")
      << kernels::serialize_kernel(t.kernel_spec, t.kernel);
  CHECK_THROWS_WITH_AS(data::read_triple(tr.sub("half")), doctest::Contains("meta.json"),
                       std::runtime_error);
}
