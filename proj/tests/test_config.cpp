// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dynavsr/config.hpp"
#include "testutil.hpp"

using namespace dynavsr;
using nlohmann::json;

TEST_CASE("an empty document inherits every default") {
  const auto c = cfg::Config::from_json(json::object());
  CHECK(c.seed() == 0);
  CHECK(c.scale() == 2);
  CHECK(c.workers() == 1);
  CHECK(c.str("backbone", "name") == "tiny");
  CHECK(c.num("data", "patch_size") == 64);
  CHECK(c.fnum("meta", "alpha") == 1e-5);
  CHECK(c.flag("meta", "second_order") == true);
  CHECK(c.num("kernel", "size") == 13);
  // Structured accessors agree with the raw tree.
  CHECK(c.mfdn_arch().width == 32);
  CHECK(c.backbone_config().window_radius == 2);
  CHECK(c.backbone_config().scale == 2);  // scale injected from the top level
  CHECK(c.backbone_config().loss == nn::LossKind::kCharbonnier);
  CHECK(c.meta_config().meta_batch == 4);
  CHECK(c.meta_config().beta_decay.milestones == std::vector<long>{20000, 25000});
  CHECK(c.kernel_config().sigma_max == 2.0);
  // Negative crop sentinel resolves to the scale factor.
  CHECK(c.eval_crop_border() == 2);
}

TEST_CASE("partial documents merge with defaults and keep their own values") {
  json j;
  j["scale"] = 4;
  j["meta"]["alpha"] = 3e-4;
  const auto c = cfg::Config::from_json(j);
  CHECK(c.scale() == 4);
  CHECK(c.fnum("meta", "alpha") == 3e-4);
  CHECK(c.fnum("meta", "beta") == 1e-5);  // untouched sibling keeps its default
  CHECK(c.eval_crop_border() == 4);
  CHECK(c.backbone_config().scale == 4);
}

TEST_CASE("unknown keys and wrong types are rejected with dotted paths") {
  json bad;
  bad["meta"]["alhpa"] = 1e-4;  // typo
  CHECK_THROWS_WITH_AS(cfg::Config::from_json(bad), doctest::Contains("meta.alhpa"),
                       std::invalid_argument);
  json wrong;
  wrong["meta"]["alpha"] = "fast";
  CHECK_THROWS_WITH_AS(cfg::Config::from_json(wrong), doctest::Contains("meta.alpha"),
                       std::invalid_argument);
  json top;
  top["scael"] = 2;
  CHECK_THROWS_WITH_AS(cfg::Config::from_json(top), doctest::Contains("scael"),
                       std::invalid_argument);
}

TEST_CASE("command-line overrides parse JSON values and fall back to strings") {
  auto c = cfg::Config::from_json(json::object());
  c.apply_override("meta.inner_steps=5");
  CHECK(c.meta_config().inner_steps == 5);
  c.apply_override("meta.second_order=false");
  CHECK(c.meta_config().second_order == false);
  c.apply_override("backbone.name=tiny");  // unquoted string falls back
  CHECK(c.str("backbone", "name") == "tiny");
  c.apply_override("run.out_dir=runs/exp1");
  CHECK(c.str("run", "out_dir") == "runs/exp1");
  c.apply_override("meta.beta_decay_milestones=[5,9]");
  CHECK(c.meta_config().beta_decay.milestones == std::vector<long>{5, 9});

  CHECK_THROWS_AS(c.apply_override("no_equals_sign"), std::invalid_argument);
  CHECK_THROWS_AS(c.apply_override("=5"), std::invalid_argument);
  CHECK_THROWS_AS(c.apply_override("meta.alhpa=1"), std::invalid_argument);
  // Overrides that violate the validated schema are rejected too.
  CHECK_THROWS_AS(c.apply_override("meta.inner_steps=nope"), std::invalid_argument);
}

TEST_CASE("range validation catches unusable settings") {
  for (const char* kv : {"scale=0", "kernel.size=12", "backbone.window_radius=-1",
                         "meta.inner_steps=0", "meta.meta_batch=0", "workers=0"}) {
    auto c = cfg::Config::from_json(json::object());
    CAPTURE(kv);
    CHECK_THROWS_AS(c.apply_override(kv), std::invalid_argument);
  }
  json j;
  j["kernel"]["size"] = 4;
  CHECK_THROWS_AS(cfg::Config::from_json(j), std::invalid_argument);
}

TEST_CASE("the fingerprint tracks the model and ignores run bookkeeping") {
  auto base = cfg::Config::from_json(json::object());
  const auto fp = base.fingerprint();
  CHECK(fp.size() == 16);  // 64-bit hash in hex

  // Run-local knobs leave the fingerprint alone.
  auto c1 = base;
  c1.apply_override("run.out_dir=elsewhere");
  c1.apply_override("meta.total_iters=17");
  c1.apply_override("eval.frames=3");
  c1.apply_override("seed=99");
  CHECK(c1.fingerprint() == fp);

  // Anything that changes checkpoint compatibility must change it.
  for (const char* kv : {"scale=4", "mfdn.width=16", "backbone.width=16", "backbone.window_radius=1",
                         "kernel.size=11", "kernel.sigma_max=1.5"}) {
    auto c2 = base;
    c2.apply_override(kv);
    CAPTURE(kv);
    CHECK(c2.fingerprint() != fp);
  }
}

TEST_CASE("configs load from disk and report unreadable or broken files") {
  namespace fs = std::filesystem;
  fs::remove_all("config_test_tmp");
  fs::create_directories("config_test_tmp");
  std::ofstream("config_test_tmp/ok.json") << R"({"scale": 2, "meta": {"alpha": 2e-5}})";
  const auto c = cfg::Config::load("config_test_tmp/ok.json");
  CHECK(c.fnum("meta", "alpha") == 2e-5);
  CHECK_THROWS_WITH_AS(cfg::Config::load("config_test_tmp/missing.json"),
                       doctest::Contains("cannot open"), std::runtime_error);
  std::ofstream("config_test_tmp/broken.json") << "{not json";
  CHECK_THROWS(cfg::Config::load("config_test_tmp/broken.json"));
  fs::remove_all("config_test_tmp");
}
