#include <sstream>

#include "doctest.h"
#include "edgevit/analysis.hpp"
#include "edgevit/errors.hpp"
#include "edgevit/model.hpp"
#include "edgevit/parallel.hpp"
#include "edgevit/variant_json.hpp"

using namespace edgevit;

namespace {

VariantSpec tiny_spec() {
  VariantSpec s;
  s.name = "tiny";
  s.channels = {8, 16, 16, 32};
  s.blocks = {1, 1, 1, 1};
  s.heads = {1, 2, 2, 4};
  s.num_classes = 10;
  s.input_size = 32;
  return s;
}

}  // namespace

TEST_CASE("presets") {
  const auto xxs = build_variant("xxs");
  CHECK(xxs.channels == StageArray{36, 72, 144, 288});
  CHECK(xxs.blocks == StageArray{1, 1, 3, 2});
  CHECK(build_variant("s").blocks == StageArray{1, 2, 3, 2});
  CHECK(build_variant("xs").channels == StageArray{48, 96, 240, 384});
  for (const auto* name : {"xxs", "xs", "s"}) {
    const auto v = build_variant(name);
    CHECK(v.sample_rates == StageArray{4, 2, 2, 1});
    CHECK_NOTHROW(v.validate());
  }
  CHECK_THROWS_AS(build_variant("m"), ConfigError);
}

TEST_CASE("spec validation") {
  auto s = build_variant("xxs");
  s.heads[0] = 5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = build_variant("xxs");
  s.sample_rates[1] = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = build_variant("xxs");
  s.attn_mode = lgl::AttnMode::kKvDownsampled;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.propagation = lgl::Propagation::kNone;
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("init_params") {
  const auto spec = tiny_spec();
  const auto a = init_params(spec, 42);
  const auto b = init_params(spec, 42);
  const auto c = init_params(spec, 43);
  CHECK(a.bitwise_equal(b));
  CHECK_FALSE(a.bitwise_equal(c));
  const auto layout = parameter_layout(spec);
  REQUIRE(a.size() == layout.size());
  for (const auto& info : layout) {
    const Tensor& t = a.get(info.name);
    CHECK(t.shape() == info.shape);
    const float bound = std::sqrt(1.0f / static_cast<float>(info.fan_in));
    for (float v : t.data()) {
      switch (info.init) {
        case ParamInit::kOne: CHECK(v == 1.0f); break;
        case ParamInit::kZero: CHECK(v == 0.0f); break;
        case ParamInit::kUniform: CHECK(std::fabs(v) <= bound); break;
      }
    }
  }
  CHECK(a.get("head.norm.gamma")[0] == 1.0f);
}

TEST_CASE("parameter names line up with count_params") {
  for (const auto* name : {"xxs", "xs", "s"}) {
    const auto spec = build_variant(name);
    const auto layout = parameter_layout(spec);
    const auto store = init_params(spec, 0);
    const auto report = analysis::count_params(spec);
    CHECK(store.total_elements() == report.total_params);
    std::int64_t sum = 0;
    for (const auto& info : layout) sum += shape_numel(info.shape);
    CHECK(sum == report.total_params);
  }
}

TEST_CASE("weights file round trip and errors") {
  const auto store = init_params(tiny_spec(), 5);
  std::stringstream ss;
  write_weights(ss, store);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "EVWT");
  std::istringstream in(bytes);
  CHECK(read_weights(in).bitwise_equal(store));

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad);
  CHECK_THROWS_AS(read_weights(bad_in), FormatError);

  std::istringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_weights(cut), FormatError);

  WeightStore dup;
  dup.insert("a", Tensor({1}));
  CHECK_THROWS_AS(dup.insert("a", Tensor({1})), ArgumentError);
  CHECK_THROWS_AS(dup.get("b"), MissingParameterError);
}

TEST_CASE("missing parameter loads but fails at forward") {
  const auto spec = tiny_spec();
  auto store = init_params(spec, 1);
  REQUIRE(store.erase("stage3.block1.attn.k.weight"));
  std::stringstream ss;
  write_weights(ss, store);
  const auto loaded = read_weights(ss);
  try {
    forward(spec, loaded, random_input(spec, 32, 0));
    FAIL("expected a missing-parameter error");
  } catch (const MissingParameterError& e) {
    CHECK(e.name() == "stage3.block1.attn.k.weight");
  }
}

TEST_CASE("wrongly shaped parameter is a dimension error naming it") {
  const auto spec = tiny_spec();
  auto store = init_params(spec, 1);
  store.get_mut("head.fc.weight") = Tensor({32, 11});
  try {
    Model m(spec, store);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("head.fc.weight") != std::string::npos);
  }
}

TEST_CASE("XXS stage plan at 224 and 256") {
  const auto spec = build_variant("xxs");
  const Model model(spec, init_params(spec, 7));
  ForwardTrace trace;
  const Tensor logits = model.forward(random_input(spec, 224, 7), &trace);
  CHECK(logits.shape() == Shape{1, 1000});
  REQUIRE(trace.stage_shapes.size() == 4);
  CHECK(trace.stage_shapes[0] == Shape{1, 56, 56, 36});
  CHECK(trace.stage_shapes[1] == Shape{1, 28, 28, 72});
  CHECK(trace.stage_shapes[2] == Shape{1, 14, 14, 144});
  CHECK(trace.stage_shapes[3] == Shape{1, 7, 7, 288});
  CHECK(trace.block_shapes.size() == 7);
  for (float v : logits.data()) CHECK(std::isfinite(v));

  model.forward(random_input(spec, 256, 7), &trace);
  CHECK(trace.stage_shapes[0][1] == 64);
  CHECK(trace.stage_shapes[1][1] == 32);
  CHECK(trace.stage_shapes[2][1] == 16);
  CHECK(trace.stage_shapes[3][1] == 8);
}

TEST_CASE("non-divisible input sizes are padded") {
  const auto spec = tiny_spec();
  const Model model(spec, init_params(spec, 2));
  ForwardTrace trace;
  CHECK(model.forward(random_input(spec, 30, 1), &trace).shape() == Shape{1, 10});
  CHECK(trace.stage_shapes[0][1] == 8);
  CHECK(trace.stage_shapes[3][1] == 1);
}

TEST_CASE("zero branches reduce the model to stem, downsamplers and head") {
  for (const auto branch : {lgl::LocalBranch::kAlways, lgl::LocalBranch::kSkipAtFullRate}) {
    auto spec = tiny_spec();
    spec.local_branch = branch;
    auto store = init_params(spec, 3);
    zero_branch_params(spec, store);
    const Model model(spec, store);
    const Tensor x = random_input(spec, 32, 4);
    CHECK(model.forward(x).bitwise_equal(model.forward_without_blocks(x)));
    Tensor h = model.embed(0, x);
    CHECK(model.block(0, 0, h).bitwise_equal(h));
  }
}

TEST_CASE("forward is deterministic across thread counts") {
  const auto spec = tiny_spec();
  const Model model(spec, init_params(spec, 9));
  const Tensor x = random_input(spec, 32, 9);
  const Tensor a = model.forward(x);
  set_num_threads(3);
  const Tensor b = model.forward(x);
  set_num_threads(1);
  CHECK(b.bitwise_equal(a));
}

TEST_CASE("variant JSON") {
  const auto s = build_variant("s");
  const auto back = variant_from_json(variant_to_json(s));
  CHECK(variant_to_json(back) == variant_to_json(s));
  const auto custom = variant_from_json(nlohmann::json{{"base", "xxs"}, {"sampler", "avg"}, {"num_classes", 10}});
  CHECK(custom.channels == StageArray{36, 72, 144, 288});
  CHECK(custom.sampler == lgl::Sampler::kAvg);
  CHECK(custom.num_classes == 10);
  CHECK_THROWS_AS(variant_from_json(nlohmann::json{{"base", "xxs"}, {"heads", {5, 2, 4, 8}}}), ConfigError);
  CHECK_THROWS_AS(variant_from_json(nlohmann::json{{"base", "xxs"}, {"sampler", "median"}}), ConfigError);
}
