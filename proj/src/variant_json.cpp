#include "edgevit/variant_json.hpp"

#include <fstream>

#include "edgevit/errors.hpp"

namespace edgevit {

namespace {

StageArray stage_array(const nlohmann::json& j, const char* key) {
  if (!j.is_array() || j.size() != kNumStages) {
    throw ConfigError(std::string("'") + key + "' must be an array of 4 integers");
  }
  StageArray a{};
  for (std::size_t i = 0; i < kNumStages; ++i) a[i] = j[i].get<std::int64_t>();
  return a;
}

}  // namespace

nlohmann::json variant_to_json(const VariantSpec& s) {
  return {
      {"name", s.name},
      {"channels", s.channels},
      {"blocks", s.blocks},
      {"heads", s.heads},
      {"sample_rates", s.sample_rates},
      {"in_channels", s.in_channels},
      {"num_classes", s.num_classes},
      {"input_size", s.input_size},
      {"stem_kernel", s.stem_kernel},
      {"downsample_kernel", s.downsample_kernel},
      {"local_kernel", s.local_kernel},
      {"ffn_ratio", s.ffn_ratio},
      {"sampler", lgl::to_string(s.sampler)},
      {"propagation", lgl::to_string(s.propagation)},
      {"attention", lgl::to_string(s.attn_mode)},
      {"dual_cpe", s.dual_cpe},
      {"shared_ffn", s.shared_ffn},
      {"local_branch", lgl::to_string(s.local_branch)},
  };
}

VariantSpec variant_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("variant spec must be a JSON object");
  try {
    VariantSpec s = j.contains("base") ? build_variant(j.at("base").get<std::string>())
                                       : VariantSpec{};
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (j.contains("channels")) s.channels = stage_array(j["channels"], "channels");
    if (j.contains("blocks")) s.blocks = stage_array(j["blocks"], "blocks");
    if (j.contains("heads")) s.heads = stage_array(j["heads"], "heads");
    if (j.contains("sample_rates")) s.sample_rates = stage_array(j["sample_rates"], "sample_rates");
    auto integer = [&](const char* key, std::int64_t& dst) {
      if (j.contains(key)) dst = j[key].get<std::int64_t>();
    };
    integer("in_channels", s.in_channels);
    integer("num_classes", s.num_classes);
    integer("input_size", s.input_size);
    integer("stem_kernel", s.stem_kernel);
    integer("downsample_kernel", s.downsample_kernel);
    integer("local_kernel", s.local_kernel);
    integer("ffn_ratio", s.ffn_ratio);
    if (j.contains("sampler")) s.sampler = lgl::parse_sampler(j["sampler"].get<std::string>());
    if (j.contains("propagation")) {
      s.propagation = lgl::parse_propagation(j["propagation"].get<std::string>());
    }
    if (j.contains("attention")) s.attn_mode = lgl::parse_attn_mode(j["attention"].get<std::string>());
    if (j.contains("dual_cpe")) s.dual_cpe = j["dual_cpe"].get<bool>();
    if (j.contains("shared_ffn")) s.shared_ffn = j["shared_ffn"].get<bool>();
    if (j.contains("local_branch")) {
      s.local_branch = lgl::parse_local_branch(j["local_branch"].get<std::string>());
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid variant spec: ") + e.what());
  }
}

VariantSpec load_variant_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  try {
    return variant_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("spec file " + path.string() + ": " + e.what());
  }
}

}  // namespace edgevit
