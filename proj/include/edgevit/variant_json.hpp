#pragma once

#include <filesystem>

#include "edgevit/model.hpp"
#include "json.hpp"

namespace edgevit {

nlohmann::json variant_to_json(const VariantSpec& spec);

/// Missing keys take VariantSpec defaults; a "base" key names a preset
/// (xxs|xs|s) to start from. The result is validated.
VariantSpec variant_from_json(const nlohmann::json& j);

VariantSpec load_variant_file(const std::filesystem::path& path);

}  // namespace edgevit
