#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgevit/model.hpp"
#include "json.hpp"

namespace edgevit::analysis {

/// 1 MAC = one multiply-add = one FLOP. Biases, normalization, GeLU,
/// softmax, pooling and bilinear interpolation contribute no MACs.
struct CostRow {
  std::string path;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

struct CostReport {
  std::string variant;
  std::int64_t input_size = 0;
  std::int64_t total_params = 0;
  std::int64_t total_macs = 0;
  std::vector<CostRow> breakdown;

  /// Totals recomputed from the rows.
  std::int64_t sum_params() const;
  std::int64_t sum_macs() const;
};

/// One row per parameter tensor, named as in parameter_layout().
CostReport count_params(const VariantSpec& spec);

/// One row per executed operator at the given square input size, carrying
/// the parameters that operator owns. Shared FFN rows own no parameters.
CostReport count_macs(const VariantSpec& spec, std::int64_t input_size);

/// Delegate-attention score and weighted-sum MACs for one block on an h x w
/// grid: 2 * T^2 * c with T = ceil(h/r) * ceil(w/r).
std::int64_t delegate_attention_macs(std::int64_t h, std::int64_t w, std::int64_t c,
                                     std::int64_t r);

struct LglCostTerms {
  std::int64_t local = 0;        // k^2 h w c
  std::int64_t attention = 0;    // h^2 w^2 c / r^4
  std::int64_t propagation = 0;  // r^2 h w c
  std::int64_t total() const { return local + attention + propagation; }
};

/// Closed-form spatial-mixing cost of one LGL block. The attention term is
/// floor(h^2 w^2 c / r^4); it equals delegate_attention_macs() divided by
/// kAttentionMacsPerFormulaUnit whenever r divides h and w.
LglCostTerms lgl_cost_formula(std::int64_t h, std::int64_t w, std::int64_t c, std::int64_t k,
                              std::int64_t r);

/// Constant relating delegate_attention_macs() to the formula's attention
/// term: scores and weighted values each cost T^2 c MACs.
inline constexpr std::int64_t kAttentionMacsPerFormulaUnit = 2;

/// Top-1 accuracy (percent) per millijoule of per-inference energy.
/// Throws DomainError if energy_mj <= 0.
double efficiency_metric(double top1_percent, double energy_mj);

std::string to_text(const CostReport& report, bool with_breakdown);
nlohmann::json to_json(const CostReport& report, bool with_breakdown);

}  // namespace edgevit::analysis
