#include "edgevit/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "edgevit/errors.hpp"

namespace edgevit::analysis {

std::int64_t CostReport::sum_params() const {
  std::int64_t n = 0;
  for (const auto& r : breakdown) n += r.params;
  return n;
}

std::int64_t CostReport::sum_macs() const {
  std::int64_t n = 0;
  for (const auto& r : breakdown) n += r.macs;
  return n;
}

CostReport count_params(const VariantSpec& spec) {
  CostReport rep;
  rep.variant = spec.name;
  for (const auto& info : parameter_layout(spec)) {
    rep.breakdown.push_back({info.name, shape_numel(info.shape), 0});
  }
  rep.total_params = rep.sum_params();
  return rep;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

class MacWalker {
 public:
  explicit MacWalker(CostReport& rep) : rep_(rep) {}

  void row(std::string path, std::int64_t params, std::int64_t macs) {
    rep_.breakdown.push_back({std::move(path), params, macs});
  }
  // k x k conv producing `pixels` outputs.
  void conv(const std::string& path, std::int64_t k, std::int64_t cin_pg, std::int64_t cout,
            std::int64_t pixels) {
    row(path, k * k * cin_pg * cout + cout, k * k * cin_pg * cout * pixels);
  }
  void linear(const std::string& path, std::int64_t cin, std::int64_t cout, std::int64_t tokens,
              bool owns_params = true) {
    row(path, owns_params ? cin * cout + cout : 0, tokens * cin * cout);
  }
  void norm(const std::string& path, std::int64_t c) { row(path, 2 * c, 0); }

 private:
  CostReport& rep_;
};

}  // namespace

CostReport count_macs(const VariantSpec& spec, std::int64_t input_size) {
  spec.validate();
  if (input_size < 1) throw ConfigError("input size must be >= 1");
  CostReport rep;
  rep.variant = spec.name;
  rep.input_size = input_size;
  MacWalker m(rep);
  std::int64_t h = input_size, w = input_size, cin = spec.in_channels;
  for (std::size_t s = 0; s < kNumStages; ++s) {
    const auto c = spec.channels[s];
    const auto k = s == 0 ? spec.stem_kernel : spec.downsample_kernel;
    h = ceil_div(h, k);
    w = ceil_div(w, k);
    const auto n = h * w;
    const std::string sp = "stage" + std::to_string(s + 1);
    m.conv(sp + ".embed", k, cin, c, n);
    const auto cfg = spec.block_config(s);
    const auto hid = cfg.ffn_hidden();
    const auto r = cfg.sample_rate;
    const auto t = ceil_div(h, r) * ceil_div(w, r);
    for (std::int64_t b = 0; b < spec.blocks[s]; ++b) {
      const std::string p = sp + ".block" + std::to_string(b + 1);
      if (cfg.has_local_branch()) {
        if (cfg.dual_cpe) m.conv(p + ".cpe1", 3, 1, c, n);
        m.norm(p + ".norm1", c);
        m.conv(p + ".local_agg.pw1", 1, c, c, n);
        m.conv(p + ".local_agg.dw", cfg.local_kernel, 1, c, n);
        m.conv(p + ".local_agg.pw2", 1, c, c, n);
        m.norm(p + ".norm2", c);
        m.linear(p + ".ffn1.fc1", c, hid, n);
        m.linear(p + ".ffn1.fc2", hid, c, n);
      }
      m.conv(p + ".cpe2", 3, 1, c, n);
      m.norm(p + ".norm3", c);
      const bool sparse = cfg.attn_mode == lgl::AttnMode::kSparse;
      const auto queries = sparse ? t : n;
      m.linear(p + ".attn.q", c, c, queries);
      m.linear(p + ".attn.k", c, c, t);
      m.linear(p + ".attn.v", c, c, t);
      m.row(p + ".attn.scores", 0, queries * t * c);
      m.row(p + ".attn.values", 0, queries * t * c);
      m.linear(p + ".attn.o", c, c, queries);
      if (sparse) {
        if (cfg.propagation == lgl::Propagation::kTransposedConv) {
          m.row(p + ".local_prop", r * r * c + c, r * r * c * t);
        } else {
          m.row(p + ".local_prop", 0, 0);
        }
      }
      m.norm(p + ".norm4", c);
      const bool owns = !(cfg.shared_ffn && cfg.has_local_branch());
      m.linear(p + ".ffn2.fc1", c, hid, n, owns);
      m.linear(p + ".ffn2.fc2", hid, c, n, owns);
    }
    cin = c;
  }
  m.norm("head.norm", cin);
  m.linear("head.fc", cin, spec.num_classes, 1);
  rep.total_params = rep.sum_params();
  rep.total_macs = rep.sum_macs();
  return rep;
}

std::int64_t delegate_attention_macs(std::int64_t h, std::int64_t w, std::int64_t c,
                                     std::int64_t r) {
  const auto t = ceil_div(h, r) * ceil_div(w, r);
  return 2 * t * t * c;
}

LglCostTerms lgl_cost_formula(std::int64_t h, std::int64_t w, std::int64_t c, std::int64_t k,
                              std::int64_t r) {
  if (h < 1 || w < 1 || c < 1 || k < 1 || r < 1) {
    throw DomainError("lgl_cost_formula arguments must be positive");
  }
  const auto hw = h * w;
  const auto r2 = r * r;
  LglCostTerms t;
  t.local = k * k * hw * c;
  // Division last, so the result is exact whenever r^4 divides h^2 w^2 c.
  t.attention = hw * hw * c / (r2 * r2);
  t.propagation = r2 * hw * c;
  return t;
}

double efficiency_metric(double top1_percent, double energy_mj) {
  if (!(energy_mj > 0.0)) {
    throw DomainError("energy must be positive, got " + std::to_string(energy_mj) + " mJ");
  }
  return top1_percent / energy_mj;
}

std::string to_text(const CostReport& report, bool with_breakdown) {
  std::ostringstream os;
  os << "variant      " << report.variant << '\n';
  if (report.input_size) os << "input        " << report.input_size << 'x' << report.input_size << '\n';
  os << std::fixed << std::setprecision(3);
  os << "params       " << report.total_params << "  (" << report.total_params / 1e6 << " M)\n";
  if (report.input_size) {
    os << "macs         " << report.total_macs << "  (" << report.total_macs / 1e9 << " G)\n";
  }
  if (with_breakdown) {
    os << '\n' << std::left << std::setw(44) << "module" << std::right << std::setw(12) << "params"
       << std::setw(16) << "macs" << '\n';
    for (const auto& r : report.breakdown) {
      os << std::left << std::setw(44) << r.path << std::right << std::setw(12) << r.params
         << std::setw(16) << r.macs << '\n';
    }
  }
  return os.str();
}

nlohmann::json to_json(const CostReport& report, bool with_breakdown) {
  nlohmann::json j = {
      {"variant", report.variant},
      {"input_size", report.input_size},
      {"totals", {{"params", report.total_params}, {"macs", report.total_macs}}},
  };
  nlohmann::json rows = nlohmann::json::array();
  if (with_breakdown) {
    for (const auto& r : report.breakdown) {
      rows.push_back({{"module", r.path}, {"params", r.params}, {"macs", r.macs}});
    }
  }
  j["breakdown"] = std::move(rows);
  return j;
}

}  // namespace edgevit::analysis
