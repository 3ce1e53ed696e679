#include "edgevit/op_counter.hpp"

namespace edgevit {

namespace {
thread_local MacCounterScope* t_active = nullptr;
thread_local MacTally* t_tally = nullptr;
}  // namespace

std::string_view mac_kind_name(MacKind kind) {
  switch (kind) {
    case MacKind::kConv: return "conv";
    case MacKind::kLinear: return "linear";
    case MacKind::kAttnScores: return "attn_scores";
    case MacKind::kAttnValues: return "attn_values";
    case MacKind::kTransposedConv: return "transposed_conv";
    case MacKind::kCount_: break;
  }
  return "unknown";
}

std::uint64_t MacTally::total() const {
  std::uint64_t t = 0;
  for (auto v : by_kind) t += v;
  return t;
}

MacCounterScope::MacCounterScope() : previous_(t_active) {
  t_active = this;
  t_tally = &tally_;
}

MacCounterScope::~MacCounterScope() {
  t_active = previous_;
  t_tally = previous_ ? const_cast<MacTally*>(&previous_->tally()) : nullptr;
}

void record_macs(MacKind kind, std::uint64_t macs) noexcept {
  if (t_tally) t_tally->by_kind[static_cast<std::size_t>(kind)] += macs;
}

}  // namespace edgevit
