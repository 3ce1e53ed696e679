#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace edgevit {

/// Categories of multiply-adds recorded while kernels execute.
enum class MacKind : std::uint8_t {
  kConv,            // dense, grouped and depthwise convolution
  kLinear,          // token-wise affine maps, including attention projections
  kAttnScores,      // Q.K^T per head
  kAttnValues,      // A.V per head
  kTransposedConv,  // local propagation
  kCount_
};

std::string_view mac_kind_name(MacKind kind);

struct MacTally {
  std::array<std::uint64_t, static_cast<std::size_t>(MacKind::kCount_)> by_kind{};

  std::uint64_t operator[](MacKind k) const { return by_kind[static_cast<std::size_t>(k)]; }
  std::uint64_t total() const;
};

/// While alive, kernels on this thread add the MACs they execute to the
/// scope's tally. Scopes nest; the innermost one receives the counts.
class MacCounterScope {
 public:
  MacCounterScope();
  ~MacCounterScope();
  MacCounterScope(const MacCounterScope&) = delete;
  MacCounterScope& operator=(const MacCounterScope&) = delete;

  const MacTally& tally() const noexcept { return tally_; }

 private:
  MacTally tally_;
  MacCounterScope* previous_;
};

/// Called by kernels; no-op when no scope is active.
void record_macs(MacKind kind, std::uint64_t macs) noexcept;

}  // namespace edgevit
