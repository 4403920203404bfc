#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "colinf/mathcore/tape.hpp"
#include "colinf/rng.hpp"

namespace colinf {

/// One logical sidelink: payloads are cut into transport blocks of `tbs`
/// floating-point values, each lost independently with probability `per`.
/// Lost values read as `fill`. No retransmissions.
struct ErasureChannelCfg {
  std::size_t tbs = 40;
  double per = 0.1;
  double fill = 0.0;

  void validate() const;
};

struct TransmissionRecord {
  std::size_t sent = 0;
  std::size_t erased = 0;
  std::size_t payload_len = 0;
};

struct Transmission {
  std::vector<double> received;
  TransmissionRecord record;
};

enum class MessageKind : std::uint64_t { query = 1, feature = 2 };

inline std::size_t block_count(std::size_t len, std::size_t tbs) { return (len + tbs - 1) / tbs; }

std::vector<std::vector<double>> segment(std::span<const double> payload, std::size_t tbs);

/// One uniform draw per block, in block order; erased when u < per.
std::vector<std::uint8_t> draw_erasures(std::size_t blocks, double per, Rng& stream);

Transmission transmit(std::span<const double> payload, const ErasureChannelCfg& cfg, Rng& stream);

/// Stream for the link sender -> receiver carrying `kind` in `round`.
Rng link_stream(std::uint64_t master_seed, std::uint64_t round, std::size_t sender,
                std::size_t receiver, MessageKind kind);

/// Erasure flags of every ordered off-diagonal link for `rounds` consecutive
/// rounds starting at `first_round`, each carrying a `dim`-value message. The
/// draws are exactly those `transmit` makes on the same link streams.
LinkMask draw_link_mask(const ErasureChannelCfg& cfg, std::uint64_t master_seed,
                        std::uint64_t first_round, std::size_t rounds, std::size_t nodes,
                        std::size_t dim, MessageKind kind);

}  // namespace colinf
