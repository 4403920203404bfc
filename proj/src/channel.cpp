#include "colinf/channel.hpp"

#include <algorithm>
#include <string>

#include "colinf/error.hpp"

namespace colinf {

void ErasureChannelCfg::validate() const {
  if (tbs < 1) throw ConfigError("channel: transport block size must be >= 1");
  if (!(per >= 0.0 && per <= 1.0))
    throw ConfigError("channel: packet error rate " + std::to_string(per) + " outside [0, 1]");
}

std::vector<std::vector<double>> segment(std::span<const double> payload, std::size_t tbs) {
  if (tbs < 1) throw ConfigError("segment: transport block size must be >= 1");
  std::vector<std::vector<double>> blocks;
  blocks.reserve(block_count(payload.size(), tbs));
  for (std::size_t start = 0; start < payload.size(); start += tbs) {
    const auto len = std::min(tbs, payload.size() - start);
    auto chunk = payload.subspan(start, len);
    blocks.emplace_back(chunk.begin(), chunk.end());
  }
  return blocks;
}

std::vector<std::uint8_t> draw_erasures(std::size_t blocks, double per, Rng& stream) {
  std::vector<std::uint8_t> lost(blocks, 0);
  for (auto& l : lost) l = uniform01(stream) < per ? 1 : 0;
  return lost;
}

Transmission transmit(std::span<const double> payload, const ErasureChannelCfg& cfg, Rng& stream) {
  cfg.validate();
  Transmission tx;
  tx.received.assign(payload.begin(), payload.end());
  const auto blocks = block_count(payload.size(), cfg.tbs);
  const auto lost = draw_erasures(blocks, cfg.per, stream);
  for (std::size_t b = 0; b < blocks; ++b) {
    if (!lost[b]) continue;
    ++tx.record.erased;
    const auto start = b * cfg.tbs;
    const auto end = std::min(start + cfg.tbs, payload.size());
    std::fill(tx.received.begin() + static_cast<std::ptrdiff_t>(start),
              tx.received.begin() + static_cast<std::ptrdiff_t>(end), cfg.fill);
  }
  tx.record.sent = blocks;
  tx.record.payload_len = payload.size();
  return tx;
}

Rng link_stream(std::uint64_t master_seed, std::uint64_t round, std::size_t sender,
                std::size_t receiver, MessageKind kind) {
  const auto stream = kind == MessageKind::query ? StreamKind::query : StreamKind::feature;
  return make_stream(master_seed, stream, round, sender, receiver);
}

LinkMask draw_link_mask(const ErasureChannelCfg& cfg, std::uint64_t master_seed,
                        std::uint64_t first_round, std::size_t rounds, std::size_t nodes,
                        std::size_t dim, MessageKind kind) {
  cfg.validate();
  LinkMask mask = LinkMask::lossless(rounds, nodes, dim, cfg.tbs, cfg.fill);
  if (cfg.per == 0.0) return mask;
  const auto blocks = mask.blocks();
  mask.erased.assign(rounds * nodes * nodes * blocks, 0);
  for (std::size_t r = 0; r < rounds; ++r)
    for (std::size_t receiver = 0; receiver < nodes; ++receiver)
      for (std::size_t sender = 0; sender < nodes; ++sender) {
        if (sender == receiver) continue;
        auto stream = link_stream(master_seed, first_round + r, sender, receiver, kind);
        const auto lost = draw_erasures(blocks, cfg.per, stream);
        std::copy(lost.begin(), lost.end(), mask.erased.begin() + static_cast<std::ptrdiff_t>(mask.offset(r, receiver, sender)));
      }
  return mask;
}

}  // namespace colinf
