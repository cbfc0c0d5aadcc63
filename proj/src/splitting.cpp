#include "dbmc/splitting.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace dbmc {

std::string_view strategy_name(Strategy s) { return s == Strategy::ProofGuided ? "proof-guided" : "random"; }

Strategy parse_strategy(std::string_view s) {
  if (s == "proof-guided") return Strategy::ProofGuided;
  if (s == "random") return Strategy::Random;
  throw std::invalid_argument("unknown strategy '" + std::string(s) + "'");
}

std::size_t split_score(const DynamicCallsite& c, const std::set<DynamicCallsite>& uc) {
  // Members of c's subtree form a contiguous range starting at c.
  std::size_t n = 0;
  for (auto it = uc.lower_bound(c); it != uc.end() && c.is_prefix_of(*it); ++it) ++n;
  return n;
}

std::optional<DynamicCallsite> choose_split_proof_guided(const CallTree& tree, const std::set<DynamicCallsite>& uc,
                                                         const std::set<DynamicCallsite>& excluded) {
  std::optional<DynamicCallsite> best;
  std::size_t best_score = 0;
  for (const auto& c : uc) {
    if (c.is_root() || !tree.count(c) || excluded.count(c)) continue;
    std::size_t s = split_score(c, uc);
    if (!best || s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

std::optional<DynamicCallsite> choose_split_random(const CallTree& tree, std::mt19937_64& rng,
                                                   const std::set<DynamicCallsite>& excluded) {
  std::vector<DynamicCallsite> candidates;
  for (const auto& c : tree)
    if (!c.is_root() && !excluded.count(c)) candidates.push_back(c);
  if (candidates.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

std::optional<DynamicCallsite> choose_split(const CallTree& tree, const std::set<DynamicCallsite>& uc,
                                            Strategy strategy, std::mt19937_64& rng,
                                            const std::set<DynamicCallsite>& excluded) {
  if (strategy == Strategy::ProofGuided) return choose_split_proof_guided(tree, uc, excluded);
  return choose_split_random(tree, rng, excluded);
}

double compute_delta(std::size_t queue_len, std::size_t idle_count, double delta_c, double k) {
  if (idle_count == 0) return k * delta_c;
  double d = static_cast<double>(queue_len) / static_cast<double>(idle_count) * delta_c;
  return std::max(d, kMinDelta);
}

}  // namespace dbmc
