#pragma once

#include <optional>
#include <random>
#include <set>
#include <string>

#include "dbmc/program.hpp"

namespace dbmc {

enum class Strategy { ProofGuided, Random };

std::string_view strategy_name(Strategy s);
/// Accepts "proof-guided" and "random"; throws std::invalid_argument.
Strategy parse_strategy(std::string_view s);

/// Number of uc members in the subtree rooted at `c` (c included).
std::size_t split_score(const DynamicCallsite& c, const std::set<DynamicCallsite>& uc);

/// Candidates are (uc ∩ tree) minus the root and `excluded`; the highest
/// score wins, ties go to the smallest site in canonical order.
std::optional<DynamicCallsite> choose_split_proof_guided(const CallTree& tree, const std::set<DynamicCallsite>& uc,
                                                         const std::set<DynamicCallsite>& excluded = {});

/// Uniform over the tree minus the root and `excluded`.
std::optional<DynamicCallsite> choose_split_random(const CallTree& tree, std::mt19937_64& rng,
                                                   const std::set<DynamicCallsite>& excluded = {});

std::optional<DynamicCallsite> choose_split(const CallTree& tree, const std::set<DynamicCallsite>& uc,
                                            Strategy strategy, std::mt19937_64& rng,
                                            const std::set<DynamicCallsite>& excluded = {});

inline constexpr double kDefaultDeltaC = 0.5;
inline constexpr double kDefaultK = 20.0;
inline constexpr double kMinDelta = 0.05;

/// Split interval for a client with `queue_len` queued partitions while
/// `idle_count` clients wait: queue_len / idle_count * delta_c, floored at
/// kMinDelta, or K * delta_c when nobody is idle.
double compute_delta(std::size_t queue_len, std::size_t idle_count, double delta_c = kDefaultDeltaC,
                     double k = kDefaultK);

struct SplitPolicy {
  double delta = kDefaultDeltaC;
  double delta_c = kDefaultDeltaC;
  double k = kDefaultK;
  double last_split_at = 0.0;

  bool time_to_split(double now) const { return now - last_split_at >= delta; }
};

}  // namespace dbmc
