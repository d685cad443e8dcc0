#pragma once

// Declarative task environments: states, actions, stochastic transitions,
// episode-scheduled rewards, the appraisal event and the scripted test path.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "appraise_rl/rng.hpp"

namespace appraise_rl {

using StateId = std::string;
using ActionId = std::string;

// Action assumed for every non-terminal state without an `actions:` line.
inline constexpr std::string_view kDefaultAction = "frwd";

struct Outcome {
  StateId to;
  double prob = 1.0;
  bool operator==(const Outcome&) const = default;
};

struct TransitionRule {
  StateId from;
  ActionId action;
  std::vector<Outcome> outcomes;
  bool operator==(const TransitionRule&) const = default;
};

// `value` replaces the base reward during the final `final_k` training episodes.
struct RewardOverride {
  int final_k = 1;
  double value = 0.0;
  bool operator==(const RewardOverride&) const = default;
};

// Reward received on entering `entered`. States without a rule yield 0.
struct RewardRule {
  StateId entered;
  double base = 0.0;
  std::vector<RewardOverride> overrides;
  bool operator==(const RewardRule&) const = default;
};

// One (s, a, s') triple: a script step or the appraisal event.
struct Step {
  StateId from;
  ActionId action;
  StateId to;
  bool operator==(const Step&) const = default;
};

struct TransitionEvent {
  StateId from;
  ActionId action;
  StateId to;
  double reward = 0.0;
  int episode = 0;
  bool operator==(const TransitionEvent&) const = default;
};

struct MdpSpec {
  std::vector<StateId> states;
  std::vector<StateId> terminals;
  StateId initial;
  double discount = 0.9;
  std::map<StateId, std::vector<ActionId>> declared_actions;
  std::vector<TransitionRule> transitions;
  std::vector<RewardRule> rewards;
  std::optional<Step> appraisal_event;
  std::vector<Step> script;

  bool operator==(const MdpSpec&) const = default;

  bool has_state(std::string_view s) const;
  bool is_terminal(std::string_view s) const;
  /// Available actions; empty for terminals, {"frwd"} when not declared.
  std::vector<ActionId> actions_at(std::string_view s) const;
  const TransitionRule* find_rule(std::string_view from, std::string_view action) const;
  const RewardRule* find_reward(std::string_view entered) const;
  /// Longest schedule tail over all reward rules (0 when nothing is scheduled).
  int max_final_k() const;
  /// Probability of `to` under rule (from, action); 0 when absent.
  double probability(std::string_view from, std::string_view action, std::string_view to) const;
};

/// Parses syntax and resolves references; does not check the semantic invariants.
MdpSpec parse_mdp_document(std::string_view text);

/// Parses and validates. Throws ParseError or ValidationError.
MdpSpec parse_mdp(std::string_view text);

MdpSpec load_mdp(const std::filesystem::path& path, bool validate_spec = true);

/// Canonical text form; parse_mdp(serialize_mdp(s)) == s.
std::string serialize_mdp(const MdpSpec& spec);

/// Every violated invariant, one message each. Empty means valid.
std::vector<std::string> validate(const MdpSpec& spec);

/// Reward for entering `entered` during `episode` of a run of `total_episodes`.
/// Overrides apply when episode >= total - final_k; the shortest matching tail wins.
double reward_at(const MdpSpec& spec, int episode, int total_episodes, std::string_view entered);

StateId sample_transition(const MdpSpec& spec, std::string_view from, std::string_view action, Rng& rng);

/// FNV-1a digest of the canonical serialization.
std::uint64_t spec_hash(const MdpSpec& spec);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);

}  // namespace appraise_rl
