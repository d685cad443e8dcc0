#pragma once

// Tabular Q-learning with epsilon-greedy exploration and a count-based world model.

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "appraise_rl/mdp.hpp"
#include "appraise_rl/rng.hpp"

namespace appraise_rl {

struct Hyperparams {
  double alpha = 0.1;
  double epsilon = 0.1;
  int episodes = 1000;
  int max_steps = 50;
  std::uint64_t seed = 0;
  bool operator==(const Hyperparams&) const = default;
};

/// Throws DomainError on out-of-range values.
void check_hyperparams(const Hyperparams& h);

class QTable {
 public:
  double get(const StateId& s, const ActionId& a) const;
  void set(const StateId& s, const ActionId& a, double v);
  /// max over `actions` of q(s, a); 0 for an empty action list.
  double max_over(const StateId& s, const std::vector<ActionId>& actions) const;
  const std::map<std::pair<StateId, ActionId>, double>& entries() const { return values_; }
  bool operator==(const QTable&) const = default;

 private:
  std::map<std::pair<StateId, ActionId>, double> values_;
};

class WorldModel {
 public:
  std::int64_t count(const StateId& s, const ActionId& a, const StateId& to) const;
  std::int64_t total(const StateId& s, const ActionId& a) const;
  void add(const StateId& s, const ActionId& a, const StateId& to, std::int64_t n = 1);
  const std::map<std::tuple<StateId, ActionId, StateId>, std::int64_t>& entries() const { return counts_; }
  bool operator==(const WorldModel&) const = default;

 private:
  std::map<std::tuple<StateId, ActionId, StateId>, std::int64_t> counts_;
  std::map<std::pair<StateId, ActionId>, std::int64_t> totals_;
};

struct TrainStats {
  int episodes_run = 0;
  int truncated_episodes = 0;
  std::int64_t steps = 0;
  bool operator==(const TrainStats&) const = default;
};

struct TrainedAgent {
  QTable q;
  WorldModel world;
  std::uint64_t spec_hash = 0;
  Hyperparams hyper;
  double gamma = 0.9;
  TrainStats stats;
  bool operator==(const TrainedAgent&) const = default;
};

/// Applies one Q-learning step in place and returns the TD error
/// delta = alpha * (r + gamma * max q(s', .) - q(s, a)). `next_actions` is empty for terminals.
double q_update(QTable& q, const TransitionEvent& ev, const std::vector<ActionId>& next_actions, double alpha,
                double gamma);

/// Epsilon-greedy; ties go to the earliest declared action.
ActionId select_action(const QTable& q, const StateId& s, const std::vector<ActionId>& actions, double epsilon,
                       Rng& rng);

void observe(WorldModel& world, const TransitionEvent& ev);

TrainedAgent train(const MdpSpec& spec, const Hyperparams& hyper);

/// Same random stream as train() but stops after `stop_episode` episodes.
/// Rewards still follow the schedule of a full `hyper.episodes` run.
TrainedAgent train_until(const MdpSpec& spec, const Hyperparams& hyper, int stop_episode);

/// Events along the scripted path with final-episode rewards. Does not touch the agent.
std::vector<TransitionEvent> replay_script(const TrainedAgent& agent, const MdpSpec& spec);

std::string agent_to_json(const TrainedAgent& agent);
TrainedAgent agent_from_json(const std::string& text);

/// Loads a cached agent for (spec, hyper) from `cache_dir` or trains and stores one.
/// An empty `cache_dir` disables caching.
TrainedAgent train_cached(const MdpSpec& spec, const Hyperparams& hyper, const std::string& cache_dir);

}  // namespace appraise_rl
