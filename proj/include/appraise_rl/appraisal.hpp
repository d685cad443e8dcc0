#pragma once

// The four appraisal checks read off a frozen agent at a single transition.

#include <string>
#include <vector>

#include "appraise_rl/mdp.hpp"
#include "appraise_rl/rl.hpp"

namespace appraise_rl {

struct AppraisalVector {
  double suddenness = 0.0;
  double goal_relevance = 0.0;
  double conduciveness = 0.0;
  double power = 0.0;
  bool operator==(const AppraisalVector&) const = default;
};

/// 1 - count(s,a,s') / count(s,a,.). Throws DomainError("unvisited state-action") when count(s,a,.) is 0.
double suddenness(const WorldModel& world, const StateId& from, const ActionId& action, const StateId& to);

/// alpha * (r + gamma * max q(s', .) - q(s, a)) without modifying the agent.
double td_error(const TrainedAgent& agent, const TransitionEvent& ev, const std::vector<ActionId>& next_actions,
                double gamma, double alpha);

double goal_relevance(double delta);
double conduciveness(double delta);

/// clamp(mean - min of q(to, .), 0, 1); 0 for terminals or at most one action.
double power(const TrainedAgent& agent, const StateId& to, const std::vector<ActionId>& actions_at_to,
             bool terminal = false);

struct AppraisalDetail {
  AppraisalVector vector;
  TransitionEvent event;
  double delta = 0.0;
};

AppraisalDetail appraise_detail(const TrainedAgent& agent, const MdpSpec& spec);
AppraisalVector appraise(const TrainedAgent& agent, const MdpSpec& spec);

std::string appraisal_to_json(const AppraisalVector& v);

}  // namespace appraise_rl
