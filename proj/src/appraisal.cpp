#include "appraise_rl/appraisal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "appraise_rl/errors.hpp"

namespace appraise_rl {

double suddenness(const WorldModel& world, const StateId& from, const ActionId& action, const StateId& to) {
  const auto total = world.total(from, action);
  if (total <= 0) throw DomainError("unvisited state-action (" + from + ", " + action + ")");
  return 1.0 - static_cast<double>(world.count(from, action, to)) / static_cast<double>(total);
}

double td_error(const TrainedAgent& agent, const TransitionEvent& ev, const std::vector<ActionId>& next_actions,
                double gamma, double alpha) {
  const double next = agent.q.max_over(ev.to, next_actions);
  return alpha * (ev.reward + gamma * next - agent.q.get(ev.from, ev.action));
}

double goal_relevance(double delta) {
  if (!std::isfinite(delta)) throw DomainError("non-finite TD error");
  return std::min(std::abs(delta), 1.0);
}

double conduciveness(double delta) {
  if (!std::isfinite(delta)) throw DomainError("non-finite TD error");
  return std::clamp(delta, -1.0, 1.0) * 0.5 + 0.5;
}

double power(const TrainedAgent& agent, const StateId& to, const std::vector<ActionId>& actions_at_to, bool terminal) {
  if (terminal || actions_at_to.size() <= 1) return 0.0;
  double sum = 0.0;
  double lo = agent.q.get(to, actions_at_to.front());
  for (const auto& a : actions_at_to) {
    const double v = agent.q.get(to, a);
    sum += v;
    lo = std::min(lo, v);
  }
  const double mean = sum / static_cast<double>(actions_at_to.size());
  return std::clamp(mean - lo, 0.0, 1.0);
}

AppraisalDetail appraise_detail(const TrainedAgent& agent, const MdpSpec& spec) {
  if (!spec.appraisal_event) throw DomainError("MDP has no appraisal event");
  const Step& target = *spec.appraisal_event;
  const auto events = replay_script(agent, spec);
  auto it = std::find_if(events.begin(), events.end(), [&](const TransitionEvent& e) {
    return e.from == target.from && e.action == target.action && e.to == target.to;
  });
  if (it == events.end()) throw DomainError("appraisal event does not occur in the script");

  AppraisalDetail d;
  d.event = *it;
  const auto next_actions = spec.actions_at(it->to);
  d.delta = td_error(agent, *it, next_actions, spec.discount, agent.hyper.alpha);
  d.vector.suddenness = suddenness(agent.world, it->from, it->action, it->to);
  d.vector.goal_relevance = goal_relevance(d.delta);
  d.vector.conduciveness = conduciveness(d.delta);
  d.vector.power = power(agent, it->to, next_actions, spec.is_terminal(it->to));
  return d;
}

AppraisalVector appraise(const TrainedAgent& agent, const MdpSpec& spec) { return appraise_detail(agent, spec).vector; }

std::string appraisal_to_json(const AppraisalVector& v) {
  nlohmann::ordered_json j = {{"suddenness", v.suddenness},
                              {"goal_relevance", v.goal_relevance},
                              {"conduciveness", v.conduciveness},
                              {"power", v.power}};
  return j.dump();
}

}  // namespace appraise_rl
