#include "appraise_rl/rl.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "appraise_rl/errors.hpp"

namespace appraise_rl {

using nlohmann::json;

void check_hyperparams(const Hyperparams& h) {
  if (!(h.alpha > 0.0 && h.alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  if (!(h.epsilon >= 0.0 && h.epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  if (h.episodes < 1) throw DomainError("episodes must be positive");
  if (h.max_steps < 1) throw DomainError("max_steps must be positive");
}

double QTable::get(const StateId& s, const ActionId& a) const {
  auto it = values_.find({s, a});
  return it == values_.end() ? 0.0 : it->second;
}

void QTable::set(const StateId& s, const ActionId& a, double v) { values_[{s, a}] = v; }

double QTable::max_over(const StateId& s, const std::vector<ActionId>& actions) const {
  if (actions.empty()) return 0.0;
  double m = get(s, actions.front());
  for (std::size_t i = 1; i < actions.size(); ++i) m = std::max(m, get(s, actions[i]));
  return m;
}

std::int64_t WorldModel::count(const StateId& s, const ActionId& a, const StateId& to) const {
  auto it = counts_.find({s, a, to});
  return it == counts_.end() ? 0 : it->second;
}

std::int64_t WorldModel::total(const StateId& s, const ActionId& a) const {
  auto it = totals_.find({s, a});
  return it == totals_.end() ? 0 : it->second;
}

void WorldModel::add(const StateId& s, const ActionId& a, const StateId& to, std::int64_t n) {
  counts_[{s, a, to}] += n;
  totals_[{s, a}] += n;
}

double q_update(QTable& q, const TransitionEvent& ev, const std::vector<ActionId>& next_actions, double alpha,
                double gamma) {
  const double current = q.get(ev.from, ev.action);
  const double next = q.max_over(ev.to, next_actions);
  if (!std::isfinite(ev.reward) || !std::isfinite(current) || !std::isfinite(next) || !std::isfinite(alpha) ||
      !std::isfinite(gamma))
    throw DomainError("non-finite value in Q update");
  const double delta = alpha * (ev.reward + gamma * next - current);
  q.set(ev.from, ev.action, current + delta);
  return delta;
}

ActionId select_action(const QTable& q, const StateId& s, const std::vector<ActionId>& actions, double epsilon,
                       Rng& rng) {
  if (actions.empty()) throw DomainError("no actions available at state " + s);
  if (uniform01(rng) < epsilon) {
    auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(actions.size()));
    return actions[std::min(i, actions.size() - 1)];
  }
  std::size_t best = 0;
  double best_v = q.get(s, actions[0]);
  for (std::size_t i = 1; i < actions.size(); ++i) {
    double v = q.get(s, actions[i]);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return actions[best];
}

void observe(WorldModel& world, const TransitionEvent& ev) { world.add(ev.from, ev.action, ev.to); }

TrainedAgent train_until(const MdpSpec& spec, const Hyperparams& hyper, int stop_episode) {
  check_hyperparams(hyper);
  if (auto v = validate(spec); !v.empty()) throw ValidationError(std::move(v));
  TrainedAgent agent;
  agent.spec_hash = spec_hash(spec);
  agent.hyper = hyper;
  agent.gamma = spec.discount;

  // Action lists are looked up once; the spec is immutable during training.
  std::map<StateId, std::vector<ActionId>> actions;
  for (const auto& s : spec.states) actions[s] = spec.actions_at(s);

  Rng rng(mix_seed(hyper.seed, 0));
  const int stop = std::min(stop_episode, hyper.episodes);
  for (int ep = 0; ep < stop; ++ep) {
    StateId s = spec.initial;
    int step = 0;
    for (; step < hyper.max_steps && !spec.is_terminal(s); ++step) {
      const auto& acts = actions[s];
      ActionId a = select_action(agent.q, s, acts, hyper.epsilon, rng);
      StateId to = sample_transition(spec, s, a, rng);
      TransitionEvent ev{s, a, to, reward_at(spec, ep, hyper.episodes, to), ep};
      q_update(agent.q, ev, actions[to], hyper.alpha, spec.discount);
      observe(agent.world, ev);
      s = std::move(to);
    }
    agent.stats.steps += step;
    if (!spec.is_terminal(s)) ++agent.stats.truncated_episodes;
    ++agent.stats.episodes_run;
  }
  return agent;
}

TrainedAgent train(const MdpSpec& spec, const Hyperparams& hyper) { return train_until(spec, hyper, hyper.episodes); }

std::vector<TransitionEvent> replay_script(const TrainedAgent& agent, const MdpSpec& spec) {
  if (agent.spec_hash != spec_hash(spec)) throw DomainError("agent was trained on a different MDP");
  const int last = agent.hyper.episodes - 1;
  std::vector<TransitionEvent> out;
  out.reserve(spec.script.size());
  for (const auto& st : spec.script) {
    if (spec.probability(st.from, st.action, st.to) <= 0.0)
      throw DomainError("script step " + st.from + " " + st.action + " " + st.to + " is impossible");
    out.push_back({st.from, st.action, st.to, reward_at(spec, last, agent.hyper.episodes, st.to), last});
  }
  return out;
}

namespace {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = std::stoull(s, &used, 16);
  if (used != s.size()) throw Error("bad hex digest '" + s + "'");
  return v;
}

}  // namespace

std::string agent_to_json(const TrainedAgent& agent) {
  json q = json::array();
  for (const auto& [key, v] : agent.q.entries()) q.push_back({{"state", key.first}, {"action", key.second}, {"value", v}});
  json counts = json::array();
  for (const auto& [key, n] : agent.world.entries())
    counts.push_back(
        {{"from", std::get<0>(key)}, {"action", std::get<1>(key)}, {"to", std::get<2>(key)}, {"count", n}});
  json doc = {
      {"spec_hash", hex64(agent.spec_hash)},
      {"gamma", agent.gamma},
      {"hyper",
       {{"alpha", agent.hyper.alpha},
        {"epsilon", agent.hyper.epsilon},
        {"episodes", agent.hyper.episodes},
        {"max_steps", agent.hyper.max_steps},
        {"seed", agent.hyper.seed}}},
      {"stats",
       {{"episodes_run", agent.stats.episodes_run},
        {"truncated_episodes", agent.stats.truncated_episodes},
        {"steps", agent.stats.steps}}},
      {"q", q},
      {"counts", counts},
  };
  return doc.dump(2);
}

TrainedAgent agent_from_json(const std::string& text) {
  try {
    json doc = json::parse(text);
    TrainedAgent a;
    a.spec_hash = parse_hex64(doc.at("spec_hash").get<std::string>());
    a.gamma = doc.at("gamma").get<double>();
    const auto& h = doc.at("hyper");
    a.hyper.alpha = h.at("alpha").get<double>();
    a.hyper.epsilon = h.at("epsilon").get<double>();
    a.hyper.episodes = h.at("episodes").get<int>();
    a.hyper.max_steps = h.at("max_steps").get<int>();
    a.hyper.seed = h.at("seed").get<std::uint64_t>();
    const auto& st = doc.at("stats");
    a.stats.episodes_run = st.at("episodes_run").get<int>();
    a.stats.truncated_episodes = st.at("truncated_episodes").get<int>();
    a.stats.steps = st.at("steps").get<std::int64_t>();
    for (const auto& e : doc.at("q"))
      a.q.set(e.at("state").get<std::string>(), e.at("action").get<std::string>(), e.at("value").get<double>());
    for (const auto& e : doc.at("counts"))
      a.world.add(e.at("from").get<std::string>(), e.at("action").get<std::string>(), e.at("to").get<std::string>(),
                  e.at("count").get<std::int64_t>());
    return a;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed agent document: ") + e.what());
  }
}

TrainedAgent train_cached(const MdpSpec& spec, const Hyperparams& hyper, const std::string& cache_dir) {
  if (cache_dir.empty()) return train(spec, hyper);
  namespace fs = std::filesystem;
  std::ostringstream key;
  key << hex64(spec_hash(spec)) << '_' << format_number(hyper.alpha) << '_' << format_number(hyper.epsilon) << '_'
      << hyper.episodes << '_' << hyper.max_steps << '_' << hyper.seed << '_' << format_number(spec.discount);
  const fs::path file = fs::path(cache_dir) / ("agent_" + key.str() + ".json");
  std::error_code ec;
  if (fs::exists(file, ec)) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      TrainedAgent a = agent_from_json(ss.str());
      if (a.spec_hash == spec_hash(spec) && a.hyper == hyper) return a;
    } catch (const Error&) {
      // Corrupt entry: fall through and overwrite it.
    }
  }
  TrainedAgent a = train(spec, hyper);
  fs::create_directories(cache_dir, ec);
  if (!ec) {
    const fs::path tmp = file.string() + ".tmp";
    {
      std::ofstream out(tmp);
      out << agent_to_json(a);
    }
    fs::rename(tmp, file, ec);
  }
  return a;
}

}  // namespace appraise_rl
