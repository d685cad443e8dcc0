#include "appraise_rl/mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "appraise_rl/errors.hpp"

namespace appraise_rl {

bool MdpSpec::has_state(std::string_view s) const {
  return std::find(states.begin(), states.end(), s) != states.end();
}

bool MdpSpec::is_terminal(std::string_view s) const {
  return std::find(terminals.begin(), terminals.end(), s) != terminals.end();
}

std::vector<ActionId> MdpSpec::actions_at(std::string_view s) const {
  if (is_terminal(s)) return {};
  if (auto it = declared_actions.find(std::string(s)); it != declared_actions.end()) return it->second;
  return {ActionId(kDefaultAction)};
}

const TransitionRule* MdpSpec::find_rule(std::string_view from, std::string_view action) const {
  for (const auto& r : transitions)
    if (r.from == from && r.action == action) return &r;
  return nullptr;
}

const RewardRule* MdpSpec::find_reward(std::string_view entered) const {
  for (const auto& r : rewards)
    if (r.entered == entered) return &r;
  return nullptr;
}

int MdpSpec::max_final_k() const {
  int k = 0;
  for (const auto& r : rewards)
    for (const auto& o : r.overrides) k = std::max(k, o.final_k);
  return k;
}

double MdpSpec::probability(std::string_view from, std::string_view action, std::string_view to) const {
  const auto* rule = find_rule(from, action);
  if (!rule) return 0.0;
  double p = 0.0;
  for (const auto& o : rule->outcomes)
    if (o.to == to) p += o.prob;
  return p;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

enum class TokKind { Word, Comma, Equals, Bar, Arrow };

struct Token {
  TokKind kind;
  std::string text;
  int column;
};

std::vector<Token> tokenize(std::string_view line, int first_column) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    int col = first_column + static_cast<int>(i);
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else if (c == ',') {
      out.push_back({TokKind::Comma, ",", col});
      ++i;
    } else if (c == '=') {
      out.push_back({TokKind::Equals, "=", col});
      ++i;
    } else if (c == '|') {
      out.push_back({TokKind::Bar, "|", col});
      ++i;
    } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      out.push_back({TokKind::Arrow, "->", col});
      i += 2;
    } else {
      std::size_t j = i;
      while (j < line.size()) {
        char d = line[j];
        if (d == ' ' || d == '\t' || d == '\r' || d == ',' || d == '=' || d == '|') break;
        if (d == '-' && j + 1 < line.size() && line[j + 1] == '>') break;
        ++j;
      }
      out.push_back({TokKind::Word, std::string(line.substr(i, j - i)), col});
      i = j;
    }
  }
  return out;
}

// A name used before it can be checked against the full declaration set.
struct Reference {
  enum Kind { State, Action } kind;
  std::string name;
  std::string state;  // owning state, for actions
  int line;
  int column;
};

class Parser {
 public:
  MdpSpec run(std::string_view text) {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      parse_line(text.substr(pos, end - pos), line_no);
      pos = end + 1;
    }
    resolve();
    return std::move(spec_);
  }

 private:
  void parse_line(std::string_view raw, int line_no) {
    line_ = line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::size_t first = raw.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return;
    std::size_t colon = raw.find(':');
    if (colon == std::string_view::npos) fail(static_cast<int>(first) + 1, "expected 'directive:'");
    std::string_view head = raw.substr(first, colon - first);
    while (!head.empty() && (head.back() == ' ' || head.back() == '\t')) head.remove_suffix(1);
    toks_ = tokenize(raw.substr(colon + 1), static_cast<int>(colon) + 2);
    at_ = 0;
    end_column_ = static_cast<int>(raw.size()) + 1;
    const int head_col = static_cast<int>(first) + 1;

    if (head == "states") {
      do_states();
    } else if (head == "terminal") {
      while (!done()) {
        auto t = word("terminal state");
        ref_state(t);
        if (std::find(spec_.terminals.begin(), spec_.terminals.end(), t.text) != spec_.terminals.end())
          fail(t.column, "duplicate terminal '" + t.text + "'");
        spec_.terminals.push_back(t.text);
      }
    } else if (head == "initial") {
      if (!spec_.initial.empty()) fail(head_col, "initial state declared twice");
      auto t = word("initial state");
      ref_state(t);
      spec_.initial = t.text;
      expect_end();
    } else if (head == "discount") {
      spec_.discount = number(word("discount"));
      expect_end();
    } else if (head == "actions") {
      do_actions();
    } else if (head == "trans") {
      do_trans();
    } else if (head == "reward") {
      do_reward();
    } else if (head == "appraise") {
      if (spec_.appraisal_event) fail(head_col, "appraisal event declared twice");
      spec_.appraisal_event = step();
      expect_end();
    } else if (head == "script") {
      if (!spec_.script.empty()) fail(head_col, "script declared twice");
      spec_.script.push_back(step());
      while (!done()) {
        expect(TokKind::Comma, "','");
        spec_.script.push_back(step());
      }
    } else {
      fail(head_col, "unknown directive '" + std::string(head) + "'");
    }
  }

  void do_states() {
    if (done()) fail(end_column_, "expected at least one state");
    while (!done()) {
      auto t = word("state name");
      if (spec_.has_state(t.text)) fail(t.column, "duplicate state '" + t.text + "'");
      spec_.states.push_back(t.text);
    }
  }

  void do_actions() {
    auto s = word("state");
    ref_state(s);
    if (spec_.declared_actions.count(s.text)) fail(s.column, "actions for '" + s.text + "' declared twice");
    expect(TokKind::Equals, "'='");
    std::vector<ActionId> acts;
    if (done()) fail(end_column_, "expected at least one action");
    while (!done()) {
      auto a = word("action");
      if (std::find(acts.begin(), acts.end(), a.text) != acts.end())
        fail(a.column, "duplicate action '" + a.text + "'");
      acts.push_back(a.text);
    }
    spec_.declared_actions[s.text] = std::move(acts);
  }

  void do_trans() {
    auto from = word("source state");
    auto act = word("action");
    ref_state(from);
    ref_action(act, from.text);
    if (spec_.find_rule(from.text, act.text))
      fail(from.column, "duplicate transition rule for " + from.text + " " + act.text);
    expect(TokKind::Arrow, "'->'");
    TransitionRule rule{from.text, act.text, {}};
    while (true) {
      auto to = word("target state");
      ref_state(to);
      double p = 1.0;
      if (!done() && peek().kind == TokKind::Word) p = number(word("probability"));
      for (const auto& o : rule.outcomes)
        if (o.to == to.text) fail(to.column, "duplicate outcome '" + to.text + "'");
      rule.outcomes.push_back({to.text, p});
      if (done()) break;
      expect(TokKind::Comma, "','");
    }
    spec_.transitions.push_back(std::move(rule));
  }

  void do_reward() {
    auto s = word("state");
    ref_state(s);
    if (spec_.find_reward(s.text)) fail(s.column, "duplicate reward rule for '" + s.text + "'");
    expect(TokKind::Equals, "'='");
    RewardRule rule{s.text, number(word("reward")), {}};
    while (!done()) {
      expect(TokKind::Bar, "'|'");
      auto kw = word("'last'");
      if (kw.text != "last") fail(kw.column, "expected 'last', got '" + kw.text + "'");
      auto k = word("episode count");
      int final_k = 0;
      auto [p, ec] = std::from_chars(k.text.data(), k.text.data() + k.text.size(), final_k);
      if (ec != std::errc() || p != k.text.data() + k.text.size() || final_k < 1)
        fail(k.column, "expected a positive integer, got '" + k.text + "'");
      expect(TokKind::Equals, "'='");
      rule.overrides.push_back({final_k, number(word("reward"))});
    }
    spec_.rewards.push_back(std::move(rule));
  }

  Step step() {
    auto from = word("source state");
    auto act = word("action");
    auto to = word("target state");
    ref_state(from);
    ref_action(act, from.text);
    ref_state(to);
    return {from.text, act.text, to.text};
  }

  void resolve() {
    for (const auto& r : refs_) {
      if (r.kind == Reference::State) {
        if (!spec_.has_state(r.name)) throw ParseError(r.line, r.column, "undeclared state '" + r.name + "'");
      } else {
        auto acts = spec_.actions_at(r.state);
        bool known = std::find(acts.begin(), acts.end(), r.name) != acts.end();
        // A terminal has no actions; that is reported by validate() instead.
        if (!known && !spec_.is_terminal(r.state))
          throw ParseError(r.line, r.column, "undeclared action '" + r.name + "' for state '" + r.state + "'");
      }
    }
  }

  bool done() const { return at_ >= toks_.size(); }
  const Token& peek() const { return toks_[at_]; }

  Token word(const char* what) {
    if (done()) fail(end_column_, std::string("expected ") + what);
    const Token& t = toks_[at_];
    if (t.kind != TokKind::Word) fail(t.column, std::string("expected ") + what + ", got '" + t.text + "'");
    ++at_;
    return t;
  }

  void expect(TokKind k, const char* what) {
    if (done()) fail(end_column_, std::string("expected ") + what);
    if (toks_[at_].kind != k) fail(toks_[at_].column, std::string("expected ") + what + ", got '" + toks_[at_].text + "'");
    ++at_;
  }

  void expect_end() {
    if (!done()) fail(toks_[at_].column, "unexpected '" + toks_[at_].text + "'");
  }

  double number(const Token& t) {
    double v = 0.0;
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    if (b != e && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v)) fail(t.column, "expected a number, got '" + t.text + "'");
    return v;
  }

  void ref_state(const Token& t) { refs_.push_back({Reference::State, t.text, {}, line_, t.column}); }
  void ref_action(const Token& t, const std::string& state) {
    refs_.push_back({Reference::Action, t.text, state, line_, t.column});
  }

  [[noreturn]] void fail(int column, const std::string& msg) const { throw ParseError(line_, column, msg); }

  MdpSpec spec_;
  std::vector<Reference> refs_;
  std::vector<Token> toks_;
  std::size_t at_ = 0;
  int line_ = 0;
  int end_column_ = 1;
};

std::string step_text(const Step& s) { return s.from + " " + s.action + " " + s.to; }

}  // namespace

MdpSpec parse_mdp_document(std::string_view text) { return Parser{}.run(text); }

MdpSpec parse_mdp(std::string_view text) {
  MdpSpec spec = parse_mdp_document(text);
  if (auto v = validate(spec); !v.empty()) throw ValidationError(std::move(v));
  return spec;
}

MdpSpec load_mdp(const std::filesystem::path& path, bool validate_spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open MDP file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return validate_spec ? parse_mdp(ss.str()) : parse_mdp_document(ss.str());
}

std::string serialize_mdp(const MdpSpec& spec) {
  std::ostringstream out;
  auto list = [&](const std::vector<std::string>& v) {
    for (const auto& s : v) out << ' ' << s;
  };
  out << "states:";
  list(spec.states);
  out << '\n';
  if (!spec.terminals.empty()) {
    out << "terminal:";
    list(spec.terminals);
    out << '\n';
  }
  if (!spec.initial.empty()) out << "initial: " << spec.initial << '\n';
  out << "discount: " << format_number(spec.discount) << '\n';
  for (const auto& s : spec.states) {
    auto it = spec.declared_actions.find(s);
    if (it == spec.declared_actions.end()) continue;
    out << "actions: " << s << " =";
    list(it->second);
    out << '\n';
  }
  for (const auto& r : spec.transitions) {
    out << "trans: " << r.from << ' ' << r.action << " ->";
    for (std::size_t i = 0; i < r.outcomes.size(); ++i)
      out << (i ? ", " : " ") << r.outcomes[i].to << ' ' << format_number(r.outcomes[i].prob);
    out << '\n';
  }
  for (const auto& r : spec.rewards) {
    out << "reward: " << r.entered << " = " << format_number(r.base);
    for (const auto& o : r.overrides) out << " | last " << o.final_k << " = " << format_number(o.value);
    out << '\n';
  }
  if (spec.appraisal_event) out << "appraise: " << step_text(*spec.appraisal_event) << '\n';
  if (!spec.script.empty()) {
    out << "script: ";
    for (std::size_t i = 0; i < spec.script.size(); ++i) out << (i ? ", " : "") << step_text(spec.script[i]);
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> validate(const MdpSpec& spec) {
  std::vector<std::string> v;
  if (spec.states.empty()) v.push_back("no states declared");
  {
    std::set<StateId> seen;
    for (const auto& s : spec.states) {
      if (s.empty()) v.push_back("empty state name");
      if (!seen.insert(s).second) v.push_back("duplicate state " + s);
    }
  }
  for (const auto& t : spec.terminals)
    if (!spec.has_state(t)) v.push_back("terminal " + t + " is not a declared state");
  if (spec.initial.empty())
    v.push_back("initial state not set");
  else if (!spec.has_state(spec.initial))
    v.push_back("initial state " + spec.initial + " is not declared");
  if (!(spec.discount >= 0.0 && spec.discount <= 1.0))
    v.push_back("discount " + format_number(spec.discount) + " outside [0, 1]");

  for (const auto& [s, acts] : spec.declared_actions) {
    if (spec.is_terminal(s)) v.push_back("terminal " + s + " has actions");
    if (acts.empty()) v.push_back("state " + s + " declares no actions");
  }

  std::set<std::pair<StateId, ActionId>> rule_keys;
  for (const auto& r : spec.transitions) {
    const std::string label = "trans " + r.from + " " + r.action;
    if (!rule_keys.insert({r.from, r.action}).second) v.push_back("duplicate rule " + label);
    if (spec.is_terminal(r.from)) {
      v.push_back("terminal " + r.from + " has transitions");
      continue;
    }
    double sum = 0.0;
    for (const auto& o : r.outcomes) {
      if (!spec.has_state(o.to)) v.push_back(label + ": unknown target " + o.to);
      if (!(o.prob >= 0.0 && o.prob <= 1.0)) v.push_back(label + ": probability of " + o.to + " outside [0, 1]");
      sum += o.prob;
    }
    if (std::abs(sum - 1.0) > 1e-9) v.push_back(label + ": probabilities do not sum to 1 (" + format_number(sum) + ")");
  }
  for (const auto& s : spec.states) {
    if (spec.is_terminal(s)) continue;
    for (const auto& a : spec.actions_at(s))
      if (!spec.find_rule(s, a)) v.push_back("missing transition for " + s + " " + a);
  }

  {
    std::set<StateId> seen;
    for (const auto& r : spec.rewards) {
      if (!seen.insert(r.entered).second) v.push_back("duplicate reward rule for " + r.entered);
      if (!std::isfinite(r.base)) v.push_back("reward for " + r.entered + " is not finite");
      for (const auto& o : r.overrides)
        if (o.final_k < 1) v.push_back("reward schedule for " + r.entered + " has non-positive episode count");
    }
  }

  if (spec.script.empty()) {
    v.push_back("script is empty");
  } else {
    if (spec.script.front().from != spec.initial) v.push_back("script does not start at initial state");
    for (std::size_t i = 0; i < spec.script.size(); ++i) {
      const Step& st = spec.script[i];
      if (i > 0 && spec.script[i - 1].to != st.from) v.push_back("script step " + std::to_string(i + 1) + " is not contiguous");
      if (spec.probability(st.from, st.action, st.to) <= 0.0)
        v.push_back("script step " + std::to_string(i + 1) + " unreachable");
    }
    if (!spec.is_terminal(spec.script.back().to)) v.push_back("script does not end at a terminal");
  }

  if (!spec.appraisal_event) {
    v.push_back("appraisal event not set");
  } else if (std::find(spec.script.begin(), spec.script.end(), *spec.appraisal_event) == spec.script.end()) {
    v.push_back("appraisal event " + step_text(*spec.appraisal_event) + " does not occur in script");
  }
  return v;
}

double reward_at(const MdpSpec& spec, int episode, int total_episodes, std::string_view entered) {
  const RewardRule* rule = spec.find_reward(entered);
  if (!rule) return 0.0;
  double value = rule->base;
  int best_k = 0;
  for (const auto& o : rule->overrides) {
    if (episode >= total_episodes - o.final_k && (best_k == 0 || o.final_k < best_k)) {
      best_k = o.final_k;
      value = o.value;
    }
  }
  return value;
}

StateId sample_transition(const MdpSpec& spec, std::string_view from, std::string_view action, Rng& rng) {
  const TransitionRule* rule = spec.find_rule(from, action);
  if (!rule || rule->outcomes.empty())
    throw DomainError("no transition rule for (" + std::string(from) + ", " + std::string(action) + ")");
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& o : rule->outcomes) {
    acc += o.prob;
    if (u < acc) return o.to;
  }
  // Rounding slack: the last outcome with positive mass absorbs it.
  for (auto it = rule->outcomes.rbegin(); it != rule->outcomes.rend(); ++it)
    if (it->prob > 0.0) return it->to;
  return rule->outcomes.back().to;
}

std::uint64_t spec_hash(const MdpSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_mdp(spec)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace appraise_rl
