#include "appraise_rl/study.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "appraise_rl/errors.hpp"
#include "text_util.hpp"

namespace appraise_rl {

using ojson = nlohmann::ordered_json;

std::string_view mode_name(RatingMode m) { return m == RatingMode::free ? "free" : "forced"; }

RatingMode parse_mode(std::string_view s) {
  if (s == "free") return RatingMode::free;
  if (s == "forced") return RatingMode::forced;
  throw DomainError("unknown rating mode '" + std::string(s) + "' (expected free or forced)");
}

std::vector<std::string> RatingsTable::participants() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows)
    if (seen.insert(r.participant).second) out.push_back(r.participant);
  return out;
}

namespace {

std::size_t index_of(const std::vector<Emotion>& v, Emotion e) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), e) - v.begin());
}

std::string name(Emotion e) { return std::string(emotion_name(e)); }

}  // namespace

RatingsTable parse_ratings(std::string_view csv, RatingMode mode, const std::vector<Emotion>& stories,
                           const std::vector<Emotion>& emotions) {
  RatingsTable t;
  t.mode = mode;
  t.stories = stories;
  t.emotions = emotions;
  int line_no = 0;
  bool header = false;
  for (auto raw : detail::lines_of(csv)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (!header) {
      if (line != "participant,story,emotion,rating")
        throw ParseError(line_no, 1, "expected header participant,story,emotion,rating");
      header = true;
      continue;
    }
    auto cells = detail::split(line, ',');
    if (cells.size() != 4) throw ParseError(line_no, 1, "expected 4 fields, found " + std::to_string(cells.size()));
    Rating r;
    r.participant = std::string(detail::trim(cells[0]));
    if (r.participant.empty()) throw ParseError(line_no, 1, "empty participant id");
    auto story = find_emotion(detail::trim(cells[1]));
    if (!story || index_of(stories, *story) == stories.size())
      throw ParseError(line_no, 1, "unknown story '" + std::string(detail::trim(cells[1])) + "'");
    auto emo = find_emotion(detail::trim(cells[2]));
    if (!emo || index_of(emotions, *emo) == emotions.size())
      throw ParseError(line_no, 1, "unknown emotion '" + std::string(detail::trim(cells[2])) + "'");
    auto value = detail::to_double(cells[3]);
    if (!value || !std::isfinite(*value)) throw ParseError(line_no, 1, "rating is not a number");
    if (mode == RatingMode::free && (*value < 0 || *value > 10))
      throw ParseError(line_no, 1, "rating " + format_number(*value) + " outside [0, 10]");
    if (mode == RatingMode::forced && *value != 0 && *value != 1)
      throw ParseError(line_no, 1, "forced-choice rating must be 0 or 1");
    r.story = *story;
    r.emotion = *emo;
    r.rating = *value;
    t.rows.push_back(std::move(r));
  }
  if (t.rows.empty()) throw DomainError("no rows");

  const auto people = t.participants();
  if (mode == RatingMode::free) {
    std::map<std::tuple<std::string, Emotion, Emotion>, int> seen;
    for (const auto& r : t.rows)
      if (++seen[{r.participant, r.story, r.emotion}] > 1)
        throw DomainError("duplicate rating for participant " + r.participant + ", story " + name(r.story) +
                          ", emotion " + name(r.emotion));
    for (const auto& p : people)
      for (Emotion s : stories)
        for (Emotion e : emotions)
          if (!seen.count({p, s, e}))
            throw DomainError("missing rating for participant " + p + ", story " + name(s) + ", emotion " + name(e));
  } else {
    if (stories.size() != emotions.size()) throw DomainError("forced choice needs as many emotions as stories");
    for (const auto& p : people) {
      std::map<Emotion, Emotion> chosen;  // story -> emotion
      std::set<Emotion> used;
      for (const auto& r : t.rows) {
        if (r.participant != p || r.rating != 1) continue;
        if (chosen.count(r.story) || !used.insert(r.emotion).second)
          throw DomainError("bijection violated for participant " + p);
        chosen[r.story] = r.emotion;
      }
      if (chosen.size() != stories.size()) throw DomainError("bijection violated for participant " + p);
    }
  }
  return t;
}

RatingsTable load_ratings(const std::filesystem::path& path, RatingMode mode, const std::vector<Emotion>& stories,
                          const std::vector<Emotion>& emotions) {
  return parse_ratings(detail::read_file(path), mode, stories, emotions);
}

std::string ratings_to_csv(const RatingsTable& t) {
  std::ostringstream out;
  out << "participant,story,emotion,rating\n";
  for (const auto& r : t.rows)
    out << r.participant << ',' << emotion_name(r.story) << ',' << emotion_name(r.emotion) << ','
        << format_number(r.rating) << '\n';
  return out.str();
}

RatingsTable standardize(const RatingsTable& t, Standardization how) {
  if (t.mode != RatingMode::free) throw DomainError("standardization applies to free ratings only");
  RatingsTable out = t;
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const int key = how == Standardization::per_story ? static_cast<int>(r.story) : -1;
    groups[{r.participant, key}].push_back(i);
  }
  for (const auto& [key, idx] : groups) {
    double mean = 0;
    for (auto i : idx) mean += t.rows[i].rating;
    mean /= static_cast<double>(idx.size());
    double var = 0;
    for (auto i : idx) var += (t.rows[i].rating - mean) * (t.rows[i].rating - mean);
    const double sd = std::sqrt(var / static_cast<double>(idx.size()));
    for (auto i : idx) out.rows[i].rating = sd > 0 ? (t.rows[i].rating - mean) / sd : 0.0;
  }
  return out;
}

CellMatrix human_matrix(const RatingsTable& t, Standardization how) {
  const std::size_t ns = t.stories.size(), ne = t.emotions.size();
  CellMatrix m(ns, std::vector<double>(ne, 0.0));
  if (t.mode == RatingMode::forced) {
    std::vector<double> per_story(ns, 0.0);
    for (const auto& r : t.rows) {
      if (r.rating != 1) continue;
      m[index_of(t.stories, r.story)][index_of(t.emotions, r.emotion)] += 1;
      per_story[index_of(t.stories, r.story)] += 1;
    }
    for (std::size_t s = 0; s < ns; ++s)
      for (auto& v : m[s]) v = per_story[s] > 0 ? v / per_story[s] : 0.0;
    return m;
  }
  const RatingsTable z = standardize(t, how);
  CellMatrix count(ns, std::vector<double>(ne, 0.0));
  for (const auto& r : z.rows) {
    const auto s = index_of(t.stories, r.story), e = index_of(t.emotions, r.emotion);
    m[s][e] += r.rating;
    count[s][e] += 1;
  }
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t e = 0; e < ne; ++e) {
      m[s][e] = count[s][e] > 0 ? m[s][e] / count[s][e] : 0.0;
      lo = std::min(lo, m[s][e]);
      hi = std::max(hi, m[s][e]);
    }
  for (auto& row : m)
    for (auto& v : row) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return m;
}

PrecisionStats human_precision(const RatingsTable& t) {
  PrecisionStats st;
  for (Emotion s : t.stories)
    if (index_of(t.emotions, s) == t.emotions.size())
      throw DomainError("story " + name(s) + " has no matching target emotion");
  for (const auto& p : t.participants()) {
    double sum = 0;
    for (Emotion s : t.stories) {
      if (t.mode == RatingMode::forced) {
        for (const auto& r : t.rows)
          if (r.participant == p && r.story == s && r.rating == 1 && r.emotion == s) sum += 1;
        continue;
      }
      std::vector<double> vals(t.emotions.size(), 0.0);
      for (const auto& r : t.rows)
        if (r.participant == p && r.story == s) vals[index_of(t.emotions, r.emotion)] = r.rating;
      const double lo = *std::min_element(vals.begin(), vals.end());
      double total = 0;
      for (auto& v : vals) total += (v -= lo);
      const double target = vals[index_of(t.emotions, s)];
      sum += total > 0 ? target / total : 1.0 / static_cast<double>(vals.size());
    }
    st.per_participant.push_back(sum / static_cast<double>(t.stories.size()));
  }
  const double n = static_cast<double>(st.per_participant.size());
  st.mean = std::accumulate(st.per_participant.begin(), st.per_participant.end(), 0.0) / n;
  double ss = 0;
  for (double v : st.per_participant) ss += (v - st.mean) * (v - st.mean);
  st.variance = n > 1 ? ss / (n - 1) : 0.0;
  return st;
}

namespace {

double draw_beta(double mean, double var, Rng& rng) {
  if (var <= 0) return mean;
  if (mean <= 0 || mean >= 1) return mean;
  const double cap = mean * (1 - mean);
  const double v = std::min(var, 0.999 * cap);
  const double k = cap / v - 1;
  const double a = mean * k, b = (1 - mean) * k;
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  // Tiny shape parameters can underflow both draws; fall back to the limiting Bernoulli.
  if (!(x + y > 0)) return uniform01(rng) < mean ? 1.0 : 0.0;
  return x / (x + y);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

RatingsTable synthetic_ratings(RatingMode mode, const std::vector<Emotion>& stories,
                               const std::vector<Emotion>& emotions, int participants, double precision_mean,
                               double precision_var, std::uint64_t seed) {
  if (participants < 1) throw DomainError("participant count must be positive");
  if (!(precision_mean >= 0 && precision_mean <= 1) || !(precision_var >= 0))
    throw DomainError("precision statistics out of range");
  for (Emotion s : stories)
    if (index_of(emotions, s) == emotions.size()) throw DomainError("story " + name(s) + " is not an emotion");
  RatingsTable t;
  t.mode = mode;
  t.stories = stories;
  t.emotions = emotions;
  const std::size_t n = stories.size(), k = emotions.size();
  if (mode == RatingMode::forced && n != k) throw DomainError("forced choice needs as many emotions as stories");
  if (k < 2) throw DomainError("need at least two emotions");
  const int width = static_cast<int>(std::to_string(participants).size());
  for (int pi = 0; pi < participants; ++pi) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(pi)));
    std::string id = std::to_string(pi + 1);
    id = "p" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    const double p = draw_beta(precision_mean, precision_var, rng);
    if (mode == RatingMode::forced) {
      // p * n stories answered correctly; the rest form a derangement.
      auto correct = static_cast<std::size_t>(std::lround(p * static_cast<double>(n)));
      if (n - correct == 1) correct = p * static_cast<double>(n) > static_cast<double>(n) - 1 ? n : n - 2;
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      shuffle(order, rng);
      std::vector<std::size_t> wrong(order.begin() + static_cast<std::ptrdiff_t>(correct), order.end());
      std::vector<std::size_t> assign(n);
      for (std::size_t i = 0; i < correct; ++i) assign[order[i]] = order[i];
      if (!wrong.empty()) {
        std::vector<std::size_t> perm = wrong;
        do shuffle(perm, rng);
        while ([&] {
          for (std::size_t i = 0; i < wrong.size(); ++i)
            if (perm[i] == wrong[i]) return true;
          return false;
        }());
        for (std::size_t i = 0; i < wrong.size(); ++i) assign[wrong[i]] = perm[i];
      }
      for (std::size_t s = 0; s < n; ++s) {
        // Stories and emotions share an order only through the story's own emotion.
        const Emotion target = stories[s];
        const Emotion pick = stories[assign[s]];
        for (Emotion e : emotions) t.rows.push_back({id, target, e, e == pick ? 1.0 : 0.0});
      }
      continue;
    }
    for (Emotion s : stories) {
      const std::size_t ti = index_of(emotions, s);
      std::vector<double> vals(k, 0.0);
      double others = 0;
      for (std::size_t e = 0; e < k; ++e)
        if (e != ti) others += (vals[e] = 10.0 * uniform01(rng));
      std::size_t zero = uniform_index(rng, k - 1);
      if (zero >= ti) ++zero;
      others -= vals[zero];
      vals[zero] = 0;
      if (p >= 1 || others <= 0) {
        std::fill(vals.begin(), vals.end(), 0.0);
        vals[ti] = p > 0 ? 10.0 : 0.0;
      } else {
        vals[ti] = p / (1 - p) * others;
      }
      const double hi = *std::max_element(vals.begin(), vals.end());
      if (hi > 10)
        for (auto& v : vals) v = std::min(10.0, v * 10.0 / hi);
      for (std::size_t e = 0; e < k; ++e) t.rows.push_back({id, s, emotions[e], vals[e]});
    }
  }
  return t;
}

Metrics metrics(const std::vector<double>& model, const std::vector<double>& human) {
  if (model.size() != human.size()) throw DomainError("metric inputs differ in length");
  if (model.size() < 2) throw DomainError("metrics need at least two cells");
  const double n = static_cast<double>(model.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    mx += model[i];
    my += human[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0, se = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double dx = model[i] - mx, dy = human[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
    se += (model[i] - human[i]) * (model[i] - human[i]);
  }
  if (syy <= 0) throw DomainError("human values are all equal");
  Metrics m;
  m.rmse = std::sqrt(se / n);
  m.r_squared = sxx > 0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return m;
}

namespace {

std::vector<Emotion> emotion_list(std::string_view v, int line) {
  std::vector<Emotion> out;
  for (auto w : detail::split_ws(v)) {
    auto e = find_emotion(w);
    if (!e) throw ParseError(line, 1, "unknown emotion '" + std::string(w) + "'");
    if (std::find(out.begin(), out.end(), *e) != out.end())
      throw ParseError(line, 1, "emotion listed twice: " + std::string(w));
    out.push_back(*e);
  }
  if (out.empty()) throw ParseError(line, 1, "empty emotion list");
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  bool has_emotions = false;
  int line_no = 0;
  std::set<std::string> seen;
  for (auto raw : detail::lines_of(text)) {
    ++line_no;
    if (auto h = raw.find('#'); h != std::string_view::npos) raw = raw.substr(0, h);
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, 1, "expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError(line_no, 1, "duplicate key '" + key + "'");
    auto num = [&]() {
      auto v = detail::to_double(value);
      if (!v) throw ParseError(line_no, static_cast<int>(eq) + 2, "expected a number for '" + key + "'");
      return *v;
    };
    auto integer = [&]() {
      auto v = detail::to_int(value);
      if (!v) throw ParseError(line_no, static_cast<int>(eq) + 2, "expected an integer for '" + key + "'");
      return *v;
    };
    if (key == "name") {
      c.name = std::string(value);
    } else if (key == "mode") {
      if (value != "free" && value != "forced") throw ParseError(line_no, 1, "mode must be free or forced");
      c.mode = parse_mode(value);
    } else if (key == "stories") {
      c.stories = emotion_list(value, line_no);
    } else if (key == "emotions") {
      c.emotions = emotion_list(value, line_no);
      has_emotions = true;
    } else if (key == "participants") {
      c.participants = static_cast<int>(integer());
    } else if (key == "human_precision_mean") {
      c.human_precision_mean = num();
    } else if (key == "human_precision_var") {
      c.human_precision_var = num();
    } else if (key == "human_csv") {
      std::filesystem::path p{std::string(value)};
      c.human_csv = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    } else if (key == "seed") {
      auto v = detail::to_int(value);
      if (!v || *v < 0) throw ParseError(line_no, 1, "seed must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(*v);
    } else if (key == "corpus_seed") {
      auto v = detail::to_int(value);
      if (!v || *v < 0) throw ParseError(line_no, 1, "corpus_seed must be a non-negative integer");
      c.corpus_seed = static_cast<std::uint64_t>(*v);
    } else if (key == "alpha") {
      c.hyper.alpha = num();
    } else if (key == "epsilon") {
      c.hyper.epsilon = num();
    } else if (key == "episodes") {
      c.hyper.episodes = static_cast<int>(integer());
    } else if (key == "max_steps") {
      c.hyper.max_steps = static_cast<int>(integer());
    } else if (key == "corpus_per_class") {
      c.corpus_per_class = static_cast<int>(integer());
    } else if (key == "medium_mean") {
      c.medium_mean = num();
    } else if (key == "c_grid") {
      for (auto w : detail::split_ws(value)) {
        auto v = detail::to_double(w);
        if (!v || *v <= 0) throw ParseError(line_no, 1, "c_grid values must be positive numbers");
        c.c_grid.push_back(*v);
      }
    } else if (key == "match_tolerance") {
      c.match_tolerance = num();
    } else if (key == "standardize") {
      if (value == "story")
        c.standardization = Standardization::per_story;
      else if (value == "participant")
        c.standardization = Standardization::per_participant;
      else
        throw ParseError(line_no, 1, "standardize must be story or participant");
    } else {
      throw ParseError(line_no, 1, "unknown key '" + key + "'");
    }
  }
  if (c.stories.empty()) throw DomainError("config lists no stories");
  if (!has_emotions) c.emotions = c.stories;
  for (Emotion s : c.stories)
    if (index_of(c.emotions, s) == c.emotions.size())
      throw DomainError("story " + name(s) + " is missing from the emotion list");
  if (c.participants < 1) throw DomainError("participants must be positive");
  if (c.corpus_per_class < 2) throw DomainError("corpus_per_class must be at least 2");
  check_hyperparams(c.hyper);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path), path.parent_path());
}

Emotion argmax_emotion(const std::vector<Emotion>& emotions, const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return emotions[best];
}

StudySetup prepare_study(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto log = [&](const std::string& m) {
    if (opt.log) opt.log(m);
  };
  Knowledge knowledge = default_knowledge(cfg.medium_mean);
  if (!opt.assets_dir.empty() && std::filesystem::exists(opt.assets_dir / "scherer_patterns.csv")) {
    knowledge = load_knowledge(opt.assets_dir);
  }
  knowledge.levels[NominalLevel::medium].a = cfg.medium_mean;

  std::vector<StoryResult> stories;
  std::vector<Target> targets;
  for (Emotion s : cfg.stories) {
    const auto path = opt.assets_dir / "mdps" / (name(s) + ".mdp");
    try {
      const MdpSpec spec = load_mdp(path);
      Hyperparams h = cfg.hyper;
      h.seed = mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(s));
      const TrainedAgent agent = train_cached(spec, h, opt.cache_dir);
      const AppraisalDetail d = appraise_detail(agent, spec);
      StoryResult sr;
      sr.story = s;
      sr.appraisal = d.vector;
      sr.td_error = d.delta;
      sr.truncated_episodes = agent.stats.truncated_episodes;
      stories.push_back(sr);
      targets.push_back({d.vector, s});
      log("story " + name(s) + ": appraisal " + appraisal_to_json(d.vector));
    } catch (const Error& e) {
      throw DomainError("story " + name(s) + ": " + e.what());
    }
  }

  const std::uint64_t classifier_seed = cfg.corpus_seed.value_or(cfg.seed);
  PreparedCorpus corpus(build_corpus(knowledge, cfg.emotions, cfg.corpus_per_class, mix_seed(classifier_seed, 2)),
                        cfg.emotions);
  log("corpus: " + std::to_string(corpus.size()) + " samples, gamma " + format_number(corpus.gamma()));

  CalibrationOptions co;
  co.grid = cfg.c_grid;
  co.match_tolerance = cfg.match_tolerance;
  co.svm.seed = mix_seed(classifier_seed, 3);
  return StudySetup{std::move(stories), std::move(targets), std::move(corpus), co};
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto log = [&](const std::string& m) {
    if (opt.log) opt.log(m);
  };
  ExperimentReport rep;
  rep.config = cfg;
  StudySetup setup = prepare_study(cfg, opt);
  rep.stories = setup.stories;
  const auto& targets = setup.targets;
  const auto& corpus = setup.corpus;
  const auto& co = setup.calibration;
  rep.gamma = corpus.gamma();

  RatingsTable human;
  if (!cfg.human_csv.empty()) {
    human = load_ratings(cfg.human_csv, cfg.mode, cfg.stories, cfg.emotions);
    rep.human_source = "csv";
  } else {
    if (!cfg.human_precision_mean || !cfg.human_precision_var)
      throw DomainError("config needs human_csv or human_precision_mean and human_precision_var");
    human = synthetic_ratings(cfg.mode, cfg.stories, cfg.emotions, cfg.participants, *cfg.human_precision_mean,
                              *cfg.human_precision_var, mix_seed(cfg.seed, 5));
    rep.human_source = "synthetic";
  }
  rep.human_stats = human_precision(human);
  const double target_mean = cfg.human_precision_mean.value_or(rep.human_stats.mean);
  const double target_var = cfg.human_precision_var.value_or(rep.human_stats.variance);

  rep.calibration = calibrate_c(corpus, targets, target_mean, target_var, co);
  log("calibration: c_mean " + format_number(rep.calibration.c_mean) + ", c_var " +
      format_number(rep.calibration.c_var) + ", precision " + format_number(rep.calibration.precision_at_c_mean));

  rep.participant_c = sample_participant_cs(rep.calibration, cfg.participants, mix_seed(cfg.seed, 4));
  for (auto& sr : rep.stories) sr.model_intensity.assign(cfg.emotions.size(), 0.0);
  double precision_sum = 0;
  for (std::size_t i = 0; i < rep.participant_c.size(); ++i) {
    const SvmModel m = train_svm(corpus, rep.participant_c[i], co.svm);
    for (const auto& w : m.warnings) log("participant " + std::to_string(i + 1) + ": " + w);
    double prec = 0;
    for (std::size_t s = 0; s < rep.stories.size(); ++s) {
      const auto p = predict_intensities(m, rep.stories[s].appraisal);
      for (std::size_t e = 0; e < p.size(); ++e) rep.stories[s].model_intensity[e] += p[e];
      prec += p[index_of(cfg.emotions, rep.stories[s].story)];
    }
    precision_sum += prec / static_cast<double>(rep.stories.size());
  }
  const double n = static_cast<double>(rep.participant_c.size());
  rep.model_precision_mean = precision_sum / n;
  for (auto& sr : rep.stories)
    for (auto& v : sr.model_intensity) v /= n;
  log("participants: " + std::to_string(rep.participant_c.size()) + " models trained");

  const CellMatrix hm = human_matrix(human, cfg.standardization);
  std::vector<double> mv, hv;
  for (std::size_t s = 0; s < rep.stories.size(); ++s) {
    auto& sr = rep.stories[s];
    sr.human = hm[s];
    if (argmax_emotion(cfg.emotions, sr.model_intensity) == sr.story) ++rep.argmax_agreement;
    mv.insert(mv.end(), sr.model_intensity.begin(), sr.model_intensity.end());
    hv.insert(hv.end(), sr.human.begin(), sr.human.end());
  }
  rep.metrics = metrics(mv, hv);
  return rep;
}

namespace {

ojson emotion_map(const std::vector<Emotion>& emotions, const std::vector<double>& v) {
  ojson o = ojson::object();
  for (std::size_t i = 0; i < emotions.size(); ++i) o[name(emotions[i])] = v[i];
  return o;
}

ojson names(const std::vector<Emotion>& v) {
  ojson a = ojson::array();
  for (Emotion e : v) a.push_back(name(e));
  return a;
}

}  // namespace

std::string report_to_json(const ExperimentReport& r) {
  const auto& c = r.config;
  ojson config = {{"name", c.name},
                  {"mode", std::string(mode_name(c.mode))},
                  {"stories", names(c.stories)},
                  {"emotions", names(c.emotions)},
                  {"participants", c.participants},
                  {"seed", c.seed},
                  {"alpha", c.hyper.alpha},
                  {"epsilon", c.hyper.epsilon},
                  {"episodes", c.hyper.episodes},
                  {"max_steps", c.hyper.max_steps},
                  {"corpus_per_class", c.corpus_per_class},
                  {"medium_mean", c.medium_mean},
                  {"match_tolerance", c.match_tolerance},
                  {"standardize", c.standardization == Standardization::per_story ? "story" : "participant"}};
  if (c.human_precision_mean) config["human_precision_mean"] = *c.human_precision_mean;
  if (c.human_precision_var) config["human_precision_var"] = *c.human_precision_var;
  if (c.corpus_seed) config["corpus_seed"] = *c.corpus_seed;
  if (!c.c_grid.empty()) config["c_grid"] = c.c_grid;
  if (!c.human_csv.empty()) config["human_csv"] = std::filesystem::path(c.human_csv).filename().string();

  ojson stories = ojson::array();
  for (const auto& s : r.stories) {
    stories.push_back({{"story", name(s.story)},
                       {"appraisal", ojson::parse(appraisal_to_json(s.appraisal))},
                       {"td_error", s.td_error},
                       {"truncated_episodes", s.truncated_episodes},
                       {"argmax", name(argmax_emotion(c.emotions, s.model_intensity))},
                       {"model_intensity", emotion_map(c.emotions, s.model_intensity)},
                       {"human", emotion_map(c.emotions, s.human)}});
  }
  ojson doc = {{"config", config},
               {"human",
                {{"source", r.human_source},
                 {"participants", r.human_stats.per_participant.size()},
                 {"precision_mean", r.human_stats.mean},
                 {"precision_var", r.human_stats.variance}}},
               {"kernel_gamma", r.gamma},
               {"calibration", ojson::parse(calibration_to_json(r.calibration))},
               {"participant_c", r.participant_c},
               {"model_precision_mean", r.model_precision_mean},
               {"stories", stories},
               {"argmax_agreement", r.argmax_agreement},
               {"r_squared", r.metrics.r_squared},
               {"rmse", r.metrics.rmse}};
  return doc.dump(2) + "\n";
}

std::string appraisals_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "story,suddenness,goal_relevance,conduciveness,power,td_error\n";
  for (const auto& s : r.stories)
    out << name(s.story) << ',' << format_number(s.appraisal.suddenness) << ','
        << format_number(s.appraisal.goal_relevance) << ',' << format_number(s.appraisal.conduciveness) << ','
        << format_number(s.appraisal.power) << ',' << format_number(s.td_error) << '\n';
  return out.str();
}

std::string intensities_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "story,emotion,model,human\n";
  for (const auto& s : r.stories)
    for (std::size_t e = 0; e < r.config.emotions.size(); ++e)
      out << name(s.story) << ',' << name(r.config.emotions[e]) << ',' << format_number(s.model_intensity[e]) << ','
          << format_number(s.human[e]) << '\n';
  return out.str();
}

Comparison compare_with_ratings(std::string_view intensities, std::string_view ratings, RatingMode mode,
                                Standardization how) {
  Comparison c;
  std::map<std::pair<Emotion, Emotion>, double> model;
  int line_no = 0;
  bool header = false;
  for (auto raw : detail::lines_of(intensities)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (!header) {
      if (!line.starts_with("story,emotion,model")) throw ParseError(line_no, 1, "expected header story,emotion,model");
      header = true;
      continue;
    }
    auto cells = detail::split(line, ',');
    if (cells.size() < 3) throw ParseError(line_no, 1, "expected at least 3 fields");
    auto story = find_emotion(detail::trim(cells[0]));
    auto emo = find_emotion(detail::trim(cells[1]));
    auto value = detail::to_double(cells[2]);
    if (!story || !emo) throw ParseError(line_no, 1, "unknown story or emotion");
    if (!value || !std::isfinite(*value)) throw ParseError(line_no, 1, "model intensity is not a number");
    if (index_of(c.stories, *story) == c.stories.size()) c.stories.push_back(*story);
    if (index_of(c.emotions, *emo) == c.emotions.size()) c.emotions.push_back(*emo);
    if (!model.emplace(std::pair{*story, *emo}, *value).second)
      throw ParseError(line_no, 1, "duplicate cell " + name(*story) + "/" + name(*emo));
  }
  if (model.empty()) throw DomainError("no model intensities");
  c.model.assign(c.stories.size(), std::vector<double>(c.emotions.size(), 0.0));
  for (std::size_t s = 0; s < c.stories.size(); ++s)
    for (std::size_t e = 0; e < c.emotions.size(); ++e) {
      auto it = model.find({c.stories[s], c.emotions[e]});
      if (it == model.end())
        throw DomainError("missing model intensity for " + name(c.stories[s]) + "/" + name(c.emotions[e]));
      c.model[s][e] = it->second;
    }

  const RatingsTable table = parse_ratings(ratings, mode, c.stories, c.emotions);
  c.human_stats = human_precision(table);
  c.human = human_matrix(table, how);
  std::vector<double> mv, hv;
  for (std::size_t s = 0; s < c.stories.size(); ++s) {
    if (argmax_emotion(c.emotions, c.model[s]) == c.stories[s]) ++c.argmax_agreement;
    mv.insert(mv.end(), c.model[s].begin(), c.model[s].end());
    hv.insert(hv.end(), c.human[s].begin(), c.human[s].end());
  }
  c.metrics = metrics(mv, hv);
  return c;
}

std::string comparison_to_json(const Comparison& c) {
  ojson stories = ojson::array();
  for (std::size_t s = 0; s < c.stories.size(); ++s)
    stories.push_back({{"story", name(c.stories[s])},
                       {"model_argmax", name(argmax_emotion(c.emotions, c.model[s]))},
                       {"human_argmax", name(argmax_emotion(c.emotions, c.human[s]))},
                       {"model_intensity", emotion_map(c.emotions, c.model[s])},
                       {"human", emotion_map(c.emotions, c.human[s])}});
  ojson doc = {{"participants", c.human_stats.per_participant.size()},
               {"human_precision_mean", c.human_stats.mean},
               {"human_precision_var", c.human_stats.variance},
               {"stories", stories},
               {"argmax_agreement", c.argmax_agreement},
               {"r_squared", c.metrics.r_squared},
               {"rmse", c.metrics.rmse}};
  return doc.dump(2) + "\n";
}

}  // namespace appraise_rl
