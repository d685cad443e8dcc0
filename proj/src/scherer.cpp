#include "appraise_rl/scherer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "appraise_rl/errors.hpp"
#include "text_util.hpp"

namespace appraise_rl {

namespace {

constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "happiness", "joy", "pride", "boredom", "fear", "sadness", "shame", "anxiety", "despair", "irritation", "rage"};

constexpr std::array<std::string_view, kLevelCount> kLevelNames = {"obstruct", "very_low",  "low", "medium",
                                                                   "high",     "very_high", "open"};

double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

LevelMix parse_mix(std::string_view cell, int line) {
  LevelMix mix;
  for (auto part : detail::split(cell, '/')) {
    auto lvl = find_level(detail::trim(part));
    if (!lvl) throw ParseError(line, 1, "unknown level '" + std::string(detail::trim(part)) + "'");
    mix.push_back(*lvl);
  }
  return mix;
}

// Rows that are neither blank nor comments, with their 1-based line numbers, header dropped.
std::vector<std::pair<int, std::vector<std::string_view>>> csv_rows(std::string_view csv, std::string_view header) {
  std::vector<std::pair<int, std::vector<std::string_view>>> rows;
  bool seen_header = false;
  int line_no = 0;
  for (auto line : detail::lines_of(csv)) {
    ++line_no;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!seen_header) {
      if (t != header) throw ParseError(line_no, 1, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    auto cells = detail::split(t, ',');
    for (auto& c : cells) c = detail::trim(c);
    rows.emplace_back(line_no, std::move(cells));
  }
  if (!seen_header) throw ParseError(1, 1, "missing header '" + std::string(header) + "'");
  return rows;
}

}  // namespace

const std::vector<Emotion>& all_emotions() {
  static const std::vector<Emotion> v = [] {
    std::vector<Emotion> out;
    for (int i = 0; i < kEmotionCount; ++i) out.push_back(static_cast<Emotion>(i));
    return out;
  }();
  return v;
}

std::string_view emotion_name(Emotion e) { return kEmotionNames[static_cast<std::size_t>(e)]; }

std::optional<Emotion> find_emotion(std::string_view name) {
  for (int i = 0; i < kEmotionCount; ++i)
    if (kEmotionNames[static_cast<std::size_t>(i)] == name) return static_cast<Emotion>(i);
  return std::nullopt;
}

Emotion parse_emotion(std::string_view name) {
  if (auto e = find_emotion(name)) return *e;
  throw DomainError("unknown emotion '" + std::string(name) + "'");
}

std::string_view level_name(NominalLevel l) { return kLevelNames[static_cast<std::size_t>(l)]; }

std::optional<NominalLevel> find_level(std::string_view name) {
  for (int i = 0; i < kLevelCount; ++i)
    if (kLevelNames[static_cast<std::size_t>(i)] == name) return static_cast<NominalLevel>(i);
  return std::nullopt;
}

const AppraisalPattern& Knowledge::pattern(Emotion e) const {
  for (const auto& p : patterns)
    if (p.emotion == e) return p;
  throw DomainError("no appraisal pattern for " + std::string(emotion_name(e)));
}

Knowledge default_knowledge(double medium_mean) {
  using K = LevelDistribution::Kind;
  using L = NominalLevel;
  Knowledge k;
  k.levels[L::obstruct] = {K::above, 0.0, 0.05};
  k.levels[L::very_low] = {K::above, 0.0, 0.05};
  k.levels[L::low] = {K::above, 0.0, 0.1};
  k.levels[L::medium] = {K::normal, medium_mean, 0.05};
  k.levels[L::high] = {K::below, 1.0, 0.1};
  k.levels[L::very_high] = {K::below, 1.0, 0.05};
  k.levels[L::open] = {K::uniform, 0.0, 1.0};

  auto row = [&](Emotion e, LevelMix s, LevelMix g, LevelMix c, LevelMix p) {
    k.patterns.push_back({e, std::move(s), std::move(g), std::move(c), std::move(p)});
  };
  using E = Emotion;
  row(E::happiness, {L::low}, {L::medium}, {L::high}, {L::open});
  row(E::joy, {L::high, L::medium}, {L::high}, {L::very_high}, {L::open});
  row(E::pride, {L::open}, {L::high}, {L::high}, {L::open});
  row(E::boredom, {L::very_low}, {L::low}, {L::open}, {L::medium});
  row(E::fear, {L::high}, {L::high}, {L::obstruct}, {L::very_low});
  row(E::sadness, {L::low}, {L::high}, {L::obstruct}, {L::very_low});
  row(E::shame, {L::open}, {L::high}, {L::obstruct}, {L::open});
  row(E::anxiety, {L::low}, {L::medium}, {L::obstruct}, {L::low});
  row(E::despair, {L::high}, {L::high}, {L::obstruct}, {L::very_low});
  row(E::irritation, {L::low}, {L::medium}, {L::obstruct}, {L::medium});
  row(E::rage, {L::high}, {L::high}, {L::obstruct}, {L::high});
  return k;
}

LevelMapping parse_level_mapping(std::string_view csv) {
  LevelMapping m = default_knowledge().levels;
  std::array<bool, kLevelCount> seen{};
  for (const auto& [line, cells] : csv_rows(csv, "level,distribution,a,b")) {
    if (cells.size() != 4) throw ParseError(line, 1, "expected 4 fields");
    auto lvl = find_level(cells[0]);
    if (!lvl) throw ParseError(line, 1, "unknown level '" + std::string(cells[0]) + "'");
    LevelDistribution d;
    if (cells[1] == "above")
      d.kind = LevelDistribution::Kind::above;
    else if (cells[1] == "below")
      d.kind = LevelDistribution::Kind::below;
    else if (cells[1] == "normal")
      d.kind = LevelDistribution::Kind::normal;
    else if (cells[1] == "uniform")
      d.kind = LevelDistribution::Kind::uniform;
    else
      throw ParseError(line, 1, "unknown distribution '" + std::string(cells[1]) + "'");
    auto a = detail::to_double(cells[2]);
    auto b = detail::to_double(cells[3]);
    if (!a || !b) throw ParseError(line, 1, "bad numeric parameter");
    if (d.kind != LevelDistribution::Kind::uniform && *b < 0) throw ParseError(line, 1, "negative sigma");
    d.a = *a;
    d.b = *b;
    m[*lvl] = d;
    seen[static_cast<std::size_t>(*lvl)] = true;
  }
  for (int i = 0; i < kLevelCount; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw DomainError("level mapping lacks '" + std::string(kLevelNames[static_cast<std::size_t>(i)]) + "'");
  return m;
}

std::vector<AppraisalPattern> parse_patterns(std::string_view csv) {
  std::vector<AppraisalPattern> out;
  for (const auto& [line, cells] : csv_rows(csv, "emotion,suddenness,goal_relevance,conduciveness,power")) {
    if (cells.size() != 5) throw ParseError(line, 1, "expected 5 fields");
    auto e = find_emotion(cells[0]);
    if (!e) throw ParseError(line, 1, "unknown emotion '" + std::string(cells[0]) + "'");
    for (const auto& p : out)
      if (p.emotion == *e) throw ParseError(line, 1, "duplicate pattern for '" + std::string(cells[0]) + "'");
    out.push_back({*e, parse_mix(cells[1], line), parse_mix(cells[2], line), parse_mix(cells[3], line),
                   parse_mix(cells[4], line)});
  }
  return out;
}

Knowledge load_knowledge(const std::filesystem::path& dir) {
  Knowledge k;
  k.levels = parse_level_mapping(detail::read_file(dir / "nominal_levels.csv"));
  k.patterns = parse_patterns(detail::read_file(dir / "scherer_patterns.csv"));
  return k;
}

double sample_level(const LevelDistribution& d, Rng& rng) {
  double x = 0.0;
  switch (d.kind) {
    case LevelDistribution::Kind::above: x = d.a + std::abs(d.b * std_normal(rng)); break;
    case LevelDistribution::Kind::below: x = d.a - std::abs(d.b * std_normal(rng)); break;
    case LevelDistribution::Kind::normal: x = d.a + d.b * std_normal(rng); break;
    case LevelDistribution::Kind::uniform: x = d.a + (d.b - d.a) * uniform01(rng); break;
  }
  return std::clamp(x, 0.0, 1.0);
}

double sample_level(const LevelMix& mix, const LevelMapping& m, Rng& rng) {
  if (mix.empty()) throw DomainError("empty level mixture");
  std::size_t pick = 0;
  if (mix.size() > 1)
    pick = std::min(mix.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(mix.size())));
  return sample_level(m[mix[pick]], rng);
}

AppraisalVector sample_pattern(const AppraisalPattern& p, const LevelMapping& m, Rng& rng) {
  AppraisalVector v;
  v.suddenness = sample_level(p.suddenness, m, rng);
  v.goal_relevance = sample_level(p.goal_relevance, m, rng);
  v.conduciveness = sample_level(p.conduciveness, m, rng);
  v.power = sample_level(p.power, m, rng);
  return v;
}

std::vector<LabeledSample> build_corpus(const Knowledge& k, const std::vector<Emotion>& emotions, int n_per,
                                        std::uint64_t seed) {
  if (n_per < 1) throw DomainError("n_per must be at least 1");
  if (emotions.empty()) throw DomainError("corpus needs at least one emotion");
  std::vector<LabeledSample> out;
  out.reserve(emotions.size() * static_cast<std::size_t>(n_per));
  for (Emotion e : emotions) {
    if (std::count(emotions.begin(), emotions.end(), e) > 1)
      throw DomainError("emotion listed twice: " + std::string(emotion_name(e)));
    const auto& pat = k.pattern(e);
    Rng rng(mix_seed(seed, 1 + static_cast<std::uint64_t>(e)));
    for (int i = 0; i < n_per; ++i) out.push_back({sample_pattern(pat, k.levels, rng), e});
  }
  Rng shuffle(mix_seed(seed, 1000));
  for (std::size_t i = out.size(); i > 1; --i) {
    auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(shuffle) * static_cast<double>(i)));
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

std::string corpus_to_csv(const std::vector<LabeledSample>& corpus) {
  std::ostringstream out;
  out << "suddenness,goal_relevance,conduciveness,power,label\n";
  for (const auto& s : corpus)
    out << format_number(s.vector.suddenness) << ',' << format_number(s.vector.goal_relevance) << ','
        << format_number(s.vector.conduciveness) << ',' << format_number(s.vector.power) << ','
        << emotion_name(s.label) << '\n';
  return out.str();
}

std::vector<LabeledSample> corpus_from_csv(std::string_view csv) {
  std::vector<LabeledSample> out;
  for (const auto& [line, cells] : csv_rows(csv, "suddenness,goal_relevance,conduciveness,power,label")) {
    if (cells.size() != 5) throw ParseError(line, 1, "expected 5 fields");
    double v[4];
    for (int i = 0; i < 4; ++i) {
      auto x = detail::to_double(cells[static_cast<std::size_t>(i)]);
      if (!x || *x < 0.0 || *x > 1.0) throw ParseError(line, 1, "appraisal value must be a number in [0, 1]");
      v[i] = *x;
    }
    auto e = find_emotion(cells[4]);
    if (!e) throw ParseError(line, 1, "unknown emotion '" + std::string(cells[4]) + "'");
    out.push_back({{v[0], v[1], v[2], v[3]}, *e});
  }
  return out;
}

}  // namespace appraise_rl
