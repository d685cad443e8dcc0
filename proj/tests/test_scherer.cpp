#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "appraise_rl/errors.hpp"
#include "appraise_rl/scherer.hpp"

using namespace appraise_rl;

namespace {

struct Moments {
  double mean = 0, var = 0, lo = 1, hi = 0;
};

template <class F>
Moments moments(F draw, int n = 40000) {
  Moments m;
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (auto& x : xs) {
    x = draw();
    m.lo = std::min(m.lo, x);
    m.hi = std::max(m.hi, x);
    m.mean += x;
  }
  m.mean /= n;
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= n;
  return m;
}

bool same_pattern(const AppraisalPattern& a, const AppraisalPattern& b) {
  return a.emotion == b.emotion && a.suddenness == b.suddenness && a.goal_relevance == b.goal_relevance &&
         a.conduciveness == b.conduciveness && a.power == b.power;
}

}  // namespace

TEST_CASE("emotion names") {
  CHECK(all_emotions().size() == 11);
  for (Emotion e : all_emotions()) CHECK(parse_emotion(emotion_name(e)) == e);
  CHECK_FALSE(find_emotion("surprise"));
  CHECK_THROWS_AS(parse_emotion("surprise"), DomainError);
}

TEST_CASE("level distributions") {
  Rng rng(42);
  const double half_normal_mean = std::sqrt(2.0 / std::numbers::pi);

  auto above = moments([&] { return sample_level({LevelDistribution::Kind::above, 0.0, 0.1}, rng); });
  CHECK(above.lo >= 0.0);
  CHECK(above.mean == doctest::Approx(0.1 * half_normal_mean).epsilon(0.03));

  auto below = moments([&] { return sample_level({LevelDistribution::Kind::below, 1.0, 0.05}, rng); });
  CHECK(below.hi <= 1.0);
  CHECK(below.mean == doctest::Approx(1.0 - 0.05 * half_normal_mean).epsilon(0.003));

  auto normal = moments([&] { return sample_level({LevelDistribution::Kind::normal, 0.5, 0.05}, rng); });
  CHECK(normal.mean == doctest::Approx(0.5).epsilon(0.005));
  CHECK(std::sqrt(normal.var) == doctest::Approx(0.05).epsilon(0.03));

  auto uniform = moments([&] { return sample_level({LevelDistribution::Kind::uniform, 0.0, 1.0}, rng); });
  CHECK(uniform.mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(uniform.var == doctest::Approx(1.0 / 12).epsilon(0.03));

  // Clipping: a wide normal at the edge piles mass onto the bound.
  auto clipped = moments([&] { return sample_level({LevelDistribution::Kind::normal, 1.0, 0.5}, rng); });
  CHECK(clipped.hi == 1.0);
  CHECK(clipped.lo >= 0.0);
}

TEST_CASE("mixtures weigh their levels equally") {
  const Knowledge k = default_knowledge();
  Rng rng(3);
  int near_high = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    if (sample_level(LevelMix{NominalLevel::high, NominalLevel::medium}, k.levels, rng) > 0.75) ++near_high;
  CHECK(near_high / double(n) == doctest::Approx(0.5).epsilon(0.03));
  CHECK_THROWS_AS(sample_level(LevelMix{}, k.levels, rng), DomainError);
}

TEST_CASE("bundled tables match the built-in defaults") {
  const Knowledge file = load_knowledge(APPRAISE_RL_TEST_ASSETS);
  const Knowledge builtin = default_knowledge();
  REQUIRE(file.patterns.size() == 11);
  for (Emotion e : all_emotions()) CHECK(same_pattern(file.pattern(e), builtin.pattern(e)));
  for (int i = 0; i < kLevelCount; ++i) {
    CHECK(file.levels.dist[i].kind == builtin.levels.dist[i].kind);
    CHECK(file.levels.dist[i].a == builtin.levels.dist[i].a);
    CHECK(file.levels.dist[i].b == builtin.levels.dist[i].b);
  }
  CHECK(default_knowledge(0.0).levels[NominalLevel::medium].a == 0.0);
}

TEST_CASE("table parsing errors") {
  CHECK_THROWS_AS(parse_level_mapping("level,distribution,a,b\nmedium,cauchy,0,1\n"), ParseError);
  CHECK_THROWS_AS(parse_level_mapping("level,dist\n"), ParseError);
  CHECK_THROWS_AS(parse_level_mapping("level,distribution,a,b\nmedium,normal,0.5,0.05\n"), DomainError);
  CHECK_THROWS_AS(parse_patterns("emotion,suddenness,goal_relevance,conduciveness,power\nwonder,low,low,low,low\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_patterns("emotion,suddenness,goal_relevance,conduciveness,power\njoy,low,huge,low,low\n"),
                  ParseError);
}

TEST_CASE("corpus construction") {
  const Knowledge k = default_knowledge();
  const std::vector<Emotion> four{Emotion::anxiety, Emotion::despair, Emotion::irritation, Emotion::rage};
  const auto c = build_corpus(k, four, 50, 17);
  CHECK(c.size() == 200);
  for (Emotion e : four) CHECK(std::count_if(c.begin(), c.end(), [&](auto& s) { return s.label == e; }) == 50);
  for (const auto& s : c) {
    for (double x : {s.vector.suddenness, s.vector.goal_relevance, s.vector.conduciveness, s.vector.power}) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
  }
  CHECK(build_corpus(k, four, 50, 17) == c);
  CHECK(build_corpus(k, four, 50, 18) != c);
  // Shuffled rather than grouped by class.
  CHECK_FALSE(std::is_sorted(c.begin(), c.end(), [](auto& a, auto& b) { return a.label < b.label; }));

  // A class's samples do not depend on which other classes are present.
  auto of = [](std::vector<LabeledSample> v, Emotion e) {
    std::vector<std::array<double, 4>> out;
    for (auto& s : v)
      if (s.label == e) out.push_back({s.vector.suddenness, s.vector.goal_relevance, s.vector.conduciveness, s.vector.power});
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(of(build_corpus(k, {Emotion::rage}, 50, 17), Emotion::rage) == of(c, Emotion::rage));

  CHECK_THROWS_AS(build_corpus(k, four, 0, 1), DomainError);
  CHECK_THROWS_AS(build_corpus(k, {}, 5, 1), DomainError);
  CHECK_THROWS_AS(build_corpus(k, {Emotion::joy, Emotion::joy}, 5, 1), DomainError);
}

TEST_CASE("corpus CSV round-trip") {
  const auto c = build_corpus(default_knowledge(), all_emotions(), 10, 5);
  const std::string csv = corpus_to_csv(c);
  CHECK(csv.rfind("suddenness,goal_relevance,conduciveness,power,label\n", 0) == 0);
  CHECK(corpus_from_csv(csv) == c);
  CHECK_THROWS_AS(corpus_from_csv("suddenness,goal_relevance,conduciveness,power,label\n2,0,0,0,joy\n"), ParseError);
  CHECK_THROWS_AS(corpus_from_csv("suddenness,goal_relevance,conduciveness,power,label\n0,0,0,0,awe\n"), ParseError);
}

TEST_CASE("pattern means follow the nominal levels") {
  const Knowledge k = default_knowledge();
  Rng rng(8);
  // Fear: high suddenness, obstructive.
  double s = 0, cd = 0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    const auto v = sample_pattern(k.pattern(Emotion::fear), k.levels, rng);
    s += v.suddenness;
    cd += v.conduciveness;
  }
  CHECK(s / n > 0.85);
  CHECK(cd / n < 0.1);
}
