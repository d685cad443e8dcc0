#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "appraise_rl/errors.hpp"
#include "appraise_rl/study.hpp"

using namespace appraise_rl;

namespace {

const std::vector<Emotion> kTwo{Emotion::fear, Emotion::rage};

const char* kFree = R"(participant,story,emotion,rating
p1,fear,fear,8
p1,fear,rage,2
p1,rage,fear,5
p1,rage,rage,5
p2,fear,fear,4
p2,fear,rage,6
p2,rage,fear,0
p2,rage,rage,10
)";

const char* kForced = R"(participant,story,emotion,rating
a,fear,fear,1
a,rage,rage,1
b,fear,rage,1
b,rage,fear,1
c,fear,fear,1
c,fear,rage,0
c,rage,rage,1
)";

}  // namespace

TEST_CASE("free ratings parse and validate") {
  const RatingsTable t = parse_ratings(kFree, RatingMode::free, kTwo, kTwo);
  CHECK(t.rows.size() == 8);
  CHECK(t.participants() == std::vector<std::string>{"p1", "p2"});
  CHECK(parse_ratings(ratings_to_csv(t), RatingMode::free, kTwo, kTwo).rows.size() == 8);

  const std::string header = "participant,story,emotion,rating\n";
  CHECK_THROWS_AS(parse_ratings(header, RatingMode::free, kTwo, kTwo), DomainError);
  CHECK_THROWS_AS(parse_ratings("p,fear,fear,1\n", RatingMode::free, kTwo, kTwo), ParseError);
  CHECK_THROWS_AS(parse_ratings(header + "p1,fear,fear,11\n", RatingMode::free, kTwo, kTwo), ParseError);
  CHECK_THROWS_AS(parse_ratings(header + "p1,fear,joy,1\n", RatingMode::free, kTwo, kTwo), ParseError);
  CHECK_THROWS_AS(parse_ratings(header + "p1,fear,fear\n", RatingMode::free, kTwo, kTwo), ParseError);
  CHECK_THROWS_AS(parse_ratings(header + "p1,fear,fear,x\n", RatingMode::free, kTwo, kTwo), ParseError);
  CHECK_THROWS_AS(parse_ratings(header + "p1,fear,fear,1\n", RatingMode::free, kTwo, kTwo), DomainError);
  CHECK_THROWS_AS(parse_ratings(std::string(kFree) + "p1,fear,fear,3\n", RatingMode::free, kTwo, kTwo), DomainError);
  try {
    parse_ratings(header + "p1,fear,fear,1\np1,fear,rage,-1\n", RatingMode::free, kTwo, kTwo);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("forced ratings must be a bijection") {
  const RatingsTable t = parse_ratings(kForced, RatingMode::forced, kTwo, kTwo);
  CHECK(t.participants().size() == 3);
  const std::string header = "participant,story,emotion,rating\n";
  try {
    parse_ratings(header + "a,fear,fear,1\na,rage,fear,1\n", RatingMode::forced, kTwo, kTwo);
    FAIL("expected a bijection error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()) == "bijection violated for participant a");
  }
  CHECK_THROWS_AS(parse_ratings(header + "a,fear,fear,1\n", RatingMode::forced, kTwo, kTwo), DomainError);
  CHECK_THROWS_AS(parse_ratings(header + "a,fear,fear,0.5\n", RatingMode::forced, kTwo, kTwo), ParseError);
}

TEST_CASE("human precision hand values") {
  const PrecisionStats fr = human_precision(parse_ratings(kFree, RatingMode::free, kTwo, kTwo));
  REQUIRE(fr.per_participant.size() == 2);
  CHECK(fr.per_participant[0] == doctest::Approx(0.75));
  CHECK(fr.per_participant[1] == doctest::Approx(0.5));
  CHECK(fr.mean == doctest::Approx(0.625));
  CHECK(fr.variance == doctest::Approx(0.03125));

  const PrecisionStats fc = human_precision(parse_ratings(kForced, RatingMode::forced, kTwo, kTwo));
  CHECK(fc.per_participant == std::vector<double>{1.0, 0.0, 1.0});
  CHECK(fc.mean == doctest::Approx(2.0 / 3.0));
  CHECK(fc.variance == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("standardization and the human matrix") {
  const RatingsTable t = parse_ratings(kFree, RatingMode::free, kTwo, kTwo);
  const RatingsTable z = standardize(t);
  CHECK(z.rows[0].rating == doctest::Approx(1.0));
  CHECK(z.rows[1].rating == doctest::Approx(-1.0));
  CHECK(z.rows[2].rating == 0.0);  // zero-variance group
  const RatingsTable zp = standardize(t, Standardization::per_participant);
  double sum = 0;
  for (int i = 0; i < 4; ++i) sum += zp.rows[static_cast<std::size_t>(i)].rating;
  CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));

  const CellMatrix m = human_matrix(t);
  double lo = 1, hi = 0;
  for (const auto& row : m)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);

  const CellMatrix f = human_matrix(parse_ratings(kForced, RatingMode::forced, kTwo, kTwo));
  CHECK(f[0][0] == doctest::Approx(2.0 / 3.0));
  CHECK(f[0][1] == doctest::Approx(1.0 / 3.0));
  CHECK(f[1][1] == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(standardize(parse_ratings(kForced, RatingMode::forced, kTwo, kTwo)), DomainError);
}

TEST_CASE("metrics hand values") {
  const Metrics m = metrics({0.1, 0.2, 0.3, 0.4}, {0.2, 0.2, 0.2, 0.6});
  CHECK(m.rmse == doctest::Approx(std::sqrt(0.015)));
  CHECK(m.rmse == doctest::Approx(0.1225).epsilon(1e-3));
  CHECK(m.r_squared == doctest::Approx(0.6));
  CHECK(metrics({1, 2, 3}, {2, 4, 6}).r_squared == doctest::Approx(1.0));
  CHECK_THROWS_AS(metrics({1, 2}, {1}), DomainError);
}

TEST_CASE("synthetic ratings reproduce their precision statistics") {
  const std::vector<Emotion> seven{Emotion::happiness, Emotion::joy,     Emotion::pride, Emotion::boredom,
                                   Emotion::fear,      Emotion::sadness, Emotion::shame};
  const RatingsTable free = synthetic_ratings(RatingMode::free, seven, seven, 3000, 0.4, 0.028, 1);
  const PrecisionStats fs = human_precision(free);
  CHECK(fs.mean == doctest::Approx(0.4).epsilon(0.03));
  CHECK(fs.variance == doctest::Approx(0.028).epsilon(0.15));
  CHECK_NOTHROW(parse_ratings(ratings_to_csv(free), RatingMode::free, seven, seven));

  const RatingsTable forced = synthetic_ratings(RatingMode::forced, seven, seven, 3000, 0.87, 0.112, 2);
  const PrecisionStats ps = human_precision(forced);
  CHECK(ps.mean == doctest::Approx(0.87).epsilon(0.03));
  CHECK(ps.variance == doctest::Approx(0.112).epsilon(0.25));
  CHECK_NOTHROW(parse_ratings(ratings_to_csv(forced), RatingMode::forced, seven, seven));

  CHECK(ratings_to_csv(synthetic_ratings(RatingMode::free, kTwo, kTwo, 5, 0.5, 0.01, 3)) ==
        ratings_to_csv(synthetic_ratings(RatingMode::free, kTwo, kTwo, 5, 0.5, 0.01, 3)));
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"(# comment
name = demo
mode = forced
stories = fear rage
participants = 4
human_precision_mean = 0.6
human_precision_var = 0.01
seed = 5
corpus_seed = 9
episodes = 500
c_grid = 0.001 0.01 0.1
human_csv = ratings.csv
)",
                                          "/data");
  CHECK(c.name == "demo");
  CHECK(c.mode == RatingMode::forced);
  CHECK(c.stories == kTwo);
  CHECK(c.emotions == kTwo);
  CHECK(c.participants == 4);
  CHECK(*c.human_precision_mean == 0.6);
  CHECK(c.seed == 5);
  CHECK(*c.corpus_seed == 9);
  CHECK(c.hyper.episodes == 500);
  CHECK(c.c_grid == std::vector<double>{0.001, 0.01, 0.1});
  CHECK(std::filesystem::path(c.human_csv) == std::filesystem::path("/data/ratings.csv"));

  CHECK_THROWS_AS(parse_config("stories = fear\nfoo = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_config("stories = fear\nstories = rage\n"), ParseError);
  CHECK_THROWS_AS(parse_config("stories = fear\nparticipants = many\n"), ParseError);
  CHECK_THROWS_AS(parse_config("participants = 3\n"), DomainError);
  CHECK_THROWS_AS(parse_config("stories = fear\nemotions = rage joy\n"), DomainError);
  CHECK_THROWS_AS(parse_config("stories = fear\nalpha = 2\n"), DomainError);
}

TEST_CASE("bundled configs load") {
  for (const char* n : {"exp1", "exp2", "exp3_free", "exp3_forced"}) {
    CAPTURE(n);
    const ExperimentConfig c = load_config(std::filesystem::path(APPRAISE_RL_TEST_CONFIGS) / (std::string(n) + ".cfg"));
    CHECK(c.human_precision_mean);
    CHECK(c.human_precision_var);
  }
}

TEST_CASE("a small experiment end to end") {
  const auto dir = std::filesystem::temp_directory_path() / "appraise_rl_study_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ratings.csv") << kForced;
  }
  const ExperimentConfig cfg = parse_config(R"(name = small
mode = forced
stories = fear rage
participants = 3
human_csv = ratings.csv
seed = 4
corpus_per_class = 40
c_grid = 0.001 0.01 0.1 1
match_tolerance = 0.5
)",
                                            dir);
  RunOptions opt;
  opt.assets_dir = APPRAISE_RL_TEST_ASSETS;
  std::vector<std::string> logs;
  opt.log = [&](const std::string& m) { logs.push_back(m); };
  const ExperimentReport r = run_experiment(cfg, opt);
  CHECK_FALSE(logs.empty());
  CHECK(r.human_source == "csv");
  CHECK(r.human_stats.mean == doctest::Approx(2.0 / 3.0));
  REQUIRE(r.stories.size() == 2);
  CHECK(r.stories[0].story == Emotion::fear);
  CHECK(r.stories[1].story == Emotion::rage);
  CHECK(r.participant_c.size() == 3);
  for (const auto& s : r.stories) {
    double sum = 0;
    for (double v : s.model_intensity) sum += v;
    CHECK(sum == doctest::Approx(1.0));
  }

  const std::string json = report_to_json(r);
  CHECK(json == report_to_json(run_experiment(cfg, opt)));
  const auto doc = nlohmann::json::parse(json);
  CHECK(doc["config"]["human_csv"] == "ratings.csv");
  CHECK(doc["stories"][0]["story"] == "fear");
  CHECK(doc.contains("calibration"));
  CHECK(appraisals_csv(r).rfind("story,suddenness,goal_relevance,conduciveness,power,td_error\nfear,", 0) == 0);
  const std::string icsv = intensities_csv(r);
  CHECK(icsv.rfind("story,emotion,model,human\nfear,fear,", 0) == 0);

  const Comparison cmp = compare_with_ratings(icsv, kForced, RatingMode::forced);
  CHECK(cmp.stories == kTwo);
  CHECK(cmp.argmax_agreement == r.argmax_agreement);
  CHECK(cmp.metrics.rmse == doctest::Approx(r.metrics.rmse));
  CHECK(nlohmann::json::parse(comparison_to_json(cmp))["stories"].size() == 2);
  CHECK_THROWS_AS(compare_with_ratings("story,emotion,model\nfear,fear,1\n", kForced, RatingMode::forced), Error);
  CHECK_THROWS_AS(compare_with_ratings("story,emotion,model\nfear,fear,1\nfear,rage,0\nrage,fear,1\n", kForced,
                                       RatingMode::forced),
                  DomainError);

  std::filesystem::remove_all(dir);
}
