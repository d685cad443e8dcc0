#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "appraise_rl/appraise_rl.h"

namespace {

std::string mdp_path(const char* name) {
  return (std::filesystem::path(APPRAISE_RL_TEST_ASSETS) / "mdps" / (std::string(name) + ".mdp")).string();
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ar_free_string(s);
  return out;
}

}  // namespace

TEST_CASE("status names and null arguments") {
  CHECK(std::strlen(ar_version()) > 0);
  CHECK(std::string(ar_status_name(AR_OK)) == "ok");
  ar_mdp* m = nullptr;
  CHECK(ar_mdp_parse(nullptr, &m) == AR_ERR_ARGUMENT);
  CHECK(std::strlen(ar_last_error()) > 0);
  CHECK(ar_mdp_load(mdp_path("fear").c_str(), nullptr) == AR_ERR_ARGUMENT);
  ar_free_string(nullptr);
  ar_mdp_free(nullptr);
}

TEST_CASE("error codes follow the failure kind") {
  ar_mdp* m = nullptr;
  CHECK(ar_mdp_parse("states S\n", &m) == AR_ERR_PARSE);
  CHECK(std::string(ar_last_error()).find("line 1") != std::string::npos);
  CHECK(m == nullptr);
  CHECK(ar_mdp_parse("states: S G\nterminal: G\ninitial: S\ndiscount: 3\n", &m) == AR_ERR_VALIDATION);
  CHECK(ar_mdp_load("/nonexistent/x.mdp", &m) == AR_ERR_IO);
}

TEST_CASE("check_file lists violations") {
  const auto path = std::filesystem::temp_directory_path() / "appraise_rl_capi_broken.mdp";
  {
    std::ofstream(path) << "states: S G\nterminal: G\ninitial: S\ntrans: S frwd -> G 0.5\nscript: S frwd G\n";
  }
  char* json = nullptr;
  CHECK(ar_mdp_check_file(path.string().c_str(), &json) == AR_ERR_VALIDATION);
  const std::string v = take(json);
  CHECK(v.find("probabilities do not sum to 1") != std::string::npos);
  CHECK(v.find("appraisal event not set") != std::string::npos);

  CHECK(ar_mdp_check_file(mdp_path("fear").c_str(), &json) == AR_OK);
  CHECK(take(json) == "[]");
  std::filesystem::remove(path);
}

TEST_CASE("train, appraise and serialize") {
  ar_mdp* m = nullptr;
  REQUIRE(ar_mdp_load(mdp_path("fear").c_str(), &m) == AR_OK);
  char* text = nullptr;
  REQUIRE(ar_mdp_serialize(m, &text) == AR_OK);
  ar_mdp* again = nullptr;
  CHECK(ar_mdp_parse(text, &again) == AR_OK);
  ar_free_string(text);
  ar_mdp_free(again);

  ar_hyperparams h;
  ar_hyperparams_default(&h);
  CHECK(h.alpha == 0.1);
  CHECK(h.episodes == 1000);
  h.seed = 7;
  ar_agent* a = nullptr;
  REQUIRE(ar_train(m, &h, nullptr, &a) == AR_OK);
  ar_appraisal v{};
  double delta = 0;
  REQUIRE(ar_appraise(a, m, &v, &delta) == AR_OK);
  CHECK(v.goal_relevance == 1.0);
  CHECK(v.conduciveness == 0.0);
  CHECK(v.power == 0.0);
  CHECK(delta < 0);

  char* json = nullptr;
  REQUIRE(ar_agent_to_json(a, &json) == AR_OK);
  ar_agent* b = nullptr;
  CHECK(ar_agent_from_json(json, &b) == AR_OK);
  ar_free_string(json);
  ar_appraisal w{};
  CHECK(ar_appraise(b, m, &w, nullptr) == AR_OK);
  CHECK(std::memcmp(&v, &w, sizeof v) == 0);

  REQUIRE(ar_appraisal_to_json(&v, &json) == AR_OK);
  CHECK(take(json).find("\"suddenness\"") != std::string::npos);

  h.alpha = 3;
  ar_agent* bad = nullptr;
  CHECK(ar_train(m, &h, nullptr, &bad) == AR_ERR_DOMAIN);
  CHECK(bad == nullptr);
  ar_agent_free(a);
  ar_agent_free(b);
  ar_mdp_free(m);
}

TEST_CASE("corpus and classifier") {
  char* csv = nullptr;
  REQUIRE(ar_corpus_csv(APPRAISE_RL_TEST_ASSETS, "fear rage", 30, 1, 0.5, &csv) == AR_OK);
  const std::string corpus = take(csv);
  CHECK(corpus.rfind("suddenness,goal_relevance,conduciveness,power,label\n", 0) == 0);
  CHECK(ar_corpus_csv(nullptr, "awe", 30, 1, 0.5, &csv) == AR_ERR_DOMAIN);

  ar_svm* s = nullptr;
  REQUIRE(ar_svm_train_csv(corpus.c_str(), 1.0, 3, &s) == AR_OK);
  char* json = nullptr;
  REQUIRE(ar_svm_to_json(s, &json) == AR_OK);
  ar_svm* t = nullptr;
  CHECK(ar_svm_from_json(json, &t) == AR_OK);
  ar_free_string(json);

  const ar_appraisal fear{0.8, 1, 0, 0};
  char* p1 = nullptr;
  char* p2 = nullptr;
  REQUIRE(ar_svm_predict(s, &fear, &p1) == AR_OK);
  REQUIRE(ar_svm_predict(t, &fear, &p2) == AR_OK);
  const std::string a = take(p1), b = take(p2);
  CHECK(a == b);
  CHECK(a.find("\"fear\"") < a.find("\"rage\""));
  CHECK(ar_svm_train_csv(corpus.c_str(), -1.0, 3, &t) == AR_ERR_DOMAIN);
  CHECK(ar_svm_from_json("not json", &t) == AR_ERR_PARSE);
  ar_svm_free(s);
  ar_svm_free(t);
}

TEST_CASE("calibration and experiment through the C interface") {
  const auto dir = std::filesystem::temp_directory_path() / "appraise_rl_capi_cfg";
  std::filesystem::create_directories(dir);
  const auto cfg = dir / "tiny.cfg";
  {
    std::ofstream(cfg) << "stories = fear rage\nparticipants = 2\nhuman_precision_mean = 0.7\n"
                          "human_precision_var = 0.01\ncorpus_per_class = 30\nc_grid = 0.01 0.1 1\nmatch_tolerance = 0.5\n";
  }
  ar_run_options opt{};
  opt.assets_dir = APPRAISE_RL_TEST_ASSETS;
  char* json = nullptr;
  CHECK(ar_calibrate_config(cfg.string().c_str(), &opt, 1.5, 0.0, &json) == AR_ERR_DOMAIN);

  ar_report* r = nullptr;
  REQUIRE(ar_experiment_run(cfg.string().c_str(), &opt, &r) == AR_OK);
  char* out = nullptr;
  CHECK(ar_report_json(r, &out) == AR_OK);
  CHECK(take(out).find("\"argmax_agreement\"") != std::string::npos);
  CHECK(ar_report_appraisals_csv(r, &out) == AR_OK);
  CHECK(take(out).rfind("story,", 0) == 0);
  CHECK(ar_report_intensities_csv(r, &out) == AR_OK);
  CHECK(take(out).rfind("story,emotion,model,human", 0) == 0);
  ar_report_free(r);
  std::filesystem::remove_all(dir);
}
