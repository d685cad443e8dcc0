// Command-line front end. Talks to the library only through the C interface.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "appraise_rl/appraise_rl.h"

#ifndef APPRAISE_RL_CONFIGS
#define APPRAISE_RL_CONFIGS "configs"
#endif

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kUsage = 2;

struct Failure {
  int code;
  std::string message;
};

void check(ar_status s) {
  if (s == AR_OK) return;
  throw Failure{s == AR_ERR_ARGUMENT ? kUsage : kDomain, std::string(ar_status_name(s)) + ": " + ar_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { ar_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};
using Mdp = Handle<ar_mdp, ar_mdp_free>;
using Agent = Handle<ar_agent, ar_agent_free>;
using Svm = Handle<ar_svm, ar_svm_free>;
using Report = Handle<ar_report, ar_report_free>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kDomain, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Failure{kDomain, "cannot write '" + path.string() + "'"};
}

std::string default_cache_dir() {
  if (const char* env = std::getenv("APPRAISE_RL_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return (fs::path(xdg) / "appraise_rl").string();
  if (const char* home = std::getenv("HOME"); home && *home)
    return (fs::path(home) / ".cache" / "appraise_rl").string();
  return "";
}

// Bundled experiment names map to configs shipped with the project.
std::string resolve_config(const std::string& name) {
  if (fs::exists(name)) return name;
  std::string stem = name == "exp3" ? "exp3_free" : name;
  fs::path bundled = fs::path(APPRAISE_RL_CONFIGS) / (stem + ".cfg");
  if (fs::exists(bundled)) return bundled.string();
  throw Failure{kUsage, "no config file or bundled experiment named '" + name + "'"};
}

void log_to_stderr(const char* message, void*) { std::cerr << message << '\n'; }

struct TrainFlags {
  ar_hyperparams hyper{};
  bool no_cache = false;
  std::string cache_dir;

  TrainFlags() { ar_hyperparams_default(&hyper); }

  void add(CLI::App* cmd) {
    cmd->add_option("--alpha", hyper.alpha, "learning rate")->capture_default_str();
    cmd->add_option("--epsilon", hyper.epsilon, "exploration rate")->capture_default_str();
    cmd->add_option("--episodes", hyper.episodes, "training episodes")->capture_default_str();
    cmd->add_option("--max-steps", hyper.max_steps, "step cap per episode")->capture_default_str();
    cmd->add_flag("--no-cache", no_cache, "always retrain instead of reading the agent cache");
    cmd->add_option("--cache-dir", cache_dir, "agent cache directory");
  }
  std::string cache() const { return no_cache ? "" : (cache_dir.empty() ? default_cache_dir() : cache_dir); }
};

ar_appraisal parse_vector(const std::string& text) {
  ar_appraisal v{};
  double* slots[] = {&v.suddenness, &v.goal_relevance, &v.conduciveness, &v.power};
  std::stringstream ss(text);
  std::string cell;
  int i = 0;
  while (std::getline(ss, cell, ',')) {
    if (i == 4) throw Failure{kUsage, "--vector takes exactly 4 comma-separated numbers"};
    try {
      std::size_t used = 0;
      *slots[i] = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Failure{kUsage, "--vector: '" + cell + "' is not a number"};
    }
    ++i;
  }
  if (i != 4) throw Failure{kUsage, "--vector takes exactly 4 comma-separated numbers"};
  return v;
}

void train_agent(const std::string& mdp_path, const TrainFlags& flags, Mdp& mdp, Agent& agent) {
  check(ar_mdp_load(mdp_path.c_str(), &mdp.p));
  const std::string cache = flags.cache();
  check(ar_train(mdp.p, &flags.hyper, cache.empty() ? nullptr : cache.c_str(), &agent.p));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learning appraisal model: MDP stories, appraisal checks, emotion classifiers"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", ar_version());

  std::uint64_t seed = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          seed = v;
          seed_given = true;
        },
        "random seed");
  };
  bool quiet = false;

  std::string mdp_path;
  auto* validate_cmd = app.add_subcommand("validate", "check an MDP file and list every violated invariant");
  validate_cmd->add_option("mdp", mdp_path, "MDP file")->required();
  add_seed(validate_cmd);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a Q-learning agent and print it as JSON");
  train_cmd->add_option("mdp", mdp_path, "MDP file")->required();
  add_seed(train_cmd);
  train_flags.add(train_cmd);

  bool detail = false;
  auto* appraise_cmd = app.add_subcommand("appraise", "train on an MDP and appraise its marked event");
  appraise_cmd->add_option("mdp", mdp_path, "MDP file")->required();
  appraise_cmd->add_flag("--detail", detail, "also print the TD error");
  add_seed(appraise_cmd);
  train_flags.add(appraise_cmd);

  std::string emotions;
  int per_class = 500;
  double medium_mean = 0.5;
  auto* corpus_cmd = app.add_subcommand("corpus", "sample a labelled appraisal corpus as CSV");
  corpus_cmd->add_option("--emotions", emotions, "space- or comma-separated emotion names (default: all)");
  corpus_cmd->add_option("--per-class", per_class, "samples per emotion")->capture_default_str();
  corpus_cmd->add_option("--medium-mean", medium_mean, "centre of the 'medium' level")->capture_default_str();
  add_seed(corpus_cmd);

  std::string corpus_file;
  double c = 1.0;
  auto* train_svm_cmd = app.add_subcommand("train-classifier", "train an SVM on a corpus CSV and print it as JSON");
  train_svm_cmd->add_option("--corpus", corpus_file, "corpus CSV")->required();
  train_svm_cmd->add_option("--c", c, "penalty parameter")->required();
  add_seed(train_svm_cmd);

  double precision = 0, precision_var = 0;
  std::string corpus_name;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "fit the penalty distribution to a human precision target");
  calibrate_cmd->add_option("--precision", precision, "target mean precision")->required();
  calibrate_cmd->add_option("--precision-var", precision_var, "target precision variance")->required();
  calibrate_cmd->add_option("--corpus", corpus_name, "bundled experiment (exp1, exp2, exp3) or config file")
      ->required();
  calibrate_cmd->add_flag("--quiet", quiet, "no progress on stderr");
  add_seed(calibrate_cmd);
  calibrate_cmd->add_flag("--no-cache", train_flags.no_cache, "always retrain the story agents");
  calibrate_cmd->add_option("--cache-dir", train_flags.cache_dir, "agent cache directory");

  std::string model_file, vector_text;
  auto* predict_cmd = app.add_subcommand("predict", "emotion intensities for an appraisal vector");
  predict_cmd->add_option("--model", model_file, "classifier JSON from train-classifier")->required();
  auto* vec_opt = predict_cmd->add_option("--vector", vector_text, "suddenness,goal_relevance,conduciveness,power");
  auto* mdp_opt = predict_cmd->add_option("--mdp", mdp_path, "appraise this MDP first");
  vec_opt->excludes(mdp_opt);
  add_seed(predict_cmd);
  train_flags.add(predict_cmd);

  std::string config_path, out_dir;
  auto* experiment_cmd = app.add_subcommand("experiment", "run a full study and print its report");
  experiment_cmd->add_option("config", config_path, "experiment config")->required();
  experiment_cmd->add_option("--out", out_dir, "also write report.json, appraisals.csv and intensities.csv here");
  experiment_cmd->add_flag("--quiet", quiet, "no progress on stderr");
  add_seed(experiment_cmd);
  experiment_cmd->add_flag("--no-cache", train_flags.no_cache, "always retrain the story agents");
  experiment_cmd->add_option("--cache-dir", train_flags.cache_dir, "agent cache directory");

  std::string intensities_file, ratings_file, mode = "free";
  auto* compare_cmd = app.add_subcommand("compare", "compare model intensities with human ratings");
  compare_cmd->add_option("--intensities", intensities_file, "intensities CSV written by experiment --out")
      ->required();
  compare_cmd->add_option("--ratings", ratings_file, "ratings CSV participant,story,emotion,rating")->required();
  compare_cmd->add_option("--mode", mode, "free or forced")
      ->check(CLI::IsMember({"free", "forced"}))
      ->capture_default_str();
  add_seed(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (seed_given) train_flags.hyper.seed = seed;
    const std::string cache = train_flags.cache();
    ar_run_options run{};
    run.cache_dir = cache.empty() ? nullptr : cache.c_str();
    run.has_seed = seed_given ? 1 : 0;
    run.seed = seed;
    run.log = quiet ? nullptr : log_to_stderr;

    if (*validate_cmd) {
      CString violations;
      const ar_status s = ar_mdp_check_file(mdp_path.c_str(), &violations.p);
      if (s != AR_OK && s != AR_ERR_VALIDATION && s != AR_ERR_PARSE) check(s);
      nlohmann::ordered_json out = {{"file", mdp_path},
                                    {"valid", s == AR_OK},
                                    {"violations", nlohmann::json::parse(violations.str())}};
      std::cout << out.dump(2) << '\n';
      return s == AR_OK ? kOk : kDomain;
    }
    if (*train_cmd) {
      Mdp mdp;
      Agent agent;
      train_agent(mdp_path, train_flags, mdp, agent);
      CString json;
      check(ar_agent_to_json(agent.p, &json.p));
      std::cout << json.str();
      return kOk;
    }
    if (*appraise_cmd) {
      Mdp mdp;
      Agent agent;
      train_agent(mdp_path, train_flags, mdp, agent);
      ar_appraisal v{};
      double delta = 0;
      check(ar_appraise(agent.p, mdp.p, &v, &delta));
      CString json;
      check(ar_appraisal_to_json(&v, &json.p));
      if (!detail) {
        std::cout << json.str();
      } else {
        nlohmann::ordered_json out = nlohmann::ordered_json::parse(json.str());
        out["td_error"] = delta;
        std::cout << out.dump(2) << '\n';
      }
      return kOk;
    }
    if (*corpus_cmd) {
      for (auto& ch : emotions)
        if (ch == ',') ch = ' ';
      CString csv;
      check(ar_corpus_csv(nullptr, emotions.c_str(), per_class, seed, medium_mean, &csv.p));
      std::cout << csv.str();
      return kOk;
    }
    if (*train_svm_cmd) {
      Svm svm;
      check(ar_svm_train_csv(read_text(corpus_file).c_str(), c, seed, &svm.p));
      CString json;
      check(ar_svm_to_json(svm.p, &json.p));
      std::cout << json.str();
      return kOk;
    }
    if (*calibrate_cmd) {
      const std::string cfg = resolve_config(corpus_name);
      CString json;
      check(ar_calibrate_config(cfg.c_str(), &run, precision, precision_var, &json.p));
      std::cout << json.str();
      return kOk;
    }
    if (*predict_cmd) {
      if (vector_text.empty() && mdp_path.empty()) throw Failure{kUsage, "predict needs --vector or --mdp"};
      ar_appraisal v{};
      if (!vector_text.empty()) v = parse_vector(vector_text);
      Svm svm;
      check(ar_svm_from_json(read_text(model_file).c_str(), &svm.p));
      if (vector_text.empty()) {
        Mdp mdp;
        Agent agent;
        train_agent(mdp_path, train_flags, mdp, agent);
        check(ar_appraise(agent.p, mdp.p, &v, nullptr));
      }
      CString json;
      check(ar_svm_predict(svm.p, &v, &json.p));
      std::cout << json.str();
      return kOk;
    }
    if (*experiment_cmd) {
      const std::string cfg = resolve_config(config_path);
      Report report;
      check(ar_experiment_run(cfg.c_str(), &run, &report.p));
      CString json, appraisals, intensities;
      check(ar_report_json(report.p, &json.p));
      if (!out_dir.empty()) {
        check(ar_report_appraisals_csv(report.p, &appraisals.p));
        check(ar_report_intensities_csv(report.p, &intensities.p));
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw Failure{kDomain, "cannot create '" + out_dir + "': " + ec.message()};
        write_text(fs::path(out_dir) / "report.json", json.str());
        write_text(fs::path(out_dir) / "appraisals.csv", appraisals.str());
        write_text(fs::path(out_dir) / "intensities.csv", intensities.str());
      }
      std::cout << json.str();
      return kOk;
    }
    if (*compare_cmd) {
      CString json;
      check(ar_compare(intensities_file.c_str(), ratings_file.c_str(), mode.c_str(), &json.p));
      std::cout << json.str();
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  }
  return kUsage;
}
