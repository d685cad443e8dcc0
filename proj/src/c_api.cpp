#include "appraise_rl/appraise_rl.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>

#include <json.hpp>

#include "appraise_rl/errors.hpp"
#include "appraise_rl/study.hpp"
#include "text_util.hpp"

#ifndef APPRAISE_RL_DEFAULT_ASSETS
#define APPRAISE_RL_DEFAULT_ASSETS "assets"
#endif

using namespace appraise_rl;

struct ar_mdp {
  MdpSpec spec;
};
struct ar_agent {
  TrainedAgent agent;
};
struct ar_svm {
  SvmModel model;
};
struct ar_report {
  ExperimentReport report;
};

namespace {

thread_local std::string last_error;

ar_status fail(ar_status s, std::string msg) {
  last_error = std::move(msg);
  return s;
}

template <class F>
ar_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const ParseError& e) {
    return fail(AR_ERR_PARSE, e.what());
  } catch (const ValidationError& e) {
    return fail(AR_ERR_VALIDATION, e.what());
  } catch (const DomainError& e) {
    return fail(AR_ERR_DOMAIN, e.what());
  } catch (const IoError& e) {
    return fail(AR_ERR_IO, e.what());
  } catch (const Error& e) {
    return fail(AR_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(AR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AR_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

#define AR_REQUIRE(cond) \
  if (!(cond)) return fail(AR_ERR_ARGUMENT, "null argument: " #cond)

std::filesystem::path assets_or_default(const char* dir) {
  return dir && *dir ? std::filesystem::path(dir) : std::filesystem::path(ar_default_assets_dir());
}

Knowledge knowledge_from(const std::filesystem::path& assets, double medium_mean) {
  Knowledge k = std::filesystem::exists(assets / "scherer_patterns.csv") ? load_knowledge(assets)
                                                                        : default_knowledge(medium_mean);
  k.levels[NominalLevel::medium].a = medium_mean;
  return k;
}

RunOptions run_options(const ar_run_options* opt) {
  RunOptions ro;
  ro.assets_dir = assets_or_default(opt ? opt->assets_dir : nullptr);
  if (opt && opt->cache_dir) ro.cache_dir = opt->cache_dir;
  if (opt && opt->log) {
    auto fn = opt->log;
    void* user = opt->log_user;
    ro.log = [fn, user](const std::string& m) { fn(m.c_str(), user); };
  }
  return ro;
}

ExperimentConfig config_from(const char* path, const ar_run_options* opt) {
  ExperimentConfig cfg = load_config(path);
  if (opt && opt->has_seed) cfg.seed = opt->seed;
  return cfg;
}

}  // namespace

extern "C" {

const char* ar_version(void) { return "1.0.0"; }

const char* ar_last_error(void) { return last_error.c_str(); }

const char* ar_status_name(ar_status s) {
  switch (s) {
    case AR_OK: return "ok";
    case AR_ERR_PARSE: return "parse error";
    case AR_ERR_VALIDATION: return "validation error";
    case AR_ERR_DOMAIN: return "domain error";
    case AR_ERR_IO: return "i/o error";
    case AR_ERR_ARGUMENT: return "invalid argument";
    case AR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ar_free_string(char* s) { std::free(s); }

const char* ar_default_assets_dir(void) {
  const char* env = std::getenv("APPRAISE_RL_ASSETS");
  return env && *env ? env : APPRAISE_RL_DEFAULT_ASSETS;
}

ar_status ar_mdp_parse(const char* text, ar_mdp** out) {
  AR_REQUIRE(text && out);
  return guarded([&] {
    *out = new ar_mdp{parse_mdp(text)};
    return AR_OK;
  });
}

ar_status ar_mdp_load(const char* path, ar_mdp** out) {
  AR_REQUIRE(path && out);
  return guarded([&] {
    *out = new ar_mdp{load_mdp(path)};
    return AR_OK;
  });
}

ar_status ar_mdp_check_file(const char* path, char** violations_json) {
  AR_REQUIRE(path && violations_json);
  *violations_json = nullptr;
  return guarded([&] {
    std::vector<std::string> v;
    ar_status st = AR_OK;
    try {
      v = validate(load_mdp(path, false));
      if (!v.empty()) {
        st = AR_ERR_VALIDATION;
        last_error = ValidationError(v).what();
      }
    } catch (const ParseError& e) {
      v = {e.what()};
      st = AR_ERR_PARSE;
      last_error = e.what();
    }
    *violations_json = dup(nlohmann::json(v).dump());
    return st;
  });
}

ar_status ar_mdp_serialize(const ar_mdp* mdp, char** text) {
  AR_REQUIRE(mdp && text);
  return guarded([&] {
    *text = dup(serialize_mdp(mdp->spec));
    return AR_OK;
  });
}

void ar_mdp_free(ar_mdp* mdp) { delete mdp; }

void ar_hyperparams_default(ar_hyperparams* h) {
  if (!h) return;
  Hyperparams d;
  *h = {d.alpha, d.epsilon, d.episodes, d.max_steps, d.seed};
}

ar_status ar_train(const ar_mdp* mdp, const ar_hyperparams* h, const char* cache_dir, ar_agent** out) {
  AR_REQUIRE(mdp && out);
  return guarded([&] {
    Hyperparams hp;
    if (h) hp = {h->alpha, h->epsilon, h->episodes, h->max_steps, h->seed};
    *out = new ar_agent{train_cached(mdp->spec, hp, cache_dir ? cache_dir : "")};
    return AR_OK;
  });
}

ar_status ar_agent_to_json(const ar_agent* agent, char** json) {
  AR_REQUIRE(agent && json);
  return guarded([&] {
    *json = dup(agent_to_json(agent->agent) + "\n");
    return AR_OK;
  });
}

ar_status ar_agent_from_json(const char* json, ar_agent** out) {
  AR_REQUIRE(json && out);
  return guarded([&] {
    *out = new ar_agent{agent_from_json(json)};
    return AR_OK;
  });
}

void ar_agent_free(ar_agent* agent) { delete agent; }

ar_status ar_appraise(const ar_agent* agent, const ar_mdp* mdp, ar_appraisal* out, double* td_error) {
  AR_REQUIRE(agent && mdp && out);
  return guarded([&] {
    const AppraisalDetail d = appraise_detail(agent->agent, mdp->spec);
    *out = {d.vector.suddenness, d.vector.goal_relevance, d.vector.conduciveness, d.vector.power};
    if (td_error) *td_error = d.delta;
    return AR_OK;
  });
}

ar_status ar_appraisal_to_json(const ar_appraisal* v, char** json) {
  AR_REQUIRE(v && json);
  return guarded([&] {
    *json = dup(appraisal_to_json({v->suddenness, v->goal_relevance, v->conduciveness, v->power}) + "\n");
    return AR_OK;
  });
}

ar_status ar_corpus_csv(const char* assets_dir, const char* emotions, int per_class, uint64_t seed,
                        double medium_mean, char** csv) {
  AR_REQUIRE(csv);
  return guarded([&] {
    std::vector<Emotion> list;
    if (emotions)
      for (auto tok : detail::split_ws(emotions)) list.push_back(parse_emotion(tok));
    if (list.empty()) list = all_emotions();
    const Knowledge k = knowledge_from(assets_or_default(assets_dir), medium_mean);
    *csv = dup(corpus_to_csv(build_corpus(k, list, per_class, seed)));
    return AR_OK;
  });
}

ar_status ar_svm_train_csv(const char* corpus_csv, double c, uint64_t seed, ar_svm** out) {
  AR_REQUIRE(corpus_csv && out);
  return guarded([&] {
    const PreparedCorpus corpus(corpus_from_csv(corpus_csv));
    SvmOptions opt;
    opt.seed = seed;
    *out = new ar_svm{train_svm(corpus, c, opt)};
    return AR_OK;
  });
}

ar_status ar_svm_to_json(const ar_svm* svm, char** json) {
  AR_REQUIRE(svm && json);
  return guarded([&] {
    *json = dup(svm_to_json(svm->model) + "\n");
    return AR_OK;
  });
}

ar_status ar_svm_from_json(const char* json, ar_svm** out) {
  AR_REQUIRE(json && out);
  return guarded([&] {
    *out = new ar_svm{svm_from_json(json)};
    return AR_OK;
  });
}

ar_status ar_svm_predict(const ar_svm* svm, const ar_appraisal* v, char** json) {
  AR_REQUIRE(svm && v && json);
  return guarded([&] {
    const auto p =
        predict_intensities(svm->model, {v->suddenness, v->goal_relevance, v->conduciveness, v->power});
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < p.size(); ++i) o[std::string(emotion_name(svm->model.classes[i]))] = p[i];
    *json = dup(o.dump(2) + "\n");
    return AR_OK;
  });
}

void ar_svm_free(ar_svm* svm) { delete svm; }

ar_status ar_calibrate_config(const char* config_path, const ar_run_options* opt, double precision,
                              double precision_var, char** json) {
  AR_REQUIRE(config_path && json);
  return guarded([&] {
    const ExperimentConfig cfg = config_from(config_path, opt);
    const StudySetup setup = prepare_study(cfg, run_options(opt));
    const CalibrationResult r = calibrate_c(setup.corpus, setup.targets, precision, precision_var, setup.calibration);
    *json = dup(calibration_to_json(r) + "\n");
    return AR_OK;
  });
}

ar_status ar_experiment_run(const char* config_path, const ar_run_options* opt, ar_report** out) {
  AR_REQUIRE(config_path && out);
  return guarded([&] {
    const ExperimentConfig cfg = config_from(config_path, opt);
    *out = new ar_report{run_experiment(cfg, run_options(opt))};
    return AR_OK;
  });
}

ar_status ar_report_json(const ar_report* r, char** json) {
  AR_REQUIRE(r && json);
  return guarded([&] {
    *json = dup(report_to_json(r->report));
    return AR_OK;
  });
}

ar_status ar_report_appraisals_csv(const ar_report* r, char** csv) {
  AR_REQUIRE(r && csv);
  return guarded([&] {
    *csv = dup(appraisals_csv(r->report));
    return AR_OK;
  });
}

ar_status ar_report_intensities_csv(const ar_report* r, char** csv) {
  AR_REQUIRE(r && csv);
  return guarded([&] {
    *csv = dup(intensities_csv(r->report));
    return AR_OK;
  });
}

void ar_report_free(ar_report* r) { delete r; }

ar_status ar_compare(const char* intensities_csv_path, const char* ratings_csv_path, const char* mode,
                     char** json) {
  AR_REQUIRE(intensities_csv_path && ratings_csv_path && mode && json);
  return guarded([&] {
    const Comparison c = compare_with_ratings(detail::read_file(intensities_csv_path),
                                              detail::read_file(ratings_csv_path), parse_mode(mode));
    *json = dup(comparison_to_json(c));
    return AR_OK;
  });
}

}  // extern "C"
