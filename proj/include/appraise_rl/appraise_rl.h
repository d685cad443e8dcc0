#ifndef APPRAISE_RL_H
#define APPRAISE_RL_H

/* C interface to the appraisal library. Every function returns an ar_status;
 * on failure ar_last_error() describes the problem (per thread). Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with ar_free_string. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define AR_API __declspec(dllexport)
#elif defined(__GNUC__)
#  define AR_API __attribute__((visibility("default")))
#else
#  define AR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ar_status {
  AR_OK = 0,
  AR_ERR_PARSE = 1,      /* malformed input text */
  AR_ERR_VALIDATION = 2, /* well-formed MDP violating an invariant */
  AR_ERR_DOMAIN = 3,     /* argument out of range, calibration target unreachable, ... */
  AR_ERR_IO = 4,
  AR_ERR_ARGUMENT = 5, /* null pointer or malformed option */
  AR_ERR_INTERNAL = 6
} ar_status;

typedef struct ar_mdp ar_mdp;
typedef struct ar_agent ar_agent;
typedef struct ar_svm ar_svm;
typedef struct ar_report ar_report;

typedef struct ar_hyperparams {
  double alpha;
  double epsilon;
  int episodes;
  int max_steps;
  uint64_t seed;
} ar_hyperparams;

typedef struct ar_appraisal {
  double suddenness;
  double goal_relevance;
  double conduciveness;
  double power;
} ar_appraisal;

typedef void (*ar_log_fn)(const char* message, void* user);

typedef struct ar_run_options {
  const char* assets_dir; /* NULL: bundled assets */
  const char* cache_dir;  /* NULL or "": no agent cache */
  int has_seed;           /* nonzero: `seed` replaces the config seed */
  uint64_t seed;
  ar_log_fn log; /* may be NULL */
  void* log_user;
} ar_run_options;

AR_API const char* ar_version(void);
AR_API const char* ar_last_error(void);
AR_API const char* ar_status_name(ar_status s);
AR_API void ar_free_string(char* s);
/* Directory holding mdps/, nominal_levels.csv and scherer_patterns.csv;
 * APPRAISE_RL_ASSETS when set, else the directory compiled into the library. */
AR_API const char* ar_default_assets_dir(void);

/* MDPs */
AR_API ar_status ar_mdp_parse(const char* text, ar_mdp** out);
AR_API ar_status ar_mdp_load(const char* path, ar_mdp** out);
/* Syntax-only load followed by validation. *violations_json receives a JSON
 * array of messages (empty when valid); AR_ERR_VALIDATION when non-empty. */
AR_API ar_status ar_mdp_check_file(const char* path, char** violations_json);
AR_API ar_status ar_mdp_serialize(const ar_mdp* mdp, char** text);
AR_API void ar_mdp_free(ar_mdp* mdp);

/* Agents */
AR_API void ar_hyperparams_default(ar_hyperparams* h);
AR_API ar_status ar_train(const ar_mdp* mdp, const ar_hyperparams* h, const char* cache_dir, ar_agent** out);
AR_API ar_status ar_agent_to_json(const ar_agent* agent, char** json);
AR_API ar_status ar_agent_from_json(const char* json, ar_agent** out);
AR_API void ar_agent_free(ar_agent* agent);

/* Appraisal of the MDP's marked event. td_error may be NULL. */
AR_API ar_status ar_appraise(const ar_agent* agent, const ar_mdp* mdp, ar_appraisal* out, double* td_error);
AR_API ar_status ar_appraisal_to_json(const ar_appraisal* v, char** json);

/* Corpus CSV (suddenness,goal_relevance,conduciveness,power,label).
 * `emotions` is a space-separated list; NULL or "" selects all 11. */
AR_API ar_status ar_corpus_csv(const char* assets_dir, const char* emotions, int per_class, uint64_t seed,
                               double medium_mean, char** csv);

/* Classifiers */
AR_API ar_status ar_svm_train_csv(const char* corpus_csv, double c, uint64_t seed, ar_svm** out);
AR_API ar_status ar_svm_to_json(const ar_svm* svm, char** json);
AR_API ar_status ar_svm_from_json(const char* json, ar_svm** out);
/* JSON object mapping each class to its intensity, in class order. */
AR_API ar_status ar_svm_predict(const ar_svm* svm, const ar_appraisal* v, char** json);
AR_API void ar_svm_free(ar_svm* svm);

/* Calibration on the corpus and story appraisals of an experiment config. */
AR_API ar_status ar_calibrate_config(const char* config_path, const ar_run_options* opt, double precision,
                                     double precision_var, char** json);

/* Experiments */
AR_API ar_status ar_experiment_run(const char* config_path, const ar_run_options* opt, ar_report** out);
AR_API ar_status ar_report_json(const ar_report* r, char** json);
AR_API ar_status ar_report_appraisals_csv(const ar_report* r, char** csv);
AR_API ar_status ar_report_intensities_csv(const ar_report* r, char** csv);
AR_API void ar_report_free(ar_report* r);

/* Model intensities CSV against human ratings. mode is "free" or "forced". */
AR_API ar_status ar_compare(const char* intensities_csv_path, const char* ratings_csv_path, const char* mode,
                            char** json);

#ifdef __cplusplus
}
#endif

#endif
