#pragma once

// Vignette-study pipeline: story agents, participant classifiers, human
// ratings, and model/human comparison.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "appraise_rl/svm.hpp"

namespace appraise_rl {

enum class RatingMode { free, forced };
std::string_view mode_name(RatingMode m);
RatingMode parse_mode(std::string_view s);

struct Rating {
  std::string participant;
  Emotion story = Emotion::happiness;
  Emotion emotion = Emotion::happiness;
  double rating = 0.0;
};

struct RatingsTable {
  RatingMode mode = RatingMode::free;
  std::vector<Emotion> stories;
  std::vector<Emotion> emotions;
  std::vector<Rating> rows;
  /// Participants in order of first appearance.
  std::vector<std::string> participants() const;
};

/// CSV with header participant,story,emotion,rating. Free mode needs every
/// (participant, story, emotion) exactly once with ratings in [0, 10]; forced
/// mode marks the chosen emotion with rating 1 (0 rows are allowed) and must be
/// a bijection between stories and emotions per participant.
RatingsTable parse_ratings(std::string_view csv, RatingMode mode, const std::vector<Emotion>& stories,
                           const std::vector<Emotion>& emotions);
RatingsTable load_ratings(const std::filesystem::path& path, RatingMode mode, const std::vector<Emotion>& stories,
                          const std::vector<Emotion>& emotions);
std::string ratings_to_csv(const RatingsTable& t);

enum class Standardization { per_story, per_participant };

/// Free mode only: ratings z-scored within each (participant, story) group, or
/// within each participant when `per_participant`. Zero-variance groups become 0.
RatingsTable standardize(const RatingsTable& t, Standardization how = Standardization::per_story);

/// Story x emotion matrix, indexed [story][emotion] in table order.
using CellMatrix = std::vector<std::vector<double>>;

/// Free: standardized means rescaled so the smallest cell is 0 and the largest 1.
/// Forced: fraction of participants choosing each emotion for each story.
CellMatrix human_matrix(const RatingsTable& t, Standardization how = Standardization::per_story);

struct PrecisionStats {
  double mean = 0.0;
  double variance = 0.0;  // sample variance across participants
  std::vector<double> per_participant;
};

/// Story ids are the target emotions.
PrecisionStats human_precision(const RatingsTable& t);

/// Ratings whose participant precisions follow a Beta with the given mean and variance.
RatingsTable synthetic_ratings(RatingMode mode, const std::vector<Emotion>& stories,
                               const std::vector<Emotion>& emotions, int participants, double precision_mean,
                               double precision_var, std::uint64_t seed);

struct Metrics {
  double r_squared = 0.0;
  double rmse = 0.0;
};

/// Squared Pearson correlation and root mean squared difference.
Metrics metrics(const std::vector<double>& model, const std::vector<double>& human);

struct ExperimentConfig {
  std::string name = "experiment";
  RatingMode mode = RatingMode::free;
  std::vector<Emotion> stories;
  std::vector<Emotion> emotions;
  int participants = 1;
  std::optional<double> human_precision_mean;
  std::optional<double> human_precision_var;
  std::string human_csv;  // resolved path; empty means synthetic ratings
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> corpus_seed;  // classifier corpus and Platt folds; defaults to seed
  Hyperparams hyper;
  int corpus_per_class = 500;
  double medium_mean = 0.5;
  std::vector<double> c_grid;
  double match_tolerance = 0.03;
  Standardization standardization = Standardization::per_story;
};

/// key = value lines; '#' starts a comment. Relative human_csv paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct StoryResult {
  Emotion story = Emotion::happiness;
  AppraisalVector appraisal;
  double td_error = 0.0;
  int truncated_episodes = 0;
  std::vector<double> model_intensity;  // per config emotion, mean over participants
  std::vector<double> human;            // per config emotion
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string human_source;  // "csv" or "synthetic"
  PrecisionStats human_stats;
  double gamma = 0.0;
  CalibrationResult calibration;
  std::vector<double> participant_c;
  double model_precision_mean = 0.0;
  std::vector<StoryResult> stories;
  int argmax_agreement = 0;
  Metrics metrics;
};

struct RunOptions {
  std::filesystem::path assets_dir;
  std::string cache_dir;  // empty disables the agent cache
  std::function<void(const std::string&)> log;
};

/// Argmax over config emotions; ties go to the earliest.
Emotion argmax_emotion(const std::vector<Emotion>& emotions, const std::vector<double>& v);

/// Trained story agents with their appraisals, the classifier corpus and the
/// calibration settings an experiment uses.
struct StudySetup {
  std::vector<StoryResult> stories;
  std::vector<Target> targets;
  PreparedCorpus corpus;
  CalibrationOptions calibration;
};

StudySetup prepare_study(const ExperimentConfig& cfg, const RunOptions& opt);

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);

std::string report_to_json(const ExperimentReport& r);
std::string appraisals_csv(const ExperimentReport& r);
std::string intensities_csv(const ExperimentReport& r);

struct Comparison {
  std::vector<Emotion> stories;   // order of first appearance in the intensities CSV
  std::vector<Emotion> emotions;
  CellMatrix model;
  CellMatrix human;
  PrecisionStats human_stats;
  Metrics metrics;
  int argmax_agreement = 0;
};

/// Model intensities (CSV story,emotion,model[,...]) against a ratings CSV.
Comparison compare_with_ratings(std::string_view intensities, std::string_view ratings, RatingMode mode,
                                Standardization how = Standardization::per_story);
std::string comparison_to_json(const Comparison& c);

}  // namespace appraise_rl
