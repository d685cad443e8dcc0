#pragma once

// Multi-class RBF soft-margin SVM (one-vs-one, SMO) with Platt-scaled pairwise
// probabilities coupled into per-emotion intensities, plus calibration of the
// penalty c against a target precision.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "appraise_rl/appraisal.hpp"
#include "appraise_rl/scherer.hpp"

namespace appraise_rl {

using Features = std::array<double, 4>;
Features features_of(const AppraisalVector& v);

/// Corpus with its RBF Gram matrix, computed once and shared by every model trained on it.
class PreparedCorpus {
 public:
  /// `classes` fixes the class order; empty means order of first appearance.
  /// `gamma` <= 0 selects 1 / (4 * variance of all feature values).
  PreparedCorpus(std::vector<LabeledSample> corpus, std::vector<Emotion> classes = {}, double gamma = 0.0);

  const std::vector<LabeledSample>& samples() const { return samples_; }
  const std::vector<Emotion>& classes() const { return classes_; }
  const std::vector<int>& class_index() const { return class_index_; }
  double gamma() const { return gamma_; }
  std::size_t size() const { return samples_.size(); }
  const float* gram_row(std::size_t i) const { return gram_.data() + i * samples_.size(); }

 private:
  std::vector<LabeledSample> samples_;
  std::vector<Emotion> classes_;
  std::vector<int> class_index_;
  double gamma_ = 0.0;
  std::vector<float> gram_;
};

struct SvmOptions {
  double eps = 1e-3;          // KKT tolerance
  long max_iter = 10'000'000;  // per binary problem
  int platt_folds = 5;
  std::uint64_t seed = 0;  // fold assignment for the Platt fits
};

struct BinarySolution {
  std::vector<double> alpha;
  double rho = 0.0;
  double objective = 0.0;  // 0.5 a'Qa - sum(a)
  long iterations = 0;
  bool converged = true;
};

/// Dual of the C-SVM on an explicit kernel matrix; y_i in {+1, -1}.
BinarySolution solve_binary_dual(const std::vector<std::vector<double>>& kernel, const std::vector<int>& y, double c,
                                 double eps = 1e-3, long max_iter = 10'000'000);

struct PairClassifier {
  int first = 0;   // class index labelled +1
  int second = 1;  // class index labelled -1
  std::vector<int> sv;        // indices into SvmModel::support_vectors
  std::vector<double> coef;   // alpha_i * y_i
  double rho = 0.0;
  double platt_a = 0.0;
  double platt_b = 0.0;
  long iterations = 0;
  bool converged = true;
};

struct SvmModel {
  std::vector<Emotion> classes;
  double c = 1.0;
  double gamma = 1.0;
  std::vector<Features> support_vectors;
  std::vector<PairClassifier> pairs;
  std::vector<std::string> warnings;
};

/// Throws DomainError for c <= 0, fewer than 2 classes, or a class with fewer than 2 samples.
SvmModel train_svm(const PreparedCorpus& corpus, double c, const SvmOptions& opt = {});

double decision_value(const SvmModel& m, const PairClassifier& p, const Features& x);

/// One intensity per entry of model.classes; sums to 1.
std::vector<double> predict_intensities(const SvmModel& m, const AppraisalVector& v);

struct Target {
  AppraisalVector vector;
  Emotion emotion = Emotion::happiness;
};

/// Mean intensity placed on each target's own emotion.
double model_precision(const SvmModel& m, const std::vector<Target>& targets);

std::string svm_to_json(const SvmModel& m);
SvmModel svm_from_json(const std::string& text);

/// Wu-Lin-Weng pairwise coupling; r[i][j] estimates P(i | i or j).
std::vector<double> couple_pairwise(const std::vector<std::vector<double>>& r);

/// Platt sigmoid parameters (A, B) for P(y=+1 | f) = 1 / (1 + exp(A f + B)).
std::pair<double, double> fit_sigmoid(const std::vector<double>& dec, const std::vector<int>& y);

struct CalibrationOptions {
  std::vector<double> grid;  // empty selects the default log grid
  double match_tolerance = 0.03;
  int refine_steps = 6;
  SvmOptions svm;
};

std::vector<double> default_c_grid();

struct CurvePoint {
  double c = 0.0;
  double precision = 0.0;
};

struct CalibrationResult {
  double c_mean = 0.0;
  double c_var = 0.0;  // scale (standard deviation) of the normal c is drawn from
  double precision_at_c_mean = 0.0;
  double target_precision = 0.0;
  double target_variance = 0.0;
  double achieved_variance = 0.0;
  bool variance_saturated = false;
  double achievable_min = 0.0;
  double achievable_max = 0.0;
  std::vector<CurvePoint> precision_curve;  // sorted by c
};

/// Throws DomainError when the target lies outside the achievable range by more than the tolerance.
CalibrationResult calibrate_c(const PreparedCorpus& corpus, const std::vector<Target>& targets,
                              double human_precision_mean, double human_precision_var,
                              const CalibrationOptions& opt = {});

/// Var of p(C) for C ~ Normal(mu, sigma) restricted to C > 0, p read off the curve.
double precision_variance(const std::vector<CurvePoint>& curve, double mu, double sigma);

/// Draws c ~ Normal(c_mean, c_var) restricted to c > 0.
double draw_c(double c_mean, double c_var, Rng& rng);

std::vector<double> sample_participant_cs(const CalibrationResult& cal, int n, std::uint64_t seed);

/// n models with c drawn per participant; every model shares `opt.seed` for its Platt folds.
std::vector<SvmModel> sample_participants(const CalibrationResult& cal, const PreparedCorpus& corpus, int n,
                                          std::uint64_t seed, const SvmOptions& opt = {});

std::string calibration_to_json(const CalibrationResult& r);

}  // namespace appraise_rl
