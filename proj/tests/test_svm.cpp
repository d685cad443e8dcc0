#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "appraise_rl/errors.hpp"
#include "appraise_rl/svm.hpp"
#include "oracles.hpp"

using namespace appraise_rl;

namespace {

std::vector<std::vector<double>> rbf(const std::vector<Features>& x, double gamma) {
  std::vector<std::vector<double>> k(x.size(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      double d = 0;
      for (int f = 0; f < 4; ++f) d += (x[i][f] - x[j][f]) * (x[i][f] - x[j][f]);
      k[i][j] = std::exp(-gamma * d);
    }
  return k;
}

double dual_objective(const std::vector<std::vector<double>>& k, const std::vector<int>& y,
                      const std::vector<double>& a) {
  double o = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) o += 0.5 * a[i] * a[j] * y[i] * y[j] * k[i][j];
    o -= a[i];
  }
  return o;
}

LabeledSample sample(double s, double g, double c, double p, Emotion e) { return {{s, g, c, p}, e}; }

// Three well-separated clusters.
std::vector<LabeledSample> clusters(int per, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<LabeledSample> out;
  for (int i = 0; i < per; ++i) {
    out.push_back(sample(0.1 + n(rng), 0.1 + n(rng), 0.9 + n(rng), 0.5 + n(rng), Emotion::joy));
    out.push_back(sample(0.9 + n(rng), 0.9 + n(rng), 0.1 + n(rng), 0.1 + n(rng), Emotion::fear));
    out.push_back(sample(0.1 + n(rng), 0.9 + n(rng), 0.1 + n(rng), 0.9 + n(rng), Emotion::rage));
  }
  return out;
}

}  // namespace

TEST_CASE("SMO matches the brute-force dual on small problems") {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t l = 2 + trial % 5;
    std::vector<Features> x(l);
    std::vector<int> y(l);
    for (std::size_t i = 0; i < l; ++i) {
      for (auto& v : x[i]) v = uniform01(rng);
      y[i] = i % 2 == 0 ? 1 : -1;
    }
    const double c = std::pow(10.0, -1.0 + 3.0 * uniform01(rng));
    const double gamma = 0.5 + 2.0 * uniform01(rng);
    const auto k = rbf(x, gamma);
    const auto ref = oracle::brute_force_svm_dual(k, y, c);
    REQUIRE(ref);
    const BinarySolution sol = solve_binary_dual(k, y, c, 1e-6);
    CAPTURE(trial);
    CHECK(sol.converged);
    CHECK(std::abs(sol.objective - ref->objective) <= 1e-4);
    CHECK(std::abs(dual_objective(k, y, sol.alpha) - sol.objective) <= 1e-9);
    double eq = 0;
    for (std::size_t i = 0; i < l; ++i) {
      CHECK(sol.alpha[i] >= -1e-6);
      CHECK(sol.alpha[i] <= c + 1e-6);
      eq += y[i] * sol.alpha[i];
    }
    CHECK(std::abs(eq) <= 1e-6);
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("dual solver rejects bad input") {
  std::vector<std::vector<double>> k{{1, 0}, {0, 1}};
  CHECK_THROWS_AS(solve_binary_dual(k, {1, -1}, 0.0), DomainError);
  CHECK_THROWS_AS(solve_binary_dual(k, {1, 2}, 1.0), DomainError);
  CHECK_THROWS_AS(solve_binary_dual(k, {1}, 1.0), DomainError);
}

TEST_CASE("pairwise coupling recovers consistent probabilities") {
  const std::vector<double> p{0.5, 0.3, 0.2};
  std::vector<std::vector<double>> r(3, std::vector<double>(3, 0.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) r[i][j] = p[i] / (p[i] + p[j]);
  const auto q = couple_pairwise(r);
  // The iteration stops once the residual drops below 0.005 / k.
  for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(5e-3));
  CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("sigmoid fit orders probabilities with the decision value") {
  std::vector<double> dec;
  std::vector<int> y;
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2 ? 1 : -1;
    y.push_back(label);
    dec.push_back(label * 1.0 + 0.8 * (uniform01(rng) - 0.5) * 2);
  }
  const auto [a, b] = fit_sigmoid(dec, y);
  CHECK(a < 0);
  CHECK(std::abs(b) < 0.5);
}

TEST_CASE("classifier separates clusters and round-trips through JSON") {
  const PreparedCorpus pc(clusters(20, 3));
  CHECK(pc.classes() == std::vector<Emotion>{Emotion::joy, Emotion::fear, Emotion::rage});
  const SvmModel m = train_svm(pc, 1.0);
  CHECK(m.pairs.size() == 3);
  CHECK(m.warnings.empty());
  const std::vector<Target> targets{{{0.1, 0.1, 0.9, 0.5}, Emotion::joy},
                                    {{0.9, 0.9, 0.1, 0.1}, Emotion::fear},
                                    {{0.1, 0.9, 0.1, 0.9}, Emotion::rage}};
  for (const auto& t : targets) {
    const auto p = predict_intensities(m, t.vector);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    CHECK(m.classes[best] == t.emotion);
  }
  CHECK(model_precision(m, targets) > 0.8);

  const SvmModel back = svm_from_json(svm_to_json(m));
  CHECK(svm_to_json(back) == svm_to_json(m));
  for (const auto& t : targets) CHECK(predict_intensities(back, t.vector) == predict_intensities(m, t.vector));
  CHECK_THROWS_AS(svm_from_json("{}"), Error);
}

TEST_CASE("training is deterministic and roughly permutation-equivariant") {
  auto data = clusters(15, 5);
  const SvmModel a = train_svm(PreparedCorpus(data), 0.5);
  CHECK(svm_to_json(train_svm(PreparedCorpus(data), 0.5)) == svm_to_json(a));

  Rng rng(9);
  std::shuffle(data.begin(), data.end(), rng);
  const SvmModel b = train_svm(PreparedCorpus(data, a.classes), 0.5);
  // Platt folds depend on sample order, so only approximate agreement is expected.
  for (const Features& x : {Features{0.5, 0.5, 0.5, 0.5}, Features{0.1, 0.1, 0.9, 0.5}, Features{0.9, 0.9, 0.1, 0.1}}) {
    const AppraisalVector v{x[0], x[1], x[2], x[3]};
    const auto pa = predict_intensities(a, v), pb = predict_intensities(b, v);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(std::abs(pa[i] - pb[i]) < 0.1);
  }
}

TEST_CASE("training preconditions") {
  const PreparedCorpus pc(clusters(5, 1));
  CHECK_THROWS_AS(train_svm(pc, 0.0), DomainError);
  CHECK_THROWS_AS(train_svm(pc, -1.0), DomainError);
  CHECK_THROWS_AS(train_svm(PreparedCorpus({sample(0, 0, 0, 0, Emotion::joy), sample(1, 1, 1, 1, Emotion::joy)}), 1.0),
                  DomainError);
  CHECK_THROWS_AS(
      train_svm(PreparedCorpus({sample(0, 0, 0, 0, Emotion::joy), sample(0.1, 0, 0, 0, Emotion::joy),
                                sample(1, 1, 1, 1, Emotion::fear)}),
                1.0),
      DomainError);
}

TEST_CASE("kernel width defaults to the feature variance") {
  const auto data = clusters(10, 2);
  std::vector<double> all;
  for (const auto& s : data)
    for (double v : features_of(s.vector)) all.push_back(v);
  const double mean = std::accumulate(all.begin(), all.end(), 0.0) / all.size();
  double var = 0;
  for (double v : all) var += (v - mean) * (v - mean);
  var /= all.size();
  CHECK(PreparedCorpus(data).gamma() == doctest::Approx(1.0 / (4.0 * var)));
  CHECK(PreparedCorpus(data, {}, 2.5).gamma() == 2.5);
}

TEST_CASE("precision variance of a perturbed penalty") {
  const std::vector<CurvePoint> flat{{0.01, 0.5}, {1.0, 0.5}};
  CHECK(precision_variance(flat, 0.1, 0.05) == doctest::Approx(0.0));
  const std::vector<CurvePoint> rising{{1e-3, 0.2}, {1e-2, 0.4}, {1e-1, 0.8}};
  CHECK(precision_variance(rising, 0.01, 0.0) == 0.0);
  const double v1 = precision_variance(rising, 0.01, 0.001);
  const double v2 = precision_variance(rising, 0.01, 0.005);
  CHECK(v1 > 0);
  CHECK(v2 > v1);
  CHECK_THROWS_AS(precision_variance({}, 1, 1), DomainError);
}

TEST_CASE("penalty draws stay positive") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) CHECK(draw_c(0.001, 0.01, rng) > 0);
  CHECK(draw_c(0.5, 0.0, rng) == 0.5);
  CalibrationResult cal;
  cal.c_mean = 0.01;
  cal.c_var = 0.0;
  const auto cs = sample_participant_cs(cal, 5, 1);
  CHECK(cs == std::vector<double>(5, 0.01));
}

TEST_CASE("calibration on a small corpus") {
  const Knowledge k = default_knowledge();
  const std::vector<Emotion> four{Emotion::anxiety, Emotion::despair, Emotion::irritation, Emotion::rage};
  const PreparedCorpus pc(build_corpus(k, four, 60, 21), four);
  const std::vector<Target> targets{{{0.2, 1, 0, 0}, Emotion::anxiety},
                                    {{0.81, 1, 0, 0}, Emotion::despair},
                                    {{0.2, 1, 0, 0.53}, Emotion::irritation},
                                    {{0.8, 1, 0, 0.6}, Emotion::rage}};
  CalibrationOptions opt;
  opt.grid = {1e-3, 1e-2, 1e-1, 1.0};
  opt.refine_steps = 3;
  const double mid = 0.45;
  CalibrationResult r;
  try {
    r = calibrate_c(pc, targets, mid, 0.001, opt);
  } catch (const DomainError& e) {
    FAIL(e.what());
  }
  CHECK(r.c_mean > 0);
  CHECK(std::is_sorted(r.precision_curve.begin(), r.precision_curve.end(),
                       [](auto& a, auto& b) { return a.c < b.c; }));
  CHECK(r.precision_curve.size() > 4);
  for (const auto& p : r.precision_curve)
    CHECK(std::abs(p.precision - mid) >= std::abs(r.precision_at_c_mean - mid));
  CHECK(r.achieved_variance == doctest::Approx(precision_variance(r.precision_curve, r.c_mean, r.c_var)));

  CHECK_THROWS_AS(calibrate_c(pc, targets, 0.99, 0.0, opt), DomainError);
  CHECK_THROWS_AS(calibrate_c(pc, targets, 0.5, -1.0, opt), DomainError);
  opt.grid = {1e-2, 2e-2};
  CHECK_THROWS_AS(calibrate_c(pc, targets, 0.5, 0.0, opt), DomainError);
}

TEST_CASE("default grid is logarithmic") {
  const auto g = default_c_grid();
  REQUIRE(g.size() == 13);
  CHECK(g.front() == doctest::Approx(1e-4));
  CHECK(g.back() == doctest::Approx(1e-1));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(std::pow(10.0, 0.25)));
}
