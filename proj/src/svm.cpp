#include "appraise_rl/svm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "appraise_rl/errors.hpp"

namespace appraise_rl {

using ojson = nlohmann::ordered_json;

Features features_of(const AppraisalVector& v) { return {v.suddenness, v.goal_relevance, v.conduciveness, v.power}; }

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinProb = 1e-7;

double rbf(const Features& a, const Features& b, double gamma) {
  double d = 0.0;
  for (int k = 0; k < 4; ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-gamma * d);
}

// Second-order working-set SMO for min 0.5 a'Qa - e'a, 0 <= a <= c, y'a = 0.
// `kernel_row(i, out)` fills out[t] = K(i, t) for every local index t; `diag(i)` is K(i, i).
template <class RowFn, class DiagFn>
BinarySolution smo(int l, const std::vector<int>& y_in, double c, double eps, long max_iter, RowFn&& kernel_row,
                   DiagFn&& diag) {
  const std::size_t n = static_cast<std::size_t>(l);
  BinarySolution sol;
  sol.alpha.assign(n, 0.0);
  double* alpha = sol.alpha.data();
  std::vector<double> yv(n), grad(n, -1.0), qd(n), ki(n), kj(n);
  for (std::size_t t = 0; t < n; ++t) {
    yv[t] = y_in[t];
    qd[t] = diag(static_cast<int>(t));
  }
  auto in_up = [&](std::size_t t) { return yv[t] > 0 ? alpha[t] < c : alpha[t] > 0; };
  auto in_low = [&](std::size_t t) { return yv[t] > 0 ? alpha[t] > 0 : alpha[t] < c; };

  // i maximises -y_t g_t over I_up; recomputed inside the gradient update.
  double gmax = -kInf;
  std::ptrdiff_t i = -1;
  for (std::size_t t = 0; t < n; ++t) {
    if (in_up(t) && -yv[t] * grad[t] >= gmax) {
      gmax = -yv[t] * grad[t];
      i = static_cast<std::ptrdiff_t>(t);
    }
  }
  long iter = 0;
  while (i >= 0) {
    if (iter >= max_iter) {
      sol.converged = false;
      break;
    }
    const std::size_t si = static_cast<std::size_t>(i);
    kernel_row(static_cast<int>(i), ki.data());
    double gmax2 = -kInf, obj_min = kInf;
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = yv[t] * grad[t];
      if (v >= gmax2) gmax2 = v;
      const double diff = gmax + v;
      if (diff > 0) {
        const double quad = qd[si] + qd[t] - 2.0 * ki[t];
        const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
        if (obj <= obj_min) {
          j = static_cast<std::ptrdiff_t>(t);
          obj_min = obj;
        }
      }
    }
    if (gmax + gmax2 < eps || j < 0) break;
    ++iter;
    const std::size_t sj = static_cast<std::size_t>(j);
    kernel_row(static_cast<int>(j), kj.data());
    const double yi = yv[si], yj = yv[sj];
    const double qij = yi * yj * ki[sj];
    const double old_i = alpha[si], old_j = alpha[sj];
    if (yi != yj) {
      double quad = qd[si] + qd[sj] + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[si] - grad[sj]) / quad;
      const double diff = alpha[si] - alpha[sj];
      alpha[si] += delta;
      alpha[sj] += delta;
      if (diff > 0) {
        if (alpha[sj] < 0) {
          alpha[sj] = 0;
          alpha[si] = diff;
        }
      } else if (alpha[si] < 0) {
        alpha[si] = 0;
        alpha[sj] = -diff;
      }
      if (diff > 0) {
        if (alpha[si] > c) {
          alpha[si] = c;
          alpha[sj] = c - diff;
        }
      } else if (alpha[sj] > c) {
        alpha[sj] = c;
        alpha[si] = c + diff;
      }
    } else {
      double quad = qd[si] + qd[sj] - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[si] - grad[sj]) / quad;
      const double sum = alpha[si] + alpha[sj];
      alpha[si] -= delta;
      alpha[sj] += delta;
      if (sum > c) {
        if (alpha[si] > c) {
          alpha[si] = c;
          alpha[sj] = sum - c;
        }
      } else if (alpha[sj] < 0) {
        alpha[sj] = 0;
        alpha[si] = sum;
      }
      if (sum > c) {
        if (alpha[sj] > c) {
          alpha[sj] = c;
          alpha[si] = sum - c;
        }
      } else if (alpha[si] < 0) {
        alpha[si] = 0;
        alpha[sj] = sum;
      }
    }
    const double wi = yi * (alpha[si] - old_i), wj = yj * (alpha[sj] - old_j);
    gmax = -kInf;
    i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += yv[t] * (ki[t] * wi + kj[t] * wj);
      if (in_up(t) && -yv[t] * grad[t] >= gmax) {
        gmax = -yv[t] * grad[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
  }
  sol.iterations = iter;

  // Threshold: average over free vectors, else midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = yv[t] * grad[t];
    if (alpha[t] >= c) {
      if (yv[t] < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (yv[t] > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  sol.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2;
  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
  sol.objective = obj / 2;
  return sol;
}

BinarySolution solve_on_corpus(const PreparedCorpus& pc, const std::vector<int>& idx, const std::vector<int>& y,
                               double c, const SvmOptions& opt) {
  return smo(
      static_cast<int>(idx.size()), y, c, opt.eps, opt.max_iter,
      [&](int i, double* out) {
        const float* row = pc.gram_row(static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]));
        const int* ix = idx.data();
        const std::size_t m = idx.size();
        for (std::size_t t = 0; t < m; ++t) out[t] = row[ix[t]];
      },
      [&](int i) {
        const auto s = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
        return static_cast<double>(pc.gram_row(s)[s]);
      });
}

double sigmoid_predict(double dec, double a, double b) {
  const double f = dec * a + b;
  return f >= 0 ? std::exp(-f) / (1.0 + std::exp(-f)) : 1.0 / (1.0 + std::exp(f));
}

// Cross-validated decision values for the Platt fit of one binary problem.
std::vector<double> held_out_decisions(const PreparedCorpus& pc, const std::vector<int>& idx,
                                       const std::vector<int>& y, double c, const SvmOptions& opt, Rng& rng) {
  const int l = static_cast<int>(idx.size());
  const int folds = std::max(2, std::min(opt.platt_folds, l));
  std::vector<int> perm(static_cast<std::size_t>(l));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < l; ++i) {
    int j = i + static_cast<int>(uniform01(rng) * (l - i));
    j = std::min(j, l - 1);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<double> dec(static_cast<std::size_t>(l), 0.0);
  for (int f = 0; f < folds; ++f) {
    const int begin = f * l / folds, end = (f + 1) * l / folds;
    std::vector<int> sub_idx, sub_y;
    int pos = 0, neg = 0;
    for (int k = 0; k < l; ++k) {
      if (k >= begin && k < end) continue;
      const int local = perm[static_cast<std::size_t>(k)];
      sub_idx.push_back(idx[static_cast<std::size_t>(local)]);
      sub_y.push_back(y[static_cast<std::size_t>(local)]);
      (sub_y.back() > 0 ? pos : neg)++;
    }
    if (pos == 0 || neg == 0) {
      const double v = pos > 0 ? 1.0 : (neg > 0 ? -1.0 : 0.0);
      for (int k = begin; k < end; ++k) dec[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = v;
      continue;
    }
    BinarySolution s = solve_on_corpus(pc, sub_idx, sub_y, c, opt);
    for (int k = begin; k < end; ++k) {
      const int local = perm[static_cast<std::size_t>(k)];
      const float* row = pc.gram_row(static_cast<std::size_t>(idx[static_cast<std::size_t>(local)]));
      double d = -s.rho;
      for (std::size_t t = 0; t < sub_idx.size(); ++t)
        if (s.alpha[t] > 0) d += s.alpha[t] * sub_y[t] * row[sub_idx[t]];
      dec[static_cast<std::size_t>(local)] = d;
    }
  }
  return dec;
}

}  // namespace

BinarySolution solve_binary_dual(const std::vector<std::vector<double>>& kernel, const std::vector<int>& y, double c,
                                 double eps, long max_iter) {
  const std::size_t l = y.size();
  if (kernel.size() != l) throw DomainError("kernel size does not match labels");
  for (int v : y)
    if (v != 1 && v != -1) throw DomainError("labels must be +1 or -1");
  if (!(c > 0)) throw DomainError("c must be positive");
  return smo(
      static_cast<int>(l), y, c, eps, max_iter,
      [&](int i, double* out) {
        const auto& row = kernel[static_cast<std::size_t>(i)];
        std::copy(row.begin(), row.end(), out);
      },
      [&](int i) { return kernel[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]; });
}

PreparedCorpus::PreparedCorpus(std::vector<LabeledSample> corpus, std::vector<Emotion> classes, double gamma)
    : samples_(std::move(corpus)), classes_(std::move(classes)) {
  if (classes_.empty()) {
    for (const auto& s : samples_)
      if (std::find(classes_.begin(), classes_.end(), s.label) == classes_.end()) classes_.push_back(s.label);
  }
  class_index_.reserve(samples_.size());
  for (const auto& s : samples_) {
    auto it = std::find(classes_.begin(), classes_.end(), s.label);
    if (it == classes_.end())
      throw DomainError("corpus sample labelled " + std::string(emotion_name(s.label)) + " outside the class list");
    class_index_.push_back(static_cast<int>(it - classes_.begin()));
  }
  if (gamma > 0) {
    gamma_ = gamma;
  } else {
    double sum = 0.0, sq = 0.0;
    for (const auto& s : samples_)
      for (double x : features_of(s.vector)) {
        sum += x;
        sq += x * x;
      }
    const double n = 4.0 * static_cast<double>(samples_.size());
    const double var = n > 0 ? sq / n - (sum / n) * (sum / n) : 0.0;
    gamma_ = var > 0 ? 1.0 / (4.0 * var) : 1.0;
  }
  const std::size_t n = samples_.size();
  gram_.resize(n * n);
  std::vector<Features> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = features_of(samples_[i].vector);
  for (std::size_t i = 0; i < n; ++i) {
    gram_[i * n + i] = 1.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      const float k = static_cast<float>(rbf(x[i], x[j], gamma_));
      gram_[i * n + j] = k;
      gram_[j * n + i] = k;
    }
  }
}

std::pair<double, double> fit_sigmoid(const std::vector<double>& dec, const std::vector<int>& y) {
  const std::size_t l = dec.size();
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v > 0 ? prior1 : prior0) += 1;
  const int max_iter = 100;
  const double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(l);
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      const double z = dec[i] * aa + bb;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  for (std::size_t i = 0; i < l; ++i) t[i] = y[i] > 0 ? hi : lo;
  double fval = objective(a, b);
  for (int iter = 0; iter < max_iter; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < l; ++i) {
      const double z = dec[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1;
    while (step >= min_step) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 0.0001 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < min_step) break;
  }
  return {a, b};
}

std::vector<double> couple_pairwise(const std::vector<std::vector<double>>& r) {
  const std::size_t k = r.size();
  std::vector<double> p(k, 1.0 / static_cast<double>(k));
  if (k < 2) return p;
  std::vector<std::vector<double>> q(k, std::vector<double>(k, 0.0));
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t j = 0; j < t; ++j) {
      q[t][t] += r[j][t] * r[j][t];
      q[t][j] = q[j][t];
    }
    for (std::size_t j = t + 1; j < k; ++j) {
      q[t][t] += r[j][t] * r[j][t];
      q[t][j] = -r[j][t] * r[t][j];
    }
  }
  std::vector<double> qp(k);
  const int max_iter = std::max(100, static_cast<int>(k));
  const double eps = 0.005 / static_cast<double>(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    double pqp = 0;
    for (std::size_t t = 0; t < k; ++t) {
      qp[t] = 0;
      for (std::size_t j = 0; j < k; ++j) qp[t] += q[t][j] * p[j];
      pqp += p[t] * qp[t];
    }
    double max_err = 0;
    for (std::size_t t = 0; t < k; ++t) max_err = std::max(max_err, std::abs(qp[t] - pqp));
    if (max_err < eps) break;
    for (std::size_t t = 0; t < k; ++t) {
      const double diff = (-qp[t] + pqp) / q[t][t];
      p[t] += diff;
      pqp = (pqp + diff * (diff * q[t][t] + 2 * qp[t])) / (1 + diff) / (1 + diff);
      for (std::size_t j = 0; j < k; ++j) {
        qp[j] = (qp[j] + diff * q[t][j]) / (1 + diff);
        p[j] /= (1 + diff);
      }
    }
  }
  double sum = 0;
  for (double& v : p) {
    v = std::max(v, 0.0);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

SvmModel train_svm(const PreparedCorpus& pc, double c, const SvmOptions& opt) {
  if (!(c > 0) || !std::isfinite(c)) throw DomainError("penalty c must be positive");
  const std::size_t k = pc.classes().size();
  if (k < 2) throw DomainError("degenerate corpus: fewer than two classes");
  std::vector<int> per_class(k, 0);
  for (int ci : pc.class_index()) ++per_class[static_cast<std::size_t>(ci)];
  for (std::size_t i = 0; i < k; ++i)
    if (per_class[i] < 2)
      throw DomainError("degenerate corpus: class " + std::string(emotion_name(pc.classes()[i])) +
                        " has fewer than two samples");

  struct PairJob {
    std::size_t a = 0, b = 0;
    std::vector<int> idx, y;
    std::pair<double, double> platt;
    BinarySolution sol;
  };
  std::vector<PairJob> jobs;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      PairJob j;
      j.a = a;
      j.b = b;
      for (std::size_t s = 0; s < pc.size(); ++s) {
        const int ci = pc.class_index()[s];
        if (ci == static_cast<int>(a) || ci == static_cast<int>(b)) {
          j.idx.push_back(static_cast<int>(s));
          j.y.push_back(ci == static_cast<int>(a) ? 1 : -1);
        }
      }
      jobs.push_back(std::move(j));
    }

  auto run = [&](PairJob& j) {
    // Fold assignment depends only on the unordered emotion pair.
    const auto ea = static_cast<std::uint64_t>(pc.classes()[j.a]), eb = static_cast<std::uint64_t>(pc.classes()[j.b]);
    Rng rng(mix_seed(opt.seed, 7919 * std::min(ea, eb) + std::max(ea, eb)));
    j.platt = fit_sigmoid(held_out_decisions(pc, j.idx, j.y, c, opt, rng), j.y);
    j.sol = solve_on_corpus(pc, j.idx, j.y, c, opt);
  };
  const unsigned workers = std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                                              static_cast<unsigned>(jobs.size()));
  if (workers <= 1) {
    for (auto& j : jobs) run(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
          try {
            run(jobs[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  SvmModel m;
  m.classes = pc.classes();
  m.c = c;
  m.gamma = pc.gamma();
  std::map<int, int> sv_slot;  // corpus index -> support vector index
  for (auto& j : jobs) {
    PairClassifier pair;
    pair.first = static_cast<int>(j.a);
    pair.second = static_cast<int>(j.b);
    pair.rho = j.sol.rho;
    pair.platt_a = j.platt.first;
    pair.platt_b = j.platt.second;
    pair.iterations = j.sol.iterations;
    pair.converged = j.sol.converged;
    if (!j.sol.converged)
      m.warnings.push_back("pair " + std::string(emotion_name(pc.classes()[j.a])) + "/" +
                           std::string(emotion_name(pc.classes()[j.b])) + " hit the iteration cap");
    for (std::size_t t = 0; t < j.idx.size(); ++t) {
      if (j.sol.alpha[t] <= 0) continue;
      auto [it, inserted] = sv_slot.try_emplace(j.idx[t], static_cast<int>(m.support_vectors.size()));
      if (inserted) m.support_vectors.push_back(features_of(pc.samples()[static_cast<std::size_t>(j.idx[t])].vector));
      pair.sv.push_back(it->second);
      pair.coef.push_back(j.sol.alpha[t] * j.y[t]);
    }
    m.pairs.push_back(std::move(pair));
  }
  return m;
}

double decision_value(const SvmModel& m, const PairClassifier& p, const Features& x) {
  double d = -p.rho;
  for (std::size_t t = 0; t < p.sv.size(); ++t)
    d += p.coef[t] * rbf(m.support_vectors[static_cast<std::size_t>(p.sv[t])], x, m.gamma);
  return d;
}

std::vector<double> predict_intensities(const SvmModel& m, const AppraisalVector& v) {
  const std::size_t k = m.classes.size();
  const Features x = features_of(v);
  for (double f : x)
    if (!std::isfinite(f)) throw DomainError("appraisal vector must be finite");
  std::vector<double> kv(m.support_vectors.size());
  for (std::size_t i = 0; i < kv.size(); ++i) kv[i] = rbf(m.support_vectors[i], x, m.gamma);
  std::vector<std::vector<double>> r(k, std::vector<double>(k, 0.0));
  for (const auto& p : m.pairs) {
    double d = -p.rho;
    for (std::size_t t = 0; t < p.sv.size(); ++t) d += p.coef[t] * kv[static_cast<std::size_t>(p.sv[t])];
    const double prob = std::clamp(sigmoid_predict(d, p.platt_a, p.platt_b), kMinProb, 1 - kMinProb);
    r[static_cast<std::size_t>(p.first)][static_cast<std::size_t>(p.second)] = prob;
    r[static_cast<std::size_t>(p.second)][static_cast<std::size_t>(p.first)] = 1 - prob;
  }
  return couple_pairwise(r);
}

double model_precision(const SvmModel& m, const std::vector<Target>& targets) {
  if (targets.empty()) throw DomainError("precision needs at least one target");
  double sum = 0;
  for (const auto& t : targets) {
    auto it = std::find(m.classes.begin(), m.classes.end(), t.emotion);
    if (it == m.classes.end())
      throw DomainError("target emotion " + std::string(emotion_name(t.emotion)) + " is not a model class");
    sum += predict_intensities(m, t.vector)[static_cast<std::size_t>(it - m.classes.begin())];
  }
  return sum / static_cast<double>(targets.size());
}

std::string svm_to_json(const SvmModel& m) {
  ojson classes = ojson::array();
  for (Emotion e : m.classes) classes.push_back(std::string(emotion_name(e)));
  ojson svs = ojson::array();
  for (const auto& f : m.support_vectors) svs.push_back({f[0], f[1], f[2], f[3]});
  ojson pairs = ojson::array();
  for (const auto& p : m.pairs)
    pairs.push_back({{"first", p.first},
                     {"second", p.second},
                     {"rho", p.rho},
                     {"platt_a", p.platt_a},
                     {"platt_b", p.platt_b},
                     {"iterations", p.iterations},
                     {"converged", p.converged},
                     {"sv", p.sv},
                     {"coef", p.coef}});
  ojson doc = {{"kernel", "rbf"},     {"gamma", m.gamma}, {"c", m.c},         {"classes", classes},
               {"warnings", m.warnings}, {"pairs", pairs},  {"support_vectors", svs}};
  return doc.dump();
}

SvmModel svm_from_json(const std::string& text) {
  try {
    auto doc = ojson::parse(text);
    if (doc.at("kernel").get<std::string>() != "rbf") throw DomainError("unsupported kernel");
    SvmModel m;
    m.gamma = doc.at("gamma").get<double>();
    m.c = doc.at("c").get<double>();
    for (const auto& e : doc.at("classes")) m.classes.push_back(parse_emotion(e.get<std::string>()));
    m.warnings = doc.at("warnings").get<std::vector<std::string>>();
    for (const auto& v : doc.at("support_vectors")) {
      auto f = v.get<std::vector<double>>();
      if (f.size() != 4) throw DomainError("support vector must have 4 components");
      m.support_vectors.push_back({f[0], f[1], f[2], f[3]});
    }
    const int k = static_cast<int>(m.classes.size());
    for (const auto& pj : doc.at("pairs")) {
      PairClassifier p;
      p.first = pj.at("first").get<int>();
      p.second = pj.at("second").get<int>();
      p.rho = pj.at("rho").get<double>();
      p.platt_a = pj.at("platt_a").get<double>();
      p.platt_b = pj.at("platt_b").get<double>();
      p.iterations = pj.at("iterations").get<long>();
      p.converged = pj.at("converged").get<bool>();
      p.sv = pj.at("sv").get<std::vector<int>>();
      p.coef = pj.at("coef").get<std::vector<double>>();
      if (p.first < 0 || p.first >= k || p.second < 0 || p.second >= k || p.sv.size() != p.coef.size())
        throw DomainError("inconsistent pair classifier");
      for (int s : p.sv)
        if (s < 0 || static_cast<std::size_t>(s) >= m.support_vectors.size())
          throw DomainError("support vector index out of range");
      m.pairs.push_back(std::move(p));
    }
    return m;
  } catch (const ojson::exception& e) {
    throw Error(std::string("malformed SVM document: ") + e.what());
  }
}

std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int e = -16; e <= -4; ++e) g.push_back(std::pow(10.0, e / 4.0));
  return g;
}

namespace {

double curve_at(const std::vector<CurvePoint>& curve, double c) {
  if (c <= curve.front().c) return curve.front().precision;
  if (c >= curve.back().c) return curve.back().precision;
  auto hi = std::lower_bound(curve.begin(), curve.end(), c, [](const CurvePoint& p, double v) { return p.c < v; });
  auto lo = hi - 1;
  const double w = (std::log(c) - std::log(lo->c)) / (std::log(hi->c) - std::log(lo->c));
  return lo->precision + w * (hi->precision - lo->precision);
}

}  // namespace

double precision_variance(const std::vector<CurvePoint>& curve, double mu, double sigma) {
  if (curve.empty()) throw DomainError("empty precision curve");
  if (sigma <= 0) return 0.0;
  // Quadrature over z in [max(-mu/sigma, -8), 8] with standard normal weights.
  const double z0 = std::max(-mu / sigma, -8.0), z1 = 8.0;
  if (z0 >= z1) return 0.0;
  const int n = 4000;
  const double h = (z1 - z0) / n;
  double w_sum = 0, m1 = 0, m2 = 0;
  for (int i = 0; i <= n; ++i) {
    const double z = z0 + h * i;
    const double c = mu + sigma * z;
    const double w = std::exp(-0.5 * z * z) * ((i == 0 || i == n) ? 0.5 : 1.0);
    const double p = curve_at(curve, std::max(c, 1e-300));
    w_sum += w;
    m1 += w * p;
    m2 += w * p * p;
  }
  m1 /= w_sum;
  m2 /= w_sum;
  return std::max(0.0, m2 - m1 * m1);
}

CalibrationResult calibrate_c(const PreparedCorpus& corpus, const std::vector<Target>& targets,
                              double human_precision_mean, double human_precision_var,
                              const CalibrationOptions& opt) {
  if (!(human_precision_mean >= 0 && human_precision_mean <= 1))
    throw DomainError("human precision must lie in [0, 1]");
  if (!(human_precision_var >= 0)) throw DomainError("human precision variance must be non-negative");
  std::vector<double> grid = opt.grid.empty() ? default_c_grid() : opt.grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 2 || grid.front() <= 0) throw DomainError("c grid needs at least two positive values");
  if (grid.back() / grid.front() < 100.0) throw DomainError("c grid must span at least two decades");

  CalibrationResult r;
  r.target_precision = human_precision_mean;
  r.target_variance = human_precision_var;
  auto measure = [&](double c) {
    const double p = model_precision(train_svm(corpus, c, opt.svm), targets);
    r.precision_curve.push_back({c, p});
    return p;
  };
  std::vector<double> pg;
  for (double c : grid) pg.push_back(measure(c));
  r.achievable_min = *std::min_element(pg.begin(), pg.end());
  r.achievable_max = *std::max_element(pg.begin(), pg.end());
  const double target = human_precision_mean;
  if (target < r.achievable_min - opt.match_tolerance || target > r.achievable_max + opt.match_tolerance) {
    throw DomainError("target precision " + format_number(target) + " outside achievable range [" +
                      format_number(r.achievable_min) + ", " + format_number(r.achievable_max) + "]");
  }

  std::size_t bracket = grid.size();
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if ((pg[i] - target) * (pg[i + 1] - target) <= 0) {
      bracket = i;
      break;
    }
  }
  if (bracket < grid.size()) {
    double lo = grid[bracket], hi = grid[bracket + 1];
    double plo = pg[bracket], phi = pg[bracket + 1];
    for (int s = 0; s < opt.refine_steps && plo != target && phi != target; ++s) {
      const double mid = std::sqrt(lo * hi);
      const double pm = measure(mid);
      if ((plo - target) * (pm - target) <= 0) {
        hi = mid;
        phi = pm;
      } else {
        lo = mid;
        plo = pm;
      }
    }
    if (phi != plo && plo != target && phi != target) {
      const double w = (target - plo) / (phi - plo);
      measure(std::exp(std::log(lo) + w * (std::log(hi) - std::log(lo))));
    }
  }
  std::sort(r.precision_curve.begin(), r.precision_curve.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.c < b.c; });
  // Closest measured point; ties go to the smaller c.
  const CurvePoint* best = &r.precision_curve.front();
  for (const auto& p : r.precision_curve)
    if (std::abs(p.precision - target) < std::abs(best->precision - target)) best = &p;
  r.c_mean = best->c;
  r.precision_at_c_mean = best->precision;

  // c_var: smallest scale whose induced precision variance reaches the human variance.
  if (human_precision_var > 0) {
    const double s_max = 10.0 * grid.back();
    double prev = 0.0, found = -1.0;
    double best_sigma = 0.0, best_var = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double s = r.c_mean * 1e-3 * std::pow(s_max / (r.c_mean * 1e-3), i / 200.0);
      const double v = precision_variance(r.precision_curve, r.c_mean, s);
      if (v > best_var) {
        best_var = v;
        best_sigma = s;
      }
      if (v >= human_precision_var) {
        found = s;
        break;
      }
      prev = s;
    }
    if (found < 0) {
      r.c_var = best_sigma;
      r.variance_saturated = true;
    } else {
      double lo = prev, hi = found;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (precision_variance(r.precision_curve, r.c_mean, mid) >= human_precision_var ? hi : lo) = mid;
      }
      r.c_var = hi;
    }
  }
  r.achieved_variance = precision_variance(r.precision_curve, r.c_mean, r.c_var);
  return r;
}

double draw_c(double c_mean, double c_var, Rng& rng) {
  if (c_var <= 0) return c_mean;
  std::normal_distribution<double> nd(c_mean, c_var);
  for (int i = 0; i < 1000000; ++i) {
    const double c = nd(rng);
    if (c > 0) return c;
  }
  throw DomainError("cannot draw a positive c from the calibrated distribution");
}

std::vector<double> sample_participant_cs(const CalibrationResult& cal, int n, std::uint64_t seed) {
  if (n < 1) throw DomainError("participant count must be positive");
  Rng rng(mix_seed(seed, 0));
  std::vector<double> cs;
  for (int i = 0; i < n; ++i) cs.push_back(draw_c(cal.c_mean, cal.c_var, rng));
  return cs;
}

std::vector<SvmModel> sample_participants(const CalibrationResult& cal, const PreparedCorpus& corpus, int n,
                                          std::uint64_t seed, const SvmOptions& opt) {
  std::vector<SvmModel> out;
  for (double c : sample_participant_cs(cal, n, seed)) out.push_back(train_svm(corpus, c, opt));
  return out;
}

std::string calibration_to_json(const CalibrationResult& r) {
  ojson curve = ojson::array();
  for (const auto& p : r.precision_curve) curve.push_back({{"c", p.c}, {"precision", p.precision}});
  ojson doc = {{"c_mean", r.c_mean},
               {"c_var", r.c_var},
               {"precision_at_c_mean", r.precision_at_c_mean},
               {"target_precision", r.target_precision},
               {"target_variance", r.target_variance},
               {"achieved_variance", r.achieved_variance},
               {"variance_saturated", r.variance_saturated},
               {"achievable_min", r.achievable_min},
               {"achievable_max", r.achievable_max},
               {"precision_curve", curve}};
  return doc.dump();
}

}  // namespace appraise_rl
