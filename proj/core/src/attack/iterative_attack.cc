#include "fedleak/attack/iterative_attack.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include "fedleak/attack/gradient_match.h"
#include "fedleak/error.h"
#include "fedleak/eval/metrics.h"

namespace fedleak::attack {

void AttackConfig::validate() const {
  if (max_iters < 1) throw ConfigError("attack max_iters must be at least 1");
  if (!(tol >= 0.0)) throw ConfigError("attack tolerance must be non-negative");
  if (const auto* fd = std::get_if<FiniteDifference>(&gradient); fd && !(fd->h > 0.0)) {
    throw ConfigError("finite-difference step h must be positive");
  }
  if (const auto* adam = std::get_if<Adam>(&optimizer)) {
    if (!(adam->lr > 0.0) || !(adam->beta1 >= 0.0 && adam->beta1 < 1.0) ||
        !(adam->beta2 >= 0.0 && adam->beta2 < 1.0)) {
      throw ConfigError("Adam needs lr > 0 and betas in [0, 1)");
    }
  }
  if (const auto* lb = std::get_if<Lbfgs>(&optimizer); lb && lb->memory == 0) {
    throw ConfigError("L-BFGS memory must be positive");
  }
  if (const auto* u = std::get_if<UniformNoise>(&init); u && !(u->lo < u->hi)) {
    throw ConfigError("uniform init needs lo < hi");
  }
}

std::vector<double> initial_variables(const nn::NetworkSpec& net, std::size_t batch_size,
                                      const AttackConfig& cfg) {
  const nn::Shape& shape = net.input_shape();
  const std::size_t d = nn::shape_size(shape);
  const std::size_t classes = net.num_classes();
  const std::size_t channels = shape.size() == 3 ? shape[0] : 1;
  const std::size_t plane = d / channels;
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> z(batch_size * (d + classes));
  for (std::size_t j = 0; j < batch_size; ++j) {
    double* x = z.data() + j * d;
    if (const auto* ramp = std::get_if<PatternRamp>(&cfg.init)) {
      std::uniform_real_distribution<double> noise(-ramp->noise, ramp->noise);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t k = 0; k < plane; ++k) {
          const double t = plane > 1 ? static_cast<double>(k) / static_cast<double>(plane - 1) : 0.5;
          x[c * plane + k] = 0.25 + 0.5 * t + (ramp->noise > 0.0 ? noise(rng) : 0.0);
        }
      }
    } else {
      const auto& u = std::get<UniformNoise>(cfg.init);
      std::uniform_real_distribution<double> dist(u.lo, u.hi);
      for (std::size_t k = 0; k < d; ++k) x[k] = dist(rng);
    }
  }
  std::uniform_real_distribution<double> logit(-0.05, 0.05);
  for (std::size_t k = batch_size * d; k < z.size(); ++k) z[k] = logit(rng);
  return z;
}

namespace {

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

class Driver {
 public:
  Driver(const GradientMatchObjective& objective, const AttackConfig& cfg)
      : objective_(objective), cfg_(cfg) {}

  double evaluate(std::span<const double> z, std::span<double> grad) const {
    if (const auto* fd = std::get_if<FiniteDifference>(&cfg_.gradient)) {
      objective_.finite_difference_gradient(z, fd->h, grad);
      return objective_.value(z);
    }
    return objective_.value_and_gradient(z, grad);
  }

  // Runs the optimizer from z, tracking the best iterate.
  AttackResult run(std::vector<double> z) {
    AttackResult out;
    std::vector<double> g(z.size());
    double f = evaluate(z, g);
    out.trajectory.push_back(f);
    best_ = z;
    best_f_ = std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
    if (!std::isfinite(f) || !finite(g)) {
      out.diverged = true;
    } else if (f < cfg_.tol) {
      out.converged = true;
    } else if (std::holds_alternative<Adam>(cfg_.optimizer)) {
      run_adam(std::get<Adam>(cfg_.optimizer), z, g, out);
    } else {
      run_lbfgs(std::get<Lbfgs>(cfg_.optimizer), z, f, g, out);
    }
    out.loss = best_f_;
    finish(out);
    return out;
  }

 private:
  // Returns false when the loop should stop.
  bool record(const std::vector<double>& z, double f, std::span<const double> g,
              AttackResult& out) {
    ++out.iterations;
    out.trajectory.push_back(f);
    if (!std::isfinite(f) || !finite(g)) {
      out.diverged = true;
      return false;
    }
    if (f < best_f_) {
      best_f_ = f;
      best_ = z;
    }
    if (f < cfg_.tol) {
      out.converged = true;
      return false;
    }
    return true;
  }

  void run_adam(const Adam& adam, std::vector<double>& z, std::vector<double>& g,
                AttackResult& out) {
    std::vector<double> m(z.size(), 0.0), v(z.size(), 0.0);
    double b1t = 1.0, b2t = 1.0;
    for (std::size_t it = 0; it < cfg_.max_iters; ++it) {
      b1t *= adam.beta1;
      b2t *= adam.beta2;
      for (std::size_t k = 0; k < z.size(); ++k) {
        m[k] = adam.beta1 * m[k] + (1.0 - adam.beta1) * g[k];
        v[k] = adam.beta2 * v[k] + (1.0 - adam.beta2) * g[k] * g[k];
        const double mh = m[k] / (1.0 - b1t);
        const double vh = v[k] / (1.0 - b2t);
        z[k] -= adam.lr * mh / (std::sqrt(vh) + adam.epsilon);
      }
      const double f = evaluate(z, g);
      if (!record(z, f, g, out)) return;
    }
  }

  void run_lbfgs(const Lbfgs& opt, std::vector<double>& z, double f, std::vector<double>& g,
                 AttackResult& out) {
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    const std::size_t n = z.size();
    std::vector<double> dir(n), z_new(n), g_new(n);
    for (std::size_t it = 0; it < cfg_.max_iters; ++it) {
      // Two-loop recursion for dir = -H g.
      for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
      std::vector<double> alpha(s_hist.size());
      for (std::size_t h = s_hist.size(); h-- > 0;) {
        alpha[h] = rho_hist[h] * dot(s_hist[h], dir);
        for (std::size_t k = 0; k < n; ++k) dir[k] -= alpha[h] * y_hist[h][k];
      }
      double initial_step = 1.0;
      if (!s_hist.empty()) {
        const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        for (double& x : dir) x *= gamma;
      } else {
        const double gnorm = std::sqrt(dot(g, g));
        if (gnorm > 0.0) initial_step = std::min(1.0, 1.0 / gnorm);
      }
      for (std::size_t h = 0; h < s_hist.size(); ++h) {
        const double beta = rho_hist[h] * dot(y_hist[h], dir);
        for (std::size_t k = 0; k < n; ++k) dir[k] += (alpha[h] - beta) * s_hist[h][k];
      }
      double slope = dot(g, dir);
      if (!(slope < 0.0)) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
        slope = -dot(g, g);
        if (slope == 0.0) return;
      }

      // Backtracking Armijo line search.
      double step = initial_step;
      double f_new = 0.0;
      bool accepted = false;
      for (std::size_t ls = 0; ls < opt.max_line_search; ++ls) {
        for (std::size_t k = 0; k < n; ++k) z_new[k] = z[k] + step * dir[k];
        f_new = evaluate(z_new, g_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        if (s_hist.empty()) {
          // No descent even along the gradient: a stationary point at
          // working precision.
          ++out.iterations;
          out.trajectory.push_back(f);
          return;
        }
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      std::vector<double> s(n), y(n);
      for (std::size_t k = 0; k < n; ++k) {
        s[k] = z_new[k] - z[k];
        y[k] = g_new[k] - g[k];
      }
      const double sy = dot(s, y);
      if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y)) && sy > 0.0) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        rho_hist.push_back(1.0 / sy);
        if (s_hist.size() > opt.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
          rho_hist.pop_front();
        }
      }
      z.swap(z_new);
      g.swap(g_new);
      f = f_new;
      if (!record(z, f, g, out)) return;
    }
  }

  void finish(AttackResult& out) const {
    const nn::NetworkSpec& net = objective_.network();
    const std::size_t d = objective_.input_size();
    const std::size_t classes = objective_.num_classes();
    for (std::size_t j = 0; j < objective_.batch_size(); ++j) {
      std::vector<double> x(best_.begin() + objective_.input_offset(j),
                            best_.begin() + objective_.input_offset(j) + d);
      for (double& v : x) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
      out.inputs.emplace_back(net.input_shape(), std::move(x));
      const auto logits = std::span<const double>(best_).subspan(objective_.label_offset(j), classes);
      out.labels.push_back(static_cast<std::size_t>(
          std::max_element(logits.begin(), logits.end()) - logits.begin()));
    }
  }

  const GradientMatchObjective& objective_;
  const AttackConfig& cfg_;
  std::vector<double> best_;
  double best_f_ = std::numeric_limits<double>::infinity();
};

}  // namespace

AttackResult iterative_reconstruct(const nn::NetworkSpec& net, const nn::Params& public_params,
                                   const defense::SharedUpdate& observed, std::size_t batch_size,
                                   const AttackConfig& cfg, const std::optional<AttackStart>& start) {
  cfg.validate();
  const GradientMatchObjective objective(net, public_params, observed, batch_size);
  std::vector<double> z;
  if (start) {
    if (start->inputs.size() != batch_size || start->label_logits.size() != batch_size) {
      throw ConfigError("attack start must provide one input and one logit vector per item");
    }
    z.resize(objective.num_variables());
    for (std::size_t j = 0; j < batch_size; ++j) {
      if (start->inputs[j].size() != objective.input_size() ||
          start->label_logits[j].size() != objective.num_classes()) {
        throw ConfigError("attack start has wrong shapes");
      }
      std::copy(start->inputs[j].values().begin(), start->inputs[j].values().end(),
                z.begin() + objective.input_offset(j));
      std::copy(start->label_logits[j].begin(), start->label_logits[j].end(),
                z.begin() + objective.label_offset(j));
    }
  } else {
    z = initial_variables(net, batch_size, cfg);
  }
  Driver driver(objective, cfg);
  return driver.run(std::move(z));
}

AttackReport score_attack(AttackResult result, std::span<const nn::Tensor> truth,
                          std::span<const std::size_t> truth_labels) {
  const std::size_t n = result.inputs.size();
  if (truth.size() != n || truth_labels.size() != n || n == 0) {
    throw MetricError("attack scoring needs one ground-truth item per reconstruction");
  }
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < n; ++t) {
      cost[r][t] = eval::rmse(result.inputs[r].reshaped(truth[t].shape()), truth[t]);
    }
  }
  AttackReport report;
  report.assignment.assign(n, n);
  report.item_rmse.assign(n, 0.0);
  std::vector<bool> used_r(n, false), used_t(n, false);
  for (std::size_t round = 0; round < n; ++round) {
    std::size_t br = n, bt = n;
    for (std::size_t r = 0; r < n; ++r) {
      if (used_r[r]) continue;
      for (std::size_t t = 0; t < n; ++t) {
        if (used_t[t]) continue;
        if (br == n || cost[r][t] < cost[br][bt]) {
          br = r;
          bt = t;
        }
      }
    }
    used_r[br] = used_t[bt] = true;
    report.assignment[br] = bt;
    report.item_rmse[br] = cost[br][bt];
  }
  std::size_t mismatches = 0;
  for (std::size_t r = 0; r < n; ++r) {
    report.rmse += report.item_rmse[r] / static_cast<double>(n);
    if (result.labels[r] != truth_labels[report.assignment[r]]) ++mismatches;
  }
  report.membership = static_cast<double>(mismatches) / static_cast<double>(n);
  report.result = std::move(result);
  return report;
}

}  // namespace fedleak::attack
