/*
 * Copyright 2026 The causal-dp-synth Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cds/theory.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "cds/dp.h"

namespace cds::theory {
namespace {

constexpr double kGradTol = 1e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm2(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

double Softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double SigmoidOf(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double LossOf(Loss loss, double label, double prediction) {
  if (loss == Loss::kSquared) {
    const double r = label - prediction;
    return r * r;
  }
  return Softplus(-label * prediction);
}

// d loss / d prediction.
double LossSlope(Loss loss, double label, double prediction) {
  if (loss == Loss::kSquared) return -2.0 * (label - prediction);
  return -label * SigmoidOf(-label * prediction);
}

// d^2 loss / d prediction^2.
double LossCurvature(Loss loss, double label, double prediction) {
  if (loss == Loss::kSquared) return 2.0;
  const double s = SigmoidOf(-label * prediction);
  return s * (1.0 - s);
}

std::vector<size_t> ActiveSet(const ErmProblem& p, FitMode mode) {
  if (mode == FitMode::kCausal) return p.causal;
  std::vector<size_t> all(p.features.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

void ExtractDesign(const ErmProblem& p, const scg::Dataset& data, std::vector<double>* x,
                   std::vector<double>* y) {
  const size_t d = p.features.size();
  x->assign(data.rows * d, 0.0);
  y->assign(data.rows, 0.0);
  for (size_t r = 0; r < data.rows; ++r) {
    for (size_t j = 0; j < d; ++j) (*x)[r * d + j] = data.at(r, p.features[j]);
    (*y)[r] = p.LabelOf(data.at(r, p.target));
  }
}

struct Interval {
  double lo = 0.0, hi = 0.0;
};

Interval Scale(Interval a, double w) {
  return w >= 0 ? Interval{a.lo * w, a.hi * w} : Interval{a.hi * w, a.lo * w};
}

// Objective gradient restricted to `active`, written into g.
double ObjectiveAndGradient(const ErmProblem& p, const std::vector<double>& x,
                            const std::vector<double>& y, size_t rows,
                            const std::vector<size_t>& active, const std::vector<double>& theta,
                            Eigen::VectorXd* g, Eigen::MatrixXd* h) {
  const size_t d = p.features.size();
  const size_t k = active.size();
  g->setZero(static_cast<Eigen::Index>(k));
  if (h) h->setZero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  double obj = 0.0;
  const double inv_n = 1.0 / static_cast<double>(rows);
  Eigen::VectorXd xa(static_cast<Eigen::Index>(k));
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double pred = 0.0;
    for (size_t i = 0; i < k; ++i) {
      xa[static_cast<Eigen::Index>(i)] = xr[active[i]];
      pred += theta[active[i]] * xr[active[i]];
    }
    obj += LossOf(p.loss, y[r], pred) * inv_n;
    *g += xa * (LossSlope(p.loss, y[r], pred) * inv_n);
    if (h) *h += xa * xa.transpose() * (LossCurvature(p.loss, y[r], pred) * inv_n);
  }
  for (size_t i = 0; i < k; ++i) {
    const double t = theta[active[i]];
    obj += p.lambda * t * t;
    (*g)[static_cast<Eigen::Index>(i)] += 2.0 * p.lambda * t;
  }
  if (h) {
    for (size_t i = 0; i < k; ++i) {
      (*h)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 2.0 * p.lambda;
    }
  }
  return obj;
}

// Visits every combination of box endpoints (plus eta endpoints) when the
// vertex count is at most 2^16; otherwise `limit` random vertices.
template <typename Fn>
void ForEachVertex(const ErmProblem& p, Rng& rng, Fn&& fn) {
  const size_t d = p.features.size();
  std::vector<double> x(d);
  if (d + 1 <= 16) {
    const uint64_t count = uint64_t{1} << (d + 1);
    for (uint64_t m = 0; m < count; ++m) {
      for (size_t j = 0; j < d; ++j) x[j] = (m >> j) & 1 ? p.hi[j] : p.lo[j];
      fn(x, (m >> d) & 1 ? p.eta_hi : p.eta_lo);
    }
    return;
  }
  for (int t = 0; t < 4096; ++t) {
    for (size_t j = 0; j < d; ++j) x[j] = rng() & 1 ? p.hi[j] : p.lo[j];
    fn(x, rng() & 1 ? p.eta_hi : p.eta_lo);
  }
}

// Number of grid points per axis so that res^dims <= max_points.
size_t GridResolution(size_t dims, size_t max_points) {
  if (dims == 0) return 1;
  size_t res = 2;
  while (res < 50) {
    double total = 1.0;
    for (size_t i = 0; i < dims; ++i) total *= static_cast<double>(res + 1);
    if (total > static_cast<double>(max_points)) break;
    ++res;
  }
  return res;
}

// All grid points over the given intervals, row-major.
std::vector<std::vector<double>> Grid(const std::vector<Interval>& axes, size_t max_points) {
  const size_t res = GridResolution(axes.size(), max_points);
  std::vector<std::vector<double>> out(1);
  for (const Interval& a : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(out.size() * res);
    for (const auto& prefix : out) {
      for (size_t i = 0; i < res; ++i) {
        const double t = res == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(res - 1);
        auto v = prefix;
        v.push_back(a.lo + t * (a.hi - a.lo));
        next.push_back(std::move(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

std::string LossName(Loss loss) { return loss == Loss::kSquared ? "squared" : "logistic"; }

Loss ParseLoss(const std::string& name) {
  if (name == "squared") return Loss::kSquared;
  if (name == "logistic") return Loss::kLogistic;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss '" + name + "'");
}

double ErmProblem::TargetOf(std::span<const double> x, double eta) const {
  double y = dgp_bias + eta;
  for (size_t j = 0; j < causal.size(); ++j) y += dgp_weights[j] * x[causal[j]];
  return y;
}

double ErmProblem::LabelOf(double target_value) const {
  if (loss == Loss::kSquared) return target_value;
  return target_value > 0 ? 1.0 : -1.0;
}

ErmProblem ProblemFromGraph(const scg::CausalGraph& graph, const std::string& target,
                            Loss loss, double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be > 0");
  }
  scg::ValidateGraph(graph);
  const int ti = graph.IndexOf(target);
  if (ti < 0) throw Error(ErrorCode::kInvalidArgument, "unknown target '" + target + "'");
  if (graph.variables[static_cast<size_t>(ti)].latent) {
    throw Error(ErrorCode::kInvalidArgument, "target '" + target + "' is latent");
  }

  std::map<std::string, Interval> box;
  for (const std::string& name : scg::TopologicalOrder(graph)) {
    const scg::Variable& v = graph.variables[static_cast<size_t>(graph.IndexOf(name))];
    const auto mech = graph.mechanisms.find(name);
    const auto [nlo, nhi] = v.noise.Support();
    Interval iv;
    if (mech == graph.mechanisms.end()) {
      iv = {nlo, nhi};
    } else if (const auto* lin = std::get_if<scg::LinearGaussian>(&mech->second)) {
      iv = {lin->bias, lin->bias};
      const auto parents = graph.Parents(name);
      for (size_t i = 0; i < parents.size(); ++i) {
        const Interval s = Scale(box.at(parents[i]), lin->weights[i]);
        iv.lo += s.lo;
        iv.hi += s.hi;
      }
      if (v.noise.family != scg::NoiseSpec::Family::kNone) {
        iv.lo += nlo;
        iv.hi += nhi;
      } else if (lin->noise_std > 0) {
        iv = {-kInf, kInf};
      }
    } else if (std::holds_alternative<scg::LogisticBernoulli>(mech->second)) {
      iv = {0.0, 1.0};
    } else if (std::holds_alternative<scg::TableCpd>(mech->second)) {
      iv = {0.0, static_cast<double>(std::max(v.Levels(), 1) - 1)};
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "variable '" + name + "': bounded domain needs linear or discrete mechanisms");
    }
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "variable '" + name + "' is unbounded; use uniform or constant noise");
    }
    box[name] = iv;
  }

  const auto mech = graph.mechanisms.find(target);
  const scg::LinearGaussian* lin =
      mech == graph.mechanisms.end() ? nullptr : std::get_if<scg::LinearGaussian>(&mech->second);
  if (!lin) {
    throw Error(ErrorCode::kInvalidArgument,
                "target '" + target + "' needs a linear-gaussian mechanism");
  }

  ErmProblem p;
  p.loss = loss;
  p.lambda = lambda;
  const auto parents = graph.Parents(target);
  std::map<std::string, double> weight;
  for (size_t i = 0; i < parents.size(); ++i) {
    const auto& pv = graph.variables[static_cast<size_t>(graph.IndexOf(parents[i]))];
    if (pv.latent) {
      throw Error(ErrorCode::kInvalidArgument, "target parent '" + parents[i] + "' is latent");
    }
    weight[parents[i]] = lin->weights[i];
  }
  size_t col = 0;
  for (const scg::Variable& v : graph.variables) {
    if (v.latent) continue;
    if (v.name == target) {
      p.target = col++;
      continue;
    }
    const Interval iv = box.at(v.name);
    const size_t pos = p.features.size();
    p.features.push_back(col++);
    p.lo.push_back(iv.lo);
    p.hi.push_back(iv.hi);
    if (const auto w = weight.find(v.name); w != weight.end()) {
      p.causal.push_back(pos);
      p.dgp_weights.push_back(w->second);
    } else {
      p.associational.push_back(pos);
    }
  }
  p.dgp_bias = lin->bias;
  const auto [elo, ehi] = graph.variables[static_cast<size_t>(ti)].noise.Support();
  p.eta_lo = elo;
  p.eta_hi = ehi;
  p.target_lo = box.at(target).lo;
  p.target_hi = box.at(target).hi;
  return p;
}

scg::CausalGraph MakeLabGraph(LabGraph kind) {
  using scg::Kind;
  using scg::NoiseSpec;
  scg::CausalGraph g;
  g.variables = {
      {"XC", Kind::kContinuous, 0, NoiseSpec::Uniform(-1.0, 1.0), false, {}},
      {"Y", Kind::kContinuous, 0, NoiseSpec::Uniform(-0.5, 0.5), false, {}},
      {"XA", Kind::kContinuous, 0,
       kind == LabGraph::kSpurious ? NoiseSpec::Uniform(-0.1, 0.1) : NoiseSpec::Uniform(-1.0, 1.0),
       false, {}},
  };
  g.edges = {{"XC", "Y"}};
  g.mechanisms["Y"] = scg::LinearGaussian{{0.8}, 0.0, 0.0};
  if (kind == LabGraph::kSpurious) {
    g.edges.emplace_back("Y", "XA");
    g.mechanisms["XA"] = scg::LinearGaussian{{1.0}, 0.0, 0.0};
  }
  return g;
}

double PointLoss(const ErmProblem& problem, std::span<const double> theta,
                 std::span<const double> x, double label) {
  return LossOf(problem.loss, label, Dot(theta, x));
}

double RegularizedPointLoss(const ErmProblem& problem, std::span<const double> theta,
                            std::span<const double> x, double label) {
  return PointLoss(problem, theta, x, label) + problem.lambda * Dot(theta, theta);
}

ErmSolution SolveErmMatrix(const ErmProblem& p, const std::vector<double>& x,
                           const std::vector<double>& y, size_t rows, FitMode mode) {
  const size_t d = p.features.size();
  if (rows == 0) throw Error(ErrorCode::kInvalidArgument, "empty training set");
  if (x.size() != rows * d || y.size() != rows) {
    throw Error(ErrorCode::kShapeMismatch, "design does not match problem features");
  }
  const std::vector<size_t> active = ActiveSet(p, mode);
  const auto k = static_cast<Eigen::Index>(active.size());
  ErmSolution sol;
  sol.mode = mode;
  sol.theta.assign(d, 0.0);
  Eigen::VectorXd g;
  Eigen::MatrixXd h;

  if (p.loss == Loss::kSquared) {
    // (X^T X + n lambda I) theta = X^T y.
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    for (size_t r = 0; r < rows; ++r) {
      for (Eigen::Index i = 0; i < k; ++i) {
        const double xi = x[r * d + active[static_cast<size_t>(i)]];
        v[i] += xi * y[r];
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) += xi * x[r * d + active[static_cast<size_t>(j)]];
      }
    }
    m += static_cast<double>(rows) * p.lambda * Eigen::MatrixXd::Identity(k, k);
    const Eigen::VectorXd t = m.ldlt().solve(v);
    for (Eigen::Index i = 0; i < k; ++i) sol.theta[active[static_cast<size_t>(i)]] = t[i];
    sol.training_loss = ObjectiveAndGradient(p, x, y, rows, active, sol.theta, &g, nullptr);
  } else {
    double obj = ObjectiveAndGradient(p, x, y, rows, active, sol.theta, &g, &h);
    for (int it = 0; it < 100 && g.norm() > 1e-12; ++it) {
      const Eigen::VectorXd step = h.ldlt().solve(g);
      const std::vector<double> base = sol.theta;
      double t = 1.0;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        for (Eigen::Index i = 0; i < k; ++i) {
          sol.theta[active[static_cast<size_t>(i)]] = base[active[static_cast<size_t>(i)]] - t * step[i];
        }
        Eigen::VectorXd g2;
        const double next = ObjectiveAndGradient(p, x, y, rows, active, sol.theta, &g2, nullptr);
        if (next <= obj + 1e-4 * t * g.dot(-step) || ls == 39) break;
      }
      obj = ObjectiveAndGradient(p, x, y, rows, active, sol.theta, &g, &h);
    }
    sol.training_loss = obj;
  }
  sol.grad_norm = g.norm();
  if (!(sol.grad_norm <= kGradTol)) {
    throw Error(ErrorCode::kNonConvergence,
                "optimality gradient norm " + std::to_string(sol.grad_norm) + " above 1e-8");
  }
  return sol;
}

ErmSolution SolveErm(const ErmProblem& problem, const scg::Dataset& data, FitMode mode) {
  std::vector<double> x, y;
  ExtractDesign(problem, data, &x, &y);
  return SolveErmMatrix(problem, x, y, data.rows, mode);
}

AdversaryPoint LmAdversary(const ErmProblem& p, const ErmSolution& solution, Rng& rng) {
  const size_t d = p.features.size();
  AdversaryPoint best;
  best.loss = -kInf;
  auto consider = [&](const std::vector<double>& x, double eta) {
    const double target = p.TargetOf(x, eta);
    const double label = p.LabelOf(target);
    const double loss = PointLoss(p, solution.theta, x, label);
    if (loss > best.loss) best = {x, eta, target, label, loss};
  };
  ForEachVertex(p, rng, consider);

  // Projected gradient ascent over (x, eta); the label is held fixed within
  // a step and a step is kept only if the loss rises.
  std::vector<double> dir_w(d, 0.0);  // d target / d x
  for (size_t j = 0; j < p.causal.size(); ++j) dir_w[p.causal[j]] = p.dgp_weights[j];
  auto clamp = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };
  for (int start = 0; start < 4; ++start) {
    std::vector<double> x(d);
    double eta;
    if (start == 0) {
      x = best.x;
      eta = best.eta;
    } else {
      for (size_t j = 0; j < d; ++j) x[j] = p.lo[j] + Uniform01(rng) * (p.hi[j] - p.lo[j]);
      eta = p.eta_lo + Uniform01(rng) * (p.eta_hi - p.eta_lo);
    }
    double step = 0.5;
    double cur = PointLoss(p, solution.theta, x, p.LabelOf(p.TargetOf(x, eta)));
    for (int it = 0; it < 60 && step > 1e-6; ++it) {
      const double label = p.LabelOf(p.TargetOf(x, eta));
      const double pred = Dot(solution.theta, x);
      const double slope = LossSlope(p.loss, label, pred);
      // Squared loss also moves with the target; logistic labels do not.
      const double target_slope = p.loss == Loss::kSquared ? 2.0 * (label - pred) : 0.0;
      std::vector<double> nx(d);
      for (size_t j = 0; j < d; ++j) {
        const double gj = slope * solution.theta[j] + target_slope * dir_w[j];
        nx[j] = clamp(x[j] + step * gj, p.lo[j], p.hi[j]);
      }
      const double neta = clamp(eta + step * target_slope, p.eta_lo, p.eta_hi);
      const double next = PointLoss(p, solution.theta, nx, p.LabelOf(p.TargetOf(nx, neta)));
      if (next > cur) {
        x = nx;
        eta = neta;
        cur = next;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    consider(x, eta);
  }
  return best;
}

SensitivityEstimate MeasureSensitivity(const ErmProblem& p, const scg::Dataset& data,
                                       FitMode mode, size_t trials, Rng& rng) {
  if (trials == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one probe");
  const size_t d = p.features.size();
  std::vector<double> x, y;
  ExtractDesign(p, data, &x, &y);
  const size_t n = data.rows;
  const ErmSolution base = SolveErmMatrix(p, x, y, n, mode);

  SensitivityEstimate est;
  est.mode = mode;
  est.trials = trials;
  est.max_theta_norm = Norm2(base.theta);
  x.resize((n + 1) * d);
  y.resize(n + 1);
  for (size_t t = 0; t < trials; ++t) {
    AdversaryPoint probe;
    if (t == 0) {
      probe = LmAdversary(p, base, rng);
    } else {
      probe.x.resize(d);
      const bool vertex = t % 2 == 1;
      for (size_t j = 0; j < d; ++j) {
        probe.x[j] = vertex ? (rng() & 1 ? p.hi[j] : p.lo[j])
                            : p.lo[j] + Uniform01(rng) * (p.hi[j] - p.lo[j]);
      }
      probe.eta = vertex ? (rng() & 1 ? p.eta_hi : p.eta_lo)
                         : p.eta_lo + Uniform01(rng) * (p.eta_hi - p.eta_lo);
      probe.target = p.TargetOf(probe.x, probe.eta);
      probe.label = p.LabelOf(probe.target);
      probe.loss = PointLoss(p, base.theta, probe.x, probe.label);
    }
    std::copy(probe.x.begin(), probe.x.end(), x.begin() + static_cast<std::ptrdiff_t>(n * d));
    y[n] = probe.label;
    const ErmSolution next = SolveErmMatrix(p, x, y, n + 1, mode);
    double diff = 0.0;
    for (size_t j = 0; j < d; ++j) diff += (base.theta[j] - next.theta[j]) * (base.theta[j] - next.theta[j]);
    diff = std::sqrt(diff);
    est.max_theta_norm = std::max(est.max_theta_norm, Norm2(next.theta));
    const double gap = RegularizedPointLoss(p, base.theta, probe.x, probe.label) -
                       RegularizedPointLoss(p, next.theta, probe.x, probe.label);
    const double bound = std::sqrt(std::max(0.0, 2.0 / (p.lambda * static_cast<double>(n + 1)) * gap));
    if (diff > 0) {
      est.max_bound_ratio = std::max(est.max_bound_ratio, bound > 0 ? diff / bound : kInf);
    }
    if (diff > est.max_change || t == 0) {
      est.max_change = std::max(est.max_change, diff);
      est.argmax = probe;
    }
    est.running_max.push_back(est.max_change);
  }
  return est;
}

double LipschitzBound(const ErmProblem& p, double theta_max) {
  double x2 = 0.0;
  for (size_t j = 0; j < p.features.size(); ++j) {
    const double m = std::max(std::fabs(p.lo[j]), std::fabs(p.hi[j]));
    x2 += m * m;
  }
  const double x_max = std::sqrt(x2);
  const double reg = 2.0 * p.lambda * theta_max;
  if (p.loss == Loss::kLogistic) return x_max + reg;
  const double y_max = std::max(std::fabs(p.target_lo), std::fabs(p.target_hi));
  const double b = y_max + theta_max * x_max;
  return 2.0 * b * x_max + reg;
}

bool ContributionConditionHolds(const ErmProblem& p, const ErmSolution& causal,
                      const ErmSolution& associational, size_t max_grid) {
  // The causal side of a point is (x_c, eta): together they fix the target.
  std::vector<Interval> c_axes, a_axes;
  for (size_t j : p.causal) c_axes.push_back({p.lo[j], p.hi[j]});
  c_axes.push_back({p.eta_lo, p.eta_hi});
  for (size_t j : p.associational) a_axes.push_back({p.lo[j], p.hi[j]});
  const auto c_grid = Grid(c_axes, max_grid);
  const auto a_grid = Grid(a_axes, max_grid);

  const std::vector<double>& tc = causal.theta;
  const std::vector<double>& ta = associational.theta;
  const double reg_c = p.lambda * Dot(tc, tc);
  const double reg_a = p.lambda * Dot(ta, ta);

  // Predictions split into causal and associational parts.
  struct CPoint {
    double label, pred_c, pred_a_c;
  };
  std::vector<CPoint> cp;
  cp.reserve(c_grid.size());
  std::vector<double> x(p.features.size(), 0.0);
  for (const auto& g : c_grid) {
    std::fill(x.begin(), x.end(), 0.0);
    for (size_t i = 0; i < p.causal.size(); ++i) x[p.causal[i]] = g[i];
    const double label = p.LabelOf(p.TargetOf(x, g.back()));
    cp.push_back({label, Dot(tc, x), Dot(ta, x)});
  }
  std::vector<double> s;  // theta_a . x_a per associational grid point
  s.reserve(a_grid.size());
  for (const auto& g : a_grid) {
    double v = 0.0;
    for (size_t i = 0; i < p.associational.size(); ++i) v += ta[p.associational[i]] * g[i];
    s.push_back(v);
  }
  const auto [s_min_it, s_max_it] = std::minmax_element(s.begin(), s.end());
  const double s_min = *s_min_it, s_max = *s_max_it;

  // Both losses are convex in the prediction, so the inner max over x_a'' is
  // attained at an extreme of s.
  std::vector<double> worst_a(cp.size());
  for (size_t i = 0; i < cp.size(); ++i) {
    worst_a[i] = std::max(LossOf(p.loss, cp[i].label, cp[i].pred_a_c + s_min),
                          LossOf(p.loss, cp[i].label, cp[i].pred_a_c + s_max)) + reg_a;
  }
  for (double sa : s) {
    double lhs = -kInf, rhs = kInf;
    for (size_t i = 0; i < cp.size(); ++i) {
      const double la = LossOf(p.loss, cp[i].label, cp[i].pred_a_c + sa) + reg_a;
      const double lc = LossOf(p.loss, cp[i].label, cp[i].pred_c) + reg_c;
      lhs = std::max(lhs, lc - la);
      rhs = std::min(rhs, worst_a[i] - la);
    }
    if (lhs <= rhs) return true;
  }
  return false;
}

TrialRecord OrderingTrial(const scg::CausalGraph& graph, const TrialConfig& cfg, uint64_t seed) {
  if (!(cfg.laplace_scale > 0)) throw Error(ErrorCode::kInvalidArgument, "laplace scale must be > 0");
  const ErmProblem p = ProblemFromGraph(graph, cfg.target, cfg.loss, cfg.lambda);
  Rng data_rng(DeriveSeed(seed, "theory.data"));
  const scg::Dataset data = scg::SampleDataset(graph, cfg.n, data_rng);
  const ErmSolution sc = SolveErm(p, data, FitMode::kCausal);
  const ErmSolution sa = SolveErm(p, data, FitMode::kAssociational);

  Rng rng_c(DeriveSeed(seed, "theory.probe.causal"));
  Rng rng_a(DeriveSeed(seed, "theory.probe.associational"));
  const SensitivityEstimate ec = MeasureSensitivity(p, data, FitMode::kCausal, cfg.probes, rng_c);
  const SensitivityEstimate ea =
      MeasureSensitivity(p, data, FitMode::kAssociational, cfg.probes, rng_a);

  TrialRecord r;
  r.seed = seed;
  r.delta_c = ec.max_change;
  r.delta_a = ea.max_change;
  r.delta1_c = std::sqrt(static_cast<double>(p.causal.size())) * r.delta_c;
  r.delta1_a = std::sqrt(static_cast<double>(p.features.size())) * r.delta_a;
  r.epsilon_c = r.delta_c / cfg.laplace_scale;
  r.epsilon_a = r.delta_a / cfg.laplace_scale;
  r.rho = LipschitzBound(p, std::max(ec.max_theta_norm, ea.max_theta_norm));
  r.n_condition_holds = static_cast<double>(cfg.n + 1) > 2.0 * r.rho / cfg.lambda;
  r.contribution_condition_holds = ContributionConditionHolds(p, sc, sa);
  Rng adv_rng(DeriveSeed(seed, "theory.adversary"));
  r.adversary_loss_c = LmAdversary(p, sc, adv_rng).loss;
  r.adversary_loss_a = LmAdversary(p, sa, adv_rng).loss;
  r.bound_ratio_c = ec.max_bound_ratio;
  r.bound_ratio_a = ea.max_bound_ratio;
  r.train_loss_c = sc.training_loss;
  r.train_loss_a = sa.training_loss;
  Rng noise_rng(DeriveSeed(seed, "theory.release"));
  for (double t : sc.theta) r.released_c.push_back(t + dp::LaplaceSample(cfg.laplace_scale, noise_rng));
  for (double t : sa.theta) r.released_a.push_back(t + dp::LaplaceSample(cfg.laplace_scale, noise_rng));
  return r;
}

TheorySummary RunOrderingTrials(const scg::CausalGraph& graph, const TrialConfig& cfg,
                               size_t trials, uint64_t seed, size_t workers) {
  TheorySummary s;
  s.trials.resize(trials);
  ParallelFor(trials, workers == 0 ? DefaultWorkers() : workers, [&](size_t i) {
    s.trials[i] = OrderingTrial(graph, cfg, DeriveSeed(seed, "theory.trial", i));
  });
  for (const TrialRecord& r : s.trials) {
    if (r.Preconditions()) {
      ++s.with_preconditions;
      s.holds_with_preconditions += r.CausalNotWorse();
    } else {
      ++s.without_preconditions;
      s.holds_without_preconditions += r.CausalNotWorse();
    }
  }
  return s;
}

nlohmann::json TheorySummary::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const TrialRecord& r : trials) {
    rows.push_back({{"seed", r.seed},
                    {"delta_c", r.delta_c},
                    {"delta_a", r.delta_a},
                    {"delta1_c", r.delta1_c},
                    {"delta1_a", r.delta1_a},
                    {"epsilon_c", r.epsilon_c},
                    {"epsilon_a", r.epsilon_a},
                    {"rho", r.rho},
                    {"contribution_condition_holds", r.contribution_condition_holds},
                    {"n_condition_holds", r.n_condition_holds},
                    {"adversary_loss_c", r.adversary_loss_c},
                    {"adversary_loss_a", r.adversary_loss_a},
                    {"bound_ratio_c", r.bound_ratio_c},
                    {"bound_ratio_a", r.bound_ratio_a}});
  }
  auto frac = [](size_t a, size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  return {{"trials", rows},
          {"with_preconditions", {{"count", with_preconditions},
                                  {"causal_not_worse", holds_with_preconditions},
                                  {"fraction", frac(holds_with_preconditions, with_preconditions)}}},
          {"without_preconditions",
           {{"count", without_preconditions},
            {"causal_not_worse", holds_without_preconditions},
            {"fraction", frac(holds_without_preconditions, without_preconditions)}}}};
}

std::string TheorySummary::Csv() const {
  std::ostringstream out;
  out << "seed,delta_c,delta_a,epsilon_c,epsilon_a,rho,contribution_condition,n_condition\n";
  char buf[256];
  for (const TrialRecord& r : trials) {
    std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%d\n",
                  static_cast<unsigned long long>(r.seed), r.delta_c, r.delta_a, r.epsilon_c,
                  r.epsilon_a, r.rho, r.contribution_condition_holds ? 1 : 0, r.n_condition_holds ? 1 : 0);
    out << buf;
  }
  return out.str();
}

}  // namespace cds::theory
