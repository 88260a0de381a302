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

#include "cds/clf.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cds/common.h"

namespace cds::clf {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[noreturn]] void Fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

double LogSigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Appends a constant-one column.
RowMatrix WithBias(const nd::Matrix& x) {
  RowMatrix m(x.rows(), x.cols() + 1);
  for (size_t r = 0; r < x.rows(); ++r) {
    for (size_t c = 0; c < x.cols(); ++c) m(r, c) = x(r, c);
    m(r, x.cols()) = 1.0;
  }
  return m;
}

// Minimizes mean log-loss + l2/2 ||w||^2 (bias lightly penalized) by damped
// Newton iterations.
std::vector<double> FitLogistic(const RowMatrix& x, const std::vector<double>& t, double l2,
                                size_t max_iters) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::VectorXd reg = Eigen::VectorXd::Constant(d, l2);
  reg(d - 1) = 1e-10;
  Eigen::Map<const Eigen::VectorXd> target(t.data(), n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  auto objective = [&](const Eigen::VectorXd& wv) {
    const Eigen::VectorXd m = x * wv;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      loss -= target(i) * LogSigmoid(m(i)) + (1.0 - target(i)) * LogSigmoid(-m(i));
    }
    return loss / n + 0.5 * (reg.array() * wv.array().square()).sum();
  };
  double f = objective(w);
  for (size_t it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd m = x * w;
    Eigen::VectorXd p(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = Sigmoid(m(i));
      s(i) = p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd grad =
        x.transpose() * (p - target) / static_cast<double>(n) + (reg.array() * w.array()).matrix();
    if (grad.norm() < 1e-10) break;
    Eigen::MatrixXd h = x.transpose() * s.asDiagonal() * x / static_cast<double>(n);
    h.diagonal() += reg;
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    double a = 1.0;
    Eigen::VectorXd cand = w - step;
    double fc = objective(cand);
    while (fc > f - 1e-4 * a * grad.dot(step) && a > 1e-10) {
      a *= 0.5;
      cand = w - a * step;
      fc = objective(cand);
    }
    if (!(fc <= f)) break;
    const double change = f - fc;
    w = cand;
    f = fc;
    if (change < 1e-16) break;
  }
  return std::vector<double>(w.data(), w.data() + d);
}

// Dual coordinate descent for the hinge-loss SVM with objective
// l2/2 ||w||^2 + mean hinge, i.e. box constraint 1 / (l2 n).
std::vector<double> FitLinearSvm(const RowMatrix& x, const std::vector<double>& t, double l2,
                                 size_t max_epochs, Rng& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double upper = 1.0 / (l2 * static_cast<double>(n));
  std::vector<double> y(n), alpha(n, 0.0), qd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = t[i] > 0.5 ? 1.0 : -1.0;
    qd[i] = x.row(i).squaredNorm();
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t epoch = 0; epoch < max_epochs; ++epoch) {
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double pg_max = -INFINITY, pg_min = INFINITY;
    for (size_t k = 0; k < static_cast<size_t>(n); ++k) {
      const size_t i = order[k];
      const double g = y[i] * x.row(i).dot(w) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] == upper) {
        pg = std::max(g, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0.0 && qd[i] > 0) {
        const double old = alpha[i];
        alpha[i] = std::clamp(alpha[i] - g / qd[i], 0.0, upper);
        w += ((alpha[i] - old) * y[i]) * x.row(i).transpose();
      }
    }
    if (pg_max - pg_min < 1e-10) break;
  }
  return std::vector<double>(w.data(), w.data() + d);
}

struct SmoResult {
  std::vector<double> coef;  // alpha_i * y_i
  double bias = 0.0;
};

// SMO with second-order working-set selection on a precomputed kernel.
SmoResult FitKernelSvm(const std::vector<double>& kernel, size_t n, const std::vector<double>& t,
                       double c, double tol, size_t max_iters) {
  auto k = [&](size_t i, size_t j) { return kernel[i * n + j]; };
  std::vector<double> y(n), alpha(n, 0.0), grad(n, -1.0);
  for (size_t i = 0; i < n; ++i) y[i] = t[i] > 0.5 ? 1.0 : -1.0;
  constexpr double kTau = 1e-12;
  for (size_t iter = 0; iter < max_iters; ++iter) {
    double gmax = -INFINITY;
    long gi = -1;
    for (size_t s = 0; s < n; ++s) {
      if (y[s] > 0) {
        if (alpha[s] < c && -grad[s] >= gmax) {
          gmax = -grad[s];
          gi = static_cast<long>(s);
        }
      } else if (alpha[s] > 0 && grad[s] >= gmax) {
        gmax = grad[s];
        gi = static_cast<long>(s);
      }
    }
    double gmax2 = -INFINITY;
    long gj = -1;
    double best = INFINITY;
    for (size_t s = 0; s < n && gi >= 0; ++s) {
      const size_t i = static_cast<size_t>(gi);
      double diff = 0.0;
      if (y[s] > 0) {
        if (!(alpha[s] > 0)) continue;
        diff = gmax + grad[s];
        gmax2 = std::max(gmax2, grad[s]);
      } else {
        if (!(alpha[s] < c)) continue;
        diff = gmax - grad[s];
        gmax2 = std::max(gmax2, -grad[s]);
      }
      if (diff > 0) {
        double quad = k(i, i) + k(s, s) - 2.0 * k(i, s);
        if (quad <= 0) quad = kTau;
        const double obj = -(diff * diff) / quad;
        if (obj <= best) {
          best = obj;
          gj = static_cast<long>(s);
        }
      }
    }
    if (gi < 0 || gj < 0 || gmax + gmax2 < tol) break;

    const size_t i = static_cast<size_t>(gi);
    const size_t j = static_cast<size_t>(gj);
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (size_t s = 0; s < n; ++s) {
      grad[s] += y[s] * (y[i] * k(s, i) * di + y[j] * k(s, j) * dj);
    }
  }

  double ub = INFINITY, lb = -INFINITY, sum_free = 0.0;
  size_t free = 0;
  for (size_t i = 0; i < n; ++i) {
    const double yg = y[i] * grad[i];
    if (alpha[i] >= c) {
      if (y[i] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[i] <= 0) {
      if (y[i] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
  SmoResult res;
  res.coef.resize(n);
  for (size_t i = 0; i < n; ++i) res.coef[i] = alpha[i] * y[i];
  res.bias = -rho;
  return res;
}

double Gini(const std::vector<size_t>& counts, size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

int Majority(const std::vector<size_t>& counts) {
  size_t best = 0;
  for (size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<int>(best);
}

class TreeBuilder {
 public:
  TreeBuilder(const nd::Matrix& x, const std::vector<int>& y, size_t classes, const Hyper& hp,
              size_t max_features, Rng& rng)
      : x_(x), y_(y), classes_(classes), hp_(hp), max_features_(max_features), rng_(rng) {}

  Tree Build(std::vector<size_t> rows) {
    Tree tree;
    Grow(tree, rows, 0);
    return tree;
  }

 private:
  int Grow(Tree& tree, std::vector<size_t>& rows, size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::vector<size_t> counts(classes_, 0);
    for (size_t r : rows) ++counts[y_[r]];
    tree.nodes[id].label = Majority(counts);
    const size_t nonzero = std::count_if(counts.begin(), counts.end(), [](size_t c) { return c; });
    if (nonzero <= 1 || depth >= hp_.max_depth || rows.size() < 2) return id;

    const double parent = Gini(counts, rows.size());
    std::vector<size_t> features(x_.cols());
    std::iota(features.begin(), features.end(), size_t{0});
    const size_t m = std::min(max_features_, features.size());
    for (size_t i = 0; i < m; ++i) {
      const size_t j = i + static_cast<size_t>(rng_() % (features.size() - i));
      std::swap(features[i], features[j]);
    }
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> vals(rows.size());
    for (size_t fi = 0; fi < m; ++fi) {
      const size_t f = features[fi];
      for (size_t i = 0; i < rows.size(); ++i) vals[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(vals.begin(), vals.end());
      std::vector<size_t> left(classes_, 0), right = counts;
      for (size_t i = 0; i + 1 < vals.size(); ++i) {
        ++left[vals[i].second];
        --right[vals[i].second];
        if (vals[i].first == vals[i + 1].first) continue;
        const size_t nl = i + 1, nr = vals.size() - nl;
        const double impurity = (static_cast<double>(nl) * Gini(left, nl) +
                                 static_cast<double>(nr) * Gini(right, nr)) /
                                static_cast<double>(vals.size());
        const double gain = parent - impurity;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<size_t> lrows, rrows;
    for (size_t r : rows) {
      (x_(r, best_feature) <= best_threshold ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    const int l = Grow(tree, lrows, depth + 1);
    const int r = Grow(tree, rrows, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  const nd::Matrix& x_;
  const std::vector<int>& y_;
  size_t classes_;
  const Hyper& hp_;
  size_t max_features_;
  Rng& rng_;
};

}  // namespace

std::string KindName(Kind kind) {
  switch (kind) {
    case Kind::kLogistic: return "logistic";
    case Kind::kLinearSvm: return "linear";
    case Kind::kKernelSvm: return "kernel";
    case Kind::kRandomForest: return "rf";
    case Kind::kKnn: return "knn";
  }
  return "unknown";
}

Kind ParseKind(const std::string& name) {
  if (name == "logistic") return Kind::kLogistic;
  if (name == "linear" || name == "linear-svm") return Kind::kLinearSvm;
  if (name == "kernel" || name == "kernel-svm" || name == "svc") return Kind::kKernelSvm;
  if (name == "rf" || name == "random-forest") return Kind::kRandomForest;
  if (name == "knn") return Kind::kKnn;
  Fail(ErrorCode::kInvalidArgument, "unknown classifier '" + name + "'");
}

const std::vector<Kind>& AllKinds() {
  static const std::vector<Kind> kinds = {Kind::kLinearSvm, Kind::kKernelSvm, Kind::kLogistic,
                                          Kind::kRandomForest, Kind::kKnn};
  return kinds;
}

int Tree::Predict(std::span<const double> x) const {
  int id = 0;
  while (nodes[id].feature >= 0) {
    id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
  }
  return nodes[id].label;
}

std::vector<double> Classifier::Standardize(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  if (mean_.empty()) return out;
  for (size_t c = 0; c < out.size(); ++c) out[c] = (out[c] - mean_[c]) / scale_[c];
  return out;
}

Classifier Classifier::Fit(Kind kind, const nd::Matrix& x, std::span<const int> y,
                           const Hyper& hp, uint64_t seed) {
  if (x.rows() != y.size()) Fail(ErrorCode::kShapeMismatch, "feature/label row counts differ");
  if (y.empty()) Fail(ErrorCode::kInvalidArgument, "cannot fit on zero rows");
  Classifier clf;
  clf.kind_ = kind;
  clf.hp_ = hp;
  clf.num_features_ = x.cols();
  for (int v : y) {
    if (v < 0) Fail(ErrorCode::kInvalidArgument, "labels must be non-negative");
  }
  clf.classes_.assign(y.begin(), y.end());
  std::sort(clf.classes_.begin(), clf.classes_.end());
  clf.classes_.erase(std::unique(clf.classes_.begin(), clf.classes_.end()), clf.classes_.end());
  if (clf.classes_.size() < 2) {
    clf.degenerate_ = true;
    return clf;
  }
  std::vector<int> yi(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    yi[i] = static_cast<int>(std::lower_bound(clf.classes_.begin(), clf.classes_.end(), y[i]) -
                             clf.classes_.begin());
  }
  const size_t K = clf.classes_.size();
  const size_t n = x.rows(), d = x.cols();
  Rng rng(seed);

  nd::Matrix xs = x;
  if (kind != Kind::kRandomForest) {
    clf.mean_.assign(d, 0.0);
    clf.scale_.assign(d, 1.0);
    for (size_t c = 0; c < d; ++c) {
      double m = 0.0;
      for (size_t r = 0; r < n; ++r) m += x(r, c);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (size_t r = 0; r < n; ++r) v += (x(r, c) - m) * (x(r, c) - m);
      v /= static_cast<double>(n);
      clf.mean_[c] = m;
      clf.scale_[c] = v > 1e-24 ? std::sqrt(v) : 1.0;
      for (size_t r = 0; r < n; ++r) xs(r, c) = (x(r, c) - m) / clf.scale_[c];
    }
  }
  const size_t problems = K == 2 ? 1 : K;
  auto targets = [&](size_t p) {
    const int positive = K == 2 ? 1 : static_cast<int>(p);
    std::vector<double> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = yi[i] == positive ? 1.0 : 0.0;
    return t;
  };

  switch (kind) {
    case Kind::kLogistic:
    case Kind::kLinearSvm: {
      const RowMatrix xb = WithBias(xs);
      for (size_t p = 0; p < problems; ++p) {
        const auto t = targets(p);
        clf.weights_.push_back(kind == Kind::kLogistic
                                   ? FitLogistic(xb, t, hp.l2, hp.max_iters)
                                   : FitLinearSvm(xb, t, hp.l2, hp.max_iters, rng));
      }
      break;
    }
    case Kind::kKernelSvm: {
      clf.gamma_ = hp.gamma > 0 ? hp.gamma : 1.0 / static_cast<double>(std::max<size_t>(d, 1));
      std::vector<double> kernel(n * n);
      for (size_t i = 0; i < n; ++i) {
        kernel[i * n + i] = 1.0;
        for (size_t j = 0; j < i; ++j) {
          double s = 0.0;
          for (size_t c = 0; c < d; ++c) {
            const double diff = xs(i, c) - xs(j, c);
            s += diff * diff;
          }
          kernel[i * n + j] = kernel[j * n + i] = std::exp(-clf.gamma_ * s);
        }
      }
      clf.support_ = xs;
      for (size_t p = 0; p < problems; ++p) {
        const SmoResult r =
            FitKernelSvm(kernel, n, targets(p), hp.svm_c, hp.smo_tol, hp.smo_max_iters);
        clf.dual_coef_.push_back(r.coef);
        clf.bias_.push_back(r.bias);
      }
      break;
    }
    case Kind::kRandomForest: {
      const size_t m = hp.max_features > 0
                           ? hp.max_features
                           : std::max<size_t>(1, static_cast<size_t>(std::sqrt(static_cast<double>(d))));
      clf.trees_.resize(hp.trees);
      ParallelFor(hp.trees, DefaultWorkers(), [&](size_t t) {
        Rng tree_rng(DeriveSeed(seed, "clf.rf.tree", t));
        std::vector<size_t> rows(n);
        if (hp.bootstrap) {
          for (size_t i = 0; i < n; ++i) rows[i] = static_cast<size_t>(tree_rng() % n);
        } else {
          std::iota(rows.begin(), rows.end(), size_t{0});
        }
        TreeBuilder builder(x, yi, K, hp, m, tree_rng);
        clf.trees_[t] = builder.Build(std::move(rows));
      });
      break;
    }
    case Kind::kKnn:
      clf.train_x_ = xs;
      clf.train_y_ = yi;
      break;
  }
  return clf;
}

std::vector<double> Classifier::DecisionRow(std::span<const double> x) const {
  const std::vector<double> xs = Standardize(x);
  std::vector<double> out;
  if (kind_ == Kind::kLogistic || kind_ == Kind::kLinearSvm) {
    for (const auto& w : weights_) {
      double s = w.back();
      for (size_t c = 0; c < xs.size(); ++c) s += w[c] * xs[c];
      out.push_back(s);
    }
  } else if (kind_ == Kind::kKernelSvm) {
    const size_t n = support_.rows();
    std::vector<double> kv(n);
    for (size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (size_t c = 0; c < xs.size(); ++c) {
        const double diff = support_(i, c) - xs[c];
        s += diff * diff;
      }
      kv[i] = std::exp(-gamma_ * s);
    }
    for (size_t p = 0; p < dual_coef_.size(); ++p) {
      double s = bias_[p];
      for (size_t i = 0; i < n; ++i) s += dual_coef_[p][i] * kv[i];
      out.push_back(s);
    }
  }
  return out;
}

std::vector<double> Classifier::LinearWeights(size_t c) const {
  if (c >= weights_.size()) Fail(ErrorCode::kInvalidArgument, "no linear weights for that index");
  return weights_[c];
}

int Classifier::PredictRow(std::span<const double> x) const {
  if (degenerate_) return classes_.empty() ? 0 : classes_[0];
  const size_t K = classes_.size();
  switch (kind_) {
    case Kind::kLogistic:
    case Kind::kLinearSvm:
    case Kind::kKernelSvm: {
      const std::vector<double> dv = DecisionRow(x);
      if (K == 2) return classes_[dv[0] > 0 ? 1 : 0];
      size_t best = 0;
      for (size_t p = 1; p < dv.size(); ++p) {
        if (dv[p] > dv[best]) best = p;
      }
      return classes_[best];
    }
    case Kind::kRandomForest: {
      std::vector<size_t> votes(K, 0);
      for (const Tree& t : trees_) ++votes[t.Predict(x)];
      return classes_[Majority(votes)];
    }
    case Kind::kKnn: {
      const std::vector<double> xs = Standardize(x);
      const size_t n = train_x_.rows();
      std::vector<std::pair<double, int>> dist(n);
      for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (size_t c = 0; c < xs.size(); ++c) {
          const double diff = train_x_(i, c) - xs[c];
          s += diff * diff;
        }
        dist[i] = {s, train_y_[i]};
      }
      const size_t k = std::min(hp_.knn_k, n);
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      std::vector<size_t> votes(K, 0);
      for (size_t i = 0; i < k; ++i) ++votes[dist[i].second];
      return classes_[Majority(votes)];
    }
  }
  return classes_[0];
}

std::vector<int> Classifier::Predict(const nd::Matrix& x) const {
  if (x.rows() > 0 && x.cols() != num_features_) {
    Fail(ErrorCode::kShapeMismatch, "expected " + std::to_string(num_features_) + " features, got " +
                                        std::to_string(x.cols()));
  }
  std::vector<int> out(x.rows());
  for (size_t r = 0; r < x.rows(); ++r) {
    out[r] = PredictRow(std::span<const double>(x.data().data() + r * x.cols(), x.cols()));
  }
  return out;
}

double EvalReport::pa() const {
  for (size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == 1) return recall[i];
  }
  return 0.0;
}

double EvalReport::na() const {
  for (size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == 0) return recall[i];
  }
  return 0.0;
}

double Round2(double v) { return std::round(v * 100.0) / 100.0; }

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json j;
  j["accuracy"] = Round2(accuracy);
  j["PA"] = Round2(pa());
  j["NA"] = Round2(na());
  j["n"] = n;
  return j;
}

EvalReport Score(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) Fail(ErrorCode::kShapeMismatch, "label counts differ");
  EvalReport r;
  r.n = truth.size();
  r.classes.assign(truth.begin(), truth.end());
  std::sort(r.classes.begin(), r.classes.end());
  r.classes.erase(std::unique(r.classes.begin(), r.classes.end()), r.classes.end());
  r.support.assign(r.classes.size(), 0);
  std::vector<size_t> hits(r.classes.size(), 0);
  size_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const size_t c = std::lower_bound(r.classes.begin(), r.classes.end(), truth[i]) - r.classes.begin();
    ++r.support[c];
    if (truth[i] == predicted[i]) {
      ++hits[c];
      ++correct;
    }
  }
  r.accuracy = r.n ? 100.0 * static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
  for (size_t c = 0; c < r.classes.size(); ++c) {
    r.recall.push_back(100.0 * static_cast<double>(hits[c]) / static_cast<double>(r.support[c]));
  }
  return r;
}

EvalReport Evaluate(const Classifier& clf, const nd::Matrix& x, std::span<const int> y) {
  const std::vector<int> pred = clf.Predict(x);
  return Score(y, pred);
}

}  // namespace cds::clf
