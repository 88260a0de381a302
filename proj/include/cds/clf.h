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

// Small classifier zoo: logistic regression, linear and RBF-kernel SVMs,
// random forest and k-nearest neighbours. Labels are small non-negative
// integers; multi-class linear and kernel models use one-vs-rest.

#ifndef CDS_CLF_H_
#define CDS_CLF_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cds/nd.h"
#include "json.hpp"

namespace cds::clf {

enum class Kind { kLogistic, kLinearSvm, kKernelSvm, kRandomForest, kKnn };

std::string KindName(Kind kind);  // "logistic", "linear", "kernel", "rf", "knn"
Kind ParseKind(const std::string& name);
const std::vector<Kind>& AllKinds();

struct Hyper {
  double l2 = 1e-4;            // logistic / linear SVM penalty
  size_t max_iters = 200;      // Newton iterations / coordinate-descent epochs
  double svm_c = 1.0;          // kernel SVM soft margin
  double gamma = 0.0;          // RBF width; 0 means 1 / feature count
  double smo_tol = 1e-3;
  size_t smo_max_iters = 100000;
  size_t trees = 100;
  size_t max_depth = 16;
  size_t max_features = 0;     // 0 means floor(sqrt(feature count))
  bool bootstrap = true;
  size_t knn_k = 5;
};

struct Tree {
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
  };
  std::vector<Node> nodes;
  int Predict(std::span<const double> x) const;
};

class Classifier {
 public:
  // Single-class `y` yields a constant classifier with degenerate() set.
  static Classifier Fit(Kind kind, const nd::Matrix& x, std::span<const int> y,
                        const Hyper& hp, uint64_t seed);

  std::vector<int> Predict(const nd::Matrix& x) const;
  // One-vs-rest decision values of the linear and kernel models
  // (rows x classes); used for inspection in tests.
  std::vector<double> DecisionRow(std::span<const double> x) const;

  Kind kind() const { return kind_; }
  bool degenerate() const { return degenerate_; }
  const std::vector<int>& classes() const { return classes_; }
  size_t num_features() const { return num_features_; }
  // Linear models: weight vector of the one-vs-rest problem for class index
  // c, in standardized feature space, bias last.
  std::vector<double> LinearWeights(size_t c) const;
  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<double> Standardize(std::span<const double> x) const;
  int PredictRow(std::span<const double> x) const;

  Kind kind_ = Kind::kLogistic;
  Hyper hp_;
  bool degenerate_ = false;
  size_t num_features_ = 0;
  std::vector<int> classes_;
  std::vector<double> mean_, scale_;
  // Linear: one (features + 1) weight row per binary problem.
  std::vector<std::vector<double>> weights_;
  // Kernel SVM: support vectors (standardized) and per-problem dual
  // coefficients alpha_i * y_i plus bias.
  nd::Matrix support_;
  std::vector<std::vector<double>> dual_coef_;
  std::vector<double> bias_;
  double gamma_ = 0.0;
  std::vector<Tree> trees_;
  nd::Matrix train_x_;
  std::vector<int> train_y_;
};

struct EvalReport {
  double accuracy = 0.0;         // percent
  std::vector<int> classes;
  std::vector<double> recall;    // percent, per class
  std::vector<size_t> support;   // test rows per class
  size_t n = 0;

  // Recall on label 1 ("in") and label 0 ("out"); 0 when absent.
  double pa() const;
  double na() const;
  // Values rounded to two decimals.
  nlohmann::json ToJson() const;
};

EvalReport Score(std::span<const int> truth, std::span<const int> predicted);
EvalReport Evaluate(const Classifier& clf, const nd::Matrix& x, std::span<const int> y);

double Round2(double v);

}  // namespace cds::clf

#endif  // CDS_CLF_H_
