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

#include "cds/scg.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace cds::scg {
namespace {

using nlohmann::json;

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

int DrawIndex(std::span<const double> probs, Rng& rng) {
  const double u = Uniform01(rng);
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

[[noreturn]] void Fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Expressions

class Expression {
 public:
  enum class Op { kNumber, kVariable, kAdd, kSub, kMul, kDiv, kPow, kNeg,
                  kCall };

  Op op = Op::kNumber;
  double number = 0.0;
  std::string name;  // variable or function name
  std::vector<std::unique_ptr<Expression>> args;

  double Eval(const std::map<std::string, double, std::less<>>& b) const {
    switch (op) {
      case Op::kNumber: return number;
      case Op::kVariable: {
        auto it = b.find(name);
        if (it == b.end()) Fail(ErrorCode::kInvalidMechanism, "unbound symbol '" + name + "'");
        return it->second;
      }
      case Op::kAdd: return args[0]->Eval(b) + args[1]->Eval(b);
      case Op::kSub: return args[0]->Eval(b) - args[1]->Eval(b);
      case Op::kMul: return args[0]->Eval(b) * args[1]->Eval(b);
      case Op::kDiv: return args[0]->Eval(b) / args[1]->Eval(b);
      case Op::kPow: return std::pow(args[0]->Eval(b), args[1]->Eval(b));
      case Op::kNeg: return -args[0]->Eval(b);
      case Op::kCall: {
        const double x = args[0]->Eval(b);
        if (name == "exp") return std::exp(x);
        if (name == "log") return std::log(x);
        if (name == "sqrt") return std::sqrt(x);
        if (name == "abs") return std::fabs(x);
        if (name == "tanh") return std::tanh(x);
        if (name == "sin") return std::sin(x);
        if (name == "cos") return std::cos(x);
        if (name == "sigmoid") return Sigmoid(x);
        if (name == "relu") return x > 0 ? x : 0.0;
        Fail(ErrorCode::kInvalidMechanism, "unknown function '" + name + "'");
      }
    }
    return 0.0;
  }

  void CollectSymbols(std::set<std::string>& out) const {
    if (op == Op::kVariable) out.insert(name);
    for (const auto& a : args) a->CollectSymbols(out);
  }
};

namespace {

class Parser {
 public:
  explicit Parser(const std::string& src) : src_(src) {}

  std::unique_ptr<Expression> Parse() {
    auto e = ParseSum();
    SkipSpace();
    if (pos_ != src_.size()) Error("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void Error(const std::string& what) const {
    Fail(ErrorCode::kParseError,
         what + " at offset " + std::to_string(pos_) + " in '" + src_ + "'");
  }

  void SkipSpace() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool Accept(char c) {
    SkipSpace();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static std::unique_ptr<Expression> Binary(Expression::Op op,
                                            std::unique_ptr<Expression> l,
                                            std::unique_ptr<Expression> r) {
    auto e = std::make_unique<Expression>();
    e->op = op;
    e->args.push_back(std::move(l));
    e->args.push_back(std::move(r));
    return e;
  }

  std::unique_ptr<Expression> ParseSum() {
    auto lhs = ParseProduct();
    for (;;) {
      if (Accept('+')) {
        lhs = Binary(Expression::Op::kAdd, std::move(lhs), ParseProduct());
      } else if (Accept('-')) {
        lhs = Binary(Expression::Op::kSub, std::move(lhs), ParseProduct());
      } else {
        return lhs;
      }
    }
  }

  std::unique_ptr<Expression> ParseProduct() {
    auto lhs = ParseUnary();
    for (;;) {
      if (Accept('*')) {
        lhs = Binary(Expression::Op::kMul, std::move(lhs), ParseUnary());
      } else if (Accept('/')) {
        lhs = Binary(Expression::Op::kDiv, std::move(lhs), ParseUnary());
      } else {
        return lhs;
      }
    }
  }

  std::unique_ptr<Expression> ParseUnary() {
    if (Accept('-')) {
      auto e = std::make_unique<Expression>();
      e->op = Expression::Op::kNeg;
      e->args.push_back(ParseUnary());
      return e;
    }
    if (Accept('+')) return ParseUnary();
    auto base = ParsePrimary();
    if (Accept('^')) {
      return Binary(Expression::Op::kPow, std::move(base), ParseUnary());
    }
    return base;
  }

  std::unique_ptr<Expression> ParsePrimary() {
    SkipSpace();
    if (pos_ >= src_.size()) Error("unexpected end of input");
    const char c = src_[pos_];
    if (Accept('(')) {
      auto e = ParseSum();
      if (!Accept(')')) Error("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) Error("bad number");
      pos_ += static_cast<size_t>(end - begin);
      auto e = std::make_unique<Expression>();
      e->number = v;
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_' || src_[pos_] == '.')) {
        ++pos_;
      }
      auto e = std::make_unique<Expression>();
      e->name = src_.substr(start, pos_ - start);
      if (Accept('(')) {
        e->op = Expression::Op::kCall;
        e->args.push_back(ParseSum());
        if (!Accept(')')) Error("expected ')' after function argument");
      } else {
        e->op = Expression::Op::kVariable;
      }
      return e;
    }
    Error(std::string("unexpected character '") + c + "'");
  }

  const std::string& src_;
  size_t pos_ = 0;
};

}  // namespace

CustomExpression ParseExpression(const std::string& source) {
  Parser parser(source);
  return CustomExpression{source, std::shared_ptr<const Expression>(parser.Parse())};
}

double Evaluate(const CustomExpression& expr,
                const std::map<std::string, double, std::less<>>& bindings) {
  if (!expr.parsed) Fail(ErrorCode::kInvalidMechanism, "expression not parsed");
  return expr.parsed->Eval(bindings);
}

// ---------------------------------------------------------------------------
// Kinds and noise

std::string KindName(Kind kind) {
  switch (kind) {
    case Kind::kBinary: return "binary";
    case Kind::kCategorical: return "categorical";
    case Kind::kContinuous: return "continuous";
  }
  return "continuous";
}

Kind ParseKind(const std::string& name) {
  if (name == "binary") return Kind::kBinary;
  if (name == "categorical") return Kind::kCategorical;
  if (name == "continuous") return Kind::kContinuous;
  Fail(ErrorCode::kParseError, "unknown variable kind '" + name + "'");
}

double NoiseSpec::Draw(Rng& rng) const {
  switch (family) {
    case Family::kNone: return 0.0;
    case Family::kGaussian: return params[0] + params[1] * StandardNormal(rng);
    case Family::kUniform: return params[0] + (params[1] - params[0]) * Uniform01(rng);
    case Family::kBernoulli: return Uniform01(rng) < params[0] ? 1.0 : 0.0;
    case Family::kCategorical: return DrawIndex(params, rng);
    case Family::kConstant: return params[0];
  }
  return 0.0;
}

std::pair<double, double> NoiseSpec::Support() const {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  switch (family) {
    case Family::kNone: return {0.0, 0.0};
    case Family::kGaussian:
      return params[1] == 0.0 ? std::pair{params[0], params[0]} : std::pair{-kInf, kInf};
    case Family::kUniform: return {params[0], params[1]};
    case Family::kBernoulli: return {0.0, 1.0};
    case Family::kCategorical:
      return {0.0, static_cast<double>(params.size()) - 1.0};
    case Family::kConstant: return {params[0], params[0]};
  }
  return {0.0, 0.0};
}

namespace {

void ValidateNoise(const Variable& v) {
  const auto& p = v.noise.params;
  auto bad = [&](const std::string& why) {
    Fail(ErrorCode::kInvalidArgument, "variable '" + v.name + "' noise: " + why);
  };
  switch (v.noise.family) {
    case NoiseSpec::Family::kNone: break;
    case NoiseSpec::Family::kGaussian:
      if (p.size() != 2 || !(p[1] >= 0) || !std::isfinite(p[0]) || !std::isfinite(p[1]))
        bad("gaussian needs {mean, std >= 0}");
      break;
    case NoiseSpec::Family::kUniform:
      if (p.size() != 2 || !(p[0] <= p[1]) || !std::isfinite(p[0]) || !std::isfinite(p[1]))
        bad("uniform needs {low <= high}");
      break;
    case NoiseSpec::Family::kBernoulli:
      if (p.size() != 1 || !(p[0] >= 0 && p[0] <= 1)) bad("bernoulli needs p in [0,1]");
      break;
    case NoiseSpec::Family::kCategorical: {
      double s = 0;
      for (double x : p) {
        if (!(x >= 0)) bad("categorical probabilities must be >= 0");
        s += x;
      }
      if (p.empty() || std::fabs(s - 1.0) > 1e-9) bad("categorical probabilities must sum to 1");
      break;
    }
    case NoiseSpec::Family::kConstant:
      if (p.size() != 1 || !std::isfinite(p[0])) bad("constant needs a finite value");
      break;
  }
}

bool AllFinite(const std::vector<double>& xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

void ValidateMechanism(const CausalGraph& g, const Variable& child,
                       const std::vector<std::string>& parents,
                       const Mechanism& mech) {
  const size_t arity = parents.size();
  auto arity_error = [&](size_t got) {
    Fail(ErrorCode::kArityMismatch, "'" + child.name + "' has " +
                                        std::to_string(arity) + " parents but mechanism takes " +
                                        std::to_string(got));
  };
  auto invalid = [&](const std::string& why) {
    Fail(ErrorCode::kInvalidMechanism, "'" + child.name + "': " + why);
  };
  if (const auto* lin = std::get_if<LinearGaussian>(&mech)) {
    if (lin->weights.size() != arity) arity_error(lin->weights.size());
    if (!AllFinite(lin->weights) || !std::isfinite(lin->bias) ||
        !(lin->noise_std >= 0) || !std::isfinite(lin->noise_std)) {
      invalid("non-finite linear-gaussian parameters");
    }
    if (child.kind != Kind::kContinuous) invalid("linear-gaussian requires a continuous child");
  } else if (const auto* log = std::get_if<LogisticBernoulli>(&mech)) {
    if (log->weights.size() != arity) arity_error(log->weights.size());
    if (!AllFinite(log->weights) || !std::isfinite(log->bias)) {
      invalid("non-finite logistic-bernoulli parameters");
    }
    if (child.kind != Kind::kBinary) invalid("logistic-bernoulli requires a binary child");
  } else if (const auto* cpd = std::get_if<TableCpd>(&mech)) {
    if (!child.IsDiscrete()) invalid("table-cpd requires a discrete child");
    size_t configs = 1;
    for (const auto& p : parents) {
      const Variable& pv = g.variables[static_cast<size_t>(g.IndexOf(p))];
      if (!pv.IsDiscrete()) invalid("table-cpd parent '" + p + "' is continuous");
      configs *= static_cast<size_t>(pv.Levels());
    }
    if (cpd->rows.size() != configs) arity_error(cpd->rows.size());
    for (const auto& row : cpd->rows) {
      if (row.size() != static_cast<size_t>(child.Levels())) {
        invalid("table-cpd row width differs from child cardinality");
      }
      double s = 0;
      for (double x : row) {
        if (!(x >= 0) || !std::isfinite(x)) invalid("table-cpd entry out of range");
        s += x;
      }
      if (std::fabs(s - 1.0) > 1e-9) invalid("table-cpd row does not sum to 1");
    }
  } else if (const auto* expr = std::get_if<CustomExpression>(&mech)) {
    if (!expr->parsed) invalid("expression not parsed");
    if (child.kind != Kind::kContinuous) invalid("custom-expression requires a continuous child");
    std::set<std::string> symbols;
    expr->parsed->CollectSymbols(symbols);
    symbols.erase("noise");
    for (const auto& s : symbols) {
      if (std::find(parents.begin(), parents.end(), s) == parents.end()) {
        Fail(ErrorCode::kArityMismatch,
             "'" + child.name + "' expression references non-parent '" + s + "'");
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

int CausalGraph::IndexOf(const std::string& name) const {
  for (size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> CausalGraph::Parents(const std::string& child) const {
  std::vector<std::string> out;
  for (const auto& [p, c] : edges) {
    if (c == child) out.push_back(p);
  }
  return out;
}

std::vector<std::string> CausalGraph::Children(const std::string& parent) const {
  std::vector<std::string> out;
  for (const auto& [p, c] : edges) {
    if (p == parent) out.push_back(c);
  }
  return out;
}

std::vector<std::string> TopologicalOrder(const CausalGraph& graph) {
  const size_t k = graph.variables.size();
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < k; ++i) {
    const Variable& v = graph.variables[i];
    if (v.name.empty()) Fail(ErrorCode::kInvalidArgument, "empty variable name");
    if (!index.emplace(v.name, i).second) {
      Fail(ErrorCode::kInvalidArgument, "duplicate variable name '" + v.name + "'");
    }
    if (v.kind == Kind::kCategorical && v.cardinality < 2) {
      Fail(ErrorCode::kInvalidArgument, "categorical '" + v.name + "' needs cardinality >= 2");
    }
    ValidateNoise(v);
  }
  std::vector<std::vector<size_t>> children(k);
  std::vector<size_t> indegree(k, 0);
  std::set<std::pair<size_t, size_t>> seen;
  for (const auto& [p, c] : graph.edges) {
    auto pi = index.find(p);
    auto ci = index.find(c);
    if (pi == index.end() || ci == index.end()) {
      Fail(ErrorCode::kInvalidArgument, "edge references unknown variable " + p + "->" + c);
    }
    if (!seen.insert({pi->second, ci->second}).second) continue;
    children[pi->second].push_back(ci->second);
    ++indegree[ci->second];
  }

  // Kahn's algorithm, always releasing the earliest-declared ready node.
  std::set<size_t> ready;
  for (size_t i = 0; i < k; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<std::string> order;
  order.reserve(k);
  while (!ready.empty()) {
    const size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(graph.variables[i].name);
    for (size_t c : children[i]) {
      if (--indegree[c] == 0) ready.insert(c);
    }
  }
  if (order.size() != k) {
    std::string names;
    for (size_t i = 0; i < k; ++i) {
      if (indegree[i] > 0) {
        if (!names.empty()) names += ",";
        names += graph.variables[i].name;
      }
    }
    Fail(ErrorCode::kCycleDetected, names);
  }
  return order;
}

std::vector<std::string> ValidateGraph(const CausalGraph& graph) {
  std::vector<std::string> order = TopologicalOrder(graph);
  std::set<std::string> index;
  for (const Variable& v : graph.variables) index.insert(v.name);

  for (const auto& [name, mech] : graph.mechanisms) {
    if (!index.count(name)) {
      Fail(ErrorCode::kInvalidArgument, "mechanism for unknown variable '" + name + "'");
    }
  }
  for (const Variable& v : graph.variables) {
    if (!v.members.empty()) continue;  // coarsened nodes carry no mechanisms
    const auto parents = graph.Parents(v.name);
    auto it = graph.mechanisms.find(v.name);
    if (it == graph.mechanisms.end()) {
      if (!parents.empty()) Fail(ErrorCode::kMissingMechanism, v.name);
      continue;
    }
    ValidateMechanism(graph, v, parents, it->second);
  }
  return order;
}

namespace {

double DrawRoot(const Variable& v, Rng& rng) {
  switch (v.kind) {
    case Kind::kContinuous:
      return v.noise.Draw(rng);
    case Kind::kBinary:
      if (v.noise.family == NoiseSpec::Family::kNone) return Uniform01(rng) < 0.5 ? 1.0 : 0.0;
      return v.noise.Draw(rng) != 0.0 ? 1.0 : 0.0;
    case Kind::kCategorical:
      if (v.noise.family == NoiseSpec::Family::kNone) {
        return static_cast<double>(rng() % static_cast<uint64_t>(v.cardinality));
      }
      return std::clamp(std::round(v.noise.Draw(rng)), 0.0,
                        static_cast<double>(v.cardinality - 1));
  }
  return 0.0;
}

struct CompiledNode {
  size_t var;
  std::vector<size_t> parents;
  const Mechanism* mech = nullptr;
  std::vector<std::string> parent_names;
};

}  // namespace

Dataset SampleDataset(const CausalGraph& graph, size_t n, Rng& rng) {
  const auto order = ValidateGraph(graph);
  for (const auto& v : graph.variables) {
    if (!v.members.empty()) {
      Fail(ErrorCode::kInvalidArgument, "coarsened graphs cannot be sampled");
    }
  }
  std::vector<CompiledNode> plan;
  for (const auto& name : order) {
    CompiledNode node;
    node.var = static_cast<size_t>(graph.IndexOf(name));
    node.parent_names = graph.Parents(name);
    for (const auto& p : node.parent_names) node.parents.push_back(static_cast<size_t>(graph.IndexOf(p)));
    auto it = graph.mechanisms.find(name);
    if (it != graph.mechanisms.end()) node.mech = &it->second;
    plan.push_back(std::move(node));
  }

  std::vector<size_t> emitted;
  std::vector<Variable> schema;
  for (size_t i = 0; i < graph.variables.size(); ++i) {
    if (!graph.variables[i].latent) {
      emitted.push_back(i);
      schema.push_back(graph.variables[i]);
    }
  }
  Dataset out = Dataset::Empty(schema);
  out.rows = n;
  out.values.resize(n * schema.size());
  out.mask.assign(n * schema.size(), 1);

  std::vector<double> full(graph.variables.size(), 0.0);
  std::vector<double> pa;
  std::map<std::string, double, std::less<>> bindings;
  for (size_t r = 0; r < n; ++r) {
    for (const CompiledNode& node : plan) {
      const Variable& v = graph.variables[node.var];
      pa.resize(node.parents.size());
      for (size_t j = 0; j < node.parents.size(); ++j) pa[j] = full[node.parents[j]];
      double value = 0.0;
      if (node.mech == nullptr) {
        value = DrawRoot(v, rng);
      } else if (const auto* lin = std::get_if<LinearGaussian>(node.mech)) {
        value = lin->bias;
        for (size_t j = 0; j < pa.size(); ++j) value += lin->weights[j] * pa[j];
        if (v.noise.family != NoiseSpec::Family::kNone) {
          value += v.noise.Draw(rng);
        } else if (lin->noise_std > 0) {
          value += lin->noise_std * StandardNormal(rng);
        }
      } else if (const auto* log = std::get_if<LogisticBernoulli>(node.mech)) {
        double logit = log->bias;
        for (size_t j = 0; j < pa.size(); ++j) logit += log->weights[j] * pa[j];
        value = Uniform01(rng) < Sigmoid(logit) ? 1.0 : 0.0;
      } else if (const auto* cpd = std::get_if<TableCpd>(node.mech)) {
        size_t row = 0;
        for (size_t j = 0; j < node.parents.size(); ++j) {
          const auto levels = static_cast<size_t>(graph.variables[node.parents[j]].Levels());
          row = row * levels + static_cast<size_t>(pa[j]);
        }
        value = DrawIndex(cpd->rows[row], rng);
      } else if (const auto* expr = std::get_if<CustomExpression>(node.mech)) {
        bindings.clear();
        for (size_t j = 0; j < pa.size(); ++j) bindings[node.parent_names[j]] = pa[j];
        bindings["noise"] = v.noise.Draw(rng);
        value = Evaluate(*expr, bindings);
        if (!std::isfinite(value)) {
          Fail(ErrorCode::kInvalidMechanism, "'" + v.name + "' produced a non-finite value");
        }
      }
      full[node.var] = value;
    }
    for (size_t c = 0; c < emitted.size(); ++c) {
      out.values[r * schema.size() + c] = full[emitted[c]];
    }
  }
  return out;
}

CausalGraph PartialGraph(const CausalGraph& graph,
                         const std::map<std::string, std::string>& grouping) {
  ValidateGraph(graph);
  auto group_of = [&](const std::string& v) {
    auto it = grouping.find(v);
    return it == grouping.end() ? v : it->second;
  };
  CausalGraph out;
  std::map<std::string, size_t> node_index;
  for (const Variable& v : graph.variables) {
    const std::string g = group_of(v.name);
    auto it = node_index.find(g);
    if (it == node_index.end()) {
      node_index[g] = out.variables.size();
      Variable node;
      node.name = g;
      node.kind = v.kind;
      node.cardinality = v.cardinality;
      node.latent = v.latent;
      out.variables.push_back(node);
      it = node_index.find(g);
    }
    Variable& node = out.variables[it->second];
    node.latent = node.latent && v.latent;
    if (v.members.empty()) {
      node.members.push_back(v.name);
    } else {
      node.members.insert(node.members.end(), v.members.begin(), v.members.end());
    }
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [p, c] : graph.edges) {
    const std::string gp = group_of(p);
    const std::string gc = group_of(c);
    if (gp == gc) continue;
    if (seen.insert({gp, gc}).second) out.edges.emplace_back(gp, gc);
  }
  try {
    ValidateGraph(out);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCycleDetected) {
      Fail(ErrorCode::kQuotientCycle, e.what());
    }
    throw;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

double Dataset::at(size_t r, size_t c) const {
  if (!observed(r, c)) {
    Fail(ErrorCode::kSchemaViolation, "read of masked cell (" + std::to_string(r) + ", " +
                                          std::to_string(c) + ")");
  }
  return values[r * cols() + c];
}

bool Dataset::FullyObserved() const {
  return std::all_of(mask.begin(), mask.end(), [](uint8_t m) { return m != 0; });
}

Dataset Dataset::Empty(std::vector<Variable> schema) {
  Dataset d;
  d.schema = std::move(schema);
  return d;
}

void Dataset::AppendRow(std::span<const double> row) {
  if (row.size() != cols()) Fail(ErrorCode::kShapeMismatch, "row width mismatch");
  values.insert(values.end(), row.begin(), row.end());
  mask.insert(mask.end(), cols(), 1);
  ++rows;
}

void Dataset::AppendRow(std::span<const double> row, std::span<const uint8_t> m) {
  if (row.size() != cols() || m.size() != cols()) {
    Fail(ErrorCode::kShapeMismatch, "row width mismatch");
  }
  for (size_t c = 0; c < cols(); ++c) {
    if (m[c]) {
      values.push_back(row[c]);
    } else {
      values.push_back(schema[c].IsDiscrete() ? kDiscreteSentinel
                                              : std::numeric_limits<double>::quiet_NaN());
    }
  }
  mask.insert(mask.end(), m.begin(), m.end());
  ++rows;
}

Dataset Dataset::SelectRows(std::span<const size_t> indices) const {
  Dataset out = Empty(schema);
  out.values.reserve(indices.size() * cols());
  out.mask.reserve(indices.size() * cols());
  for (size_t i : indices) {
    if (i >= rows) Fail(ErrorCode::kInvalidArgument, "row index out of range");
    auto r = row(i);
    auto m = row_mask(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.mask.insert(out.mask.end(), m.begin(), m.end());
    ++out.rows;
  }
  return out;
}

Dataset Dataset::WithoutRow(size_t index) const {
  std::vector<size_t> keep;
  keep.reserve(rows);
  for (size_t i = 0; i < rows; ++i) {
    if (i != index) keep.push_back(i);
  }
  return SelectRows(keep);
}

void Dataset::Validate() const {
  if (values.size() != rows * cols() || mask.size() != rows * cols()) {
    Fail(ErrorCode::kShapeMismatch, "dataset storage does not match rows x cols");
  }
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols(); ++c) {
      const Variable& v = schema[c];
      const double x = values[r * cols() + c];
      auto cell = [&] {
        return "cell (row " + std::to_string(r) + ", column '" + v.name + "') value " +
               std::to_string(x);
      };
      if (!observed(r, c)) {
        const bool ok = v.IsDiscrete() ? x == kDiscreteSentinel : std::isnan(x);
        if (!ok) Fail(ErrorCode::kSchemaViolation, "masked " + cell() + " lacks sentinel");
        continue;
      }
      if (v.IsDiscrete()) {
        if (!(x >= 0 && x < v.Levels() && x == std::floor(x))) {
          Fail(ErrorCode::kSchemaViolation, cell() + " outside cardinality " +
                                                std::to_string(v.Levels()));
        }
      } else if (!std::isfinite(x)) {
        Fail(ErrorCode::kSchemaViolation, cell() + " is not finite");
      }
    }
  }
}

Dataset MaskAtRandom(const Dataset& data, double missing_rate, Rng& rng) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "missing_rate must lie in [0, 1)");
  }
  Dataset out = data;
  if (missing_rate == 0.0 || data.cols() == 0) return out;
  const size_t k = data.cols();
  std::vector<uint8_t> m(k);
  for (size_t r = 0; r < data.rows; ++r) {
    bool any = false;
    while (!any) {
      for (size_t c = 0; c < k; ++c) {
        m[c] = Uniform01(rng) < missing_rate ? 0 : 1;
        any = any || m[c];
      }
    }
    for (size_t c = 0; c < k; ++c) {
      const size_t at = r * k + c;
      out.mask[at] = static_cast<uint8_t>(out.mask[at] && m[c]);
      if (!out.mask[at]) {
        out.values[at] = data.schema[c].IsDiscrete() ? kDiscreteSentinel
                                                     : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic stand-in graph

CausalGraph MakeSyntheticScg(uint64_t seed, const SyntheticScgOptions& opts) {
  Rng rng(Mix64(seed));
  CausalGraph g;
  const size_t k = opts.variables;
  std::vector<size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  // Continuous nodes are placed away from the first two roots.
  std::vector<bool> continuous(k, false);
  for (size_t placed = 0; placed < opts.continuous && k > 2;) {
    const size_t i = 2 + static_cast<size_t>(rng() % (k - 2));
    if (!continuous[i]) {
      continuous[i] = true;
      ++placed;
    }
  }
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * Uniform01(rng); };
  for (size_t i = 0; i < k; ++i) {
    Variable v;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "X%02zu", i + 1);
    v.name = buf;
    v.kind = continuous[i] ? Kind::kContinuous : Kind::kBinary;
    g.variables.push_back(v);
  }
  for (size_t i = 0; i < k; ++i) {
    Variable& v = g.variables[i];
    std::vector<size_t> parents;
    if (i >= 2) {
      const size_t want = 1 + static_cast<size_t>(rng() % std::min(opts.max_parents, i));
      std::vector<size_t> pool(i);
      std::iota(pool.begin(), pool.end(), 0);
      for (size_t j = 0; j < want; ++j) {
        const size_t pick = j + static_cast<size_t>(rng() % (pool.size() - j));
        std::swap(pool[j], pool[pick]);
        parents.push_back(pool[j]);
      }
      std::sort(parents.begin(), parents.end());
    }
    if (parents.empty()) {
      v.noise = v.kind == Kind::kBinary ? NoiseSpec::Bernoulli(uniform(0.3, 0.7))
                                        : NoiseSpec::Gaussian(0.0, 1.0);
      continue;
    }
    std::vector<double> w;
    double centre = 0.0;
    for (size_t p : parents) {
      const double sign = (rng() & 1) ? 1.0 : -1.0;
      const double wi = sign * uniform(0.6, 1.0) * opts.weight_scale;
      w.push_back(wi);
      if (g.variables[p].kind == Kind::kBinary) centre += 0.5 * wi;
      g.edges.emplace_back(g.variables[p].name, v.name);
    }
    if (v.kind == Kind::kBinary) {
      g.mechanisms[v.name] = LogisticBernoulli{w, -centre + uniform(-0.3, 0.3)};
    } else {
      for (double& wi : w) wi /= opts.weight_scale;
      g.mechanisms[v.name] = LinearGaussian{w, -centre / opts.weight_scale, 0.5};
    }
  }
  ValidateGraph(g);
  return g;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string FamilyName(NoiseSpec::Family f) {
  switch (f) {
    case NoiseSpec::Family::kNone: return "none";
    case NoiseSpec::Family::kGaussian: return "gaussian";
    case NoiseSpec::Family::kUniform: return "uniform";
    case NoiseSpec::Family::kBernoulli: return "bernoulli";
    case NoiseSpec::Family::kCategorical: return "categorical";
    case NoiseSpec::Family::kConstant: return "constant";
  }
  return "none";
}

NoiseSpec::Family ParseFamily(const std::string& s) {
  if (s == "none") return NoiseSpec::Family::kNone;
  if (s == "gaussian") return NoiseSpec::Family::kGaussian;
  if (s == "uniform") return NoiseSpec::Family::kUniform;
  if (s == "bernoulli") return NoiseSpec::Family::kBernoulli;
  if (s == "categorical") return NoiseSpec::Family::kCategorical;
  if (s == "constant") return NoiseSpec::Family::kConstant;
  Fail(ErrorCode::kParseError, "unknown noise family '" + s + "'");
}

json VariableToJson(const Variable& v) {
  json j = {{"name", v.name}, {"kind", KindName(v.kind)}};
  if (v.kind == Kind::kCategorical) j["cardinality"] = v.cardinality;
  if (v.noise.family != NoiseSpec::Family::kNone) {
    j["noise"] = {{"family", FamilyName(v.noise.family)}, {"params", v.noise.params}};
  }
  if (v.latent) j["latent"] = true;
  if (!v.members.empty()) j["members"] = v.members;
  return j;
}

Variable VariableFromJson(const json& j) {
  Variable v;
  v.name = j.at("name").get<std::string>();
  v.kind = ParseKind(j.value("kind", std::string("continuous")));
  if (v.kind == Kind::kCategorical) v.cardinality = j.at("cardinality").get<int>();
  if (j.contains("noise")) {
    v.noise.family = ParseFamily(j["noise"].at("family").get<std::string>());
    v.noise.params = j["noise"].value("params", std::vector<double>{});
  }
  v.latent = j.value("latent", false);
  v.members = j.value("members", std::vector<std::string>{});
  return v;
}

}  // namespace

json SchemaToJson(const std::vector<Variable>& schema) {
  json out = json::array();
  for (const auto& v : schema) out.push_back(VariableToJson(v));
  return out;
}

std::vector<Variable> SchemaFromJson(const json& j) {
  std::vector<Variable> out;
  for (const auto& v : j) out.push_back(VariableFromJson(v));
  return out;
}

json GraphToJson(const CausalGraph& graph) {
  json j;
  j["variables"] = SchemaToJson(graph.variables);
  j["edges"] = json::array();
  for (const auto& [p, c] : graph.edges) j["edges"].push_back({p, c});
  json mechs = json::object();
  for (const auto& [name, m] : graph.mechanisms) {
    if (const auto* lin = std::get_if<LinearGaussian>(&m)) {
      mechs[name] = {{"form", "linear-gaussian"},
                     {"params", {{"weights", lin->weights}, {"bias", lin->bias},
                                 {"noise_std", lin->noise_std}}}};
    } else if (const auto* log = std::get_if<LogisticBernoulli>(&m)) {
      mechs[name] = {{"form", "logistic-bernoulli"},
                     {"params", {{"weights", log->weights}, {"bias", log->bias}}}};
    } else if (const auto* cpd = std::get_if<TableCpd>(&m)) {
      mechs[name] = {{"form", "table-cpd"}, {"params", {{"rows", cpd->rows}}}};
    } else if (const auto* expr = std::get_if<CustomExpression>(&m)) {
      mechs[name] = {{"form", "custom-expression"},
                     {"params", {{"expression", expr->source}}}};
    }
  }
  j["mechanisms"] = mechs;
  return j;
}

CausalGraph GraphFromJson(const json& j) {
  CausalGraph g;
  try {
    g.variables = SchemaFromJson(j.at("variables"));
    const json edges = j.value("edges", json::array());
    const json mechanisms = j.value("mechanisms", json::object());
    for (const auto& e : edges) {
      g.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    for (const auto& [name, m] : mechanisms.items()) {
      const std::string form = m.at("form").get<std::string>();
      const json& p = m.at("params");
      if (form == "linear-gaussian") {
        g.mechanisms[name] = LinearGaussian{p.value("weights", std::vector<double>{}),
                                            p.value("bias", 0.0), p.value("noise_std", 0.0)};
      } else if (form == "logistic-bernoulli") {
        g.mechanisms[name] = LogisticBernoulli{p.value("weights", std::vector<double>{}),
                                               p.value("bias", 0.0)};
      } else if (form == "table-cpd") {
        g.mechanisms[name] = TableCpd{p.at("rows").get<std::vector<std::vector<double>>>()};
      } else if (form == "custom-expression") {
        g.mechanisms[name] = ParseExpression(p.at("expression").get<std::string>());
      } else {
        Fail(ErrorCode::kParseError, "unknown mechanism form '" + form + "'");
      }
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("graph json: ") + e.what());
  }
  return g;
}

uint64_t SchemaHash(const std::vector<Variable>& schema) {
  return Fnv1a64(SchemaToJson(schema).dump());
}

}  // namespace cds::scg
