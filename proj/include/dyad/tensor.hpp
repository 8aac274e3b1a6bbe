#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dyad/rng.hpp"

namespace dyad {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  void fill(double v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T b and a b^T without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
void add_in_place(Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

double sigmoid(double x);

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v);
  void zero_grad() { grad.fill(0.0); }
};

// Fully connected stack; ReLU between layers, final layer linear.
// Weights are in x out, biases 1 x out.
class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}; Xavier-uniform weights, zero biases.
  Mlp(const std::string& name, const std::vector<std::size_t>& dims, Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t layer_count() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }
  Parameter& weight(std::size_t layer) { return weights_[layer]; }
  Parameter& bias(std::size_t layer) { return biases_[layer]; }
  const Parameter& weight(std::size_t layer) const { return weights_[layer]; }
  const Parameter& bias(std::size_t layer) const { return biases_[layer]; }
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;

  // Plain forward; ShapeError naming the layer on mismatch.
  Matrix forward(const Matrix& x) const;

 private:
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& x);

struct SignedAdjacency {
  std::size_t node_count = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> neighbors;

  explicit SignedAdjacency(std::size_t n = 0) : node_count(n), neighbors(n) {}
  // Adds the undirected edge {a, b} with weight w.
  void add_edge(std::size_t a, std::size_t b, double w);
};

// h'_v = MLP((1 + eps) h_v + sum_{u in N(v)} w_uv h_u)
Matrix gin_layer(const SignedAdjacency& adj, const Matrix& h, const Mlp& update, double eps);

// sigmoid(a . b)
double dot_score(std::span<const double> a, std::span<const double> b);

// Mean binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> p, std::span<const int> y);

inline constexpr double kProbClamp = 1e-12;

// Sparse row operator: out row i = sum of w * x[j] over entries (j, w).
using SparseRows = std::vector<std::vector<std::pair<std::size_t, double>>>;

// Reverse-mode tape over matrices. Values are computed eagerly; backward()
// accumulates into Parameter::grad.
class Tape {
 public:
  using Var = std::size_t;

  Var input(Matrix value);
  Var param(Parameter& p);
  Var matmul(Var a, Var b);
  Var add_row_broadcast(Var x, Var bias);
  Var add(Var a, Var b);
  Var relu(Var x);
  Var scale(Var x, double s);
  // (1 + eps) * x with eps a 1x1 parameter.
  Var scale_one_plus(Var x, Var eps);
  Var gather_rows(Var x, std::vector<std::size_t> rows);
  Var spmm(SparseRows rows, Var x);
  Var concat_rows(const std::vector<Var>& parts);
  // Row-wise dot products, n x 1.
  Var row_dot(Var a, Var b);
  // Mean BCE of sigmoid(logits) against 0/1 targets, 1 x 1.
  Var sigmoid_bce(Var logits, std::vector<double> targets);
  Var sum_squares(Var x);
  Var mlp(Mlp& mlp, Var x);

  const Matrix& value(Var v) const { return nodes_[v].value; }
  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kInput, kParam, kMatmul, kAddRow, kAdd, kRelu, kScale, kScaleOnePlus,
    kGather, kSpmm, kConcat, kRowDot, kSigmoidBce, kSumSquares
  };
  struct Node {
    Op op;
    Matrix value;
    Matrix grad;
    std::vector<Var> args;
    Parameter* param = nullptr;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    SparseRows sparse;
    std::vector<double> targets;
  };
  Var push(Node n);
  std::vector<Node> nodes_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});
  // NumericalError on any non-finite gradient; nothing is updated then.
  void step();
  void zero_grad();
  std::int64_t steps() const { return step_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params);
std::vector<NamedTensor> load_checkpoint(const std::string& path);
// Copies values by name; ValidationError for missing names or shape mismatch.
void apply_checkpoint(const std::vector<NamedTensor>& tensors, const std::vector<Parameter*>& params);

}  // namespace dyad
