#include "dyad/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>

#include "dyad/errors.hpp"

namespace dyad {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul " + shape(a) + " * " + shape(b));
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn " + shape(a) + " * " + shape(b));
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.data().data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* out = c.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt " + shape(a) + " * " + shape(b));
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
      c(i, j) = s;
    }
  }
  return c;
}

void add_in_place(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add " + shape(a) + " + " + shape(b));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); });
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Parameter::Parameter(std::string n, Matrix v)
    : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ConfigError(name + ": an MLP needs at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    if (in == 0 || out == 0) throw ConfigError(name + ": zero layer width");
    Matrix w(in, out);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& x : w.data()) x = rng.uniform(-limit, limit);
    weights_.emplace_back(name + ".W" + std::to_string(l), std::move(w));
    biases_.emplace_back(name + ".b" + std::to_string(l), Matrix(1, out));
  }
}

std::size_t Mlp::in_dim() const { return weights_.empty() ? 0 : weights_.front().value.rows(); }
std::size_t Mlp::out_dim() const { return weights_.empty() ? 0 : weights_.back().value.cols(); }

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].value.size() + biases_[l].value.size();
  return n;
}

Matrix Mlp::forward(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (h.cols() != weights_[l].value.rows()) {
      throw ShapeError("mlp layer " + std::to_string(l) + ": input " + shape(h) + ", weight " +
                       shape(weights_[l].value));
    }
    h = matmul(h, weights_[l].value);
    const auto& b = biases_[l].value;
    for (std::size_t r = 0; r < h.rows(); ++r) {
      for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) += b(0, c);
    }
    if (l + 1 < weights_.size()) {
      for (double& v : h.data()) v = std::max(v, 0.0);
    }
  }
  return h;
}

Matrix mlp_forward(const Mlp& mlp, const Matrix& x) { return mlp.forward(x); }

void SignedAdjacency::add_edge(std::size_t a, std::size_t b, double w) {
  if (a == b) throw ValidationError("self-loop in signed adjacency");
  if (a >= node_count || b >= node_count) throw ShapeError("adjacency node index out of range");
  neighbors[a].emplace_back(b, w);
  neighbors[b].emplace_back(a, w);
}

Matrix gin_layer(const SignedAdjacency& adj, const Matrix& h, const Mlp& update, double eps) {
  if (h.rows() != adj.node_count) {
    throw ShapeError("gin_layer: " + std::to_string(h.rows()) + " rows for " +
                     std::to_string(adj.node_count) + " nodes");
  }
  Matrix agg(h.rows(), h.cols());
  for (std::size_t v = 0; v < h.rows(); ++v) {
    auto out = agg.row(v);
    const auto self = h.row(v);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 + eps) * self[c];
    for (const auto& [u, w] : adj.neighbors[v]) {
      const auto hu = h.row(u);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * hu[c];
    }
  }
  return update.forward(agg);
}

double dot_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot_score: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return sigmoid(s);
}

double bce_loss(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) throw ShapeError("bce_loss: length mismatch");
  if (p.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    total -= y[i] ? std::log(q) : std::log(1.0 - q);
  }
  return total / static_cast<double>(p.size());
}

// Tape ----------------------------------------------------------------------

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tape::Var Tape::input(Matrix value) {
  Node n{Op::kInput, std::move(value), {}, {}};
  return push(std::move(n));
}

Tape::Var Tape::param(Parameter& p) {
  Node n{Op::kParam, p.value, {}, {}};
  n.param = &p;
  return push(std::move(n));
}

Tape::Var Tape::matmul(Var a, Var b) {
  Node n{Op::kMatmul, dyad::matmul(value(a), value(b)), {}, {a, b}};
  return push(std::move(n));
}

Tape::Var Tape::add_row_broadcast(Var x, Var bias) {
  const Matrix& b = value(bias);
  Matrix out = value(x);
  if (b.rows() != 1 || b.cols() != out.cols()) {
    throw ShapeError("add_row_broadcast " + shape(out) + " + " + shape(b));
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b(0, c);
  }
  Node n{Op::kAddRow, std::move(out), {}, {x, bias}};
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  Matrix out = value(a);
  add_in_place(out, value(b));
  Node n{Op::kAdd, std::move(out), {}, {a, b}};
  return push(std::move(n));
}

Tape::Var Tape::relu(Var x) {
  Matrix out = value(x);
  for (double& v : out.data()) v = std::max(v, 0.0);
  Node n{Op::kRelu, std::move(out), {}, {x}};
  return push(std::move(n));
}

Tape::Var Tape::scale(Var x, double s) {
  Matrix out = value(x);
  for (double& v : out.data()) v *= s;
  Node n{Op::kScale, std::move(out), {}, {x}};
  n.scalar = s;
  return push(std::move(n));
}

Tape::Var Tape::scale_one_plus(Var x, Var eps) {
  if (value(eps).size() != 1) throw ShapeError("scale_one_plus: eps must be 1x1");
  const double f = 1.0 + value(eps).data()[0];
  Matrix out = value(x);
  for (double& v : out.data()) v *= f;
  Node n{Op::kScaleOnePlus, std::move(out), {}, {x, eps}};
  return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var x, std::vector<std::size_t> rows) {
  const Matrix& src = value(x);
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(src.row(rows[i]).begin(), src.row(rows[i]).end(), out.row(i).begin());
  }
  Node n{Op::kGather, std::move(out), {}, {x}};
  n.index = std::move(rows);
  return push(std::move(n));
}

Tape::Var Tape::spmm(SparseRows rows, Var x) {
  const Matrix& src = value(x);
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto o = out.row(i);
    for (const auto& [j, w] : rows[i]) {
      if (j >= src.rows()) throw ShapeError("spmm: index out of range");
      const auto s = src.row(j);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] += w * s[c];
    }
  }
  Node n{Op::kSpmm, std::move(out), {}, {x}};
  n.sparse = std::move(rows);
  return push(std::move(n));
}

Tape::Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = value(parts.front()).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += value(p).rows();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    std::copy(value(p).data().begin(), value(p).data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(offset * cols));
    offset += value(p).rows();
  }
  Node n{Op::kConcat, std::move(out), {}, parts};
  return push(std::move(n));
}

Tape::Var Tape::row_dot(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError("row_dot " + shape(x) + " . " + shape(y));
  }
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) s += x(r, c) * y(r, c);
    out(r, 0) = s;
  }
  Node n{Op::kRowDot, std::move(out), {}, {a, b}};
  return push(std::move(n));
}

Tape::Var Tape::sigmoid_bce(Var logits, std::vector<double> targets) {
  const Matrix& z = value(logits);
  if (z.cols() != 1 || z.rows() != targets.size()) {
    throw ShapeError("sigmoid_bce: logits " + shape(z) + " for " + std::to_string(targets.size()) +
                     " targets");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = std::clamp(sigmoid(z(i, 0)), kProbClamp, 1.0 - kProbClamp);
    total -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  const double n_rows = targets.empty() ? 1.0 : static_cast<double>(targets.size());
  Node n{Op::kSigmoidBce, Matrix(1, 1, total / n_rows), {}, {logits}};
  n.targets = std::move(targets);
  return push(std::move(n));
}

Tape::Var Tape::sum_squares(Var x) {
  double s = 0.0;
  for (double v : value(x).data()) s += v * v;
  Node n{Op::kSumSquares, Matrix(1, 1, s), {}, {x}};
  return push(std::move(n));
}

Tape::Var Tape::mlp(Mlp& m, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    if (value(h).cols() != m.weight(l).value.rows()) {
      throw ShapeError("mlp layer " + std::to_string(l) + ": input " + shape(value(h)) +
                       ", weight " + shape(m.weight(l).value));
    }
    h = add_row_broadcast(matmul(h, param(m.weight(l))), param(m.bias(l)));
    if (l + 1 < m.layer_count()) h = relu(h);
  }
  return h;
}

void Tape::backward(Var loss) {
  auto ensure = [&](Var v) -> Matrix& {
    Node& n = nodes_[v];
    if (n.grad.size() != n.value.size() || n.grad.rows() != n.value.rows()) {
      n.grad = Matrix(n.value.rows(), n.value.cols());
    }
    return n.grad;
  };
  for (auto& n : nodes_) n.grad = Matrix();
  ensure(loss).fill(1.0);

  for (std::size_t idx = loss + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (n.grad.size() == 0 && n.value.size() != 0) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kParam:
        add_in_place(n.param->grad, g);
        break;
      case Op::kMatmul: {
        const Matrix da = matmul_nt(g, value(n.args[1]));
        const Matrix db = matmul_tn(value(n.args[0]), g);
        add_in_place(ensure(n.args[0]), da);
        add_in_place(ensure(n.args[1]), db);
        break;
      }
      case Op::kAddRow: {
        add_in_place(ensure(n.args[0]), g);
        Matrix& gb = ensure(n.args[1]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
        break;
      }
      case Op::kAdd:
        add_in_place(ensure(n.args[0]), g);
        add_in_place(ensure(n.args[1]), g);
        break;
      case Op::kRelu: {
        Matrix& gx = ensure(n.args[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (n.value.data()[i] > 0.0) gx.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::kScale: {
        Matrix& gx = ensure(n.args[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += n.scalar * g.data()[i];
        break;
      }
      case Op::kScaleOnePlus: {
        const double f = 1.0 + value(n.args[1]).data()[0];
        const Matrix& x = value(n.args[0]);
        Matrix& gx = ensure(n.args[0]);
        double geps = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          gx.data()[i] += f * g.data()[i];
          geps += g.data()[i] * x.data()[i];
        }
        ensure(n.args[1]).data()[0] += geps;
        break;
      }
      case Op::kGather: {
        Matrix& gx = ensure(n.args[0]);
        for (std::size_t i = 0; i < n.index.size(); ++i) {
          auto dst = gx.row(n.index[i]);
          const auto src = g.row(i);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
        break;
      }
      case Op::kSpmm: {
        Matrix& gx = ensure(n.args[0]);
        for (std::size_t i = 0; i < n.sparse.size(); ++i) {
          const auto src = g.row(i);
          for (const auto& [j, w] : n.sparse[i]) {
            auto dst = gx.row(j);
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += w * src[c];
          }
        }
        break;
      }
      case Op::kConcat: {
        std::size_t offset = 0;
        for (Var p : n.args) {
          Matrix& gp = ensure(p);
          for (std::size_t i = 0; i < gp.size(); ++i) gp.data()[i] += g.data()[offset + i];
          offset += gp.size();
        }
        break;
      }
      case Op::kRowDot: {
        const Matrix& a = value(n.args[0]);
        const Matrix& b = value(n.args[1]);
        Matrix& ga = ensure(n.args[0]);
        Matrix& gb = ensure(n.args[1]);
        for (std::size_t r = 0; r < a.rows(); ++r) {
          const double gr = g(r, 0);
          for (std::size_t c = 0; c < a.cols(); ++c) {
            ga(r, c) += gr * b(r, c);
            gb(r, c) += gr * a(r, c);
          }
        }
        break;
      }
      case Op::kSigmoidBce: {
        const Matrix& z = value(n.args[0]);
        Matrix& gz = ensure(n.args[0]);
        const double scale =
            g(0, 0) / (n.targets.empty() ? 1.0 : static_cast<double>(n.targets.size()));
        for (std::size_t i = 0; i < n.targets.size(); ++i) {
          gz(i, 0) += scale * (sigmoid(z(i, 0)) - n.targets[i]);
        }
        break;
      }
      case Op::kSumSquares: {
        const Matrix& x = value(n.args[0]);
        Matrix& gx = ensure(n.args[0]);
        for (std::size_t i = 0; i < x.size(); ++i) gx.data()[i] += 2.0 * g(0, 0) * x.data()[i];
        break;
      }
    }
  }
}

// Adam ----------------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  for (const Parameter* p : params_) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
      throw ShapeError("adam: gradient shape mismatch for " + p->name);
    }
    if (!all_finite(p->grad)) throw NumericalError("adam: non-finite gradient in " + p->name);
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i]->value.data();
    const auto& g = params_[i]->grad.data();
    auto& m = m_[i].data();
    auto& v = v_[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * g[k];
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

// Checkpoints ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u64(std::ostream& out, std::uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_u32(std::ostream& out, std::uint32_t x) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("truncated checkpoint");
  std::uint64_t x = 0;
  for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
  return x;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("truncated checkpoint");
  std::uint32_t x = 0;
  for (int i = 3; i >= 0; --i) x = (x << 8) | b[i];
  return x;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFoundError("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  put_u32(out, kCheckpointVersion);
  put_u64(out, params.size());
  for (const Parameter* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, 2);
    put_u64(out, p->value.rows());
    put_u64(out, p->value.cols());
    for (double v : p->value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw ValidationError("not a checkpoint file: " + path);
  }
  if (get_u32(in) != kCheckpointVersion) throw ValidationError("unsupported checkpoint version");
  const std::uint64_t count = get_u64(in);
  std::vector<NamedTensor> out;
  for (std::uint64_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name.resize(get_u32(in));
    if (!in.read(nt.name.data(), static_cast<std::streamsize>(nt.name.size()))) {
      throw ValidationError("truncated checkpoint");
    }
    const std::uint32_t rank = get_u32(in);
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      nt.dims.push_back(get_u64(in));
      total *= nt.dims.back();
    }
    nt.values.resize(total);
    for (double& v : nt.values) v = std::bit_cast<double>(get_u64(in));
    out.push_back(std::move(nt));
  }
  return out;
}

void apply_checkpoint(const std::vector<NamedTensor>& tensors,
                      const std::vector<Parameter*>& params) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  for (Parameter* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ValidationError("checkpoint lacks tensor " + p->name);
    const NamedTensor& t = *it->second;
    if (t.dims.size() != 2 || t.dims[0] != p->value.rows() || t.dims[1] != p->value.cols()) {
      throw ValidationError("checkpoint shape mismatch for " + p->name);
    }
    p->value.data() = t.values;
  }
}

}  // namespace dyad
