#include "factsum/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace factsum::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " +
                      shape_string(a) + " and " + shape_string(b));
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

Tape& tape_of(Var a) {
  require(a.valid(), "op on an invalid Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  require(a.valid() && b.valid(), "op on an invalid Var");
  require(a.tape == b.tape, "op mixes Vars from different tapes");
  return *a.tape;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ContractError("tensor of shape " + shape_string(shape_) + " given " +
                        std::to_string(values_.size()) + " values");
  }
}

double Tensor::item() const {
  require(values_.size() == 1,
          "item() on non-scalar tensor " + shape_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

// ---- ParameterSet ---------------------------------------------------------

ParamId ParameterSet::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter " + name);
  const ParamId id = values_.size();
  names_.push_back(name);
  grads_.emplace_back(value.shape());
  values_.push_back(std::move(value));
  index_.emplace(name, id);
  return id;
}

ParamId ParameterSet::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return it->second;
}

void ParameterSet::zero_grad() {
  for (auto& g : grads_) g.fill(0.0);
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& g : grads_)
    for (double x : g.values()) s += x * x;
  return std::sqrt(s);
}

double ParameterSet::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& g : grads_)
      for (double& x : g.values()) x *= f;
  }
  return norm;
}

namespace {

constexpr char kParamMagic[8] = {'F', 'S', 'P', 'A', 'R', 'A', 'M', '\0'};
constexpr std::uint32_t kParamVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("parameter file truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void ParameterSet::save(std::ostream& out) const {
  out.write(kParamMagic, sizeof(kParamMagic));
  write_le<std::uint32_t>(out, kParamVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(values_.size()));
  for (std::size_t p = 0; p < values_.size(); ++p) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(names_[p].size()));
    out.write(names_[p].data(), static_cast<std::streamsize>(names_[p].size()));
    const auto& t = values_[p];
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_le<std::uint64_t>(out, d);
    for (double x : t.values()) write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
}

void ParameterSet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save(out);
}

void ParameterSet::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a parameter file (bad magic)");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kParamVersion)
    throw std::runtime_error("unsupported parameter file version " +
                             std::to_string(version));
  const auto count = read_le<std::uint32_t>(in);
  if (count != values_.size())
    throw std::runtime_error("parameter count mismatch: file has " +
                             std::to_string(count) + ", model has " +
                             std::to_string(values_.size()));
  for (std::uint32_t p = 0; p < count; ++p) {
    const auto len = read_le<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const ParamId pid = id(name);
    const auto rank = read_le<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_le<std::uint64_t>(in));
    if (shape != values_[pid].shape())
      throw std::runtime_error("shape mismatch for " + name + ": file " +
                               shape_string(shape) + ", model " +
                               shape_string(values_[pid].shape()));
    for (double& x : values_[pid].values())
      x = std::bit_cast<double>(read_le<std::uint64_t>(in));
  }
}

void ParameterSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  load(in);
}

// ---- Tape -----------------------------------------------------------------

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Tape::Tape(ParameterSet* params, bool record) : params_(params), record_(record) {
  nodes_.reserve(1024);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(ParamId id) {
  require(params_ != nullptr, "tape has no parameter set");
  auto it = param_nodes_.find(id);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.value = params_->value(id);
  n.needs_grad = record_;
  n.is_param = true;
  n.param = id;
  nodes_.push_back(std::move(n));
  const int idx = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(id, idx);
  return Var{this, idx};
}

Var Tape::param(const std::string& name) {
  require(params_ != nullptr, "tape has no parameter set");
  return param(params_->id(name));
}

Var Tape::emit(Tensor value, std::vector<int> inputs, Backward back) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    if (n.needs_grad) {
      n.back = std::move(back);
      n.inputs = std::move(inputs);
    }
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss, double seed) {
  require(loss.tape == this, "backward on a Var from another tape");
  const Tensor& lv = value(loss);
  require(lv.size() == 1,
          "backward requires a scalar loss, got shape " + shape_string(lv.shape()));
  if (!record_) throw ContractError("backward on a non-recording tape");
  grad_buffer(loss.id)[0] += seed;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.is_param) {
      Tensor& g = params_->grad(n.param);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    } else if (n.back) {
      n.back(*this, i);
    }
  }
}

// ---- ops ------------------------------------------------------------------

namespace {

// Adds src scaled by f into the gradient of node id when it needs one.
void accum(Tape& t, int id, const Tensor& src, double f = 1.0) {
  if (!t.needs_grad(Var{&t, id})) return;
  Tensor& g = t.grad_buffer(id);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += f * src[k];
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = fwd(av[k]);
  const int ai = a.id;
  return t.emit(std::move(out), {ai}, [ai, deriv](Tape& t, int self) {
    if (!t.needs_grad(Var{&t, ai})) return;
    const Tensor& x = t.value_of(ai);
    const Tensor& y = t.value_of(self);
    const Tensor& gy = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(ai);
    for (std::size_t k = 0; k < x.size(); ++k) gx[k] += gy[k] * deriv(x[k], y[k]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("add", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bv[k];
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    accum(t, ai, g);
    accum(t, bi, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("sub", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    accum(t, ai, g);
    accum(t, bi, g, -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("mul", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.value_of(ai);
    const Tensor& y = t.value_of(bi);
    if (t.needs_grad(Var{&t, ai})) {
      Tensor& gx = t.grad_buffer(ai);
      for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * y[k];
    }
    if (t.needs_grad(Var{&t, bi})) {
      Tensor& gy = t.grad_buffer(bi);
      for (std::size_t k = 0; k < g.size(); ++k) gy[k] += g[k] * x[k];
    }
  });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; },
               [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; },
               [](double, double) { return 1.0; });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.values()) s += x;
  const int ai = a.id;
  return t.emit(Tensor::scalar(s), {ai}, [ai](Tape& t, int self) {
    const double g = t.grad_buffer(self)[0];
    if (!t.needs_grad(Var{&t, ai})) return;
    Tensor& gx = t.grad_buffer(ai);
    for (double& x : gx.values()) x += g;
  });
}

Var sum(std::span<const Var> xs) {
  require(!xs.empty(), "sum of an empty list");
  Tape& t = tape_of(xs[0]);
  Tensor out = xs[0].value();
  std::vector<int> ids{xs[0].id};
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const Tensor& v = tape_of(xs[0], xs[i]).value(xs[i]);
    if (v.shape() != out.shape()) shape_error("sum", out.shape(), v.shape());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
    ids.push_back(xs[i].id);
  }
  std::vector<int> captured = ids;
  return t.emit(std::move(out), std::move(ids),
                [captured](Tape& t, int self) {
                  const Tensor& g = t.grad_buffer(self);
                  for (int id : captured) accum(t, id, g);
                });
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 1 || av.shape() != bv.shape()) shape_error("dot", av.shape(), bv.shape());
  double s = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  const int ai = a.id, bi = b.id;
  return t.emit(Tensor::scalar(s), {ai, bi}, [ai, bi](Tape& t, int self) {
    const double g = t.grad_buffer(self)[0];
    accum(t, ai, t.value_of(bi), g);
    accum(t, bi, t.value_of(ai), g);
  });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || (bv.rank() != 1 && bv.rank() != 2) || av.dim(1) != bv.dim(0))
    shape_error("matmul", av.shape(), bv.shape());
  const std::size_t m = av.dim(0), k = av.dim(1);
  const int ai = a.id, bi = b.id;
  if (bv.rank() == 1) {
    Tensor out(Shape{m});
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = av.data() + i * k;
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += row[j] * bv[j];
      out[i] = s;
    }
    return t.emit(std::move(out), {ai, bi}, [ai, bi, m, k](Tape& t, int self) {
      const Tensor& g = t.grad_buffer(self);
      const Tensor& A = t.value_of(ai);
      const Tensor& x = t.value_of(bi);
      if (t.needs_grad(Var{&t, ai})) {
        Tensor& gA = t.grad_buffer(ai);
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* row = gA.data() + i * k;
          for (std::size_t j = 0; j < k; ++j) row[j] += gi * x[j];
        }
      }
      if (t.needs_grad(Var{&t, bi})) {
        Tensor& gx = t.grad_buffer(bi);
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* row = A.data() + i * k;
          for (std::size_t j = 0; j < k; ++j) gx[j] += gi * row[j];
        }
      }
    });
  }
  const std::size_t n = bv.dim(1);
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av.at(i, p);
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return t.emit(std::move(out), {ai, bi}, [ai, bi, m, k, n](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& A = t.value_of(ai);
    const Tensor& B = t.value_of(bi);
    if (t.needs_grad(Var{&t, ai})) {
      Tensor& gA = t.grad_buffer(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g.at(i, j) * B.at(p, j);
          gA.at(i, p) += s;
        }
    }
    if (t.needs_grad(Var{&t, bi})) {
      Tensor& gB = t.grad_buffer(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A.at(i, p);
          for (std::size_t j = 0; j < n; ++j) gB.at(p, j) += aip * g.at(i, j);
        }
    }
  });
}

Var vecmat(Var v, Var mat) {
  Tape& t = tape_of(v, mat);
  const Tensor& vv = v.value();
  const Tensor& mv = mat.value();
  if (vv.rank() != 1 || mv.rank() != 2 || vv.dim(0) != mv.dim(0))
    shape_error("vecmat", vv.shape(), mv.shape());
  const std::size_t n = mv.dim(0), d = mv.dim(1);
  Tensor out(Shape{d});
  for (std::size_t i = 0; i < n; ++i) {
    const double w = vv[i];
    const double* row = mv.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) out[j] += w * row[j];
  }
  const int vi = v.id, mi = mat.id;
  return t.emit(std::move(out), {vi, mi}, [vi, mi, n, d](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& V = t.value_of(vi);
    const Tensor& M = t.value_of(mi);
    if (t.needs_grad(Var{&t, vi})) {
      Tensor& gv = t.grad_buffer(vi);
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = M.data() + i * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += row[j] * g[j];
        gv[i] += s;
      }
    }
    if (t.needs_grad(Var{&t, mi})) {
      Tensor& gm = t.grad_buffer(mi);
      for (std::size_t i = 0; i < n; ++i) {
        double* row = gm.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += V[i] * g[j];
      }
    }
  });
}

Var add_row(Var m, Var v) {
  Tape& t = tape_of(m, v);
  const Tensor& mv = m.value();
  const Tensor& vv = v.value();
  if (mv.rank() != 2 || vv.rank() != 1 || mv.dim(1) != vv.dim(0))
    shape_error("add_row", mv.shape(), vv.shape());
  const std::size_t n = mv.dim(0), d = mv.dim(1);
  Tensor out = mv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) += vv[j];
  const int mi = m.id, vi = v.id;
  return t.emit(std::move(out), {mi, vi}, [mi, vi, n, d](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    accum(t, mi, g);
    if (t.needs_grad(Var{&t, vi})) {
      Tensor& gv = t.grad_buffer(vi);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gv[j] += g.at(i, j);
    }
  });
}

Var concat(std::span<const Var> xs) {
  require(!xs.empty(), "concat of an empty list");
  Tape& t = tape_of(xs[0]);
  std::vector<double> vals;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (Var x : xs) {
    const Tensor& v = tape_of(xs[0], x).value(x);
    if (v.rank() != 1) shape_error("concat", v.shape(), Shape{});
    offsets.push_back(vals.size());
    vals.insert(vals.end(), v.values().begin(), v.values().end());
    ids.push_back(x.id);
  }
  std::vector<int> captured = ids;
  return t.emit(Tensor::vector(std::move(vals)), std::move(ids),
                [captured, offsets](Tape& t, int self) {
                  const Tensor& g = t.grad_buffer(self);
                  for (std::size_t p = 0; p < captured.size(); ++p) {
                    const int id = captured[p];
                    if (!t.needs_grad(Var{&t, id})) continue;
                    Tensor& gx = t.grad_buffer(id);
                    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[offsets[p] + k];
                  }
                });
}

Var slice(Var a, std::size_t begin, std::size_t length) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (av.rank() != 1 || begin + length > av.size())
    throw ContractError("slice [" + std::to_string(begin) + ", +" +
                        std::to_string(length) + ") out of range for " +
                        shape_string(av.shape()));
  std::vector<double> vals(av.data() + begin, av.data() + begin + length);
  const int ai = a.id;
  return t.emit(Tensor::vector(std::move(vals)), {ai},
                [ai, begin](Tape& t, int self) {
                  if (!t.needs_grad(Var{&t, ai})) return;
                  const Tensor& g = t.grad_buffer(self);
                  Tensor& gx = t.grad_buffer(ai);
                  for (std::size_t k = 0; k < g.size(); ++k) gx[begin + k] += g[k];
                });
}

Var stack_rows(std::span<const Var> rows) {
  require(!rows.empty(), "stack_rows of an empty list");
  Tape& t = tape_of(rows[0]);
  const std::size_t d = rows[0].value().size();
  Tensor out(Shape{rows.size(), d});
  std::vector<int> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& v = tape_of(rows[0], rows[i]).value(rows[i]);
    if (v.rank() != 1 || v.size() != d) shape_error("stack_rows", rows[0].value().shape(), v.shape());
    std::copy(v.values().begin(), v.values().end(), out.data() + i * d);
    ids.push_back(rows[i].id);
  }
  std::vector<int> captured = ids;
  return t.emit(std::move(out), std::move(ids), [captured, d](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    for (std::size_t i = 0; i < captured.size(); ++i) {
      if (!t.needs_grad(Var{&t, captured[i]})) continue;
      Tensor& gx = t.grad_buffer(captured[i]);
      for (std::size_t k = 0; k < d; ++k) gx[k] += g[i * d + k];
    }
  });
}

Var pick(Var a, std::size_t index) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (index >= av.size())
    throw ContractError("pick index " + std::to_string(index) + " out of range for " +
                        shape_string(av.shape()));
  const int ai = a.id;
  return t.emit(Tensor::scalar(av[index]), {ai}, [ai, index](Tape& t, int self) {
    if (!t.needs_grad(Var{&t, ai})) return;
    t.grad_buffer(ai)[index] += t.grad_buffer(self)[0];
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(std::max(x, kLogFloor)); },
               [](double x, double) { return x > kLogFloor ? 1.0 / x : 0.0; });
}

Var softmax(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (av.rank() == 0 || av.rank() > 2 || axis >= av.rank())
    throw ContractError("softmax: axis " + std::to_string(axis) +
                        " invalid for shape " + shape_string(av.shape()));
  // Describe the tensor as `groups` independent runs of `len` elements that
  // are `stride` apart.
  std::size_t groups = 1, len = av.size(), stride = 1, group_step = 0;
  if (av.rank() == 2) {
    if (axis == 1) {
      groups = av.dim(0); len = av.dim(1); stride = 1; group_step = av.dim(1);
    } else {
      groups = av.dim(1); len = av.dim(0); stride = av.dim(1); group_step = 1;
    }
  }
  Tensor out(av.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * group_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, av[base + k * stride]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(av[base + k * stride] - mx);
      out[base + k * stride] = e;
      z += e;
    }
    for (std::size_t k = 0; k < len; ++k) out[base + k * stride] /= z;
  }
  const int ai = a.id;
  return t.emit(std::move(out), {ai},
                [ai, groups, len, stride, group_step](Tape& t, int self) {
                  if (!t.needs_grad(Var{&t, ai})) return;
                  const Tensor& y = t.value_of(self);
                  const Tensor& g = t.grad_buffer(self);
                  Tensor& gx = t.grad_buffer(ai);
                  for (std::size_t gi = 0; gi < groups; ++gi) {
                    const std::size_t base = gi * group_step;
                    double s = 0.0;
                    for (std::size_t k = 0; k < len; ++k) {
                      const std::size_t p = base + k * stride;
                      s += g[p] * y[p];
                    }
                    for (std::size_t k = 0; k < len; ++k) {
                      const std::size_t p = base + k * stride;
                      gx[p] += y[p] * (g[p] - s);
                    }
                  }
                });
}

Var cross_entropy_logits(Var logits, std::size_t target) {
  Tape& t = tape_of(logits);
  const Tensor& lv = logits.value();
  if (lv.rank() != 1 || target >= lv.size())
    throw ContractError("cross_entropy_logits: target " + std::to_string(target) +
                        " invalid for shape " + shape_string(lv.shape()));
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : lv.values()) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : lv.values()) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  const int li = logits.id;
  return t.emit(Tensor::scalar(lse - lv[target]), {li},
                [li, target, lse](Tape& t, int self) {
                  if (!t.needs_grad(Var{&t, li})) return;
                  const double g = t.grad_buffer(self)[0];
                  const Tensor& x = t.value_of(li);
                  Tensor& gx = t.grad_buffer(li);
                  for (std::size_t k = 0; k < x.size(); ++k)
                    gx[k] += g * (std::exp(x[k] - lse) - (k == target ? 1.0 : 0.0));
                });
}

Var embedding(Var table, std::size_t row) {
  Tape& t = tape_of(table);
  const Tensor& tv = table.value();
  if (tv.rank() != 2 || row >= tv.dim(0))
    throw ContractError("embedding: row " + std::to_string(row) +
                        " out of range for table " + shape_string(tv.shape()));
  const std::size_t d = tv.dim(1);
  std::vector<double> vals(tv.data() + row * d, tv.data() + (row + 1) * d);
  const int ti = table.id;
  return t.emit(Tensor::vector(std::move(vals)), {ti}, [ti, row, d](Tape& t, int self) {
    if (!t.needs_grad(Var{&t, ti})) return;
    const Tensor& g = t.grad_buffer(self);
    Tensor& gt = t.grad_buffer(ti);
    for (std::size_t k = 0; k < d; ++k) gt[row * d + k] += g[k];
  });
}

Var lstm_cell(Var x, Var h, Var c, Var w, Var b) {
  Tape& t = tape_of(x, h);
  tape_of(x, c);
  tape_of(x, w);
  tape_of(x, b);
  const Tensor& xv = x.value();
  const Tensor& hv = h.value();
  const Tensor& cv = c.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  const std::size_t H = hv.size(), in = xv.size(), cols = in + H;
  if (xv.rank() != 1 || hv.rank() != 1 || cv.shape() != hv.shape())
    shape_error("lstm_cell(h,c)", hv.shape(), cv.shape());
  if (wv.rank() != 2 || wv.dim(0) != 4 * H || wv.dim(1) != cols)
    shape_error("lstm_cell(w)", wv.shape(), Shape{4 * H, cols});
  if (bv.rank() != 1 || bv.size() != 4 * H) shape_error("lstm_cell(b)", bv.shape(), Shape{4 * H});

  // gates holds activated (i, f, g, o); tail holds tanh(c').
  std::vector<double> gates(4 * H);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    const double* row = wv.data() + r * cols;
    double s = bv[r];
    for (std::size_t j = 0; j < in; ++j) s += row[j] * xv[j];
    for (std::size_t j = 0; j < H; ++j) s += row[in + j] * hv[j];
    gates[r] = (r >= 2 * H && r < 3 * H) ? std::tanh(s) : sigmoid_scalar(s);
  }
  std::vector<double> tanh_c(H);
  Tensor out(Shape{2 * H});
  for (std::size_t j = 0; j < H; ++j) {
    const double cn = gates[H + j] * cv[j] + gates[j] * gates[2 * H + j];
    tanh_c[j] = std::tanh(cn);
    out[j] = gates[3 * H + j] * tanh_c[j];
    out[H + j] = cn;
  }
  const int xi = x.id, hi = h.id, ci = c.id, wi = w.id, bi = b.id;
  return t.emit(
      std::move(out), {xi, hi, ci, wi, bi},
      [xi, hi, ci, wi, bi, H, in, cols, gates = std::move(gates),
       tanh_c = std::move(tanh_c)](Tape& t, int self) {
        const Tensor& g = t.grad_buffer(self);
        const Tensor& xv = t.value_of(xi);
        const Tensor& hv = t.value_of(hi);
        const Tensor& cv = t.value_of(ci);
        const Tensor& wv = t.value_of(wi);
        std::vector<double> dz(4 * H);
        std::vector<double> dc_prev(H);
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = gates[j], fg = gates[H + j], gg = gates[2 * H + j],
                       og = gates[3 * H + j];
          const double dh = g[j];
          const double dc = g[H + j] + dh * og * (1.0 - tanh_c[j] * tanh_c[j]);
          const double d_o = dh * tanh_c[j];
          dz[j] = dc * gg * ig * (1.0 - ig);
          dz[H + j] = dc * cv[j] * fg * (1.0 - fg);
          dz[2 * H + j] = dc * ig * (1.0 - gg * gg);
          dz[3 * H + j] = d_o * og * (1.0 - og);
          dc_prev[j] = dc * fg;
        }
        if (t.needs_grad(Var{&t, ci})) {
          Tensor& gc = t.grad_buffer(ci);
          for (std::size_t j = 0; j < H; ++j) gc[j] += dc_prev[j];
        }
        if (t.needs_grad(Var{&t, bi})) {
          Tensor& gb = t.grad_buffer(bi);
          for (std::size_t r = 0; r < 4 * H; ++r) gb[r] += dz[r];
        }
        if (t.needs_grad(Var{&t, wi})) {
          Tensor& gw = t.grad_buffer(wi);
          for (std::size_t r = 0; r < 4 * H; ++r) {
            const double d = dz[r];
            if (d == 0.0) continue;
            double* row = gw.data() + r * cols;
            for (std::size_t j = 0; j < in; ++j) row[j] += d * xv[j];
            for (std::size_t j = 0; j < H; ++j) row[in + j] += d * hv[j];
          }
        }
        const bool gx_needed = t.needs_grad(Var{&t, xi});
        const bool gh_needed = t.needs_grad(Var{&t, hi});
        if (gx_needed || gh_needed) {
          std::vector<double> dxh(cols, 0.0);
          for (std::size_t r = 0; r < 4 * H; ++r) {
            const double d = dz[r];
            if (d == 0.0) continue;
            const double* row = wv.data() + r * cols;
            for (std::size_t j = 0; j < cols; ++j) dxh[j] += d * row[j];
          }
          if (gx_needed) {
            Tensor& gx = t.grad_buffer(xi);
            for (std::size_t j = 0; j < in; ++j) gx[j] += dxh[j];
          }
          if (gh_needed) {
            Tensor& gh = t.grad_buffer(hi);
            for (std::size_t j = 0; j < H; ++j) gh[j] += dxh[in + j];
          }
        }
      });
}

Var copy_mix(Var vocab, Var attn, Var p_gen, std::span<const int> source,
             std::size_t ext_size) {
  Tape& t = tape_of(vocab, attn);
  tape_of(vocab, p_gen);
  const Tensor& pv = vocab.value();
  const Tensor& av = attn.value();
  const Tensor& gv = p_gen.value();
  if (pv.rank() != 1 || pv.size() > ext_size)
    shape_error("copy_mix(vocab)", pv.shape(), Shape{ext_size});
  if (av.rank() != 1 || av.size() != source.size())
    shape_error("copy_mix(attn)", av.shape(), Shape{source.size()});
  if (gv.size() != 1) shape_error("copy_mix(p_gen)", gv.shape(), Shape{});
  for (int s : source)
    if (s < 0 || static_cast<std::size_t>(s) >= ext_size)
      throw ContractError("copy_mix: source id " + std::to_string(s) +
                          " outside extended vocabulary of size " +
                          std::to_string(ext_size));
  const double pg = gv[0];
  Tensor out(Shape{ext_size});
  for (std::size_t w = 0; w < pv.size(); ++w) out[w] = pg * pv[w];
  for (std::size_t i = 0; i < source.size(); ++i) out[source[i]] += (1.0 - pg) * av[i];
  const int vi = vocab.id, ai = attn.id, gi = p_gen.id;
  std::vector<int> src(source.begin(), source.end());
  return t.emit(std::move(out), {vi, ai, gi}, [vi, ai, gi, src](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& pv = t.value_of(vi);
    const Tensor& av = t.value_of(ai);
    const double pg = t.value_of(gi)[0];
    if (t.needs_grad(Var{&t, vi})) {
      Tensor& gvocab = t.grad_buffer(vi);
      for (std::size_t w = 0; w < pv.size(); ++w) gvocab[w] += pg * g[w];
    }
    if (t.needs_grad(Var{&t, ai})) {
      Tensor& gattn = t.grad_buffer(ai);
      for (std::size_t i = 0; i < src.size(); ++i) gattn[i] += (1.0 - pg) * g[src[i]];
    }
    if (t.needs_grad(Var{&t, gi})) {
      double d = 0.0;
      for (std::size_t w = 0; w < pv.size(); ++w) d += pv[w] * g[w];
      for (std::size_t i = 0; i < src.size(); ++i) d -= av[i] * g[src[i]];
      t.grad_buffer(gi)[0] += d;
    }
  });
}

// ---- gradient checking ---------------------------------------------------

GradCheckResult grad_check(const LossFn& f, ParameterSet& params,
                           const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0 && options.epsilon <= 1e-2))
    throw ContractError("grad_check epsilon must lie in (0, 1e-2]");
  params.zero_grad();
  {
    Tape tape(&params);
    Var loss = f(tape);
    tape.backward(loss);
  }
  std::vector<std::pair<ParamId, std::size_t>> coords;
  for (ParamId p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < params.value(p).size(); ++k) coords.emplace_back(p, k);
  if (coords.size() > options.samples) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.samples);
  }
  auto eval = [&]() {
    Tape tape(&params, false);
    return f(tape).value().item();
  };
  const double floor = options.abs_floor / options.tolerance;
  GradCheckResult result;
  for (auto [p, k] : coords) {
    double& x = params.value(p)[k];
    const double saved = x;
    x = saved + options.epsilon;
    const double up = eval();
    x = saved - options.epsilon;
    const double down = eval();
    x = saved;
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double analytic = params.grad(p)[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - analytic) / denom);
    ++result.checked;
  }
  result.passed = result.max_rel_error <= options.tolerance;
  params.zero_grad();
  return result;
}

}  // namespace factsum::ad
