#pragma once

// Minimal reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape records forward operations in creation order; every op appends one
// node, so the node vector is already topologically sorted and backward()
// walks it once in reverse. Parameters live in a ParameterSet outside any
// tape; a tape references them through leaf nodes and backward() adds the
// leaf gradients into ParameterSet::grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace factsum::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Raised on shape mismatches and other violated op preconditions.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }
  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor(Shape{n}, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool is_scalar() const { return values_.size() == 1 && rank() <= 1; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
  double item() const;

  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

using ParamId = std::size_t;

// Named trainable tensors (theta) plus their accumulated gradients.
class ParameterSet {
 public:
  ParamId add(const std::string& name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  ParamId id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& value(ParamId id) { return values_.at(id); }
  const Tensor& value(ParamId id) const { return values_.at(id); }
  Tensor& grad(ParamId id) { return grads_.at(id); }
  const Tensor& grad(ParamId id) const { return grads_.at(id); }

  void zero_grad();
  std::size_t num_scalars() const;
  double grad_norm() const;
  // Rescales all gradients so the global L2 norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  // Versioned binary checkpoint: magic, version, then per tensor the name,
  // rank, dims and raw little-endian float64 values.
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  // Loads values into already-declared tensors; names and shapes must match.
  void load(std::istream& in);
  void load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::unordered_map<std::string, ParamId> index_;
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t size() const { return value().size(); }
};

class Tape {
 public:
  // With record == false no backward closures are stored (inference mode).
  explicit Tape(ParameterSet* params = nullptr, bool record = true);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  ParameterSet* params() const { return params_; }

  Var constant(Tensor value);
  Var constant(double v) { return constant(Tensor::scalar(v)); }
  // Leaf for a parameter; repeated calls return the same node.
  Var param(ParamId id);
  Var param(const std::string& name);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Seeds d loss / d loss = 1 and propagates. Parameter leaf gradients are
  // added into the ParameterSet gradients (accumulating across calls).
  void backward(Var loss, double seed = 1.0);

  // Op plumbing, used by the op implementations.
  using Backward = std::function<void(Tape&, int self)>;
  Var emit(Tensor value, std::vector<int> inputs, Backward back);
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  Tensor& grad_buffer(int id);
  const Tensor& value_of(int id) const { return nodes_[id].value; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward back;
    std::vector<int> inputs;
    bool needs_grad = false;
    bool is_param = false;
    ParamId param = 0;
  };

  ParameterSet* params_;
  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<ParamId, int> param_nodes_;
};

// ---- forward ops ---------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                       // elementwise
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var sum(Var a);                              // all elements -> scalar
Var sum(std::span<const Var> xs);            // n-ary same-shape sum
Var dot(Var a, Var b);                       // 1-D vectors -> scalar
Var matmul(Var a, Var b);                    // [m,k]x[k,n] or [m,k]x[k]
Var vecmat(Var v, Var m);                    // [n]x[n,d] -> [d]
Var add_row(Var m, Var v);                   // [n,d] + [d] broadcast
Var concat(std::span<const Var> xs);         // 1-D pieces
Var slice(Var a, std::size_t begin, std::size_t length);  // 1-D
Var stack_rows(std::span<const Var> rows);   // k x [d] -> [k,d]
Var pick(Var a, std::size_t index);          // element -> scalar
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);                              // guarded below by kLogFloor
Var softmax(Var a, std::size_t axis = 0);    // 1-D, or 2-D along axis 0/1
Var cross_entropy_logits(Var logits, std::size_t target);  // -log softmax[t]
Var embedding(Var table, std::size_t row);   // [V,E] -> [E]

// One LSTM step. x:[in], h:[H], c:[H], w:[4H, in+H], b:[4H] with gate order
// (input, forget, candidate, output). Returns [2H] holding [h'; c'].
Var lstm_cell(Var x, Var h, Var c, Var w, Var b);

// Pointer-generator blend over an extended vocabulary of size ext_size:
//   out[w] = p_gen * vocab[w] + (1 - p_gen) * sum_{i : source[i] == w} attn[i]
// vocab:[V] with V <= ext_size, attn:[N], p_gen: scalar.
Var copy_mix(Var vocab, Var attn, Var p_gen, std::span<const int> source,
             std::size_t ext_size);

inline constexpr double kLogFloor = 1e-300;

// ---- gradient checking ---------------------------------------------------

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Absolute error below which a coordinate counts as agreeing; folded into
  // the normaliser as abs_floor / tolerance.
  double abs_floor = 1e-6;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

using LossFn = std::function<Var(Tape&)>;

// Compares backward() against central finite differences on a random
// subsample of parameter coordinates (all of them when fewer than samples).
GradCheckResult grad_check(const LossFn& f, ParameterSet& params,
                           const GradCheckOptions& options = {});

}  // namespace factsum::ad
