#pragma once

// Dense 64-bit arrays with a tape-free reverse-mode autodiff graph.
//
// A Var is a shared handle to a Node. Every op computes its value eagerly and
// records a closure that pushes the output gradient back into its parents.
// Parameters are leaf Vars that persist across steps; their gradients
// accumulate until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uniex::nd {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array scalar(double v) { return Array({1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Node {
  Array value;
  Array grad;  // empty until the first gradient arrives
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  Array& ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Array& value() const { return node_->value; }
  Array& mutable_value() { return node_->value; }
  const Array& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad() { node_->grad = Array(); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Array value);
Var parameter(Array value);

// Primitive ops. Each throws ShapeError naming both shapes on mismatch.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
// a: (n, m), bias: (m) broadcast over rows.
Var add_row(const Var& a, const Var& bias);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var gelu(const Var& a);
// Softmax over the last axis of a 2-D array after adding `additive_mask`
// (same shape, constant). Use kMaskedLogit for forbidden cells.
Var softmax_rows(const Var& a, const Array& additive_mask);
// Normalizes each row of a 2-D array, then applies gain and bias (both (m)).
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
// Row gather: out[i] = table[ids[i]]. Used for embedding lookup and for
// selecting anchor/text rows.
Var gather_rows(const Var& table, std::span<const std::size_t> ids);
Var reshape(const Var& a, Shape shape);
Var transpose(const Var& a);
Var permute(const Var& a, std::span<const std::size_t> axes);
Var reduce_sum(const Var& a);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
// f: (r, p), g: (r, q) -> out[r, p, q] = f[r, p] + g[r, q].
Var outer_add(const Var& f, const Var& g);
// Sum over cells with valid != 0 of -(y log s + (1-y) log(1-s)), with s
// clamped to [kBceEps, 1 - kBceEps]. Invalid cells carry zero gradient.
Var masked_bce(const Var& scores, const Array& target, const Array& valid);
// masked_bce(sigmoid(logits), ...) evaluated in logit space: the clamp
// becomes |z| <= logit(1 - kBceEps) and saturated cells keep full precision.
Var masked_bce_logits(const Var& logits, const Array& target, const Array& valid);

inline constexpr double kMaskedLogit = -1e9;
inline constexpr double kBceEps = 1e-12;

double bce(double y, double y_hat);

// Populates gradients of every node reachable from `loss` that requires
// them. Gradients accumulate into existing ones.
void backward(const Var& loss);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares backward() against central differences for every element of
// every parameter. `build_loss` must build a fresh scalar graph from the
// current parameter values on each call.
GradCheckResult grad_check(const std::function<Var()>& build_loss,
                           std::span<const Var> params, double h = 1e-5);

double relative_error(double analytic, double numeric);

namespace testing {
// Deliberately corrupted backward rules for mutation tests.
enum class Fault { none, gelu_backward, matmul_backward };
void set_fault(Fault fault);
Fault fault();
}  // namespace testing

}  // namespace uniex::nd
