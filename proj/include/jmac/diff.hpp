// Dense 2-D tensors with tape-based reverse-mode differentiation.
//
// Every value is a row-major matrix of doubles; vectors are 1 x n or m x 1
// and scalars are 1 x 1. Operations record their parents and a backward
// closure whenever any input requires a gradient. Reductions always run in
// ascending index order so forward values and gradients are bit-stable.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmac::diff {

class DiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix row(std::vector<double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

// Handle to a node in the computation graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const;

  void zero_grad();
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Copy of the value with no gradient connection.
Tensor detach(const Tensor& t);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Adds a 1 x n row to every row of `a`.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double shift);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor tanh(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor l1_norm_rows(const Tensor& a);
// Row-wise 1 - cos(a_i, b_i); throws on a zero-norm row.
Tensor cosine_distance_rows(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);
// Softmax over the entries of an m x 1 column grouped by segment id.
Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segment,
                       std::size_t segment_count);
// out[index[i]] += weights[i] * values[i]; rows never indexed stay zero.
Tensor scatter_weighted_sum(const Tensor& values, const Tensor& weights,
                            std::span<const std::size_t> index, std::size_t out_rows);

// Accumulates d loss / d leaf into every reachable leaf that requires a grad.
// Leaf gradients are not cleared first, so repeated calls accumulate.
void backward(const Tensor& loss);

double cosine_distance(std::span<const double> u, std::span<const double> v);

enum class Activation { kIdentity, kTanh, kLeakyRelu };

inline constexpr double kLeakySlope = 0.01;

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
  Activation activation = Activation::kIdentity;
};

class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}; activations has dims.size() - 1 entries.
  Mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
      std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;
  std::size_t in_dim() const;
  std::size_t out_dim() const;

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Tensor> parameters() const;

 private:
  std::vector<Linear> layers_;
};

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
};

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Adam() = default;
  Adam(std::vector<Tensor> params, double lr);

  // Applies one bias-corrected update from the current grads.
  // Throws before touching any parameter if a gradient is non-finite.
  void step();
  void zero_grad();

  double learning_rate() const { return lr_; }
  long timestep() const { return timestep_; }
  void set_timestep(long t) { timestep_ = t; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  double lr_ = 1e-3;
  long timestep_ = 0;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const std::function<Tensor(const Tensor&)>& fn, const Matrix& input,
                  double step);

}  // namespace jmac::diff
