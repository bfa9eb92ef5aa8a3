#include "jmac/diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace jmac::diff {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DiffError("matrix data size does not match shape");
  }
}

Matrix Matrix::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(1, n, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DiffError(what);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " + shape_string(a) +
                               " vs " + shape_string(b));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

bool wants_grad(const Node& n) { return n.requires_grad; }

Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  node->requires_grad = any;
  if (any) {
    node->parents.reserve(inputs.size());
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// c += a * b
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a * b^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data().data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data().data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c(i, j) += acc;
    }
  }
}

// c += a^T * b
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      double* crow = c.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename F>
Tensor unary(const Tensor& a, F&& f, std::function<void(Node&)> bw) {
  Matrix out(a.rows(), a.cols());
  const auto& in = a.value().data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {a}, std::move(bw));
}

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->grad = Matrix(value.rows(), value.cols());
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

double Tensor::item() const {
  require(node_->value.size() == 1, "item(): tensor is not a scalar " +
                                        shape_string(node_->value));
  return node_->value[0];
}

void Tensor::zero_grad() {
  node_->grad = Matrix(node_->value.rows(), node_->value.cols());
}

Tensor detach(const Tensor& t) { return Tensor::constant(t.value()); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: shape mismatch " + shape_string(a.value()) +
                                    " x " + shape_string(b.value()));
  Matrix out(a.rows(), b.cols());
  gemm_nn(a.value(), b.value(), out);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (wants_grad(pa)) gemm_nt(self.grad, pb.value, pa.grad);
    if (wants_grad(pb)) gemm_tn(pa.value, self.grad, pb.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      Node& in = parent(self, p);
      if (!wants_grad(in)) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (wants_grad(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (wants_grad(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (wants_grad(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa.grad[i] += self.grad[i] * pb.value[i];
    if (wants_grad(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb.grad[i] += self.grad[i] * pa.value[i];
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_row: shape mismatch " + shape_string(a.value()) + " + " +
              shape_string(row.value()));
  Matrix out = a.value();
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) += row.value()[c];
  return make_result(std::move(out), {a, row}, [n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pr = parent(self, 1);
    if (wants_grad(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (wants_grad(pr))
      for (std::size_t r = 0; r < self.grad.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) pr.grad[c] += self.grad(r, c);
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](Node& self) {
        Node& in = parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += factor * self.grad[i];
      });
}

Tensor add_scalar(const Tensor& a, double shift) {
  return unary(
      a, [shift](double x) { return x + shift; },
      [](Node& self) {
        Node& in = parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row count mismatch");
    offsets.push_back(total);
    total += p.cols();
  }
  Matrix out(rows, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Matrix& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row_span(r).begin(), v.row_span(r).end(), out.row_span(r).begin() + offsets[k]);
  }
  return make_result(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& in = parent(self, k);
      if (!wants_grad(in)) continue;
      const std::size_t w = in.value.cols();
      for (std::size_t r = 0; r < self.grad.rows(); ++r)
        for (std::size_t c = 0; c < w; ++c) in.grad(r, c) += self.grad(r, offsets[k] + c);
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= a.cols(), "slice_cols: range out of bounds");
  Matrix out(a.rows(), end - begin);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = a.value()(r, c);
  return make_result(std::move(out), {a}, [begin](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < self.grad.cols(); ++c) in.grad(r, begin + c) += self.grad(r, c);
  });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](Node& self) {
        Node& in = parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.value[i];
          in.grad[i] += self.grad[i] * (1.0 - y * y);
        }
      });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](Node& self) {
        Node& in = parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          in.grad[i] += self.grad[i] * (in.value[i] > 0.0 ? 1.0 : slope);
      });
}

Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor log(const Tensor& a) {
  for (double x : a.value().data()) require(x > 0.0, "log: non-positive input");
  return unary(
      a, [](double x) { return std::log(x); },
      [](Node& self) {
        Node& in = parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i] / in.value[i];
      });
}

Tensor softmax_rows(const Tensor& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.value().row_span(r);
    auto o = out.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (o[c] = std::exp(in[c] - mx));
    for (double& v : o) v /= z;
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      auto y = self.value.row_span(r);
      auto dy = self.grad.row_span(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < y.size(); ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < y.size(); ++c) in.grad(r, c) += y[c] * (dy[c] - dot);
    }
  });
}

Tensor l1_norm_rows(const Tensor& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (double x : a.value().row_span(r)) s += std::abs(x);
    out(r, 0) = s;
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t r = 0; r < in.value.rows(); ++r) {
      const double g = self.grad(r, 0);
      for (std::size_t c = 0; c < in.value.cols(); ++c) {
        const double x = in.value(r, c);
        // subgradient at 0 is 0
        in.grad(r, c) += x > 0.0 ? g : (x < 0.0 ? -g : 0.0);
      }
    }
  });
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "cosine_distance: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  require(nu > 0.0 && nv > 0.0, "zero-norm embedding");
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

Tensor cosine_distance_rows(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "cosine_distance_rows");
  const std::size_t m = a.rows(), n = a.cols();
  Matrix out(m, 1);
  // per row: dot, |a|, |b|
  std::vector<double> stats(3 * m);
  for (std::size_t r = 0; r < m; ++r) {
    auto u = a.value().row_span(r);
    auto v = b.value().row_span(r);
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      dot += u[c] * v[c];
      nu += u[c] * u[c];
      nv += v[c] * v[c];
    }
    require(nu > 0.0 && nv > 0.0, "zero-norm embedding");
    stats[3 * r] = dot;
    stats[3 * r + 1] = std::sqrt(nu);
    stats[3 * r + 2] = std::sqrt(nv);
    out(r, 0) = 1.0 - dot / (stats[3 * r + 1] * stats[3 * r + 2]);
  }
  return make_result(std::move(out), {a, b}, [stats = std::move(stats), n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      const double g = self.grad(r, 0);
      const double dot = stats[3 * r], na = stats[3 * r + 1], nb = stats[3 * r + 2];
      const double cos = dot / (na * nb);
      for (std::size_t c = 0; c < n; ++c) {
        const double u = pa.value(r, c), v = pb.value(r, c);
        if (wants_grad(pa)) pa.grad(r, c) -= g * (v / (na * nb) - cos * u / (na * na));
        if (wants_grad(pb)) pb.grad(r, c) -= g * (u / (na * nb) - cos * v / (nb * nb));
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return make_result(Matrix(1, 1, s), {a}, [](Node& self) {
    Node& in = parent(self, 0);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += g;
  });
}

Tensor mean(const Tensor& a) {
  require(a.value().size() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t n = a.cols();
  Matrix out(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < a.rows(), "gather_rows: index out of range");
    auto src = a.value().row_span(index[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx), n](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = in.grad.data().data() + idx[i] * n;
      const double* src = self.grad.data().data() + i * n;
      for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
    }
  });
}

Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segment,
                       std::size_t segment_count) {
  require(logits.cols() == 1, "segment_softmax: logits must be a column");
  require(logits.rows() == segment.size(), "segment_softmax: segment size mismatch");
  const std::size_t m = logits.rows();
  std::vector<double> mx(segment_count, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i) {
    require(segment[i] < segment_count, "segment_softmax: segment id out of range");
    mx[segment[i]] = std::max(mx[segment[i]], logits.value()[i]);
  }
  Matrix out(m, 1);
  std::vector<double> z(segment_count, 0.0);
  for (std::size_t i = 0; i < m; ++i) z[segment[i]] += (out[i] = std::exp(logits.value()[i] - mx[segment[i]]));
  for (std::size_t i = 0; i < m; ++i) out[i] /= z[segment[i]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return make_result(std::move(out), {logits},
                     [seg = std::move(seg), segment_count](Node& self) {
                       Node& in = parent(self, 0);
                       std::vector<double> dot(segment_count, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         dot[seg[i]] += self.grad[i] * self.value[i];
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         in.grad[i] += self.value[i] * (self.grad[i] - dot[seg[i]]);
                     });
}

Tensor scatter_weighted_sum(const Tensor& values, const Tensor& weights,
                            std::span<const std::size_t> index, std::size_t out_rows) {
  require(weights.cols() == 1 && weights.rows() == values.rows(),
          "scatter_weighted_sum: weights must be one per row");
  require(index.size() == values.rows(), "scatter_weighted_sum: index size mismatch");
  const std::size_t n = values.cols();
  Matrix out(out_rows, n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < out_rows, "scatter_weighted_sum: index out of range");
    const double w = weights.value()[i];
    auto src = values.value().row_span(i);
    auto dst = out.row_span(index[i]);
    for (std::size_t c = 0; c < n; ++c) dst[c] += w * src[c];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(std::move(out), {values, weights}, [idx = std::move(idx), n](Node& self) {
    Node& pv = parent(self, 0);
    Node& pw = parent(self, 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto g = self.grad.row_span(idx[i]);
      if (wants_grad(pv)) {
        const double w = pw.value[i];
        for (std::size_t c = 0; c < n; ++c) pv.grad(i, c) += w * g[c];
      }
      if (wants_grad(pw)) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += g[c] * pv.value(i, c);
        pw.grad[i] += acc;
      }
    }
  });
}

void backward(const Tensor& loss) {
  require(loss.defined() && loss.value().size() == 1,
          "backward: loss must be a scalar tensor");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->is_leaf || !n->value.same_shape(n->grad)) {
      n->grad = Matrix(n->value.rows(), n->value.cols());
    }
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

Mlp::Mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
         std::mt19937_64& rng) {
  require(dims.size() >= 2 && activations.size() == dims.size() - 1,
          "Mlp: activations must match layer count");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(in, out);
    for (double& x : w.data()) x = dist(rng);
    layers_.push_back({Tensor::parameter(std::move(w)), Tensor::parameter(Matrix(1, out)),
                       activations[l]});
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : layers_) {
    h = add_row(matmul(h, layer.weight), layer.bias);
    switch (layer.activation) {
      case Activation::kIdentity:
        break;
      case Activation::kTanh:
        h = tanh(h);
        break;
      case Activation::kLeakyRelu:
        h = leaky_relu(h, kLeakySlope);
        break;
    }
  }
  return h;
}

std::size_t Mlp::in_dim() const { return layers_.front().weight.rows(); }
std::size_t Mlp::out_dim() const { return layers_.back().weight.cols(); }

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

Adam::Adam(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {
  states_.reserve(params_.size());
  for (const auto& p : params_) {
    states_.push_back({Matrix(p.rows(), p.cols()), Matrix(p.rows(), p.cols())});
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.value().same_shape(p.grad())) continue;
    for (double g : p.grad().data())
      if (!std::isfinite(g)) throw DiffError("non-finite gradient");
  }
  ++timestep_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(timestep_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(timestep_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.value().same_shape(p.grad())) continue;
    AdamState& s = states_[i];
    Matrix& v = p.mutable_value();
    const Matrix& g = p.grad();
    for (std::size_t j = 0; j < v.size(); ++j) {
      s.first_moment[j] = kBeta1 * s.first_moment[j] + (1.0 - kBeta1) * g[j];
      s.second_moment[j] = kBeta2 * s.second_moment[j] + (1.0 - kBeta2) * g[j] * g[j];
      const double mhat = s.first_moment[j] / c1;
      const double vhat = s.second_moment[j] / c2;
      v[j] -= lr_ * mhat / (std::sqrt(vhat) + kEpsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double grad_check(const std::function<Tensor(const Tensor&)>& fn, const Matrix& input,
                  double step) {
  Tensor x = Tensor::parameter(input);
  backward(fn(x));
  const Matrix analytic = x.grad();
  double worst = 0.0;
  Matrix probe = input;
  for (std::size_t i = 0; i < input.size(); ++i) {
    probe[i] = input[i] + step;
    const double up = fn(Tensor::constant(probe)).item();
    probe[i] = input[i] - step;
    const double down = fn(Tensor::constant(probe)).item();
    probe[i] = input[i];
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace jmac::diff
