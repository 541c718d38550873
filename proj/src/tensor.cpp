#include "protoseg/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace protoseg {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void require_valid_shape(std::span<const std::size_t> shape) {
  if (shape.empty()) throw std::invalid_argument("tensor: rank must be >= 1");
  for (auto d : shape)
    if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
}

NodeRef make_node(std::vector<std::size_t> shape, const char* op) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values.resize(shape_product(n->shape));
  n->op = op;
  return n;
}

bool wants_grad(std::initializer_list<const Tensor*> ins) {
  for (auto* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

void count_op(std::uint64_t flops) {
  auto& s = op_stats();
  s.tensor_ops += 1;
  s.flops += flops;
}

// Sequential clamped BCE sum; op and table paths share it so both see
// identical rounding.
double bce_sum(std::span<const double> pred, std::span<const double> target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
    const double t = target[i];
    acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  return acc;
}

}  // namespace

std::string shape_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

OpStats& op_stats() {
  thread_local OpStats stats;
  return stats;
}

double* TensorNode::grad_data() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad.data();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  require_valid_shape(shape);
  auto n = make_node(std::move(shape), "leaf");
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.mutable_values().begin(), t.mutable_values().end(), value);
  return t;
}

Tensor Tensor::from(std::vector<double> values, std::vector<std::size_t> shape,
                    bool requires_grad) {
  require_valid_shape(shape);
  if (values.size() != shape_product(shape))
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_string(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({value}, {1}, requires_grad);
}

namespace {

const TensorNode& deref(const NodeRef& n) {
  if (!n) throw std::invalid_argument("tensor: use of an undefined tensor");
  return *n;
}

}  // namespace

const std::vector<std::size_t>& Tensor::shape() const { return deref(node_).shape; }
std::size_t Tensor::size() const { return deref(node_).values.size(); }
std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("tensor: rows() on shape " + shape_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("tensor: cols() on shape " + shape_string(shape()));
  return shape()[1];
}

bool Tensor::requires_grad() const { return deref(node_).requires_grad; }

std::span<const double> Tensor::values() const {
  const auto& n = deref(node_);
  return {n.values.data(), n.values.size()};
}

std::span<double> Tensor::mutable_values() {
  deref(node_);
  return {node_->values.data(), node_->values.size()};
}

std::span<const double> Tensor::grad() const {
  const auto& n = deref(node_);
  return {n.grad.data(), n.grad.size()};
}

bool Tensor::has_grad() const { return !deref(node_).grad.empty(); }

void Tensor::zero_grad() {
  deref(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("tensor: item() on non-scalar shape " + shape_string(shape()));
  return values()[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: operands must be rank-2, got " +
                                shape_string(a.shape()) + " and " + shape_string(b.shape()));
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_string(a.shape()) +
                                " x " + shape_string(b.shape()));
  const std::size_t r = a.rows(), s = a.cols(), t = b.cols();
  auto out = make_node({r, t}, "matmul");
  ECMap ma(a.values().data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
  ECMap mb(b.values().data(), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
  EMap mc(out->values.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
  mc.noalias() = ma * mb;
  count_op(static_cast<std::uint64_t>(r) * s * t);
  if (wants_grad({&a, &b})) {
    out->requires_grad = true;
    out->parents = {a.node(), b.node()};
    NodeRef pa = a.node(), pb = b.node();
    out->backward_fn = [pa, pb, r, s, t](TensorNode& self) {
      count_op(2ull * r * s * t);
      ECMap g(self.grad.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
      if (pa->requires_grad) {
        EMap ga(pa->grad_data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
        ECMap vb(pb->values.data(), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        ga.noalias() += g * vb.transpose();
      }
      if (pb->requires_grad) {
        EMap gb(pb->grad_data(), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        ECMap va(pa->values.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
        gb.noalias() += va.transpose() * g;
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul_nt: operands must be rank-2, got " +
                                shape_string(a.shape()) + " and " + shape_string(b.shape()));
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: inner dimensions disagree: " +
                                shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  const std::size_t r = a.rows(), s = a.cols(), t = b.rows();
  auto out = make_node({r, t}, "matmul_nt");
  ECMap ma(a.values().data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
  ECMap mb(b.values().data(), static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
  EMap mc(out->values.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
  mc.noalias() = ma * mb.transpose();
  count_op(static_cast<std::uint64_t>(r) * s * t);
  if (wants_grad({&a, &b})) {
    out->requires_grad = true;
    out->parents = {a.node(), b.node()};
    NodeRef pa = a.node(), pb = b.node();
    out->backward_fn = [pa, pb, r, s, t](TensorNode& self) {
      count_op(2ull * r * s * t);
      ECMap g(self.grad.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
      if (pa->requires_grad) {
        EMap ga(pa->grad_data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
        ECMap vb(pb->values.data(), static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
        ga.noalias() += g * vb;
      }
      if (pb->requires_grad) {
        EMap gb(pb->grad_data(), static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
        ECMap va(pa->values.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
        gb.noalias() += g.transpose() * va;
      }
    };
  }
  return Tensor(std::move(out));
}

namespace {

// Shared scaffolding for same-shape binary ops.
template <class Fwd, class Bwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  require_same_shape(name, a, b);
  auto out = make_node(a.shape(), name);
  const auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = fwd(va[i], vb[i]);
  count_op(out->values.size());
  if (wants_grad({&a, &b})) {
    out->requires_grad = true;
    out->parents = {a.node(), b.node()};
    NodeRef pa = a.node(), pb = b.node();
    out->backward_fn = [pa, pb, bwd](TensorNode& self) {
      count_op(self.grad.size());
      bwd(*pa, *pb, self);
    };
  }
  return Tensor(std::move(out));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](TensorNode& pa, TensorNode& pb, TensorNode& self) {
        if (pa.requires_grad) {
          double* g = pa.grad_data();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          double* g = pb.grad_data();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](TensorNode& pa, TensorNode& pb, TensorNode& self) {
        if (pa.requires_grad) {
          double* g = pa.grad_data();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          double* g = pb.grad_data();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](TensorNode& pa, TensorNode& pb, TensorNode& self) {
        if (pa.requires_grad) {
          double* g = pa.grad_data();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.values[i];
        }
        if (pb.requires_grad) {
          double* g = pb.grad_data();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.values[i];
        }
      });
}

namespace {

template <class Fwd, class Bwd>
Tensor unary_op(const char* name, const Tensor& t, Fwd fwd, Bwd bwd) {
  auto out = make_node(t.shape(), name);
  const auto v = t.values();
  for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = fwd(v[i]);
  count_op(out->values.size());
  if (t.requires_grad()) {
    out->requires_grad = true;
    out->parents = {t.node()};
    NodeRef p = t.node();
    out->backward_fn = [p, bwd](TensorNode& self) {
      count_op(self.grad.size());
      double* g = p->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i] * bwd(p->values[i], self.values[i]);
    };
  }
  return Tensor(std::move(out));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor relu(const Tensor& t) {
  // Subgradient at exactly 0 is defined as 0.
  return unary_op(
      "relu", t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& t) {
  return unary_op(
      "tanh", t, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& t) {
  return unary_op(
      "sigmoid", t, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor scale(const Tensor& t, double factor) {
  return unary_op(
      "scale", t, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor reduce(Reduce op, const Tensor& t, std::size_t axis) {
  const auto& shape = t.shape();
  if (axis >= shape.size())
    throw std::invalid_argument("reduce: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_string(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t na = shape[axis];

  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  const char* name = op == Reduce::sum ? "reduce_sum" : op == Reduce::mean ? "reduce_mean" : "reduce_max";
  auto out = make_node(out_shape, name);
  const auto v = t.values();
  std::vector<std::size_t> argmax;
  if (op == Reduce::max) argmax.resize(outer * inner);

  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * na * inner + in;
      if (op == Reduce::max) {
        double best = v[base];
        std::size_t best_j = 0;
        for (std::size_t j = 1; j < na; ++j) {
          const double x = v[base + j * inner];
          if (x > best) {  // ties keep the first index
            best = x;
            best_j = j;
          }
        }
        out->values[o * inner + in] = best;
        argmax[o * inner + in] = best_j;
      } else {
        double acc = 0.0;
        for (std::size_t j = 0; j < na; ++j) acc += v[base + j * inner];
        out->values[o * inner + in] = op == Reduce::mean ? acc / static_cast<double>(na) : acc;
      }
    }
  }
  count_op(t.size());

  if (t.requires_grad()) {
    out->requires_grad = true;
    out->parents = {t.node()};
    NodeRef p = t.node();
    out->backward_fn = [p, op, outer, inner, na, argmax = std::move(argmax)](TensorNode& self) {
      count_op(p->values.size());
      double* g = p->grad_data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const double up = self.grad[o * inner + in];
          const std::size_t base = o * na * inner + in;
          switch (op) {
            case Reduce::sum:
              for (std::size_t j = 0; j < na; ++j) g[base + j * inner] += up;
              break;
            case Reduce::mean:
              for (std::size_t j = 0; j < na; ++j)
                g[base + j * inner] += up / static_cast<double>(na);
              break;
            case Reduce::max:
              g[base + argmax[o * inner + in] * inner] += up;
              break;
          }
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor reduce_sum(const Tensor& t, std::size_t axis) { return reduce(Reduce::sum, t, axis); }
Tensor reduce_mean(const Tensor& t, std::size_t axis) { return reduce(Reduce::mean, t, axis); }
Tensor reduce_max(const Tensor& t, std::size_t axis) { return reduce(Reduce::max, t, axis); }

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx) {
  if (t.rank() != 2)
    throw std::invalid_argument("gather_rows: expected rank-2, got " + shape_string(t.shape()));
  const std::size_t n = t.rows(), f = t.cols();
  for (auto i : idx)
    if (i >= n)
      throw std::invalid_argument("gather_rows: index " + std::to_string(i) +
                                  " out of range for " + std::to_string(n) + " rows");
  if (idx.empty()) throw std::invalid_argument("gather_rows: empty index list");
  auto out = make_node({idx.size(), f}, "gather_rows");
  const auto v = t.values();
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(v.data() + idx[i] * f, f, out->values.data() + i * f);
  count_op(idx.size() * f);
  if (t.requires_grad()) {
    out->requires_grad = true;
    out->parents = {t.node()};
    NodeRef p = t.node();
    std::vector<std::size_t> idx_copy(idx.begin(), idx.end());
    out->backward_fn = [p, f, idx_copy = std::move(idx_copy)](TensorNode& self) {
      count_op(idx_copy.size() * f);
      double* g = p->grad_data();
      for (std::size_t i = 0; i < idx_copy.size(); ++i) {
        const double* up = self.grad.data() + i * f;
        double* dst = g + idx_copy[i] * f;
        for (std::size_t j = 0; j < f; ++j) dst[j] += up[j];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != n)
      throw std::invalid_argument("concat_cols: row mismatch, " + shape_string(parts[0].shape()) +
                                  " vs " + shape_string(p.shape()));
    total += p.cols();
    grad = grad || p.requires_grad();
  }
  auto out = make_node({n, total}, "concat_cols");
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto v = p.values();
    const std::size_t f = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * f, f, out->values.data() + i * total + off);
    off += f;
  }
  count_op(n * total);
  if (grad) {
    out->requires_grad = true;
    for (const auto& p : parts) out->parents.push_back(p.node());
    std::vector<NodeRef> ps(out->parents);
    out->backward_fn = [ps = std::move(ps), offsets = std::move(offsets), n,
                        total](TensorNode& self) {
      count_op(n * total);
      for (std::size_t k = 0; k < ps.size(); ++k) {
        if (!ps[k]->requires_grad) continue;
        const std::size_t f = ps[k]->shape[1];
        double* g = ps[k]->grad_data();
        for (std::size_t i = 0; i < n; ++i) {
          const double* up = self.grad.data() + i * total + offsets[k];
          for (std::size_t j = 0; j < f; ++j) g[i * f + j] += up[j];
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor tile_rows(const Tensor& row, std::size_t n) {
  if (row.rank() != 2 || row.rows() != 1)
    throw std::invalid_argument("tile_rows: expected 1xF, got " + shape_string(row.shape()));
  if (n == 0) throw std::invalid_argument("tile_rows: zero rows");
  const std::size_t f = row.cols();
  auto out = make_node({n, f}, "tile_rows");
  const auto v = row.values();
  for (std::size_t i = 0; i < n; ++i) std::copy_n(v.data(), f, out->values.data() + i * f);
  count_op(n * f);
  if (row.requires_grad()) {
    out->requires_grad = true;
    out->parents = {row.node()};
    NodeRef p = row.node();
    out->backward_fn = [p, n, f](TensorNode& self) {
      count_op(n * f);
      double* g = p->grad_data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) g[j] += self.grad[i * f + j];
    };
  }
  return Tensor(std::move(out));
}

Tensor sum_groups(const Tensor& t, std::size_t group_size) {
  if (t.rank() != 2)
    throw std::invalid_argument("sum_groups: expected rank-2, got " + shape_string(t.shape()));
  if (group_size == 0 || t.rows() % group_size != 0)
    throw std::invalid_argument("sum_groups: " + std::to_string(t.rows()) +
                                " rows not divisible by group size " + std::to_string(group_size));
  const std::size_t groups = t.rows() / group_size, f = t.cols();
  auto out = make_node({groups, f}, "sum_groups");
  const auto v = t.values();
  for (std::size_t gidx = 0; gidx < groups; ++gidx) {
    double* dst = out->values.data() + gidx * f;
    for (std::size_t j = 0; j < group_size; ++j) {
      const double* src = v.data() + (gidx * group_size + j) * f;
      for (std::size_t c = 0; c < f; ++c) dst[c] += src[c];
    }
  }
  count_op(t.size());
  if (t.requires_grad()) {
    out->requires_grad = true;
    out->parents = {t.node()};
    NodeRef p = t.node();
    out->backward_fn = [p, groups, group_size, f](TensorNode& self) {
      count_op(groups * group_size * f);
      double* g = p->grad_data();
      for (std::size_t gidx = 0; gidx < groups; ++gidx) {
        const double* up = self.grad.data() + gidx * f;
        for (std::size_t j = 0; j < group_size; ++j) {
          double* dst = g + (gidx * group_size + j) * f;
          for (std::size_t c = 0; c < f; ++c) dst[c] += up[c];
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor add_bias(const Tensor& mat, const Tensor& row) {
  if (mat.rank() != 2 || row.rank() != 2 || row.rows() != 1 || row.cols() != mat.cols())
    throw std::invalid_argument("add_bias: shape mismatch " + shape_string(mat.shape()) + " vs " +
                                shape_string(row.shape()));
  const std::size_t n = mat.rows(), f = mat.cols();
  auto out = make_node({n, f}, "add_bias");
  const auto vm = mat.values(), vr = row.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out->values[i * f + j] = vm[i * f + j] + vr[j];
  count_op(n * f);
  if (wants_grad({&mat, &row})) {
    out->requires_grad = true;
    out->parents = {mat.node(), row.node()};
    NodeRef pm = mat.node(), pr = row.node();
    out->backward_fn = [pm, pr, n, f](TensorNode& self) {
      count_op(n * f);
      if (pm->requires_grad) {
        double* g = pm->grad_data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
      if (pr->requires_grad) {
        double* g = pr->grad_data();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < f; ++j) g[j] += self.grad[i * f + j];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor reshape(const Tensor& t, std::vector<std::size_t> shape) {
  require_valid_shape(shape);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != t.size())
    throw std::invalid_argument("reshape: cannot view " + shape_string(t.shape()) + " as " +
                                shape_string(shape));
  auto out = make_node(std::move(shape), "reshape");
  const auto v = t.values();
  std::copy(v.begin(), v.end(), out->values.begin());
  count_op(t.size());
  if (t.requires_grad()) {
    out->requires_grad = true;
    out->parents = {t.node()};
    NodeRef p = t.node();
    out->backward_fn = [p](TensorNode& self) {
      count_op(self.grad.size());
      double* g = p->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    };
  }
  return Tensor(std::move(out));
}

double bce_value(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("bce: length mismatch " + std::to_string(pred.size()) + " vs " +
                                std::to_string(target.size()));
  if (pred.empty()) throw std::invalid_argument("bce: empty input");
  return bce_sum(pred, target) / static_cast<double>(pred.size());
}

Tensor bce(const Tensor& pred, const Tensor& target) {
  require_same_shape("bce", pred, target);
  const std::size_t n = pred.size();
  auto out = make_node({1}, "bce");
  out->values[0] = bce_sum(pred.values(), target.values()) / static_cast<double>(n);
  count_op(2 * n);
  if (pred.requires_grad()) {
    out->requires_grad = true;
    out->parents = {pred.node(), target.node()};
    NodeRef pp = pred.node(), pt = target.node();
    out->backward_fn = [pp, pt, n](TensorNode& self) {
      count_op(2 * n);
      const double up = self.grad[0] / static_cast<double>(n);
      double* g = pp->grad_data();
      for (std::size_t i = 0; i < n; ++i) {
        const double p = pp->values[i];
        if (p <= kBceClamp || p >= 1.0 - kBceClamp) continue;  // clamped region is flat
        const double t = pt->values[i];
        g[i] += up * (-t / p + (1.0 - t) / (1.0 - p));
      }
    };
  }
  return Tensor(std::move(out));
}

Graph Graph::trace(const Tensor& root) {
  Graph g;
  if (!root.defined() || !root.requires_grad()) return g;
  struct Frame {
    TensorNode* node;
    std::size_t next_parent;
    NodeRef ref;
  };
  std::unordered_set<TensorNode*> seen;
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0, root.node()});
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      NodeRef p = f.node->parents[f.next_parent++];
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back({p.get(), 0, std::move(p)});
    } else {
      g.order_.push_back(f.node);
      g.keep_alive_.push_back(std::move(f.ref));
      stack.pop_back();
    }
  }
  return g;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  if (!loss.requires_grad()) return;
  Graph g = Graph::trace(loss);
  loss.node()->grad_data()[0] += 1.0;
  auto nodes = g.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

void adam_step(std::span<const NamedTensor> params, AdamState& state) {
  if (state.m.size() != params.size()) {
    if (!state.m.empty())
      throw std::invalid_argument("adam_step: parameter count changed mid-run");
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].second.size(), 0.0);
      state.v[i].assign(params[i].second.size(), 0.0);
    }
  }
  for (const auto& [name, t] : params)
    if (!t.has_grad())
      throw std::runtime_error("adam_step: missing gradient for parameter '" + name + "'");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].second;
    auto gr = t.grad();
    auto w = t.mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != w.size())
      throw std::invalid_argument("adam_step: parameter '" + params[i].first +
                                  "' changed size mid-run");
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gr[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gr[j] * gr[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
  for (const auto& [name, t] : params) Tensor(t).zero_grad();
}

}  // namespace protoseg
