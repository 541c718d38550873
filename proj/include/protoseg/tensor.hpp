#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace protoseg {

/// Work counters for the current thread. Tensor ops add their scalar
/// multiply-add estimate to `flops`; the geometry kernels count squared
/// distance evaluations in `dist_evals`. Every counter is a deterministic
/// function of operand shapes, never of operand values, so equal-shape
/// scenes produce bit-identical counts.
struct OpStats {
  std::uint64_t tensor_ops = 0;
  std::uint64_t flops = 0;
  std::uint64_t dist_evals = 0;

  OpStats operator-(const OpStats& o) const {
    return {tensor_ops - o.tensor_ops, flops - o.flops, dist_evals - o.dist_evals};
  }
  bool operator==(const OpStats&) const = default;
};

OpStats& op_stats();

struct TensorNode;
using NodeRef = std::shared_ptr<TensorNode>;

/// One executed operation. Values are produced on construction; the
/// backward rule, when present, reads this node's grad and accumulates
/// into the parents' grads.
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodeRef> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::size_t size() const { return values.size(); }
  /// Grad buffer, zero-initialised on first use.
  double* grad_data();
};

/// Dense row-major f64 tensor handle. Copies share the underlying node, so
/// a weight tensor stays live across training steps while ops build fresh
/// nodes per forward pass.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodeRef n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<double> values, std::vector<std::size_t> shape,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t size() const;
  std::size_t rank() const;
  std::size_t rows() const;
  std::size_t cols() const;
  bool requires_grad() const;

  std::span<const double> values() const;
  /// Mutable access for leaf initialisation and optimiser updates only;
  /// never mutate a tensor that a live graph has already consumed.
  std::span<double> mutable_values();
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();
  double item() const;

  const NodeRef& node() const { return node_; }

 private:
  NodeRef node_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// a · b^T without materializing the transpose (RxS · (TxS)^T -> RxT).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor scale(const Tensor& t, double factor);

enum class Reduce { sum, mean, max };
Tensor reduce(Reduce op, const Tensor& t, std::size_t axis);
Tensor reduce_sum(const Tensor& t, std::size_t axis);
Tensor reduce_mean(const Tensor& t, std::size_t axis);
Tensor reduce_max(const Tensor& t, std::size_t axis);

/// Row selection; duplicate indices accumulate on the way back.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx);
Tensor concat_cols(std::span<const Tensor> parts);
/// Repeat a 1xF row n times.
Tensor tile_rows(const Tensor& row, std::size_t n);
/// Sum each consecutive block of `group_size` rows: (G*k)xF -> GxF.
Tensor sum_groups(const Tensor& t, std::size_t group_size);
/// NxF + 1xF with the row broadcast over all N rows.
Tensor add_bias(const Tensor& mat, const Tensor& row);
Tensor reshape(const Tensor& t, std::vector<std::size_t> shape);

/// Mean binary cross-entropy with predictions clamped to
/// [kBceClamp, 1 - kBceClamp].
inline constexpr double kBceClamp = 1e-7;
Tensor bce(const Tensor& pred, const Tensor& target);
/// Same clamped kernel on raw spans; the loss tables use this so that the
/// argmin selection sees exactly the values the graph op would produce.
double bce_value(std::span<const double> pred, std::span<const double> target);

/// Topologically ordered view of the grad-requiring subgraph under a root.
/// Execution order of a dynamic graph is already topological; trace
/// reconstructs it so backward can walk the nodes exactly once in reverse.
class Graph {
 public:
  static Graph trace(const Tensor& root);
  std::span<TensorNode* const> nodes() const { return order_; }

 private:
  std::vector<NodeRef> keep_alive_;
  std::vector<TensorNode*> order_;
};

/// Reverse-mode sweep from a scalar loss. Repeated calls without zeroing
/// accumulate into existing grads.
void backward(const Tensor& loss);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m, v;
};

using NamedTensor = std::pair<std::string, Tensor>;

/// Bias-corrected Adam update over `params`, zeroing grads afterwards.
/// Moment buffers are allocated on first use and keyed by position.
void adam_step(std::span<const NamedTensor> params, AdamState& state);

std::string shape_string(std::span<const std::size_t> shape);

}  // namespace protoseg
