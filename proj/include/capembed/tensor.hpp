#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "capembed/errors.hpp"

namespace capembed {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major array of 64-bit floats. Plain data, no graph attached;
// Graph nodes own one of these per value and per gradient.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);              // shape {1}
  static Tensor row(std::vector<double> values);   // shape {n}
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return {data_.data(), data_.size()}; }

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

  // Throws ValidationError if any element is NaN or infinite.
  void check_finite(const std::string& context) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Debug validation mode: when on, every op output is checked for NaN/Inf.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// Handle into a Graph's node tape.
struct Var {
  std::uint32_t index = 0;
};

class Graph;

// Accumulates gradient contributions into the parents of one node,
// given the gradient flowing into that node.
using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

// Reverse-mode differentiation tape. Nodes are appended in execution
// order, so operands always precede their results and one reverse sweep
// visits every node exactly once. A Graph is confined to a single thread;
// independent graphs may run in parallel.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, std::string name = "leaf");

  const Tensor& value(Var v) const { return nodes_[v.index].value; }
  // Zeros for nodes the backward sweep never reached.
  const Tensor& grad(Var v);
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must be
  // a scalar (one element). May be called once per graph.
  void backward(Var loss);

  // --- ops ---
  Var matmul(Var a, Var b);                    // [m x k] * [k x n]
  Var transpose(Var a);                        // 2-D
  Var add(Var a, Var b);                       // same shape, or [m x d] + [d]
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                       // Hadamard
  Var scale(Var a, double c);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax(Var a, std::size_t axis);        // max-subtracted, per slice
  Var l2_normalize_rows(Var a);                // 2-D, epsilon-floored norms
  Var concat(Var a, Var b, std::size_t axis);
  Var stack_steps(std::span<const Var> steps); // T x [B x d] -> [B x T x d]
  Var sum_axis(Var a, std::size_t axis);
  Var max_axis(Var a, std::size_t axis);       // grad to first argmax
  Var sum(Var a);                              // -> scalar {1}
  Var gather_rows(Var table, std::vector<int> rows);
  Var slice_rows(Var a, std::size_t row0, std::size_t nrows);
  Var reshape(Var a, Shape shape);

  // Extension point for custom differentiable ops (e.g. the hinge loss).
  Var push_node(std::string op, Tensor value, std::vector<Var> parents, BackwardFn fn);

  // For use inside BackwardFns: gradient accumulator of a node, allocated
  // as zeros on first touch.
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;           // empty until touched by backward
    std::vector<Var> parents;
    BackwardFn backward;
  };

  const Tensor& checked(Var v, const char* op) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Epsilon floor used when normalizing rows; an all-zero row divides by
// this instead of by zero.
inline constexpr double kNormEpsilon = 1e-12;

}  // namespace capembed
