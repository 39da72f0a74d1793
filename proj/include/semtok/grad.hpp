#pragma once

// A small reverse-mode gradient tape over the handful of operations the
// selector and decoder graphs are built from. Values are row-major double
// matrices; parameters live outside the tape and receive accumulated
// gradients on backward().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace semtok::grad {

struct Parameter {
  std::string id;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> gradient;
  std::vector<double> velocity;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string id, std::vector<std::size_t> shape, bool trainable = true);

  std::size_t size() const { return values.size(); }
  void zero_grad();
};

using NodeId = std::size_t;

class Tape {
 public:
  NodeId constant(std::size_t rows, std::size_t cols, std::vector<double> values);

  // Row r*g + j is tables[j] row indices[r*g + j], where g = tables.size().
  NodeId embedding(std::vector<Parameter*> tables, std::vector<std::uint32_t> indices);

  // Row r uses weights[r % g] (in x out) and biases[r % g] (out); passing a
  // single weight/bias shares it across all rows.
  NodeId affine(NodeId x, std::vector<Parameter*> weights,
                std::vector<Parameter*> biases);

  NodeId relu(NodeId x);

  // Softmax over consecutive runs of `group` entries of a column vector.
  NodeId group_softmax(NodeId scores, std::size_t group);

  // out[r] = sum_j weights[r*group + j] * rows[r*group + j]
  NodeId weighted_sum(NodeId weights, NodeId rows, std::size_t group);

  // Mean softmax cross-entropy over rows; 1x1.
  NodeId cross_entropy(NodeId logits, std::vector<std::uint32_t> labels);

  // Mean squared error over all elements; 1x1.
  NodeId mse(NodeId prediction, std::vector<double> target);

  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);

  std::size_t rows(NodeId id) const { return nodes_[id].rows; }
  std::size_t cols(NodeId id) const { return nodes_[id].cols; }
  std::span<const double> value(NodeId id) const { return nodes_[id].value; }
  std::span<const double> gradient(NodeId id) const { return nodes_[id].grad; }

  // Seeds d(loss)/d(loss) = 1, propagates to every node and accumulates
  // into trainable parameters. Returns the loss value.
  double backward(NodeId loss);

 private:
  enum class Op {
    constant,
    embedding,
    affine,
    relu,
    group_softmax,
    weighted_sum,
    cross_entropy,
    mse,
    add,
    scale
  };

  struct Node {
    Op op{};
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    NodeId a = 0;
    NodeId b = 0;
    std::vector<Parameter*> params;
    std::vector<Parameter*> params2;
    std::vector<std::uint32_t> indices;
    std::vector<double> aux;
    double factor = 1.0;
    std::size_t group = 1;
    bool requires_grad = false;
  };

  NodeId push(Node node);
  void backward_node(Node& node);

  std::vector<Node> nodes_;
};

using GraphFn = std::function<NodeId(Tape&)>;
using GradientFn = std::function<void(std::span<Parameter* const>)>;

// Zeroes the gradients of `params`, runs the graph and backpropagates.
double forward_backward(const GraphFn& graph, std::span<Parameter* const> params);

// Evaluates the loss without touching gradients.
double evaluate(const GraphFn& graph);

// values -= lr * v with v = momentum * v + gradient; frozen parameters are
// left untouched.
void sgd_step(std::span<Parameter* const> params, double learning_rate,
              double momentum = 0.0);

struct GradCheckOptions {
  double threshold = 1e-4;
  double step = 1e-5;
  // Per parameter; larger parameters are checked on a seeded subsample.
  std::size_t max_coordinates = 10000;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error.
  double floor = 1e-6;
};

struct GradCheckReport {
  std::string parameter_id;
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  bool passed = true;
};

// Central finite differences against the analytic gradient produced by
// `analytic` (forward_backward by default) for every trainable parameter.
std::vector<GradCheckReport> grad_check(const GraphFn& graph,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& options = {});
std::vector<GradCheckReport> grad_check(const GraphFn& graph,
                                        const GradientFn& analytic,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& options = {});

}  // namespace semtok::grad
