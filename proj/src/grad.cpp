#include "semtok/grad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semtok/error.hpp"
#include "semtok/kernels.hpp"

namespace semtok::grad {

namespace {

const char* op_name(int op) {
  static constexpr const char* kNames[] = {
      "constant", "embedding", "affine", "relu",     "group_softmax",
      "weighted_sum", "cross_entropy", "mse", "add", "scale"};
  return kNames[op];
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Parameter::Parameter(std::string id_, std::vector<std::size_t> shape_, bool trainable_)
    : id(std::move(id_)),
      shape(std::move(shape_)),
      values(product(shape), 0.0),
      gradient(values.size(), 0.0),
      trainable(trainable_) {}

void Parameter::zero_grad() {
  gradient.assign(values.size(), 0.0);
}

NodeId Tape::push(Node node) {
  for (const double v : node.value) {
    if (!std::isfinite(v)) {
      throw Error(std::string("non-finite value produced by ") +
                  op_name(static_cast<int>(node.op)) + " (node " +
                  std::to_string(nodes_.size()) + ")");
    }
  }
  node.grad.assign(node.value.size(), 0.0);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) throw Error("constant: shape mismatch");
  Node n;
  n.op = Op::constant;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(values);
  return push(std::move(n));
}

NodeId Tape::embedding(std::vector<Parameter*> tables, std::vector<std::uint32_t> indices) {
  if (tables.empty()) throw Error("embedding: no tables");
  const std::size_t g = tables.size();
  if (indices.size() % g != 0) throw Error("embedding: index count not a multiple of tables");
  const std::size_t dim = tables[0]->shape.back();
  Node n;
  n.op = Op::embedding;
  n.rows = indices.size();
  n.cols = dim;
  n.value.resize(n.rows * dim);
  for (std::size_t r = 0; r < n.rows; ++r) {
    const Parameter& table = *tables[r % g];
    if (table.shape.size() != 2 || table.shape[1] != dim) {
      throw Error("embedding: table " + table.id + " has the wrong shape");
    }
    if (indices[r] >= table.shape[0]) {
      throw Error("embedding: index " + std::to_string(indices[r]) +
                  " out of range for " + table.id);
    }
    std::copy_n(table.values.data() + indices[r] * dim, dim, n.value.data() + r * dim);
  }
  n.requires_grad = std::any_of(tables.begin(), tables.end(),
                                [](const Parameter* p) { return p->trainable; });
  n.params = std::move(tables);
  n.indices = std::move(indices);
  return push(std::move(n));
}

NodeId Tape::affine(NodeId x, std::vector<Parameter*> weights,
                    std::vector<Parameter*> biases) {
  if (weights.empty() || weights.size() != biases.size()) {
    throw Error("affine: need one bias per weight");
  }
  const Node& in = nodes_[x];
  const std::size_t g = weights.size();
  const std::size_t in_dim = in.cols;
  const std::size_t out_dim = weights[0]->shape[1];
  for (std::size_t j = 0; j < g; ++j) {
    if (weights[j]->shape != std::vector<std::size_t>{in_dim, out_dim} ||
        biases[j]->size() != out_dim) {
      throw Error("affine: parameter " + weights[j]->id + " has the wrong shape");
    }
  }
  if (in.rows % g != 0) throw Error("affine: rows not a multiple of parameter groups");
  const auto& kern = kernels::active();
  Node n;
  n.op = Op::affine;
  n.rows = in.rows;
  n.cols = out_dim;
  n.a = x;
  n.value.resize(n.rows * out_dim);
  for (std::size_t r = 0; r < n.rows; ++r) {
    const Parameter& w = *weights[r % g];
    double* out = n.value.data() + r * out_dim;
    std::copy(biases[r % g]->values.begin(), biases[r % g]->values.end(), out);
    const double* xr = in.value.data() + r * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) {
      if (xr[i] != 0.0) kern.axpy(xr[i], w.values.data() + i * out_dim, out, out_dim);
    }
  }
  n.requires_grad = in.requires_grad;
  for (std::size_t j = 0; j < g; ++j) {
    n.requires_grad = n.requires_grad || weights[j]->trainable || biases[j]->trainable;
  }
  n.params = std::move(weights);
  n.params2 = std::move(biases);
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
  const Node& in = nodes_[x];
  Node n;
  n.op = Op::relu;
  n.rows = in.rows;
  n.cols = in.cols;
  n.a = x;
  n.value.resize(in.value.size());
  for (std::size_t i = 0; i < in.value.size(); ++i) {
    n.value[i] = in.value[i] > 0.0 ? in.value[i] : 0.0;
  }
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

NodeId Tape::group_softmax(NodeId scores, std::size_t group) {
  const Node& in = nodes_[scores];
  if (in.cols != 1 || group == 0 || in.rows % group != 0) {
    throw Error("group_softmax: expected a column vector divisible by the group");
  }
  Node n;
  n.op = Op::group_softmax;
  n.rows = in.rows;
  n.cols = 1;
  n.a = scores;
  n.group = group;
  n.value.resize(in.rows);
  for (std::size_t base = 0; base < in.rows; base += group) {
    const double* s = in.value.data() + base;
    const double peak = *std::max_element(s, s + group);
    double total = 0.0;
    for (std::size_t j = 0; j < group; ++j) {
      n.value[base + j] = std::exp(s[j] - peak);
      total += n.value[base + j];
    }
    for (std::size_t j = 0; j < group; ++j) n.value[base + j] /= total;
  }
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

NodeId Tape::weighted_sum(NodeId weights, NodeId rows, std::size_t group) {
  const Node& w = nodes_[weights];
  const Node& x = nodes_[rows];
  if (w.cols != 1 || w.rows != x.rows || group == 0 || x.rows % group != 0) {
    throw Error("weighted_sum: shape mismatch");
  }
  const auto& kern = kernels::active();
  Node n;
  n.op = Op::weighted_sum;
  n.rows = x.rows / group;
  n.cols = x.cols;
  n.a = weights;
  n.b = rows;
  n.group = group;
  n.value.assign(n.rows * n.cols, 0.0);
  for (std::size_t r = 0; r < n.rows; ++r) {
    for (std::size_t j = 0; j < group; ++j) {
      const std::size_t src = r * group + j;
      kern.axpy(w.value[src], x.value.data() + src * x.cols, n.value.data() + r * n.cols,
                n.cols);
    }
  }
  n.requires_grad = w.requires_grad || x.requires_grad;
  return push(std::move(n));
}

NodeId Tape::cross_entropy(NodeId logits, std::vector<std::uint32_t> labels) {
  const Node& in = nodes_[logits];
  if (labels.size() != in.rows || in.rows == 0) {
    throw Error("cross_entropy: one label per row required");
  }
  Node n;
  n.op = Op::cross_entropy;
  n.rows = 1;
  n.cols = 1;
  n.a = logits;
  n.aux.resize(in.value.size());  // softmax probabilities
  double loss = 0.0;
  for (std::size_t r = 0; r < in.rows; ++r) {
    if (labels[r] >= in.cols) throw Error("cross_entropy: label out of range");
    const double* z = in.value.data() + r * in.cols;
    double* p = n.aux.data() + r * in.cols;
    const double peak = *std::max_element(z, z + in.cols);
    double total = 0.0;
    for (std::size_t c = 0; c < in.cols; ++c) {
      p[c] = std::exp(z[c] - peak);
      total += p[c];
    }
    for (std::size_t c = 0; c < in.cols; ++c) p[c] /= total;
    loss += std::log(total) - (z[labels[r]] - peak);
  }
  n.value = {loss / static_cast<double>(in.rows)};
  n.indices = std::move(labels);
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

NodeId Tape::mse(NodeId prediction, std::vector<double> target) {
  const Node& in = nodes_[prediction];
  if (target.size() != in.value.size() || target.empty()) {
    throw Error("mse: target shape mismatch");
  }
  Node n;
  n.op = Op::mse;
  n.rows = 1;
  n.cols = 1;
  n.a = prediction;
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double diff = in.value[i] - target[i];
    acc += diff * diff;
  }
  n.value = {acc / static_cast<double>(target.size())};
  n.aux = std::move(target);
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Node& x = nodes_[a];
  const Node& y = nodes_[b];
  if (x.rows != y.rows || x.cols != y.cols) throw Error("add: shape mismatch");
  Node n;
  n.op = Op::add;
  n.rows = x.rows;
  n.cols = x.cols;
  n.a = a;
  n.b = b;
  n.value.resize(x.value.size());
  for (std::size_t i = 0; i < x.value.size(); ++i) n.value[i] = x.value[i] + y.value[i];
  n.requires_grad = x.requires_grad || y.requires_grad;
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  const Node& x = nodes_[a];
  Node n;
  n.op = Op::scale;
  n.rows = x.rows;
  n.cols = x.cols;
  n.a = a;
  n.factor = factor;
  n.value.resize(x.value.size());
  for (std::size_t i = 0; i < x.value.size(); ++i) n.value[i] = factor * x.value[i];
  n.requires_grad = x.requires_grad;
  return push(std::move(n));
}

double Tape::backward(NodeId loss) {
  if (loss >= nodes_.size() || nodes_[loss].value.size() != 1) {
    throw Error("backward: loss must be a 1x1 node");
  }
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[loss].grad[0] = 1.0;
  for (std::size_t i = loss + 1; i-- > 0;) {
    if (nodes_[i].requires_grad) backward_node(nodes_[i]);
  }
  return nodes_[loss].value[0];
}

void Tape::backward_node(Node& n) {
  const auto& kern = kernels::active();
  switch (n.op) {
    case Op::constant:
      break;
    case Op::embedding: {
      const std::size_t g = n.params.size();
      for (std::size_t r = 0; r < n.rows; ++r) {
        Parameter& table = *n.params[r % g];
        if (!table.trainable) continue;
        kern.axpy(1.0, n.grad.data() + r * n.cols,
                  table.gradient.data() + n.indices[r] * n.cols, n.cols);
      }
      break;
    }
    case Op::affine: {
      Node& in = nodes_[n.a];
      const std::size_t g = n.params.size();
      const std::size_t in_dim = in.cols;
      const std::size_t out_dim = n.cols;
      for (std::size_t r = 0; r < n.rows; ++r) {
        Parameter& w = *n.params[r % g];
        Parameter& b = *n.params2[r % g];
        const double* dout = n.grad.data() + r * out_dim;
        const double* xr = in.value.data() + r * in_dim;
        if (b.trainable) kern.axpy(1.0, dout, b.gradient.data(), out_dim);
        if (w.trainable) {
          for (std::size_t i = 0; i < in_dim; ++i) {
            if (xr[i] != 0.0) kern.axpy(xr[i], dout, w.gradient.data() + i * out_dim, out_dim);
          }
        }
        if (in.requires_grad) {
          double* dx = in.grad.data() + r * in_dim;
          for (std::size_t i = 0; i < in_dim; ++i) {
            dx[i] += kern.dot(dout, w.values.data() + i * out_dim, out_dim);
          }
        }
      }
      break;
    }
    case Op::relu: {
      Node& in = nodes_[n.a];
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (in.value[i] > 0.0) in.grad[i] += n.grad[i];
      }
      break;
    }
    case Op::group_softmax: {
      Node& in = nodes_[n.a];
      for (std::size_t base = 0; base < n.rows; base += n.group) {
        double inner = 0.0;
        for (std::size_t j = 0; j < n.group; ++j) inner += n.value[base + j] * n.grad[base + j];
        for (std::size_t j = 0; j < n.group; ++j) {
          in.grad[base + j] += n.value[base + j] * (n.grad[base + j] - inner);
        }
      }
      break;
    }
    case Op::weighted_sum: {
      Node& w = nodes_[n.a];
      Node& x = nodes_[n.b];
      for (std::size_t r = 0; r < n.rows; ++r) {
        const double* g = n.grad.data() + r * n.cols;
        for (std::size_t j = 0; j < n.group; ++j) {
          const std::size_t src = r * n.group + j;
          if (w.requires_grad) w.grad[src] += kern.dot(g, x.value.data() + src * x.cols, n.cols);
          if (x.requires_grad) kern.axpy(w.value[src], g, x.grad.data() + src * x.cols, n.cols);
        }
      }
      break;
    }
    case Op::cross_entropy: {
      Node& in = nodes_[n.a];
      const double scale = n.grad[0] / static_cast<double>(in.rows);
      for (std::size_t r = 0; r < in.rows; ++r) {
        for (std::size_t c = 0; c < in.cols; ++c) {
          const double onehot = c == n.indices[r] ? 1.0 : 0.0;
          in.grad[r * in.cols + c] += scale * (n.aux[r * in.cols + c] - onehot);
        }
      }
      break;
    }
    case Op::mse: {
      Node& in = nodes_[n.a];
      const double scale = 2.0 * n.grad[0] / static_cast<double>(n.aux.size());
      for (std::size_t i = 0; i < n.aux.size(); ++i) {
        in.grad[i] += scale * (in.value[i] - n.aux[i]);
      }
      break;
    }
    case Op::add: {
      Node& x = nodes_[n.a];
      Node& y = nodes_[n.b];
      if (x.requires_grad) kern.axpy(1.0, n.grad.data(), x.grad.data(), n.grad.size());
      if (y.requires_grad) kern.axpy(1.0, n.grad.data(), y.grad.data(), n.grad.size());
      break;
    }
    case Op::scale: {
      Node& x = nodes_[n.a];
      kern.axpy(n.factor, n.grad.data(), x.grad.data(), n.grad.size());
      break;
    }
  }
}

double forward_backward(const GraphFn& graph, std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
  Tape tape;
  const NodeId loss = graph(tape);
  const double value = tape.backward(loss);
  for (const Parameter* p : params) {
    for (const double g : p->gradient) {
      if (!std::isfinite(g)) throw Error("non-finite gradient for parameter " + p->id);
    }
  }
  return value;
}

double evaluate(const GraphFn& graph) {
  Tape tape;
  const NodeId loss = graph(tape);
  return tape.value(loss)[0];
}

void sgd_step(std::span<Parameter* const> params, double learning_rate, double momentum) {
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    if (momentum == 0.0) {
      for (std::size_t i = 0; i < p->values.size(); ++i) {
        p->values[i] -= learning_rate * p->gradient[i];
      }
      continue;
    }
    if (p->velocity.size() != p->values.size()) p->velocity.assign(p->values.size(), 0.0);
    for (std::size_t i = 0; i < p->values.size(); ++i) {
      p->velocity[i] = momentum * p->velocity[i] + p->gradient[i];
      p->values[i] -= learning_rate * p->velocity[i];
    }
  }
}

std::vector<GradCheckReport> grad_check(const GraphFn& graph,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& options) {
  return grad_check(
      graph, [&](std::span<Parameter* const> ps) { forward_backward(graph, ps); },
      params, options);
}

std::vector<GradCheckReport> grad_check(const GraphFn& graph,
                                        const GradientFn& analytic,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& options) {
  analytic(params);
  std::vector<std::vector<double>> analytic_grads;
  for (const Parameter* p : params) analytic_grads.push_back(p->gradient);

  std::mt19937_64 rng(options.seed);
  std::vector<GradCheckReport> reports;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    if (!p.trainable) continue;
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coordinates) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates);
      std::sort(coords.begin(), coords.end());
    }
    GradCheckReport report{p.id, 0.0, coords.empty() ? 0 : coords[0], true};
    for (const std::size_t c : coords) {
      const double original = p.values[c];
      p.values[c] = original + options.step;
      const double plus = evaluate(graph);
      p.values[c] = original - options.step;
      const double minus = evaluate(graph);
      p.values[c] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double exact = analytic_grads[pi][c];
      const double denom =
          std::max({std::abs(exact), std::abs(numeric), options.floor});
      const double rel = std::abs(exact - numeric) / denom;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_coordinate = c;
      }
    }
    report.passed = report.max_relative_error < options.threshold;
    reports.push_back(report);
  }
  return reports;
}

}  // namespace semtok::grad
