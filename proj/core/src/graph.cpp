#include "ctxnmt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxnmt {

namespace {

std::string two_shapes(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": incompatible shapes " + shape_str(a.shape) + " and " +
         shape_str(b.shape);
}

// Effective (m, k, n) of a matmul with rank-1 squeezing.
struct MatDims {
  int m, k, n;
};

MatDims matmul_dims(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2) {
    throw std::invalid_argument(two_shapes("matmul", a, b));
  }
  MatDims d;
  d.m = a.rank() == 2 ? a.dim(0) : 1;
  d.k = a.rank() == 2 ? a.dim(1) : a.dim(0);
  const int kb = b.dim(0);
  d.n = b.rank() == 2 ? b.dim(1) : 1;
  if (d.k != kb) throw std::invalid_argument(two_shapes("matmul", a, b));
  return d;
}

}  // namespace

Graph::NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::param(Tensor& t) {
  Node n;
  n.op = Op::kParam;
  n.bound = &t;
  n.requires_grad = t.requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.out = std::move(t);
  return push(std::move(n));
}

Graph::NodeId Graph::constant(std::vector<int> shape, std::vector<double> values) {
  return constant(Tensor(std::move(shape), std::move(values)));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  const MatDims d = matmul_dims(A, B);
  std::vector<int> shape;
  if (A.rank() == 2 && B.rank() == 2) {
    shape = {d.m, d.n};
  } else if (A.rank() == 2) {
    shape = {d.m};
  } else if (B.rank() == 2) {
    shape = {d.n};
  } else {
    shape = {1};
  }
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {a, b};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.out = Tensor(std::move(shape));
  const double* pa = A.values.data();
  const double* pb = B.values.data();
  double* pc = n.out.values.data();
  for (int i = 0; i < d.m; ++i) {
    for (int p = 0; p < d.k; ++p) {
      const double av = pa[i * d.k + p];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<std::size_t>(p) * d.n;
      double* crow = pc + static_cast<std::size_t>(i) * d.n;
      for (int j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
  }
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape != B.shape) throw std::invalid_argument(two_shapes("add", A, B));
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.out = Tensor(A.shape);
  for (std::size_t i = 0; i < A.numel(); ++i) n.out.values[i] = A.values[i] + B.values[i];
  return push(std::move(n));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape != B.shape) throw std::invalid_argument(two_shapes("mul", A, B));
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.out = Tensor(A.shape);
  for (std::size_t i = 0; i < A.numel(); ++i) n.out.values[i] = A.values[i] * B.values[i];
  return push(std::move(n));
}

Graph::NodeId Graph::sigmoid(NodeId x) {
  const Tensor& X = value(x);
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {x};
  n.requires_grad = node(x).requires_grad;
  n.out = Tensor(X.shape);
  for (std::size_t i = 0; i < X.numel(); ++i) {
    n.out.values[i] = 1.0 / (1.0 + std::exp(-X.values[i]));
  }
  return push(std::move(n));
}

Graph::NodeId Graph::tanh(NodeId x) {
  const Tensor& X = value(x);
  Node n;
  n.op = Op::kTanh;
  n.inputs = {x};
  n.requires_grad = node(x).requires_grad;
  n.out = Tensor(X.shape);
  for (std::size_t i = 0; i < X.numel(); ++i) n.out.values[i] = std::tanh(X.values[i]);
  return push(std::move(n));
}

Graph::NodeId Graph::softmax(NodeId x) {
  const Tensor& X = value(x);
  if (X.rank() < 1) throw std::invalid_argument("softmax: needs rank >= 1");
  const int width = X.dim(X.rank() - 1);
  const std::size_t rows = X.numel() / static_cast<std::size_t>(width);
  Node n;
  n.op = Op::kSoftmax;
  n.inputs = {x};
  n.requires_grad = node(x).requires_grad;
  n.out = Tensor(X.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = X.values.data() + r * static_cast<std::size_t>(width);
    double* out = n.out.values.data() + r * static_cast<std::size_t>(width);
    double mx = in[0];
    for (int i = 1; i < width; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (int i = 0; i < width; ++i) {
      out[i] = std::exp(in[i] - mx);
      sum += out[i];
    }
    for (int i = 0; i < width; ++i) out[i] /= sum;
  }
  return push(std::move(n));
}

Graph::NodeId Graph::concat(const std::vector<NodeId>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Tensor& first = value(xs[0]);
  const int rank = first.rank();
  if (axis < 0 || axis >= rank) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(first.shape));
  }
  std::vector<int> shape = first.shape;
  int total_axis = 0;
  bool req = false;
  for (NodeId x : xs) {
    const Tensor& t = value(x);
    if (t.rank() != rank) throw std::invalid_argument(two_shapes("concat", first, t));
    for (int i = 0; i < rank; ++i) {
      if (i != axis && t.dim(i) != first.dim(i)) {
        throw std::invalid_argument(two_shapes("concat", first, t));
      }
    }
    total_axis += t.dim(axis);
    req = req || node(x).requires_grad;
  }
  shape[static_cast<std::size_t>(axis)] = total_axis;

  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(first.dim(i));
  for (int i = axis + 1; i < rank; ++i) inner *= static_cast<std::size_t>(first.dim(i));

  Node n;
  n.op = Op::kConcat;
  n.inputs = xs;
  n.requires_grad = req;
  n.axis = axis;
  n.out = Tensor(shape);
  const std::size_t out_block = static_cast<std::size_t>(total_axis) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t off = o * out_block;
    for (NodeId x : xs) {
      const Tensor& t = value(x);
      const std::size_t block = static_cast<std::size_t>(t.dim(axis)) * inner;
      std::copy_n(t.values.data() + o * block, block, n.out.values.data() + off);
      off += block;
    }
  }
  return push(std::move(n));
}

Graph::NodeId Graph::stack_rows(const std::vector<NodeId>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const Tensor& first = value(rows[0]);
  if (first.rank() != 1) {
    throw std::invalid_argument("stack_rows: wants rank-1 inputs, got " +
                                shape_str(first.shape));
  }
  const int width = first.dim(0);
  bool req = false;
  for (NodeId x : rows) {
    const Tensor& t = value(x);
    if (t.rank() != 1 || t.dim(0) != width) {
      throw std::invalid_argument(two_shapes("stack_rows", first, t));
    }
    req = req || node(x).requires_grad;
  }
  Node n;
  n.op = Op::kStackRows;
  n.inputs = rows;
  n.requires_grad = req;
  n.out = Tensor({static_cast<int>(rows.size()), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(value(rows[r]).values.data(), width,
                n.out.values.data() + r * static_cast<std::size_t>(width));
  }
  return push(std::move(n));
}

Graph::NodeId Graph::gather_rows(NodeId matrix, std::vector<int> indices) {
  const Tensor& M = value(matrix);
  if (M.rank() != 2) {
    throw std::invalid_argument("gather_rows: wants a rank-2 matrix, got " +
                                shape_str(M.shape));
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= M.dim(0)) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(indices[i]) +
                                  " out of range [0," + std::to_string(M.dim(0)) +
                                  ") at position " + std::to_string(i));
    }
  }
  Node n;
  n.op = Op::kGatherRows;
  n.inputs = {matrix};
  n.requires_grad = node(matrix).requires_grad;
  n.out = Tensor({static_cast<int>(indices.size()), M.dim(1)});
  const std::size_t w = static_cast<std::size_t>(M.dim(1));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(M.values.data() + static_cast<std::size_t>(indices[i]) * w, w,
                n.out.values.data() + i * w);
  }
  n.indices = std::move(indices);
  return push(std::move(n));
}

Graph::NodeId Graph::gather_row(NodeId matrix, int index) {
  NodeId id = gather_rows(matrix, {index});
  Node& n = node(id);
  n.axis = 1;  // squeezed
  n.out.shape = {n.out.dim(1)};
  return id;
}

Graph::NodeId Graph::mean_rows(NodeId matrix) {
  const Tensor& M = value(matrix);
  if (M.rank() != 2) {
    throw std::invalid_argument("mean_rows: wants a rank-2 matrix, got " +
                                shape_str(M.shape));
  }
  const int rows = M.dim(0), cols = M.dim(1);
  Node n;
  n.op = Op::kMeanRows;
  n.inputs = {matrix};
  n.requires_grad = node(matrix).requires_grad;
  n.out = Tensor({cols});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) n.out.values[static_cast<std::size_t>(c)] += M.at(r, c);
  }
  for (int c = 0; c < cols; ++c) n.out.values[static_cast<std::size_t>(c)] /= rows;
  return push(std::move(n));
}

Graph::NodeId Graph::nll(NodeId logits, int index) {
  const Tensor& L = value(logits);
  if (L.rank() != 1) {
    throw std::invalid_argument("nll: wants rank-1 logits, got " + shape_str(L.shape));
  }
  if (index < 0 || index >= L.dim(0)) {
    throw std::invalid_argument("nll: index " + std::to_string(index) +
                                " out of range [0," + std::to_string(L.dim(0)) + ")");
  }
  double mx = L.values[0];
  for (double v : L.values) mx = std::max(mx, v);
  double sum = 0.0;
  std::vector<double> probs(L.numel());
  for (std::size_t i = 0; i < L.numel(); ++i) {
    probs[i] = std::exp(L.values[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  const double lse = mx + std::log(sum);
  Node n;
  n.op = Op::kNll;
  n.inputs = {logits};
  n.requires_grad = node(logits).requires_grad;
  n.indices = {index};
  n.cache = std::move(probs);
  n.out = Tensor::scalar(lse - L.values[static_cast<std::size_t>(index)]);
  return push(std::move(n));
}

double Graph::scalar_value(NodeId id) const {
  const Tensor& t = value(id);
  if (t.numel() != 1) {
    throw std::invalid_argument("scalar_value: node has shape " + shape_str(t.shape));
  }
  return t.values[0];
}

std::vector<double>& Graph::grad_buf(NodeId id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad.assign(value(id).numel(), 0.0);
  return n.grad;
}

void Graph::backward(NodeId loss) {
  const Tensor& L = value(loss);
  if (L.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(L.shape));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!node(loss).requires_grad) return;  // no parameter feeds the loss
  grad_buf(loss)[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = node(id);
    if (!n.requires_grad || n.grad.empty()) continue;
    const std::vector<double>& g = n.grad;
    switch (n.op) {
      case Op::kParam: {
        if (n.bound->requires_grad) {
          n.bound->ensure_grad();
          std::vector<double>& pg = *n.bound->grad;
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        }
        break;
      }
      case Op::kConstant:
        break;
      case Op::kMatMul: {
        const Tensor& A = value(n.inputs[0]);
        const Tensor& B = value(n.inputs[1]);
        const MatDims d = matmul_dims(A, B);
        if (node(n.inputs[0]).requires_grad) {
          std::vector<double>& da = grad_buf(n.inputs[0]);
          for (int i = 0; i < d.m; ++i) {
            for (int j = 0; j < d.n; ++j) {
              const double gv = g[static_cast<std::size_t>(i) * d.n + j];
              if (gv == 0.0) continue;
              for (int p = 0; p < d.k; ++p) {
                da[static_cast<std::size_t>(i) * d.k + p] +=
                    gv * B.values[static_cast<std::size_t>(p) * d.n + j];
              }
            }
          }
        }
        if (node(n.inputs[1]).requires_grad) {
          std::vector<double>& db = grad_buf(n.inputs[1]);
          for (int i = 0; i < d.m; ++i) {
            for (int p = 0; p < d.k; ++p) {
              const double av = A.values[static_cast<std::size_t>(i) * d.k + p];
              if (av == 0.0) continue;
              for (int j = 0; j < d.n; ++j) {
                db[static_cast<std::size_t>(p) * d.n + j] +=
                    av * g[static_cast<std::size_t>(i) * d.n + j];
              }
            }
          }
        }
        break;
      }
      case Op::kAdd: {
        for (int s = 0; s < 2; ++s) {
          if (!node(n.inputs[static_cast<std::size_t>(s)]).requires_grad) continue;
          std::vector<double>& d = grad_buf(n.inputs[static_cast<std::size_t>(s)]);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& A = value(n.inputs[0]);
        const Tensor& B = value(n.inputs[1]);
        if (node(n.inputs[0]).requires_grad) {
          std::vector<double>& da = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * B.values[i];
        }
        if (node(n.inputs[1]).requires_grad) {
          std::vector<double>& db = grad_buf(n.inputs[1]);
          for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * A.values[i];
        }
        break;
      }
      case Op::kSigmoid: {
        std::vector<double>& d = grad_buf(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.out.values[i];
          d[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kTanh: {
        std::vector<double>& d = grad_buf(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.out.values[i];
          d[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::kSoftmax: {
        std::vector<double>& d = grad_buf(n.inputs[0]);
        const int width = n.out.dim(n.out.rank() - 1);
        const std::size_t rows = n.out.numel() / static_cast<std::size_t>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = n.out.values.data() + r * static_cast<std::size_t>(width);
          const double* gy = g.data() + r * static_cast<std::size_t>(width);
          double dot = 0.0;
          for (int i = 0; i < width; ++i) dot += gy[i] * y[i];
          double* dx = d.data() + r * static_cast<std::size_t>(width);
          for (int i = 0; i < width; ++i) dx[i] += y[i] * (gy[i] - dot);
        }
        break;
      }
      case Op::kConcat: {
        const int axis = n.axis;
        const int rank = n.out.rank();
        std::size_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(n.out.dim(i));
        for (int i = axis + 1; i < rank; ++i) inner *= static_cast<std::size_t>(n.out.dim(i));
        const std::size_t out_block = static_cast<std::size_t>(n.out.dim(axis)) * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          std::size_t off = o * out_block;
          for (NodeId x : n.inputs) {
            const Tensor& t = value(x);
            const std::size_t block = static_cast<std::size_t>(t.dim(axis)) * inner;
            if (node(x).requires_grad) {
              std::vector<double>& d = grad_buf(x);
              for (std::size_t i = 0; i < block; ++i) d[o * block + i] += g[off + i];
            }
            off += block;
          }
        }
        break;
      }
      case Op::kStackRows: {
        const std::size_t width = static_cast<std::size_t>(n.out.dim(1));
        for (std::size_t r = 0; r < n.inputs.size(); ++r) {
          if (!node(n.inputs[r]).requires_grad) continue;
          std::vector<double>& d = grad_buf(n.inputs[r]);
          for (std::size_t i = 0; i < width; ++i) d[i] += g[r * width + i];
        }
        break;
      }
      case Op::kGatherRows: {
        std::vector<double>& d = grad_buf(n.inputs[0]);
        const std::size_t w = static_cast<std::size_t>(value(n.inputs[0]).dim(1));
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
          const std::size_t row = static_cast<std::size_t>(n.indices[i]);
          for (std::size_t c = 0; c < w; ++c) d[row * w + c] += g[i * w + c];
        }
        break;
      }
      case Op::kMeanRows: {
        std::vector<double>& d = grad_buf(n.inputs[0]);
        const Tensor& M = value(n.inputs[0]);
        const int rows = M.dim(0), cols = M.dim(1);
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) {
            d[static_cast<std::size_t>(r) * cols + c] +=
                g[static_cast<std::size_t>(c)] / rows;
          }
        }
        break;
      }
      case Op::kNll: {
        std::vector<double>& d = grad_buf(n.inputs[0]);
        const std::size_t idx = static_cast<std::size_t>(n.indices[0]);
        for (std::size_t i = 0; i < d.size(); ++i) {
          d[i] += g[0] * (n.cache[i] - (i == idx ? 1.0 : 0.0));
        }
        break;
      }
    }
  }
}

}  // namespace ctxnmt
