#include "ctxnmt/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxnmt {

Tensor::Tensor(std::vector<int> s, double fill, bool req)
    : shape(std::move(s)), values(shape_numel(shape), fill), requires_grad(req) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> v, bool req)
    : shape(std::move(s)), values(std::move(v)), requires_grad(req) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " wants " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::ensure_grad() {
  if (!grad) grad.emplace(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (grad) {
    grad->assign(values.size(), 0.0);
  } else {
    grad.emplace(values.size(), 0.0);
  }
}

std::string shape_str(std::span<const int> shape) {
  if (shape.empty()) return "()";
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::size_t shape_numel(std::span<const int> shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor: non-positive dim in shape " +
                                  shape_str(shape));
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

}  // namespace ctxnmt
