#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctxnmt {

/// Dense row-major tensor of doubles. Everything in the toolkit is double
/// precision; rank 1 and rank 2 cover all model state.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0, bool req = false);
  Tensor(std::vector<int> s, std::vector<double> v, bool req = false);

  static Tensor scalar(double v);

  int rank() const { return static_cast<int>(shape.size()); }
  std::size_t numel() const { return values.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rows() const { return shape[0]; }
  int cols() const { return shape[1]; }

  double& at(int i) { return values[static_cast<std::size_t>(i)]; }
  double at(int i) const { return values[static_cast<std::size_t>(i)]; }
  double& at(int r, int c) {
    return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                  static_cast<std::size_t>(c)];
  }
  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                  static_cast<std::size_t>(c)];
  }

  bool all_finite() const;

  /// Allocates an all-zero grad buffer if none is present.
  void ensure_grad();
  /// Resets the grad buffer to zeros (allocating it if needed).
  void zero_grad();
};

/// Renders a shape as e.g. "3x4" (scalar-ish rank-0 renders as "()").
std::string shape_str(std::span<const int> shape);

/// Product of dims; rejects non-positive dims.
std::size_t shape_numel(std::span<const int> shape);

/// Zeroes the grad buffers of a parameter set. Call between optimizer steps;
/// Graph::backward accumulates.
void zero_grads(const std::vector<Tensor*>& params);

}  // namespace ctxnmt
