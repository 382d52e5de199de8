#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fedleak {

// Dense row-major tensor of doubles. All training math runs in 64-bit.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {}

  static Tensor zeros(std::vector<size_t> s);

  size_t numel() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

size_t shape_numel(const std::vector<size_t>& shape);
std::string shape_str(const std::vector<size_t>& shape);
bool same_shape(const Tensor& a, const Tensor& b);

// True when every value is finite (no NaN/Inf).
bool all_finite(const std::vector<double>& values);

}  // namespace fedleak
