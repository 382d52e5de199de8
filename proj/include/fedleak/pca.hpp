#pragma once

#include <cstddef>
#include <vector>

namespace fedleak {

struct PcaModel {
  std::vector<double> mean;                // length D
  std::vector<double> components;          // d x D, rows orthonormal
  std::vector<double> explained_variance;  // length d, non-increasing
  std::vector<bool> degenerate;            // true where variance is ~zero

  size_t in_dim() const { return mean.size(); }
  size_t out_dim() const { return explained_variance.size(); }
};

enum class PcaRoute {
  Auto,        // Gram when n <= D, covariance otherwise
  Gram,        // eigen-decompose the n x n Gram matrix
  Covariance,  // eigen-decompose the D x D sample covariance
};

// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major).
// On return eigvals[i] pairs with the eigenvector in column i of eigvecs;
// unordered. Converges when the off-diagonal Frobenius norm falls below
// 1e-10 of the total.
void jacobi_eigen_sym(std::vector<double> a, size_t n,
                      std::vector<double>& eigvals,
                      std::vector<double>& eigvecs);

// Principal components of the row set (sample covariance, 1/(n-1)).
// Requires n >= 2 and d <= min(n-1, D). Components use the deterministic
// sign convention that each row's largest-magnitude entry is positive.
// Zero-variance directions are flagged degenerate and completed from the
// standard basis so the component rows stay orthonormal.
PcaModel pca_fit(const std::vector<std::vector<double>>& rows, size_t d,
                 PcaRoute route = PcaRoute::Auto);

// components * (row - mean)
std::vector<double> pca_apply(const PcaModel& model,
                              const std::vector<double>& row);

}  // namespace fedleak
