#include "fedleak/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedleak {

void jacobi_eigen_sym(std::vector<double> a, size_t n,
                      std::vector<double>& eigvals,
                      std::vector<double>& eigvecs) {
  if (a.size() != n * n) throw std::invalid_argument("matrix size mismatch");

  eigvecs.assign(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) eigvecs[i * n + i] = 1.0;

  double total = 0.0;
  for (double v : a) total += v * v;
  double norm = std::sqrt(total);
  if (norm == 0.0) {
    eigvals.assign(n, 0.0);
    return;
  }

  const double tol = 1e-10 * norm;
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (size_t p = 0; p < n; ++p)
      for (size_t q = p + 1; q < n; ++q) off += 2.0 * a[p * n + q] * a[p * n + q];
    if (std::sqrt(off) <= tol) break;

    for (size_t p = 0; p < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        double apq = a[p * n + q];
        if (apq == 0.0) continue;
        double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        // Rotate rows/columns p and q of the symmetric matrix.
        for (size_t i = 0; i < n; ++i) {
          double aip = a[i * n + p];
          double aiq = a[i * n + q];
          a[i * n + p] = c * aip - s * aiq;
          a[i * n + q] = s * aip + c * aiq;
        }
        for (size_t i = 0; i < n; ++i) {
          double api = a[p * n + i];
          double aqi = a[q * n + i];
          a[p * n + i] = c * api - s * aqi;
          a[q * n + i] = s * api + c * aqi;
        }
        for (size_t i = 0; i < n; ++i) {
          double vip = eigvecs[i * n + p];
          double viq = eigvecs[i * n + q];
          eigvecs[i * n + p] = c * vip - s * viq;
          eigvecs[i * n + q] = s * vip + c * viq;
        }
      }
    }
  }

  eigvals.resize(n);
  for (size_t i = 0; i < n; ++i) eigvals[i] = a[i * n + i];
}

namespace {

// Orthogonalize candidate standard-basis vectors against the rows already in
// `components` to fill directions PCA could not determine (zero variance).
void complete_degenerate(std::vector<double>& components, size_t filled,
                         size_t d, size_t D) {
  size_t next_basis = 0;
  for (size_t r = filled; r < d; ++r) {
    bool placed = false;
    for (; next_basis < D && !placed; ++next_basis) {
      std::vector<double> cand(D, 0.0);
      cand[next_basis] = 1.0;
      for (size_t prev = 0; prev < r; ++prev) {
        double dot = 0.0;
        for (size_t j = 0; j < D; ++j)
          dot += cand[j] * components[prev * D + j];
        for (size_t j = 0; j < D; ++j)
          cand[j] -= dot * components[prev * D + j];
      }
      double norm = 0.0;
      for (double v : cand) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.5) {
        for (size_t j = 0; j < D; ++j) components[r * D + j] = cand[j] / norm;
        placed = true;
      }
    }
    if (!placed)
      throw std::invalid_argument(
          "cannot complete an orthonormal basis for the requested dims");
  }
}

void apply_sign_convention(std::vector<double>& components, size_t d,
                           size_t D) {
  for (size_t r = 0; r < d; ++r) {
    size_t arg = 0;
    for (size_t j = 1; j < D; ++j)
      if (std::abs(components[r * D + j]) > std::abs(components[r * D + arg]))
        arg = j;
    if (components[r * D + arg] < 0.0)
      for (size_t j = 0; j < D; ++j) components[r * D + j] = -components[r * D + j];
  }
}

}  // namespace

PcaModel pca_fit(const std::vector<std::vector<double>>& rows, size_t d,
                 PcaRoute route) {
  size_t n = rows.size();
  if (n < 2) throw std::invalid_argument("PCA needs at least 2 rows");
  size_t D = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != D)
      throw std::invalid_argument("PCA rows have inconsistent dimensions");
  if (d == 0 || d > std::min(n - 1, D))
    throw std::invalid_argument("requested dims " + std::to_string(d) +
                                " exceed min(n-1, D) = " +
                                std::to_string(std::min(n - 1, D)));

  PcaModel model;
  model.mean.assign(D, 0.0);
  for (const auto& r : rows)
    for (size_t j = 0; j < D; ++j) model.mean[j] += r[j];
  for (double& m : model.mean) m /= double(n);

  // Centered data, kept in one block for the dot products below.
  std::vector<double> xc(n * D);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < D; ++j) xc[i * D + j] = rows[i][j] - model.mean[j];

  if (route == PcaRoute::Auto)
    route = n <= D ? PcaRoute::Gram : PcaRoute::Covariance;

  model.components.assign(d * D, 0.0);
  model.explained_variance.assign(d, 0.0);
  model.degenerate.assign(d, false);

  std::vector<double> eigvals, eigvecs;
  size_t m = route == PcaRoute::Gram ? n : D;
  {
    std::vector<double> mat(m * m, 0.0);
    if (route == PcaRoute::Gram) {
      for (size_t i = 0; i < n; ++i)
        for (size_t j = i; j < n; ++j) {
          double dot = 0.0;
          const double* a = xc.data() + i * D;
          const double* b = xc.data() + j * D;
          for (size_t k = 0; k < D; ++k) dot += a[k] * b[k];
          mat[i * n + j] = dot;
          mat[j * n + i] = dot;
        }
    } else {
      for (size_t i = 0; i < D; ++i)
        for (size_t j = i; j < D; ++j) {
          double dot = 0.0;
          for (size_t k = 0; k < n; ++k) dot += xc[k * D + i] * xc[k * D + j];
          mat[i * D + j] = dot;
          mat[j * D + i] = dot;
        }
    }
    jacobi_eigen_sym(std::move(mat), m, eigvals, eigvecs);
  }

  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return eigvals[a] > eigvals[b]; });

  double top = std::max(eigvals[order[0]], 0.0);
  double eps = std::max(top, 1.0) * 1e-12;
  size_t filled = 0;
  for (size_t r = 0; r < d; ++r) {
    double lambda = eigvals[order[r]];
    if (lambda <= eps) break;  // the rest is numerically zero variance
    model.explained_variance[r] = lambda / double(n - 1);
    if (route == PcaRoute::Gram) {
      // Component = X_c^T v / sqrt(lambda).
      double inv = 1.0 / std::sqrt(lambda);
      for (size_t i = 0; i < n; ++i) {
        double vi = eigvecs[i * n + order[r]];
        if (vi == 0.0) continue;
        const double* a = xc.data() + i * D;
        double w = vi * inv;
        for (size_t j = 0; j < D; ++j) model.components[r * D + j] += w * a[j];
      }
    } else {
      for (size_t j = 0; j < D; ++j)
        model.components[r * D + j] = eigvecs[j * D + order[r]];
    }
    filled = r + 1;
  }
  for (size_t r = filled; r < d; ++r) model.degenerate[r] = true;
  complete_degenerate(model.components, filled, d, D);
  apply_sign_convention(model.components, d, D);
  return model;
}

std::vector<double> pca_apply(const PcaModel& model,
                              const std::vector<double>& row) {
  size_t D = model.in_dim(), d = model.out_dim();
  if (row.size() != D)
    throw std::invalid_argument("row has dimension " +
                                std::to_string(row.size()) + ", PCA expects " +
                                std::to_string(D));
  std::vector<double> out(d, 0.0);
  for (size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    const double* c = model.components.data() + r * D;
    for (size_t j = 0; j < D; ++j) acc += c[j] * (row[j] - model.mean[j]);
    out[r] = acc;
  }
  return out;
}

}  // namespace fedleak
