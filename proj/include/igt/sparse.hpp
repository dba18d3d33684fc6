#pragma once

// Compressed-row sparse matrices and the differentiable sparse product used
// by the propagation pipeline. All adjacencies handled here are symmetric,
// which keeps the backward pass a second product with the same matrix.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "igt/tensor.hpp"

namespace igt {

struct Csr {
  std::size_t n = 0;  // square: n x n
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }

  static Csr from_triplets(std::size_t n, std::vector<std::size_t> rows,
                           std::vector<std::size_t> cols, std::vector<double> vals) {
    Csr m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    for (std::size_t r : rows) m.row_ptr[r + 1]++;
    for (std::size_t i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    m.col.resize(rows.size());
    m.val.resize(rows.size());
    std::vector<std::size_t> next(m.row_ptr.begin(), m.row_ptr.end() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t slot = next[rows[i]]++;
      m.col[slot] = cols[i];
      m.val[slot] = vals[i];
    }
    return m;
  }

  void multiply_into(const double* x, std::size_t d, double* y) const {
#pragma omp parallel for schedule(static) if (nnz() * d > 16384)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
      double* yr = y + r * d;
      for (std::size_t j = 0; j < d; ++j) yr[j] = 0.0;
      for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
        const double w = val[e];
        const double* xr = x + col[e] * d;
        for (std::size_t j = 0; j < d; ++j) yr[j] += w * xr[j];
      }
    }
  }

  bool is_symmetric(double tol = 0.0) const {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
        const std::size_t c = col[e];
        bool found = false;
        for (std::size_t e2 = row_ptr[c]; e2 < row_ptr[c + 1]; ++e2)
          if (col[e2] == r) {
            if (std::fabs(val[e2] - val[e]) > tol) return false;
            found = true;
            break;
          }
        if (!found) return false;
      }
    return true;
  }
};

// H' = A * H for symmetric A; gradient flows back as A * dH'.
// The matrix is captured by reference and must outlive the tape.
inline Tensor spmm_sym(const Csr& a, const Tensor& h) {
  detail::check_rank2(h, "spmm_sym rhs");
  if (h.shape()[0] != a.n)
    throw TensorError("spmm_sym shape mismatch: matrix is " + std::to_string(a.n) + "x" +
                      std::to_string(a.n) + ", rhs is " + shape_str(h.shape()));
  const std::size_t d = h.shape()[1];
  std::vector<double> out(a.n * d);
  a.multiply_into(h.values().data(), d, out.data());
  const bool traced = detail::tracing({&h});
  Tensor r = make_op_output({a.n, d}, std::move(out), traced);
  detail::record_if(traced, r, [&a, hd = h.data_ptr(), d](const std::vector<double>& g) {
    if (!hd->requires_grad) return;
    if (hd->grad.empty()) hd->grad.assign(hd->values.size(), 0.0);
    std::vector<double> back(hd->values.size());
    a.multiply_into(g.data(), d, back.data());
    for (std::size_t i = 0; i < back.size(); ++i) hd->grad[i] += back[i];
  });
  return r;
}

}  // namespace igt
