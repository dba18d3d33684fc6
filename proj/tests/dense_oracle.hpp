#pragma once

// Dense reference implementations used as independent oracles: plain matrix
// algebra, the classic graph-convolution layer sigma(A_hat * H * W), and a
// dense replication of the hetero propagation pipeline. Nothing here shares
// code with the sparse implementation under test.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "igt/graph.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat identity(std::size_t n) {
  Mat m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat dense_from_csr(const igt::Csr& a) {
  Mat m = zeros(a.n, a.n);
  for (std::size_t r = 0; r < a.n; ++r)
    for (std::size_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) m[r][a.col[e]] = a.val[e];
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// D^-1/2 (A+I) D^-1/2 computed densely from a raw adjacency.
inline Mat dense_normalize(const Mat& adj) {
  const std::size_t n = adj.size();
  Mat a_hat = adj;
  for (std::size_t i = 0; i < n; ++i) a_hat[i][i] += 1.0;
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a_hat[i][j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a_hat[i][j] /= std::sqrt(d[i] * d[j]);
  return a_hat;
}

// The classic homogeneous layer sigma(A_hat * H * W). With W = I and the
// identity activation this degrades to the propagation rule under test.
inline Mat vanilla_gcn_layer(const Mat& a_hat, const Mat& h, const Mat& w,
                             const std::function<double(double)>& act = [](double x) { return x; }) {
  Mat out = matmul(matmul(a_hat, h), w);
  for (auto& row : out)
    for (double& v : row) v = act(v);
  return out;
}

// Dense replication of the layered pipeline: per layer, every non-empty
// bipartite block propagates the stacked per-type embeddings, the type rows
// are sliced back out and summed, and the final value is the mean over
// layers 0..L. Types with no contributing block carry their previous layer.
inline std::array<Mat, 4> dense_pipeline(const std::array<Mat, 4>& h0,
                                         const std::vector<igt::BipartiteAdj>& blocks, int layers) {
  std::array<Mat, 4> h = h0;
  std::array<Mat, 4> acc = h0;  // running sum over layers
  for (int l = 1; l <= layers; ++l) {
    std::array<Mat, 4> next{};
    std::array<bool, 4> touched{};
    for (const igt::BipartiteAdj& blk : blocks) {
      const int ta = static_cast<int>(blk.type_a), tb = static_cast<int>(blk.type_b);
      Mat stacked = h[ta];
      stacked.insert(stacked.end(), h[tb].begin(), h[tb].end());
      const Mat a_hat = dense_normalize(dense_from_csr(blk.adjacency));
      const std::size_t d = stacked.empty() ? 0 : stacked[0].size();
      Mat prop = vanilla_gcn_layer(a_hat, stacked, identity(d));
      for (int t : {ta, tb}) {
        const std::size_t off = (t == ta) ? 0 : blk.n_a;
        const std::size_t cnt = (t == ta) ? blk.n_a : blk.n_b;
        if (!touched[t]) {
          next[t] = zeros(cnt, d);
          touched[t] = true;
        }
        for (std::size_t i = 0; i < cnt; ++i)
          for (std::size_t j = 0; j < d; ++j) next[t][i][j] += prop[off + i][j];
      }
    }
    for (int t = 0; t < 4; ++t)
      if (touched[t]) h[t] = next[t];
    for (int t = 0; t < 4; ++t)
      for (std::size_t i = 0; i < h[t].size(); ++i)
        for (std::size_t j = 0; j < h[t][i].size(); ++j) acc[t][i][j] += h[t][i][j];
  }
  for (int t = 0; t < 4; ++t)
    for (auto& row : acc[t])
      for (double& v : row) v /= static_cast<double>(layers + 1);
  return acc;
}

}  // namespace oracle
