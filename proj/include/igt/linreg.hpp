#pragma once

// Ordinary least squares on the concatenated raw element features, solved by
// normal equations with a small ridge. Serves as the sanity baseline for the
// learned models.

#include <cmath>
#include <span>
#include <vector>

#include "igt/errors.hpp"
#include "igt/orders.hpp"

namespace igt {

// Solves (X^T X + ridge I) w = X^T y in place via Cholesky.
inline std::vector<double> solve_normal_equations(const std::vector<std::vector<double>>& x,
                                                  std::span<const double> y, double ridge = 1e-8) {
  if (x.empty() || x.size() != y.size()) throw DataError("ols: bad design matrix");
  const std::size_t p = x[0].size();
  std::vector<double> ata(p * p, 0.0), aty(p, 0.0);
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      aty[i] += x[r][i] * y[r];
      for (std::size_t j = i; j < p; ++j) ata[i * p + j] += x[r][i] * x[r][j];
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    ata[i * p + i] += ridge;
    for (std::size_t j = 0; j < i; ++j) ata[i * p + j] = ata[j * p + i];
  }
  // Cholesky: ata = L L^T
  std::vector<double> l(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = ata[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * p + k] * l[j * p + k];
      if (i == j) {
        if (s <= 0.0) throw NumericError("ols: matrix not positive definite");
        l[i * p + i] = std::sqrt(s);
      } else {
        l[i * p + j] = s / l[j * p + j];
      }
    }
  std::vector<double> z(p), w(p);
  for (std::size_t i = 0; i < p; ++i) {
    double s = aty[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * p + k] * z[k];
    z[i] = s / l[i * p + i];
  }
  for (std::size_t ii = p; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double s = z[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= l[k * p + i] * w[k];
    w[i] = s / l[i * p + i];
  }
  return w;
}

class LinearRegression {
 public:
  static LinearRegression fit(const Dataset& ds, std::span<const Order> train, double ridge = 1e-6) {
    LinearRegression lr;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    x.reserve(train.size());
    y.reserve(train.size());
    for (const Order& o : train) {
      x.push_back(design_row(ds, o));
      y.push_back(o.delivery_hours);
    }
    lr.weights_ = solve_normal_equations(x, y, ridge);
    return lr;
  }

  double predict(const Dataset& ds, const Order& o) const {
    const auto row = design_row(ds, o);
    double s = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) s += row[i] * weights_[i];
    return s;
  }

  std::vector<double> predict_all(const Dataset& ds, std::span<const Order> orders) const {
    std::vector<double> out;
    out.reserve(orders.size());
    for (const Order& o : orders) out.push_back(predict(ds, o));
    return out;
  }

  const std::vector<double>& weights() const { return weights_; }

  static std::vector<double> design_row(const Dataset& ds, const Order& o) {
    const Order* base = ds.orders().data();
    const std::size_t idx = static_cast<std::size_t>(&o - base);
    std::vector<double> row;
    row.reserve(ds.schema().max_width() * 4 + 1);
    for (NodeType t : kNodeTypes) {
      auto f = ds.order_feature(t, idx);
      row.insert(row.end(), f.begin(), f.end());
    }
    row.push_back(1.0);  // bias
    return row;
  }

 private:
  std::vector<double> weights_;
};

}  // namespace igt
