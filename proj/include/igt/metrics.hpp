#pragma once

// Evaluation metrics (MAE / MAPE / MARE), payment-time entropy over 1-hour
// delivery bins, diurnal breakdowns and order-count-binned reports.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "igt/errors.hpp"
#include "igt/orders.hpp"

namespace igt {

struct MetricsReport {
  double mae = 0.0;   // hours
  double mape = 0.0;  // fraction
  double mare = 0.0;  // fraction
  std::size_t count = 0;
};

inline double mae(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw DataError("mae: length mismatch");
  if (y.empty()) throw DataError("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

inline double mape(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw DataError("mape: length mismatch");
  if (y.empty()) throw DataError("mape: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) throw DataError("mape: zero ground truth at index " + std::to_string(i));
    s += std::fabs((y[i] - yhat[i]) / y[i]);
  }
  return s / static_cast<double>(y.size());
}

inline double mare(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw DataError("mare: length mismatch");
  if (y.empty()) throw DataError("mare: empty input");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += std::fabs(y[i] - yhat[i]);
    den += y[i];
  }
  if (den <= 0.0) throw DataError("mare: ground truth sums to zero");
  return num / den;
}

inline MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat) {
  return {mae(y, yhat), mape(y, yhat), mare(y, yhat), y.size()};
}

// Shannon entropy (nats) of the delivery-time distribution among orders paid
// in the same hour slot; labels are discretized into 1-hour bins. Hours with
// no orders are absent from the result.
struct HourEntropy {
  int hour = 0;
  double entropy_nats = 0.0;
  std::size_t count = 0;
};

inline std::vector<HourEntropy> entropy_by_payment_time(std::span<const Order> orders,
                                                        double bin_hours = 1.0) {
  if (bin_hours <= 0.0) throw ConfigError("entropy bin width must be positive");
  std::array<std::map<std::int64_t, std::size_t>, 24> hist;
  std::array<std::size_t, 24> totals{};
  for (const Order& o : orders) {
    const int h = o.payment_hour();
    hist[h][static_cast<std::int64_t>(std::floor(o.delivery_hours / bin_hours))]++;
    totals[h]++;
  }
  std::vector<HourEntropy> out;
  for (int h = 0; h < 24; ++h) {
    if (totals[h] == 0) continue;
    double e = 0.0;
    for (const auto& [bin, c] : hist[h]) {
      const double p = static_cast<double>(c) / static_cast<double>(totals[h]);
      e -= p * std::log(p);
    }
    out.push_back({h, e, totals[h]});
  }
  return out;
}

inline double mean_entropy(const std::vector<HourEntropy>& slots) {
  double num = 0.0;
  std::size_t den = 0;
  for (const HourEntropy& s : slots) {
    num += s.entropy_nats * static_cast<double>(s.count);
    den += s.count;
  }
  if (den == 0) throw DataError("mean_entropy: no occupied slots");
  return num / static_cast<double>(den);
}

// Per-payment-hour metric rows; all 24 hours are emitted, empty ones with
// count 0 and NaN metrics.
struct HourReport {
  int hour = 0;
  MetricsReport metrics;
};

inline std::vector<HourReport> by_hour_report(std::span<const Order> orders,
                                              std::span<const double> yhat) {
  if (orders.size() != yhat.size()) throw DataError("by_hour_report: length mismatch");
  std::array<std::vector<double>, 24> ys, ps;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    ys[orders[i].payment_hour()].push_back(orders[i].delivery_hours);
    ps[orders[i].payment_hour()].push_back(yhat[i]);
  }
  std::vector<HourReport> out(24);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int h = 0; h < 24; ++h) {
    out[h].hour = h;
    if (ys[h].empty()) {
      out[h].metrics = {nan, nan, nan, 0};
    } else {
      out[h].metrics = compute_metrics(ys[h], ps[h]);
    }
  }
  return out;
}

// Order-count bins for one element type. Boundaries are upper bounds of the
// finite bins; the unseen bin (N = 0) always comes first and the last bin is
// open-ended.
struct BinSpec {
  NodeType type = NodeType::Retailer;
  std::vector<std::size_t> upper;      // e.g. {100, 500}
  std::size_t min_group_size = 50;     // below this, the bin is low confidence

  static BinSpec retailer() { return {NodeType::Retailer, {100, 500}, 50}; }
  static BinSpec address(NodeType t) {
    if (t != NodeType::Origin && t != NodeType::Destination)
      throw ConfigError("address bins need an address node type");
    return {t, {500, 1000}, 50};
  }
  static BinSpec for_type(NodeType t) { return t == NodeType::Retailer ? retailer() : address(t); }

  std::size_t bin_count() const { return upper.size() + 2; }

  std::size_t bin_of(std::size_t n) const {
    if (n == 0) return 0;
    for (std::size_t i = 0; i < upper.size(); ++i)
      if (n <= upper[i]) return i + 1;
    return upper.size() + 1;
  }

  // comma-free so the labels survive the flat CSV layout
  std::string label(std::size_t bin) const {
    if (bin == 0) return "unseen";
    if (bin == upper.size() + 1) return ">" + std::to_string(upper.back());
    const std::size_t lo = bin == 1 ? 1 : upper[bin - 2] + 1;
    return std::to_string(lo) + "-" + std::to_string(upper[bin - 1]);
  }
};

// Orders each element received inside a reference split (normally train).
inline std::unordered_map<std::string, std::size_t> element_order_counts(std::span<const Order> orders,
                                                                         NodeType type) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const Order& o : orders) counts[o.element_id(type)]++;
  return counts;
}

struct BinReport {
  std::string label;
  MetricsReport metrics;
  bool low_confidence = false;
};

inline std::vector<BinReport> binned_report(std::span<const Order> eval_orders,
                                            std::span<const double> yhat,
                                            const std::unordered_map<std::string, std::size_t>& train_counts,
                                            const BinSpec& spec) {
  if (eval_orders.size() != yhat.size()) throw DataError("binned_report: length mismatch");
  std::vector<std::vector<double>> ys(spec.bin_count()), ps(spec.bin_count());
  for (std::size_t i = 0; i < eval_orders.size(); ++i) {
    const auto it = train_counts.find(eval_orders[i].element_id(spec.type));
    const std::size_t n = it == train_counts.end() ? 0 : it->second;
    const std::size_t b = spec.bin_of(n);
    ys[b].push_back(eval_orders[i].delivery_hours);
    ps[b].push_back(yhat[i]);
  }
  std::vector<BinReport> out(spec.bin_count());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t b = 0; b < spec.bin_count(); ++b) {
    out[b].label = spec.label(b);
    if (ys[b].empty()) {
      out[b].metrics = {nan, nan, nan, 0};
      out[b].low_confidence = true;
    } else {
      out[b].metrics = compute_metrics(ys[b], ps[b]);
      out[b].low_confidence = ys[b].size() < spec.min_group_size;
    }
  }
  return out;
}

}  // namespace igt
