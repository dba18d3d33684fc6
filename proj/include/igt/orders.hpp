#pragma once

// Order schema, CSV ingestion, synthetic order generation, chronological
// splitting and per-element raw feature vectors.
//
// Timestamps are unix seconds interpreted as UTC; a "day" is ts / 86400 and
// the payment slot is the hour of day (24 slots). Trailing statistics for an
// order are computed from orders paid strictly before the start of its hour,
// so a feature can never see its own hour.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "igt/errors.hpp"
#include "igt/rng.hpp"

namespace igt {

enum class NodeType : int { Retailer = 0, Origin = 1, Destination = 2, Slot = 3 };

inline constexpr int kNumNodeTypes = 4;
inline constexpr std::array<NodeType, 4> kNodeTypes = {NodeType::Retailer, NodeType::Origin,
                                                       NodeType::Destination, NodeType::Slot};

inline const char* node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Retailer: return "retailer";
    case NodeType::Origin: return "origin";
    case NodeType::Destination: return "destination";
    case NodeType::Slot: return "slot";
  }
  return "?";
}

inline NodeType parse_node_type(std::string_view s) {
  for (NodeType t : kNodeTypes)
    if (s == node_type_name(t)) return t;
  throw DataError("unknown element type '" + std::string(s) + "'");
}

struct Order {
  std::string order_id;
  std::string retailer_id;
  std::string origin_id;
  std::string destination_id;
  std::int64_t payment_unix_ts = 0;
  double delivery_hours = 0.0;
  double origin_lon = 0.0, origin_lat = 0.0;
  double dest_lon = 0.0, dest_lat = 0.0;

  std::int64_t payment_day() const { return payment_unix_ts / 86400; }
  std::int64_t payment_abs_hour() const { return payment_unix_ts / 3600; }
  int payment_hour() const { return static_cast<int>((payment_unix_ts % 86400) / 3600); }
  std::string slot_id() const { return std::to_string(payment_hour()); }

  const std::string& element_id(NodeType t) const {
    static thread_local std::string slot;
    switch (t) {
      case NodeType::Retailer: return retailer_id;
      case NodeType::Origin: return origin_id;
      case NodeType::Destination: return destination_id;
      case NodeType::Slot: slot = slot_id(); return slot;
    }
    throw DataError("bad node type");
  }
};

struct FeatureSchema {
  struct ElementSpec {
    std::size_t width = 0;
    std::vector<std::string> stats;
  };
  std::array<ElementSpec, 4> by_type;

  std::size_t width(NodeType t) const { return by_type[static_cast<int>(t)].width; }
  std::size_t max_width() const {
    std::size_t w = 0;
    for (const auto& e : by_type) w = std::max(w, e.width);
    return w;
  }

  static const FeatureSchema& standard() {
    static const FeatureSchema s = [] {
      FeatureSchema f;
      f.by_type[0] = {2, {"trailing_mean_delivery_hours", "log1p_order_count"}};
      f.by_type[1] = {3, {"lon", "lat", "log1p_order_count"}};
      f.by_type[2] = {3, {"lon", "lat", "log1p_order_count"}};
      f.by_type[3] = {24, {"hour_onehot"}};
      return f;
    }();
    return s;
  }
};

struct GeneratorConfig {
  std::size_t retailers = 100;
  std::size_t origins = 20;
  std::size_t destinations = 50;
  std::size_t days = 30;
  std::size_t orders_per_day = 500;
  double sigma_hours = 1.0;          // label noise
  double base_hours = 24.0;          // delivery time floor component
  double retailer_sigma_hours = 2.0; // spread of per-retailer offsets
  double speed_hours_per_unit = 0.8; // distance-to-hours factor
  double alt_origin_prob = 0.1;      // orders shipped from a non-home origin
  int cutoff_hour = 15;              // daily dispatch hour
  std::int64_t start_unix_ts = 1609459200;  // 2021-01-01 00:00 UTC
  std::array<double, 24> diurnal = {1, 1, 1, 1, 1, 2, 4, 6, 8, 10, 12, 12,
                                    10, 10, 11, 12, 10, 8, 8, 10, 12, 10, 6, 3};

  void validate() const {
    if (retailers == 0 || origins == 0 || destinations == 0 || days == 0 || orders_per_day == 0)
      throw ConfigError("generator counts must be positive");
    if (sigma_hours < 0.0) throw ConfigError("sigma_hours must be >= 0");
    if (cutoff_hour < 0 || cutoff_hour > 23) throw ConfigError("cutoff_hour must be in [0,23]");
    double total = 0.0;
    for (double w : diurnal) {
      if (w < 0.0) throw ConfigError("diurnal weights must be >= 0");
      total += w;
    }
    if (total <= 0.0) throw ConfigError("diurnal weights must not all be zero");
  }
};

// Ground truth behind a generated dataset; used by tests to compare the
// sample mean against the closed-form mean of the label formula.
struct GeneratorInfo {
  GeneratorConfig config;
  std::vector<double> retailer_effect;
  std::vector<std::size_t> retailer_home_origin;
  std::vector<std::pair<double, double>> origin_coords;
  std::vector<std::pair<double, double>> dest_coords;

  static double dispatch_penalty(int hour, int cutoff) {
    return static_cast<double>(((cutoff - hour) % 24 + 24) % 24);
  }

  double analytic_label_mean() const {
    const auto& c = config;
    double mean = c.base_hours;
    for (double e : retailer_effect) mean += e / static_cast<double>(c.retailers);
    // origin distribution: home origin of a uniform retailer, with an
    // alt_origin_prob chance of a uniform origin instead
    std::vector<double> p_origin(c.origins, c.alt_origin_prob / static_cast<double>(c.origins));
    for (std::size_t r = 0; r < c.retailers; ++r)
      p_origin[retailer_home_origin[r]] += (1.0 - c.alt_origin_prob) / static_cast<double>(c.retailers);
    double dist = 0.0;
    for (std::size_t o = 0; o < c.origins; ++o)
      for (std::size_t d = 0; d < c.destinations; ++d) {
        const double dx = origin_coords[o].first - dest_coords[d].first;
        const double dy = origin_coords[o].second - dest_coords[d].second;
        dist += p_origin[o] * std::sqrt(dx * dx + dy * dy) / static_cast<double>(c.destinations);
      }
    mean += c.speed_hours_per_unit * dist;
    double wsum = 0.0, pen = 0.0;
    for (int h = 0; h < 24; ++h) wsum += c.diurnal[h];
    for (int h = 0; h < 24; ++h) pen += c.diurnal[h] / wsum * dispatch_penalty(h, c.cutoff_hour);
    return mean + pen;
  }
};

struct SplitSpec {
  std::int64_t validation_days = 0;
  std::int64_t test_days = 0;
};

class Dataset;

struct DatasetSplit {
  std::span<const Order> train;
  std::span<const Order> validation;
  std::span<const Order> test;
};

class Dataset {
 public:
  Dataset() = default;

  static Dataset from_orders(std::vector<Order> orders) {
    Dataset d;
    d.orders_ = std::move(orders);
    std::stable_sort(d.orders_.begin(), d.orders_.end(),
                     [](const Order& a, const Order& b) { return a.payment_unix_ts < b.payment_unix_ts; });
    d.index_elements_();
    d.compute_features_();
    return d;
  }

  // CSV layout (header required):
  // order_id,retailer_id,origin_id,destination_id,payment_unix_ts,delivery_hours,
  // origin_lon,origin_lat,dest_lon,dest_lat
  static Dataset ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
    strip_cr(line);
    if (line != header())
      throw DataError("unexpected CSV header in " + path + ": '" + line + "'");
    std::vector<Order> orders;
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      strip_cr(line);
      if (line.empty()) continue;
      orders.push_back(parse_row(line, row));
    }
    return from_orders(std::move(orders));
  }

  static const char* header() {
    return "order_id,retailer_id,origin_id,destination_id,payment_unix_ts,delivery_hours,"
           "origin_lon,origin_lat,dest_lon,dest_lat";
  }

  static Dataset generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed,
                                    GeneratorInfo* info_out = nullptr) {
    cfg.validate();
    Rng rng(seed);
    GeneratorInfo info;
    info.config = cfg;
    info.retailer_effect.resize(cfg.retailers);
    for (double& e : info.retailer_effect) e = rng.normal(0.0, cfg.retailer_sigma_hours);
    info.retailer_home_origin.resize(cfg.retailers);
    for (auto& o : info.retailer_home_origin) o = rng.below(cfg.origins);
    info.origin_coords.resize(cfg.origins);
    for (auto& c : info.origin_coords) c = {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
    info.dest_coords.resize(cfg.destinations);
    for (auto& c : info.dest_coords) c = {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};

    std::array<double, 24> cum{};
    double total = 0.0;
    for (int h = 0; h < 24; ++h) {
      total += cfg.diurnal[h];
      cum[h] = total;
    }

    std::vector<Order> orders;
    orders.reserve(cfg.days * cfg.orders_per_day);
    std::size_t serial = 0;
    for (std::size_t day = 0; day < cfg.days; ++day) {
      for (std::size_t k = 0; k < cfg.orders_per_day; ++k) {
        const double u = rng.uniform(0.0, total);
        int hour = 0;
        while (hour < 23 && u >= cum[hour]) ++hour;
        const std::int64_t sec_in_hour = static_cast<std::int64_t>(rng.below(3600));
        const std::size_t r = rng.below(cfg.retailers);
        const std::size_t o = rng.uniform() < cfg.alt_origin_prob ? rng.below(cfg.origins)
                                                                  : info.retailer_home_origin[r];
        const std::size_t d = rng.below(cfg.destinations);
        const double noise = rng.normal(0.0, cfg.sigma_hours);

        const double dx = info.origin_coords[o].first - info.dest_coords[d].first;
        const double dy = info.origin_coords[o].second - info.dest_coords[d].second;
        double label = cfg.base_hours + info.retailer_effect[r] +
                       cfg.speed_hours_per_unit * std::sqrt(dx * dx + dy * dy) +
                       GeneratorInfo::dispatch_penalty(hour, cfg.cutoff_hour) + noise;
        label = std::max(label, 1.0);

        Order ord;
        ord.order_id = "S" + std::to_string(serial++);
        ord.retailer_id = "R" + std::to_string(r);
        ord.origin_id = "O" + std::to_string(o);
        ord.destination_id = "D" + std::to_string(d);
        ord.payment_unix_ts = cfg.start_unix_ts + static_cast<std::int64_t>(day) * 86400 +
                              static_cast<std::int64_t>(hour) * 3600 + sec_in_hour;
        ord.delivery_hours = label;
        ord.origin_lon = info.origin_coords[o].first;
        ord.origin_lat = info.origin_coords[o].second;
        ord.dest_lon = info.dest_coords[d].first;
        ord.dest_lat = info.dest_coords[d].second;
        orders.push_back(std::move(ord));
      }
    }
    if (info_out) *info_out = info;
    return from_orders(std::move(orders));
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file: " + path);
    out << header() << '\n';
    out.precision(17);
    for (const Order& o : orders_) {
      out << o.order_id << ',' << o.retailer_id << ',' << o.origin_id << ',' << o.destination_id
          << ',' << o.payment_unix_ts << ',' << o.delivery_hours << ',' << o.origin_lon << ','
          << o.origin_lat << ',' << o.dest_lon << ',' << o.dest_lat << '\n';
    }
  }

  const std::vector<Order>& orders() const { return orders_; }
  const FeatureSchema& schema() const { return FeatureSchema::standard(); }
  bool empty() const { return orders_.empty(); }
  std::size_t size() const { return orders_.size(); }

  std::int64_t first_day() const { return orders_.empty() ? 0 : orders_.front().payment_day(); }
  std::int64_t last_day() const { return orders_.empty() ? -1 : orders_.back().payment_day(); }
  std::int64_t day_span() const { return orders_.empty() ? 0 : last_day() - first_day() + 1; }

  // Feature vector of one element of one order, frozen at ingestion.
  std::span<const double> order_feature(NodeType t, std::size_t order_idx) const {
    const std::size_t w = schema().width(t);
    return {feats_[static_cast<int>(t)].data() + order_idx * w, w};
  }

  // Recomputes an element's feature vector at an absolute hour from scratch.
  // Slow path for diagnostics and the leakage check; unknown elements get
  // the neutral vector (zeros, plus coordinates when registered).
  std::vector<double> feature_vector(NodeType t, const std::string& id, std::int64_t abs_hour) const {
    std::vector<double> out(schema().width(t), 0.0);
    if (t == NodeType::Slot) {
      const int h = parse_slot(id);
      out[h] = 1.0;
      return out;
    }
    const std::int64_t limit_ts = abs_hour * 3600;
    std::size_t count = 0;
    double sum_hours = 0.0;
    for (const Order& o : orders_) {
      if (o.payment_unix_ts >= limit_ts) break;
      if (o.element_id(t) != id) continue;
      ++count;
      sum_hours += o.delivery_hours;
    }
    if (t == NodeType::Retailer) {
      out[0] = count ? sum_hours / static_cast<double>(count) : 0.0;
      out[1] = std::log1p(static_cast<double>(count));
    } else {
      const auto& coords = (t == NodeType::Origin) ? origin_coords_ : dest_coords_;
      if (auto it = coords.find(id); it != coords.end()) {
        out[0] = it->second.first;
        out[1] = it->second.second;
      }
      out[2] = std::log1p(static_cast<double>(count));
    }
    return out;
  }

  std::optional<std::pair<double, double>> coords_of(NodeType t, const std::string& id) const {
    const auto& m = (t == NodeType::Origin) ? origin_coords_ : dest_coords_;
    if (auto it = m.find(id); it != m.end()) return it->second;
    return std::nullopt;
  }

  // Identifiers interned per element type, in order of first appearance.
  const std::unordered_map<std::string, std::size_t>& element_index(NodeType t) const {
    return interned_[static_cast<int>(t)];
  }
  std::size_t distinct_elements(NodeType t) const { return interned_[static_cast<int>(t)].size(); }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  static int parse_slot(const std::string& id) {
    int h = -1;
    auto [p, ec] = std::from_chars(id.data(), id.data() + id.size(), h);
    if (ec != std::errc() || p != id.data() + id.size() || h < 0 || h > 23)
      throw DataError("bad payment slot id '" + id + "'");
    return h;
  }

  static Order parse_row(const std::string& line, std::size_t row) {
    std::array<std::string_view, 10> f;
    std::size_t start = 0, n = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (n >= f.size()) throw DataError("row " + std::to_string(row) + ": too many columns");
        f[n++] = std::string_view(line).substr(start, i - start);
        start = i + 1;
      }
    }
    if (n != f.size())
      throw DataError("row " + std::to_string(row) + ": expected 10 columns, got " + std::to_string(n));
    auto num = [&](std::string_view s, double& out) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("row " + std::to_string(row) + ": bad number '" + std::string(s) + "'");
    };
    Order o;
    o.order_id = std::string(f[0]);
    o.retailer_id = std::string(f[1]);
    o.origin_id = std::string(f[2]);
    o.destination_id = std::string(f[3]);
    std::int64_t ts = 0;
    auto [p, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), ts);
    if (ec != std::errc() || p != f[4].data() + f[4].size())
      throw DataError("row " + std::to_string(row) + ": bad timestamp '" + std::string(f[4]) + "'");
    o.payment_unix_ts = ts;
    num(f[5], o.delivery_hours);
    num(f[6], o.origin_lon);
    num(f[7], o.origin_lat);
    num(f[8], o.dest_lon);
    num(f[9], o.dest_lat);
    if (o.delivery_hours <= 0.0)
      throw DataError("row " + std::to_string(row) + ": delivery_hours must be positive, got " +
                      std::to_string(o.delivery_hours));
    if (o.payment_unix_ts < 0)
      throw DataError("row " + std::to_string(row) + ": negative payment timestamp");
    return o;
  }

  void index_elements_() {
    auto intern = [&](NodeType t, const std::string& id) {
      auto& m = interned_[static_cast<int>(t)];
      m.emplace(id, m.size());
    };
    for (const Order& o : orders_) {
      origin_coords_.emplace(o.origin_id, std::make_pair(o.origin_lon, o.origin_lat));
      dest_coords_.emplace(o.destination_id, std::make_pair(o.dest_lon, o.dest_lat));
      intern(NodeType::Retailer, o.retailer_id);
      intern(NodeType::Origin, o.origin_id);
      intern(NodeType::Destination, o.destination_id);
      intern(NodeType::Slot, o.slot_id());
    }
  }

  void compute_features_() {
    const FeatureSchema& schema = FeatureSchema::standard();
    for (NodeType t : kNodeTypes)
      feats_[static_cast<int>(t)].assign(orders_.size() * schema.width(t), 0.0);

    struct Trailing {
      std::size_t count = 0;
      double sum_hours = 0.0;
    };
    std::unordered_map<std::string, Trailing> retailer, origin, dest;
    std::vector<std::size_t> pending;  // order indices in the current hour
    std::int64_t current_hour = std::numeric_limits<std::int64_t>::min();

    auto flush = [&] {
      for (std::size_t i : pending) {
        const Order& o = orders_[i];
        auto& r = retailer[o.retailer_id];
        r.count++;
        r.sum_hours += o.delivery_hours;
        origin[o.origin_id].count++;
        dest[o.destination_id].count++;
      }
      pending.clear();
    };

    for (std::size_t i = 0; i < orders_.size(); ++i) {
      const Order& o = orders_[i];
      if (o.payment_abs_hour() != current_hour) {
        flush();
        current_hour = o.payment_abs_hour();
      }
      {
        double* f = feats_[0].data() + i * 2;
        const auto it = retailer.find(o.retailer_id);
        const std::size_t c = it == retailer.end() ? 0 : it->second.count;
        f[0] = c ? it->second.sum_hours / static_cast<double>(c) : 0.0;
        f[1] = std::log1p(static_cast<double>(c));
      }
      {
        double* f = feats_[1].data() + i * 3;
        const auto [lon, lat] = origin_coords_.at(o.origin_id);
        const auto it = origin.find(o.origin_id);
        f[0] = lon;
        f[1] = lat;
        f[2] = std::log1p(static_cast<double>(it == origin.end() ? 0 : it->second.count));
      }
      {
        double* f = feats_[2].data() + i * 3;
        const auto [lon, lat] = dest_coords_.at(o.destination_id);
        const auto it = dest.find(o.destination_id);
        f[0] = lon;
        f[1] = lat;
        f[2] = std::log1p(static_cast<double>(it == dest.end() ? 0 : it->second.count));
      }
      feats_[3][i * 24 + o.payment_hour()] = 1.0;
      pending.push_back(i);
    }
  }

  std::vector<Order> orders_;
  std::array<std::vector<double>, 4> feats_;
  std::array<std::unordered_map<std::string, std::size_t>, 4> interned_;
  std::unordered_map<std::string, std::pair<double, double>> origin_coords_, dest_coords_;
};

// Splits by payment day, counting validation/test day windows back from
// the last day. All orders of a day land in exactly one split.
inline DatasetSplit chronological_split(const Dataset& dataset, const SplitSpec& spec) {
  if (spec.validation_days < 0 || spec.test_days < 0)
    throw ConfigError("split day counts must be >= 0");
  if (dataset.day_span() <= spec.validation_days + spec.test_days)
    throw ConfigError("split spec (" + std::to_string(spec.validation_days) + "," +
                      std::to_string(spec.test_days) + ") does not fit a " +
                      std::to_string(dataset.day_span()) + "-day dataset");
  const std::int64_t last = dataset.last_day();
  const std::int64_t test_from = last - spec.test_days + 1;
  const std::int64_t val_from = test_from - spec.validation_days;
  const auto& orders = dataset.orders();
  auto day_lower = [&](std::int64_t day) {
    return static_cast<std::size_t>(
        std::lower_bound(orders.begin(), orders.end(), day * 86400,
                         [](const Order& o, std::int64_t ts) { return o.payment_unix_ts < ts; }) -
        orders.begin());
  };
  const std::size_t v0 = day_lower(val_from);
  const std::size_t t0 = day_lower(test_from);
  std::span<const Order> all(orders);
  return {all.subspan(0, v0), all.subspan(v0, t0 - v0), all.subspan(t0)};
}

}  // namespace igt
