#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "igt/linreg.hpp"
#include "igt/metrics.hpp"
#include "igt/orders.hpp"

using igt::Dataset;
using igt::GeneratorConfig;
using igt::NodeType;
using igt::Order;

namespace {

Order order_at_hour(int hour, double delivery, std::string retailer = "R1") {
  Order o;
  o.order_id = "x";
  o.retailer_id = std::move(retailer);
  o.origin_id = "O1";
  o.destination_id = "D1";
  o.payment_unix_ts = 1609459200 + static_cast<std::int64_t>(hour) * 3600;
  o.delivery_hours = delivery;
  return o;
}

}  // namespace

TEST_CASE("mae examples") {
  std::vector<double> y = {2, 4, 6};
  REQUIRE(igt::mae(y, y) == 0.0);
  REQUIRE(igt::mae(std::vector<double>{10}, std::vector<double>{13}) == 3.0);
  REQUIRE(igt::mae(y, std::vector<double>{3, 3, 9}) == Catch::Approx(5.0 / 3.0).epsilon(1e-15));
  REQUIRE_THROWS_AS(igt::mae({}, {}), igt::DataError);
}

TEST_CASE("mape examples") {
  std::vector<double> y = {2, 4};
  REQUIRE(igt::mape(y, y) == 0.0);
  REQUIRE(igt::mape(y, std::vector<double>{1, 5}) == Catch::Approx(0.375).epsilon(1e-15));
  SECTION("joint scaling leaves mape unchanged") {
    std::vector<double> yhat = {1.7, 5.3};
    std::vector<double> ys = {2 * 3.7, 4 * 3.7}, yhats = {1.7 * 3.7, 5.3 * 3.7};
    REQUIRE(igt::mape(y, yhat) == Catch::Approx(igt::mape(ys, yhats)).epsilon(1e-12));
  }
  SECTION("zero ground truth is rejected") {
    REQUIRE_THROWS_AS(igt::mape(std::vector<double>{0, 1}, std::vector<double>{1, 1}), igt::DataError);
  }
}

TEST_CASE("mare examples") {
  std::vector<double> y = {2, 4};
  REQUIRE(igt::mare(y, y) == 0.0);
  REQUIRE(igt::mare(y, std::vector<double>{1, 5}) == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
  SECTION("mare equals mae over mean ground truth") {
    std::vector<double> yy = {3, 7, 11, 2}, pp = {4, 6.5, 10, 3.2};
    double mean_y = (3 + 7 + 11 + 2) / 4.0;
    REQUIRE(std::fabs(igt::mare(yy, pp) - igt::mae(yy, pp) / mean_y) < 1e-12);
  }
}

TEST_CASE("entropy by payment time") {
  SECTION("a single label bin has zero entropy") {
    std::vector<Order> orders = {order_at_hour(10, 3.1), order_at_hour(10, 3.2), order_at_hour(10, 3.9)};
    auto e = igt::entropy_by_payment_time(orders);
    REQUIRE(e.size() == 1);
    REQUIRE(e[0].hour == 10);
    REQUIRE(e[0].entropy_nats == 0.0);
  }
  SECTION("uniform over four bins gives ln 4") {
    std::vector<Order> orders = {order_at_hour(9, 1.5), order_at_hour(9, 2.5), order_at_hour(9, 3.5),
                                 order_at_hour(9, 4.5)};
    auto e = igt::entropy_by_payment_time(orders);
    REQUIRE(e[0].entropy_nats == Catch::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SECTION("half-quarter-quarter gives 1.5 ln 2") {
    std::vector<Order> orders = {order_at_hour(8, 5.1), order_at_hour(8, 5.2), order_at_hour(8, 7.3),
                                 order_at_hour(8, 9.8)};
    auto e = igt::entropy_by_payment_time(orders);
    REQUIRE(e[0].entropy_nats == Catch::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  }
  SECTION("empty slots are absent, not zero") {
    std::vector<Order> orders = {order_at_hour(10, 3.0)};
    auto e = igt::entropy_by_payment_time(orders);
    REQUIRE(e.size() == 1);
  }
  SECTION("entropy never exceeds the uniform bound over occupied bins") {
    igt::Rng rng(5);
    std::vector<Order> orders;
    for (int i = 0; i < 500; ++i)
      orders.push_back(order_at_hour(static_cast<int>(rng.below(24)), 1.0 + rng.uniform(0.0, 30.0)));
    for (const auto& slot : igt::entropy_by_payment_time(orders)) {
      // occupied bins for this hour
      std::set<int> bins;
      for (const Order& o : orders)
        if (o.payment_hour() == slot.hour) bins.insert(static_cast<int>(std::floor(o.delivery_hours)));
      REQUIRE(slot.entropy_nats <= std::log(static_cast<double>(bins.size())) + 1e-12);
    }
  }
}

TEST_CASE("generator label entropy grows with sigma") {
  double prev = -1.0;
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    GeneratorConfig cfg;
    cfg.days = 10;
    cfg.orders_per_day = 1000;
    cfg.sigma_hours = sigma;
    Dataset d = Dataset::generate_synthetic(cfg, 99);
    const double e = igt::mean_entropy(igt::entropy_by_payment_time(d.orders()));
    REQUIRE(e > prev);
    prev = e;
  }
}

TEST_CASE("group-weighted metric composition") {
  std::vector<double> y1 = {5, 9, 13}, p1 = {6, 7, 13.5};
  std::vector<double> y2 = {20, 30}, p2 = {26, 29};
  std::vector<double> y, p;
  y.insert(y.end(), y1.begin(), y1.end());
  y.insert(y.end(), y2.begin(), y2.end());
  p.insert(p.end(), p1.begin(), p1.end());
  p.insert(p.end(), p2.begin(), p2.end());

  const double mae_combined = (igt::mae(y1, p1) * 3 + igt::mae(y2, p2) * 2) / 5.0;
  REQUIRE(std::fabs(igt::mae(y, p) - mae_combined) < 1e-12);

  const double sum1 = 5 + 9 + 13, sum2 = 50;
  const double mare_combined = (igt::mare(y1, p1) * sum1 + igt::mare(y2, p2) * sum2) / (sum1 + sum2);
  REQUIRE(std::fabs(igt::mare(y, p) - mare_combined) < 1e-12);
}

TEST_CASE("binned reports") {
  SECTION("retailer boundaries") {
    igt::BinSpec spec = igt::BinSpec::retailer();
    REQUIRE(spec.bin_of(0) == 0);
    REQUIRE(spec.bin_of(1) == 1);
    REQUIRE(spec.bin_of(100) == 1);
    REQUIRE(spec.bin_of(101) == 2);
    REQUIRE(spec.bin_of(500) == 2);
    REQUIRE(spec.bin_of(501) == 3);
    REQUIRE(spec.label(0) == "unseen");
  }
  SECTION("address boundaries") {
    igt::BinSpec spec = igt::BinSpec::address(NodeType::Origin);
    REQUIRE(spec.bin_of(500) == 1);
    REQUIRE(spec.bin_of(501) == 2);
    REQUIRE(spec.bin_of(1000) == 2);
    REQUIRE(spec.bin_of(1001) == 3);
  }
  SECTION("bins partition the evaluated orders") {
    GeneratorConfig cfg;
    cfg.days = 12;
    cfg.orders_per_day = 200;
    cfg.retailers = 40;
    Dataset d = Dataset::generate_synthetic(cfg, 7);
    auto split = igt::chronological_split(d, {2, 3});
    auto counts = igt::element_order_counts(split.train, NodeType::Retailer);
    std::vector<double> preds(split.test.size(), 24.0);
    auto bins = igt::binned_report(split.test, preds, counts, igt::BinSpec::retailer());
    std::size_t total = 0;
    for (const auto& b : bins) total += b.metrics.count;
    REQUIRE(total == split.test.size());
  }
  SECTION("an empty unseen bin is flagged") {
    std::vector<Order> test = {order_at_hour(10, 5.0, "R1")};
    std::unordered_map<std::string, std::size_t> counts = {{"R1", 10}};
    std::vector<double> preds = {5.0};
    auto bins = igt::binned_report(test, preds, counts, igt::BinSpec::retailer());
    REQUIRE(bins[0].label == "unseen");
    REQUIRE(bins[0].metrics.count == 0);
    REQUIRE(bins[0].low_confidence);
  }
}

TEST_CASE("by-hour report always emits 24 rows") {
  std::vector<Order> orders = {order_at_hour(3, 10.0), order_at_hour(3, 12.0)};
  std::vector<double> preds = {11.0, 11.0};
  auto rows = igt::by_hour_report(orders, preds);
  REQUIRE(rows.size() == 24);
  REQUIRE(rows[3].metrics.count == 2);
  REQUIRE(rows[3].metrics.mae == 1.0);
  REQUIRE(rows[4].metrics.count == 0);
  REQUIRE(std::isnan(rows[4].metrics.mae));
}

TEST_CASE("normal equations solve an exact linear system") {
  std::vector<std::vector<double>> x = {{1, 1}, {2, 1}, {3, 1}, {4, 1}};
  std::vector<double> y = {3, 5, 7, 9};  // y = 2x + 1
  auto w = igt::solve_normal_equations(x, y, 1e-12);
  REQUIRE(w[0] == Catch::Approx(2.0).epsilon(1e-6));
  REQUIRE(w[1] == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear regression beats the constant-mean predictor") {
  GeneratorConfig cfg;
  cfg.days = 20;
  cfg.orders_per_day = 150;
  Dataset d = Dataset::generate_synthetic(cfg, 3);
  auto split = igt::chronological_split(d, {3, 4});
  auto lr = igt::LinearRegression::fit(d, split.train);
  auto preds = lr.predict_all(d, split.test);
  std::vector<double> y(split.test.size());
  double mean = 0.0;
  for (const Order& o : split.train) mean += o.delivery_hours / static_cast<double>(split.train.size());
  std::vector<double> mean_pred(split.test.size(), mean);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = split.test[i].delivery_hours;
  REQUIRE(igt::mae(y, preds) < igt::mae(y, mean_pred) * 0.9);
}
