#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "dense_oracle.hpp"
#include "igt/graph.hpp"
#include "igt/orders.hpp"
#include "igt/rng.hpp"

using igt::HeteroGraph;
using igt::NodeType;
using igt::Order;

namespace {

Order make_order(std::string r, std::string o, std::string d, int hour, double hours = 20.0) {
  Order x;
  x.order_id = "x";
  x.retailer_id = std::move(r);
  x.origin_id = std::move(o);
  x.destination_id = std::move(d);
  x.payment_unix_ts = 1609459200 + static_cast<std::int64_t>(hour) * 3600;
  x.delivery_hours = hours;
  return x;
}

HeteroGraph random_graph(igt::Rng& rng, std::size_t n_orders, std::size_t pool) {
  std::vector<Order> orders;
  for (std::size_t i = 0; i < n_orders; ++i)
    orders.push_back(make_order("R" + std::to_string(rng.below(pool)),
                                "O" + std::to_string(rng.below(pool)),
                                "D" + std::to_string(rng.below(pool)),
                                static_cast<int>(rng.below(24))));
  return igt::build_graph(orders);
}

}  // namespace

TEST_CASE("one order builds a 4-node chain with 3 undirected edges") {
  std::vector<Order> orders = {make_order("R1", "O1", "D1", 14)};
  HeteroGraph g = igt::build_graph(orders);
  REQUIRE(g.total_nodes() == 4);
  REQUIRE(g.total_edges() == 3);
}

TEST_CASE("duplicate orders collapse to the same edges") {
  std::vector<Order> orders = {make_order("R1", "O1", "D1", 14), make_order("R1", "O1", "D1", 14)};
  HeteroGraph g = igt::build_graph(orders);
  REQUIRE(g.total_nodes() == 4);
  REQUIRE(g.total_edges() == 3);
}

TEST_CASE("two disjoint orders build 8 nodes and 6 edges") {
  std::vector<Order> orders = {make_order("R1", "O1", "D1", 10), make_order("R2", "O2", "D2", 20)};
  HeteroGraph g = igt::build_graph(orders);
  REQUIRE(g.total_nodes() == 8);
  REQUIRE(g.total_edges() == 6);
}

TEST_CASE("building from zero orders is rejected") {
  std::vector<Order> none;
  REQUIRE_THROWS_AS(igt::build_graph(none), igt::DataError);
}

TEST_CASE("bipartite extraction") {
  std::vector<Order> orders = {make_order("R1", "O1", "D1", 14)};
  HeteroGraph g = igt::build_graph(orders);

  SECTION("retailer-slot pair is empty under the chain topology") {
    REQUIRE_FALSE(g.extract_bipartite(NodeType::Retailer, NodeType::Slot).has_value());
  }
  SECTION("retailer-origin pair has 2 nodes and 1 edge") {
    auto blk = g.extract_bipartite(NodeType::Retailer, NodeType::Origin);
    REQUIRE(blk.has_value());
    REQUIRE(blk->n() == 2);
    REQUIRE(blk->cross_edges() == 1);
  }
  SECTION("exactly 3 of the 6 type pairs are non-empty") {
    int non_empty = 0;
    for (auto [i, j] : HeteroGraph::all_pairs())
      if (g.extract_bipartite(i, j)) ++non_empty;
    REQUIRE(non_empty == 3);
  }
  SECTION("extraction is symmetric in the pair order") {
    auto a = g.extract_bipartite(NodeType::Retailer, NodeType::Origin);
    auto b = g.extract_bipartite(NodeType::Origin, NodeType::Retailer);
    REQUIRE(a->type_a == b->type_a);
    REQUIRE(a->adjacency.col == b->adjacency.col);
  }
  SECTION("same-type pair is rejected") {
    REQUIRE_THROWS_AS(g.extract_bipartite(NodeType::Origin, NodeType::Origin), igt::DataError);
  }
}

TEST_CASE("extraction over all pairs partitions the edge set") {
  igt::Rng rng(17);
  HeteroGraph g = random_graph(rng, 60, 9);
  std::size_t total = 0;
  for (auto [i, j] : HeteroGraph::all_pairs())
    if (auto blk = g.extract_bipartite(i, j)) total += blk->cross_edges();
  REQUIRE(total == g.total_edges());
}

TEST_CASE("re-normalization") {
  SECTION("single edge gives a 2x2 block of 0.5") {
    std::vector<Order> orders = {make_order("R1", "O1", "D1", 14)};
    auto blk = igt::build_graph(orders).extract_bipartite(NodeType::Retailer, NodeType::Origin);
    auto dense = oracle::dense_from_csr(blk->normalized);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) REQUIRE(dense[i][j] == Catch::Approx(0.5).epsilon(1e-15));
  }
  SECTION("isolated node keeps a unit self-loop") {
    igt::Csr adj = igt::Csr::from_triplets(3, {0, 1}, {1, 0}, {1.0, 1.0});
    auto [deg, norm] = igt::normalize_adjacency(adj);
    REQUIRE(deg[2] == 1.0);
    auto dense = oracle::dense_from_csr(norm);
    REQUIRE(dense[2][2] == 1.0);
  }
  SECTION("asymmetric input is rejected") {
    igt::Csr adj = igt::Csr::from_triplets(2, {0}, {1}, {1.0});
    REQUIRE_THROWS_AS(igt::normalize_adjacency(adj), igt::DataError);
  }
  SECTION("non-binary input is rejected") {
    igt::Csr adj = igt::Csr::from_triplets(2, {0, 1}, {1, 0}, {2.0, 2.0});
    REQUIRE_THROWS_AS(igt::normalize_adjacency(adj), igt::DataError);
  }
  SECTION("sqrt-degree vector is an eigenvector with eigenvalue 1") {
    igt::Rng rng(23);
    HeteroGraph g = random_graph(rng, 80, 11);
    for (auto [i, j] : HeteroGraph::all_pairs()) {
      auto blk = g.extract_bipartite(i, j);
      if (!blk) continue;
      std::vector<double> x(blk->n()), y(blk->n());
      for (std::size_t u = 0; u < blk->n(); ++u) x[u] = std::sqrt(blk->degree[u]);
      blk->normalized.multiply_into(x.data(), 1, y.data());
      for (std::size_t u = 0; u < blk->n(); ++u) REQUIRE(std::fabs(y[u] - x[u]) < 1e-9);
    }
  }
  SECTION("normalized matrix is symmetric to machine precision") {
    igt::Rng rng(29);
    HeteroGraph g = random_graph(rng, 50, 7);
    for (auto [i, j] : HeteroGraph::chain_pairs()) {
      auto blk = g.extract_bipartite(i, j);
      REQUIRE(blk);
      auto dense = oracle::dense_from_csr(blk->normalized);
      for (std::size_t u = 0; u < blk->n(); ++u)
        for (std::size_t v = 0; v < blk->n(); ++v)
          REQUIRE(std::fabs(dense[u][v] - dense[v][u]) <= 1e-15);
    }
  }
  SECTION("normalized values match the dense formula") {
    igt::Rng rng(31);
    HeteroGraph g = random_graph(rng, 70, 10);
    for (auto [i, j] : HeteroGraph::chain_pairs()) {
      auto blk = g.extract_bipartite(i, j);
      REQUIRE(blk);
      auto expect = oracle::dense_normalize(oracle::dense_from_csr(blk->adjacency));
      auto got = oracle::dense_from_csr(blk->normalized);
      for (std::size_t u = 0; u < blk->n(); ++u)
        for (std::size_t v = 0; v < blk->n(); ++v)
          REQUIRE(std::fabs(got[u][v] - expect[u][v]) <= 1e-12);
    }
  }
}

TEST_CASE("inference-time extension") {
  std::vector<Order> train = {make_order("R1", "O1", "D1", 14)};
  HeteroGraph g = igt::build_graph(train);

  SECTION("all-seen order changes no node counts") {
    std::vector<Order> test = {make_order("R1", "O1", "D1", 14)};
    HeteroGraph ext = igt::extend_for_inference(g, test);
    REQUIRE(ext.total_nodes() == 4);
    REQUIRE(ext.total_edges() == 3);
  }
  SECTION("new retailer is appended and linked to its origin") {
    std::vector<Order> test = {make_order("R2", "O1", "D1", 14)};
    HeteroGraph ext = igt::extend_for_inference(g, test);
    REQUIRE(ext.registry().count(NodeType::Retailer) == 2);
    REQUIRE(ext.registry().find(NodeType::Retailer, "R1") == 0);  // index stability
    REQUIRE(ext.registry().find(NodeType::Retailer, "R2") == 1);
    REQUIRE(ext.edges(NodeType::Retailer, NodeType::Origin).count({1, 0}) == 1);
  }
  SECTION("fully unseen order forms an isolated 4-node chain") {
    std::vector<Order> test = {make_order("R9", "O9", "D9", 3)};
    HeteroGraph ext = igt::extend_for_inference(g, test);
    REQUIRE(ext.total_nodes() == 8);
    REQUIRE(ext.total_edges() == 6);
    // the new chain touches only new indices
    REQUIRE(ext.edges(NodeType::Retailer, NodeType::Origin).count({1, 1}) == 1);
    REQUIRE(ext.edges(NodeType::Origin, NodeType::Destination).count({1, 1}) == 1);
    REQUIRE(ext.edges(NodeType::Destination, NodeType::Slot).count({1, 1}) == 1);
  }
  SECTION("registry-only extension adds isolated nodes") {
    std::vector<Order> val = {make_order("R2", "O1", "D1", 14)};
    HeteroGraph ext = igt::extend_graph(g, val, false);
    REQUIRE(ext.registry().count(NodeType::Retailer) == 2);
    REQUIRE(ext.total_edges() == 3);
    auto blk = ext.extract_bipartite(NodeType::Retailer, NodeType::Origin);
    auto dense = oracle::dense_from_csr(blk->normalized);
    REQUIRE(dense[1][1] == 1.0);  // the isolated new retailer keeps a unit self-loop
  }
}

TEST_CASE("edge list export format") {
  std::vector<Order> orders = {make_order("R1", "O1", "D1", 14)};
  HeteroGraph g = igt::build_graph(orders);
  std::ostringstream os;
  g.export_edge_list(os);
  REQUIRE(os.str() ==
          "retailer:0\torigin:0\n"
          "origin:0\tdestination:0\n"
          "destination:0\tslot:0\n");
}
