#pragma once

// Heterogeneous order graph: four node types connected per order along the
// chain retailer - origin - destination - payment slot (3 undirected edges
// per order), bipartite sub-blocks, and their re-normalized adjacencies
// D^-1/2 (A+I) D^-1/2.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "igt/errors.hpp"
#include "igt/orders.hpp"
#include "igt/sparse.hpp"

namespace igt {

class NodeRegistry {
 public:
  std::size_t intern(NodeType t, const std::string& id) {
    auto& m = index_[static_cast<int>(t)];
    auto [it, inserted] = m.emplace(id, ids_[static_cast<int>(t)].size());
    if (inserted) ids_[static_cast<int>(t)].push_back(id);
    return it->second;
  }

  std::optional<std::size_t> find(NodeType t, const std::string& id) const {
    const auto& m = index_[static_cast<int>(t)];
    if (auto it = m.find(id); it != m.end()) return it->second;
    return std::nullopt;
  }

  std::size_t count(NodeType t) const { return ids_[static_cast<int>(t)].size(); }
  const std::string& id_of(NodeType t, std::size_t i) const { return ids_[static_cast<int>(t)][i]; }

 private:
  std::array<std::unordered_map<std::string, std::size_t>, 4> index_;
  std::array<std::vector<std::string>, 4> ids_;
};

// One bipartite block over all nodes of two types. Rows 0..n_a-1 are type a,
// rows n_a.. are type b; only cross-type entries can be set.
struct BipartiteAdj {
  NodeType type_a, type_b;
  std::size_t n_a = 0, n_b = 0;
  Csr adjacency;               // binary, zero diagonal, [[0,R],[R^T,0]]
  std::vector<double> degree;  // of A+I: d_u = 1 + deg_A(u)
  Csr normalized;              // D^-1/2 (A+I) D^-1/2

  std::size_t n() const { return n_a + n_b; }
  std::size_t cross_edges() const { return adjacency.nnz() / 2; }
};

// Re-normalization of a symmetric 0/1 adjacency with zero diagonal:
// adds self loops and scales by D^-1/2 on both sides.
inline std::pair<std::vector<double>, Csr> normalize_adjacency(const Csr& adj) {
  for (std::size_t r = 0; r < adj.n; ++r)
    for (std::size_t e = adj.row_ptr[r]; e < adj.row_ptr[r + 1]; ++e) {
      if (adj.col[e] == r) throw DataError("normalize: adjacency has a diagonal entry");
      if (adj.val[e] != 1.0) throw DataError("normalize: adjacency must be binary");
    }
  if (!adj.is_symmetric()) throw DataError("normalize: adjacency must be symmetric");

  std::vector<double> degree(adj.n);
  for (std::size_t r = 0; r < adj.n; ++r)
    degree[r] = 1.0 + static_cast<double>(adj.row_ptr[r + 1] - adj.row_ptr[r]);

  std::vector<std::size_t> rows, cols;
  std::vector<double> vals;
  rows.reserve(adj.nnz() + adj.n);
  cols.reserve(adj.nnz() + adj.n);
  vals.reserve(adj.nnz() + adj.n);
  for (std::size_t r = 0; r < adj.n; ++r) {
    rows.push_back(r);
    cols.push_back(r);
    vals.push_back(1.0 / degree[r]);
    for (std::size_t e = adj.row_ptr[r]; e < adj.row_ptr[r + 1]; ++e) {
      rows.push_back(r);
      cols.push_back(adj.col[e]);
      vals.push_back(1.0 / std::sqrt(degree[r] * degree[adj.col[e]]));
    }
  }
  return {std::move(degree), Csr::from_triplets(adj.n, std::move(rows), std::move(cols), std::move(vals))};
}

class HeteroGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;  // (index in type a, index in type b)

  static std::pair<NodeType, NodeType> canonical_pair(NodeType i, NodeType j) {
    if (i == j) throw DataError("bipartite pair needs two distinct node types");
    return static_cast<int>(i) < static_cast<int>(j) ? std::make_pair(i, j) : std::make_pair(j, i);
  }

  NodeRegistry& registry() { return registry_; }
  const NodeRegistry& registry() const { return registry_; }

  void add_order(const Order& o) {
    const std::size_t r = registry_.intern(NodeType::Retailer, o.retailer_id);
    const std::size_t og = registry_.intern(NodeType::Origin, o.origin_id);
    const std::size_t d = registry_.intern(NodeType::Destination, o.destination_id);
    const std::size_t s = registry_.intern(NodeType::Slot, o.slot_id());
    add_edge(NodeType::Retailer, r, NodeType::Origin, og);
    add_edge(NodeType::Origin, og, NodeType::Destination, d);
    add_edge(NodeType::Destination, d, NodeType::Slot, s);
  }

  void add_edge(NodeType i, std::size_t a, NodeType j, std::size_t b) {
    auto [ti, tj] = canonical_pair(i, j);
    if (ti != i) std::swap(a, b);
    edges_[key(ti, tj)].insert({a, b});
  }

  const std::set<Edge>& edges(NodeType i, NodeType j) const {
    auto [ti, tj] = canonical_pair(i, j);
    static const std::set<Edge> kEmpty;
    auto it = edges_.find(key(ti, tj));
    return it == edges_.end() ? kEmpty : it->second;
  }

  std::size_t total_edges() const {
    std::size_t n = 0;
    for (const auto& [k, s] : edges_) n += s.size();
    return n;
  }

  std::size_t total_nodes() const {
    std::size_t n = 0;
    for (NodeType t : kNodeTypes) n += registry_.count(t);
    return n;
  }

  // Bipartite block over all nodes of types i and j, or nullopt when no
  // cross edges exist. The block is symmetric in (i, j).
  std::optional<BipartiteAdj> extract_bipartite(NodeType i, NodeType j) const {
    auto [ta, tb] = canonical_pair(i, j);
    const auto& es = edges(ta, tb);
    if (es.empty()) return std::nullopt;
    BipartiteAdj blk;
    blk.type_a = ta;
    blk.type_b = tb;
    blk.n_a = registry_.count(ta);
    blk.n_b = registry_.count(tb);
    std::vector<std::size_t> rows, cols;
    std::vector<double> vals;
    rows.reserve(es.size() * 2);
    cols.reserve(es.size() * 2);
    vals.assign(es.size() * 2, 1.0);
    for (const Edge& e : es) {
      rows.push_back(e.first);
      cols.push_back(blk.n_a + e.second);
      rows.push_back(blk.n_a + e.second);
      cols.push_back(e.first);
    }
    blk.adjacency = Csr::from_triplets(blk.n(), std::move(rows), std::move(cols), std::move(vals));
    auto [deg, norm] = normalize_adjacency(blk.adjacency);
    blk.degree = std::move(deg);
    blk.normalized = std::move(norm);
    return blk;
  }

  // The three chain blocks in fixed order; empty blocks are skipped.
  std::vector<BipartiteAdj> chain_blocks() const {
    std::vector<BipartiteAdj> out;
    for (auto [i, j] : chain_pairs())
      if (auto blk = extract_bipartite(i, j)) out.push_back(std::move(*blk));
    return out;
  }

  static std::array<std::pair<NodeType, NodeType>, 3> chain_pairs() {
    return {std::make_pair(NodeType::Retailer, NodeType::Origin),
            std::make_pair(NodeType::Origin, NodeType::Destination),
            std::make_pair(NodeType::Destination, NodeType::Slot)};
  }

  static std::array<std::pair<NodeType, NodeType>, 6> all_pairs() {
    return {std::make_pair(NodeType::Retailer, NodeType::Origin),
            std::make_pair(NodeType::Retailer, NodeType::Destination),
            std::make_pair(NodeType::Retailer, NodeType::Slot),
            std::make_pair(NodeType::Origin, NodeType::Destination),
            std::make_pair(NodeType::Origin, NodeType::Slot),
            std::make_pair(NodeType::Destination, NodeType::Slot)};
  }

  void export_edge_list(std::ostream& os) const {
    for (const auto& [k, es] : edges_) {
      const NodeType ti = static_cast<NodeType>(k >> 8);
      const NodeType tj = static_cast<NodeType>(k & 0xff);
      for (const Edge& e : es)
        os << node_type_name(ti) << ':' << e.first << '\t' << node_type_name(tj) << ':' << e.second << '\n';
    }
  }

 private:
  static int key(NodeType a, NodeType b) { return (static_cast<int>(a) << 8) | static_cast<int>(b); }

  NodeRegistry registry_;
  std::map<int, std::set<Edge>> edges_;
};

inline HeteroGraph build_graph(std::span<const Order> orders) {
  if (orders.empty()) throw DataError("cannot build a graph from zero orders");
  HeteroGraph g;
  for (const Order& o : orders) g.add_order(o);
  return g;
}

// Appends unseen elements (fresh indices after the existing ones) and, when
// add_edges is set, merges the orders' chain edges. Train-time indices are
// untouched, so embedding tables stay aligned.
inline HeteroGraph extend_graph(const HeteroGraph& base, std::span<const Order> orders, bool add_edges) {
  HeteroGraph g = base;
  for (const Order& o : orders) {
    if (add_edges) {
      g.add_order(o);
    } else {
      g.registry().intern(NodeType::Retailer, o.retailer_id);
      g.registry().intern(NodeType::Origin, o.origin_id);
      g.registry().intern(NodeType::Destination, o.destination_id);
      g.registry().intern(NodeType::Slot, o.slot_id());
    }
  }
  return g;
}

// Inference-time graph per the inductive protocol: adjacency built from both
// train and test orders.
inline HeteroGraph extend_for_inference(const HeteroGraph& train_graph, std::span<const Order> test_orders) {
  return extend_graph(train_graph, test_orders, true);
}

}  // namespace igt
