#pragma once

// Temporal and heterogeneous graph convolution: weight-free bipartite
// propagation, in-layer sum aggregation across subgraphs, cross-layer mean
// aggregation, and a per-type GRU that folds raw batch features into the
// stateful embedding tables.

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "igt/graph.hpp"
#include "igt/optim.hpp"
#include "igt/orders.hpp"
#include "igt/rng.hpp"
#include "igt/tensor.hpp"

namespace igt {

// One trainable matrix per node type, N_i x D: the layer-0 embeddings the
// propagation pipeline starts from on every batch. The optimizer is the only
// writer between batches; an in-layer sum over blocks amplifies (its operator
// norm exceeds 1), so feeding propagated values back in as the next layer-0
// would diverge geometrically. Rows appended after training (inference-time
// nodes) start at zero so their value comes entirely from neighbors and raw
// features.
struct EmbeddingTable {
  std::array<Tensor, 4> h;
  std::size_t dim = 0;

  static EmbeddingTable xavier(const NodeRegistry& reg, std::size_t d, Rng& rng) {
    EmbeddingTable t;
    t.dim = d;
    for (NodeType nt : kNodeTypes) {
      const std::size_t n = reg.count(nt);
      t.h[static_cast<int>(nt)] = Tensor::param({n, d}, rng.xavier_uniform(n, d));
    }
    return t;
  }

  Tensor& of(NodeType t) { return h[static_cast<int>(t)]; }
  const Tensor& of(NodeType t) const { return h[static_cast<int>(t)]; }

  EmbeddingTable clone() const {
    EmbeddingTable t;
    t.dim = dim;
    for (int i = 0; i < 4; ++i)
      t.h[i] = Tensor::param(h[i].shape(), {h[i].values().begin(), h[i].values().end()});
    return t;
  }

  // Appends zero rows so row counts match a grown registry.
  void grow_to(const NodeRegistry& reg) {
    for (NodeType nt : kNodeTypes) {
      Tensor& cur = of(nt);
      const std::size_t have = cur.shape()[0], want = reg.count(nt);
      if (want == have) continue;
      if (want < have) throw DataError("embedding table cannot shrink");
      std::vector<double> v(cur.values().begin(), cur.values().end());
      v.resize(want * dim, 0.0);
      cur = Tensor::param({want, dim}, std::move(v));
    }
  }
};

// Gated update with hidden state = prior embedding row and input = raw
// feature vector; gates consume [z || h]. A saturated update gate keeps the
// candidate; a closed one keeps the prior embedding.
struct GruCell {
  Tensor wz, wr, wn;  // (F+D) x D
  Tensor bz, br, bn;  // D

  static GruCell xavier(std::size_t feat_width, std::size_t dim, Rng& rng) {
    GruCell c;
    const std::size_t in = feat_width + dim;
    c.wz = Tensor::param({in, dim}, rng.xavier_uniform(in, dim));
    c.wr = Tensor::param({in, dim}, rng.xavier_uniform(in, dim));
    c.wn = Tensor::param({in, dim}, rng.xavier_uniform(in, dim));
    c.bz = Tensor::param({dim}, std::vector<double>(dim, 0.0));
    c.br = Tensor::param({dim}, std::vector<double>(dim, 0.0));
    c.bn = Tensor::param({dim}, std::vector<double>(dim, 0.0));
    return c;
  }

  std::size_t feat_width() const { return wz.shape()[0] - wz.shape()[1]; }

  Tensor forward(const Tensor& h, const Tensor& z) const {
    if (z.cols() != feat_width())
      throw TensorError("gru: feature width " + std::to_string(z.cols()) +
                        " does not match the cell's expected " + std::to_string(feat_width()));
    Tensor zh = concat_cols(z, h);
    Tensor update = sigmoid(add(matmul(zh, wz), bz));
    Tensor reset = sigmoid(add(matmul(zh, wr), br));
    Tensor cand = tanh(add(matmul(concat_cols(z, mul(reset, h)), wn), bn));
    // (1 - update) * h + update * cand
    return add(sub(h, mul(update, h)), mul(update, cand));
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".wz", wz});
    out.push_back({prefix + ".wr", wr});
    out.push_back({prefix + ".wn", wn});
    out.push_back({prefix + ".bz", bz});
    out.push_back({prefix + ".br", br});
    out.push_back({prefix + ".bn", bn});
  }
};

// H_{i,j}^l = A_hat_{i,j} H_{i,j}^{l-1}: a pure sparse product, no weights,
// no nonlinearity.
inline Tensor propagate_layer(const BipartiteAdj& blk, const Tensor& h_prev) {
  if (h_prev.shape()[0] != blk.n())
    throw TensorError("propagate_layer: block has " + std::to_string(blk.n()) + " nodes, got " +
                      shape_str(h_prev.shape()));
  return spmm_sym(blk.normalized, h_prev);
}

// In-layer sum over the contributing subgraph slices of one type. An empty
// contribution set passes the previous layer through unchanged.
inline Tensor aggregate_types(const std::vector<Tensor>& slices, const Tensor& h_prev_type) {
  if (slices.empty()) return h_prev_type;
  Tensor acc = slices[0];
  for (std::size_t i = 1; i < slices.size(); ++i) acc = add(acc, slices[i]);
  return acc;
}

// Cross-layer mean over H^0 .. H^L.
inline Tensor aggregate_layers(const std::vector<Tensor>& layers) {
  if (layers.empty()) throw TensorError("aggregate_layers: no layers");
  Tensor acc = layers[0];
  for (std::size_t i = 1; i < layers.size(); ++i) acc = add(acc, layers[i]);
  return scale(acc, 1.0 / static_cast<double>(layers.size()));
}

// Raw features of the nodes of one type appearing in a batch. When a node
// occurs several times the chronologically last feature row wins.
struct BatchNodes {
  std::vector<std::size_t> index;  // registry indices, ascending
  Tensor features;                 // n_active x F_t, constant
};

inline std::array<BatchNodes, 4> collect_batch_nodes(const Dataset& ds, std::span<const Order> batch,
                                                     const NodeRegistry& reg) {
  std::array<BatchNodes, 4> out;
  const Order* base = ds.orders().data();
  for (NodeType t : kNodeTypes) {
    const int ti = static_cast<int>(t);
    std::unordered_map<std::size_t, std::size_t> last;  // registry idx -> dataset order idx
    for (const Order& o : batch) {
      const auto idx = reg.find(t, o.element_id(t));
      if (!idx) throw DataError("batch order references an unregistered node");
      last[*idx] = static_cast<std::size_t>(&o - base);
    }
    auto& bn = out[ti];
    bn.index.reserve(last.size());
    for (const auto& [node, _] : last) bn.index.push_back(node);
    std::sort(bn.index.begin(), bn.index.end());
    const std::size_t w = ds.schema().width(t);
    std::vector<double> feats(bn.index.size() * w);
    for (std::size_t k = 0; k < bn.index.size(); ++k) {
      auto row = ds.order_feature(t, last[bn.index[k]]);
      std::copy_n(row.data(), w, feats.data() + k * w);
    }
    bn.features = Tensor::from({bn.index.size(), w}, std::move(feats));
  }
  return out;
}

struct TheGcnOutput {
  std::array<Tensor, 4> pre_gru;     // P_i, full N_i x D (Eqs. of the propagation pipeline)
  std::array<Tensor, 4> h_t_active;  // GRU outputs for the batch's nodes
  std::array<std::vector<std::size_t>, 4> active;  // registry indices, ascending
  std::array<std::unordered_map<std::size_t, std::size_t>, 4> active_pos;

  // Row of node `idx` of type t inside h_t_active[t].
  std::size_t row_of(NodeType t, std::size_t idx) const {
    return active_pos[static_cast<int>(t)].at(idx);
  }
};

class TheGcn {
 public:
  TheGcn() = default;
  TheGcn(const HeteroGraph& graph, int layers) : layers_(layers), blocks_(graph.chain_blocks()) {
    if (layers < 1) throw ConfigError("propagation needs at least 1 layer");
  }

  int layers() const { return layers_; }
  const std::vector<BipartiteAdj>& blocks() const { return blocks_; }

  void rebuild_blocks(const HeteroGraph& graph) { blocks_ = graph.chain_blocks(); }

  // Eqs. of the propagation pipeline: per layer, propagate every non-empty
  // block and sum the per-type slices; then take the mean over layers 0..L.
  std::array<Tensor, 4> propagate(const std::array<Tensor, 4>& h0) const {
    std::array<Tensor, 4> h = h0;
    std::array<std::vector<Tensor>, 4> per_layer;
    for (int t = 0; t < 4; ++t) per_layer[t].push_back(h0[t]);
    for (int l = 1; l <= layers_; ++l) {
      std::array<std::vector<Tensor>, 4> slices;
      for (const BipartiteAdj& blk : blocks_) {
        const int ta = static_cast<int>(blk.type_a), tb = static_cast<int>(blk.type_b);
        Tensor stacked = concat_rows(h[ta], h[tb]);
        Tensor prop = propagate_layer(blk, stacked);
        slices[ta].push_back(slice_rows(prop, 0, blk.n_a));
        slices[tb].push_back(slice_rows(prop, blk.n_a, blk.n()));
      }
      for (int t = 0; t < 4; ++t) {
        h[t] = aggregate_types(slices[t], h[t]);
        per_layer[t].push_back(h[t]);
      }
    }
    std::array<Tensor, 4> out;
    for (int t = 0; t < 4; ++t) out[t] = aggregate_layers(per_layer[t]);
    return out;
  }

  // Full batch update: propagation from the current table state, then the
  // per-type GRU over the batch's active nodes.
  TheGcnOutput forward(const EmbeddingTable& table, const std::array<GruCell, 4>& gru,
                       const std::array<BatchNodes, 4>& batch) const {
    TheGcnOutput out;
    out.pre_gru = propagate(table.h);
    for (int t = 0; t < 4; ++t) {
      const auto& bn = batch[t];
      out.active[t] = bn.index;
      for (std::size_t k = 0; k < bn.index.size(); ++k) out.active_pos[t][bn.index[k]] = k;
      if (bn.index.empty()) {
        out.h_t_active[t] = Tensor::zeros({0, table.dim});
        continue;
      }
      Tensor prior = gather_rows(out.pre_gru[t], bn.index);
      out.h_t_active[t] = gru[t].forward(prior, bn.features);
    }
    return out;
  }

 private:
  int layers_ = 1;
  std::vector<BipartiteAdj> blocks_;
};

}  // namespace igt
