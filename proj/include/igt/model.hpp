#pragma once

// Assembly of the full model and its ablations: the propagation+GRU encoder,
// the transformer regressor, and the concat-and-affine head used when the
// transformer is ablated away.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "igt/etaformer.hpp"
#include "igt/graph.hpp"
#include "igt/optim.hpp"
#include "igt/orders.hpp"
#include "igt/thegcn.hpp"

namespace igt {

enum class Mode { Full, TheGcnOnly, EtaFormerOnly };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Full: return "full";
    case Mode::TheGcnOnly: return "thegcn_only";
    case Mode::EtaFormerOnly: return "etaformer_only";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "full") return Mode::Full;
  if (s == "thegcn_only") return Mode::TheGcnOnly;
  if (s == "etaformer_only") return Mode::EtaFormerOnly;
  throw ConfigError("unknown mode '" + s + "' (expected full|thegcn_only|etaformer_only)");
}

struct TrainConfig {
  int layers = 2;               // propagation depth L
  std::size_t dim = 32;         // embedding width D
  std::size_t batch_size = 8192;
  double lr = 1e-3;
  int max_epochs = 1000;
  int patience = 100;
  std::uint64_t seed = 1;
  Mode mode = Mode::Full;
  std::size_t heads = 4;
  std::size_t depth = 2;        // encoder blocks
  bool track_train_mae = false; // extra clean pass over train each epoch

  void validate() const {
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (heads < 1 || depth < 1) throw ConfigError("heads and depth must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  }
};

struct BatchForward {
  Tensor pred;  // B x 1 hours
  TheGcnOutput gcn;
  bool has_gcn = false;
};

// Graph-side state a forward pass runs against. Training uses the model's
// own; evaluation passes an extended graph and a detached table copy.
struct GraphContext {
  const TheGcn* gcn = nullptr;
  EmbeddingTable* table = nullptr;
  const NodeRegistry* registry = nullptr;
};

// Per-channel affine scaler fitted on the train split; keeps gate and
// attention pre-activations in a sane range regardless of feature units.
struct FeatureScaler {
  std::array<std::vector<double>, 4> mean, inv_std;

  static FeatureScaler fit(const Dataset& ds, std::span<const Order> train) {
    FeatureScaler s;
    const Order* base = ds.orders().data();
    for (NodeType t : kNodeTypes) {
      const int ti = static_cast<int>(t);
      const std::size_t w = ds.schema().width(t);
      s.mean[ti].assign(w, 0.0);
      s.inv_std[ti].assign(w, 1.0);
      if (train.empty()) continue;
      std::vector<double> m2(w, 0.0);
      for (const Order& o : train) {
        auto f = ds.order_feature(t, static_cast<std::size_t>(&o - base));
        for (std::size_t j = 0; j < w; ++j) s.mean[ti][j] += f[j];
      }
      for (double& v : s.mean[ti]) v /= static_cast<double>(train.size());
      for (const Order& o : train) {
        auto f = ds.order_feature(t, static_cast<std::size_t>(&o - base));
        for (std::size_t j = 0; j < w; ++j) {
          const double d = f[j] - s.mean[ti][j];
          m2[j] += d * d;
        }
      }
      for (std::size_t j = 0; j < w; ++j) {
        const double sd = std::sqrt(m2[j] / static_cast<double>(train.size()));
        s.inv_std[ti][j] = sd > 1e-9 ? 1.0 / sd : 1.0;
      }
    }
    return s;
  }

  void apply(NodeType t, double* row) const {
    const int ti = static_cast<int>(t);
    for (std::size_t j = 0; j < mean[ti].size(); ++j)
      row[j] = (row[j] - mean[ti][j]) * inv_std[ti][j];
  }
};

class IgtModel {
 public:
  IgtModel(const Dataset& ds, std::span<const Order> train_orders, const TrainConfig& cfg,
           double head_bias_init)
      : cfg_(cfg), schema_(ds.schema()), scaler_(FeatureScaler::fit(ds, train_orders)) {
    cfg_.validate();
    Rng rng(cfg.seed);
    const bool graph_side = cfg.mode != Mode::EtaFormerOnly;
    const bool former_side = cfg.mode != Mode::TheGcnOnly;

    if (graph_side) {
      graph_ = build_graph(train_orders);
      gcn_ = TheGcn(graph_, cfg.layers);
      table_ = EmbeddingTable::xavier(graph_.registry(), cfg.dim, rng);
      for (NodeType t : kNodeTypes)
        gru_[static_cast<int>(t)] = GruCell::xavier(schema_.width(t), cfg.dim, rng);
    }
    std::size_t w = 0;
    for (NodeType t : kNodeTypes)
      w = std::max(w, schema_.width(t) + (cfg.mode == Mode::Full ? cfg.dim : 0));
    width_ = ((w + cfg.heads - 1) / cfg.heads) * cfg.heads;  // round up for the heads
    if (former_side) former_ = EtaFormer(width_, cfg.heads, cfg.depth, rng, head_bias_init);
    if (cfg.mode == Mode::TheGcnOnly) {
      const std::size_t in = 4 * cfg.dim;
      head_w_ = Tensor::param({in, 1}, rng.xavier_uniform(in, 1));
      head_b_ = Tensor::param({1}, {head_bias_init});
    }
  }

  const TrainConfig& config() const { return cfg_; }
  Mode mode() const { return cfg_.mode; }
  std::size_t width() const { return width_; }
  const HeteroGraph& train_graph() const { return graph_; }
  const TheGcn& gcn() const { return gcn_; }
  EmbeddingTable& table() { return table_; }
  const EmbeddingTable& table() const { return table_; }
  const std::array<GruCell, 4>& gru() const { return gru_; }
  EtaFormer& former() { return former_; }

  GraphContext own_context() {
    return {&gcn_, &table_, &graph_.registry()};
  }

  std::vector<NamedParam> parameters() const {
    std::vector<NamedParam> out;
    if (cfg_.mode != Mode::EtaFormerOnly) {
      for (NodeType t : kNodeTypes)
        out.push_back({std::string("table.") + node_type_name(t), table_.of(t)});
      for (NodeType t : kNodeTypes)
        gru_[static_cast<int>(t)].collect(std::string("gru.") + node_type_name(t), out);
    }
    if (cfg_.mode != Mode::TheGcnOnly) former_.collect("etaformer", out);
    if (cfg_.mode == Mode::TheGcnOnly) {
      out.push_back({"gcn_head.w", head_w_});
      out.push_back({"gcn_head.b", head_b_});
    }
    return out;
  }

  // Forward for one chronological batch. ctx supplies the graph-side state;
  // etaformer-only mode ignores it.
  BatchForward forward_batch(const Dataset& ds, std::span<const Order> batch, GraphContext ctx) const {
    if (batch.empty()) throw DataError("forward_batch: empty batch");
    BatchForward out;
    const std::size_t b = batch.size();

    std::array<Tensor, 4> z_rows;
    for (NodeType t : kNodeTypes) z_rows[static_cast<int>(t)] = order_features(ds, batch, t);

    if (cfg_.mode == Mode::EtaFormerOnly) {
      out.pred = former_.forward(align_features(z_rows, nullptr, width_), b);
      return out;
    }

    auto batch_nodes = collect_batch_nodes(ds, batch, *ctx.registry);
    for (NodeType t : kNodeTypes) {
      const int ti = static_cast<int>(t);
      Tensor& f = batch_nodes[ti].features;
      std::vector<double> scaled(f.values().begin(), f.values().end());
      for (std::size_t r = 0; r < f.rows(); ++r) scaler_.apply(t, scaled.data() + r * f.cols());
      f = Tensor::from(f.shape(), std::move(scaled));
    }
    out.gcn = ctx.gcn->forward(*ctx.table, gru_, batch_nodes);
    out.has_gcn = true;

    std::array<Tensor, 4> h_rows;
    for (NodeType t : kNodeTypes) {
      const int ti = static_cast<int>(t);
      std::vector<std::size_t> rows;
      rows.reserve(b);
      for (const Order& o : batch) {
        const auto idx = ctx.registry->find(t, o.element_id(t));
        rows.push_back(out.gcn.row_of(t, *idx));
      }
      h_rows[ti] = gather_rows(out.gcn.h_t_active[ti], std::move(rows));
    }

    if (cfg_.mode == Mode::TheGcnOnly) {
      Tensor cat = concat_cols({h_rows[0], h_rows[1], h_rows[2], h_rows[3]});
      out.pred = add(matmul(cat, head_w_), head_b_);
      return out;
    }
    out.pred = former_.forward(align_features(z_rows, &h_rows, width_), b);
    return out;
  }

  // Standardized feature rows of one element type across a batch.
  Tensor order_features(const Dataset& ds, std::span<const Order> batch, NodeType t) const {
    const std::size_t w = ds.schema().width(t);
    const Order* base = ds.orders().data();
    std::vector<double> v(batch.size() * w);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t idx = static_cast<std::size_t>(&batch[i] - base);
      auto f = ds.order_feature(t, idx);
      std::copy_n(f.data(), w, v.data() + i * w);
      scaler_.apply(t, v.data() + i * w);
    }
    return Tensor::from({batch.size(), w}, std::move(v));
  }

  const FeatureScaler& scaler() const { return scaler_; }

  Tensor& gcn_head_w() { return head_w_; }
  Tensor& gcn_head_b() { return head_b_; }

 private:
  TrainConfig cfg_;
  FeatureSchema schema_;
  FeatureScaler scaler_;
  std::size_t width_ = 0;

  HeteroGraph graph_;
  TheGcn gcn_;
  EmbeddingTable table_;
  std::array<GruCell, 4> gru_;

  EtaFormer former_;
  Tensor head_w_, head_b_;  // thegcn_only head
};

}  // namespace igt
