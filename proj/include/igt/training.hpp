#pragma once

// Chronological mini-batch training with MAE loss, Adam, early stopping on
// validation MAE, best-state snapshots, checkpoint serialization and the
// L x D grid search.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "igt/checkpoint.hpp"
#include "igt/metrics.hpp"
#include "igt/model.hpp"

namespace igt {

inline Tensor mae_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw TensorError("mae_loss shape mismatch: " + shape_str(pred.shape()) + " vs " +
                      shape_str(target.shape()));
  if (pred.numel() == 0) throw DataError("mae_loss: empty input");
  return mean(abs(sub(pred, target)));
}

inline Tensor batch_labels(std::span<const Order> batch) {
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i].delivery_hours;
  return Tensor::from({batch.size(), 1}, std::move(y));
}

// Graph context reused across evaluation passes: the extension graph and its
// blocks are fixed, only the table state is cloned per pass.
struct EvalContext {
  HeteroGraph graph;
  TheGcn gcn;
};

inline EvalContext make_eval_context(const IgtModel& model, std::span<const Order> eval_orders,
                                     bool with_edges) {
  EvalContext c;
  c.graph = extend_graph(model.train_graph(), eval_orders, with_edges);
  c.gcn = TheGcn(c.graph, model.config().layers);
  return c;
}

// Stateless with respect to the model: runs the chronological batches of
// `orders` against a cloned table (grown to the context registry) and
// returns per-order predicted hours.
inline std::vector<double> evaluate_predictions(const IgtModel& model, const Dataset& ds,
                                                std::span<const Order> orders, const EvalContext* ctx) {
  std::vector<double> preds;
  preds.reserve(orders.size());
  EmbeddingTable table;
  GraphContext g{};
  if (model.mode() != Mode::EtaFormerOnly) {
    if (!ctx) throw DataError("evaluate_predictions: graph modes need an evaluation context");
    table = model.table().clone();
    table.grow_to(ctx->graph.registry());
    g = {&ctx->gcn, &table, &ctx->graph.registry()};
  }
  const std::size_t bs = model.config().batch_size;
  for (std::size_t off = 0; off < orders.size(); off += bs) {
    auto batch = orders.subspan(off, std::min(bs, orders.size() - off));
    BatchForward bf = model.forward_batch(ds, batch, g);
    for (double v : bf.pred.values()) preds.push_back(v);
  }
  return preds;
}

struct EpochStats {
  double train_loss = 0.0;  // batch-size weighted mean of batch MAE
  double val_mae = 0.0;
  double train_mae = std::numeric_limits<double>::quiet_NaN();  // clean pass, when tracked
};

struct TrainResult {
  TrainConfig config;
  SplitSpec split;
  int best_epoch = 0;   // 1-based
  double best_val_mae = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
  bool diverged = false;
  std::vector<EpochStats> history;
  double seconds_per_epoch = 0.0;
  // payment-time span of each batch in the first epoch; kept so tests can
  // assert the chronological visiting order
  std::vector<std::pair<std::int64_t, std::int64_t>> first_epoch_batch_spans;
};

namespace detail {

struct Snapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> m, v;
  std::int64_t step = 0;
};

inline Snapshot take_snapshot(const std::vector<NamedParam>& params, const Adam& adam) {
  Snapshot s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto vals = params[i].tensor.values();
    s.params.emplace_back(vals.begin(), vals.end());
    s.m.push_back(adam.first_moment(i));
    s.v.push_back(adam.second_moment(i));
  }
  s.step = adam.step_count();
  return s;
}

inline void restore_snapshot(std::vector<NamedParam>& params, Adam& adam, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor.mutable_values();
    std::copy(s.params[i].begin(), s.params[i].end(), w.begin());
    adam.restore_state(i, s.m[i], s.v[i]);
  }
  adam.set_step_count(s.step);
}

}  // namespace detail

struct TrainOutput {
  IgtModel model;
  Adam adam;
  TrainResult result;
};

inline TrainOutput train(const Dataset& ds, const SplitSpec& split_spec, const TrainConfig& cfg) {
  cfg.validate();
  auto split = chronological_split(ds, split_spec);
  if (split.train.empty()) throw DataError("train split is empty");
  if (split.validation.empty()) throw DataError("validation split is empty");

  double label_mean = 0.0;
  for (const Order& o : split.train) label_mean += o.delivery_hours;
  label_mean /= static_cast<double>(split.train.size());

  TrainOutput out{IgtModel(ds, split.train, cfg, label_mean), Adam(), TrainResult()};
  IgtModel& model = out.model;
  auto params = model.parameters();
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  out.adam = Adam(params, acfg);
  Adam& adam = out.adam;

  TrainResult& res = out.result;
  res.config = cfg;
  res.split = split_spec;

  EvalContext val_ctx;
  if (model.mode() != Mode::EtaFormerOnly) val_ctx = make_eval_context(model, split.validation, false);
  const EvalContext* val_ctx_ptr = model.mode() != Mode::EtaFormerOnly ? &val_ctx : nullptr;
  EvalContext train_ctx;
  if (cfg.track_train_mae && model.mode() != Mode::EtaFormerOnly)
    train_ctx = make_eval_context(model, split.train, false);

  detail::Snapshot best = detail::take_snapshot(params, adam);
  double train_seconds = 0.0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    bool finite = true;
    for (std::size_t off = 0; off < split.train.size() && finite; off += cfg.batch_size) {
      auto batch = split.train.subspan(off, std::min<std::size_t>(cfg.batch_size, split.train.size() - off));
      if (epoch == 1)
        res.first_epoch_batch_spans.push_back(
            {batch.front().payment_unix_ts, batch.back().payment_unix_ts});
      Tape tape;
      BatchForward bf;
      Tensor loss;
      {
        TapeScope scope(tape);
        adam.zero_grad();
        try {
          bf = model.forward_batch(ds, batch, model.own_context());
          loss = mae_loss(bf.pred, batch_labels(batch));
        } catch (const NumericError&) {
          finite = false;
          break;
        }
        if (!all_finite(loss)) {
          finite = false;
          break;
        }
        tape.backward(loss);
      }
      adam.step();
      loss_sum += loss.item() * static_cast<double>(batch.size());
    }
    train_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!finite) {
      res.diverged = true;
      break;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(split.train.size());
    if (cfg.track_train_mae) {
      const EvalContext* tctx = model.mode() != Mode::EtaFormerOnly ? &train_ctx : nullptr;
      auto train_pred = evaluate_predictions(model, ds, split.train, tctx);
      std::vector<double> train_y(split.train.size());
      for (std::size_t i = 0; i < train_y.size(); ++i) train_y[i] = split.train[i].delivery_hours;
      stats.train_mae = mae(train_y, train_pred);
    }
    auto val_pred = evaluate_predictions(model, ds, split.validation, val_ctx_ptr);
    std::vector<double> val_y(split.validation.size());
    for (std::size_t i = 0; i < val_y.size(); ++i) val_y[i] = split.validation[i].delivery_hours;
    stats.val_mae = mae(val_y, val_pred);
    res.history.push_back(stats);
    res.epochs_run = epoch;

    if (stats.val_mae < res.best_val_mae) {
      res.best_val_mae = stats.val_mae;
      res.best_epoch = epoch;
      best = detail::take_snapshot(params, adam);
    } else if (epoch - res.best_epoch >= cfg.patience) {
      break;
    }
  }

  detail::restore_snapshot(params, adam, best);
  res.seconds_per_epoch = res.epochs_run > 0 ? train_seconds / res.epochs_run : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint layout
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::string& path, const IgtModel& model, const Adam& adam,
                            const TrainResult& res, std::uint64_t dataset_hash) {
  NamedTensorFile f;
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    f.add("param/" + params[i].name, params[i].tensor.shape(), params[i].tensor.values());
    f.add("adam/m/" + params[i].name, params[i].tensor.shape(), adam.first_moment(i));
    f.add("adam/v/" + params[i].name, params[i].tensor.shape(), adam.second_moment(i));
  }
  const TrainConfig& cfg = model.config();
  f.add_scalar("meta/step", static_cast<double>(adam.step_count()));
  f.add_scalar("meta/epoch", res.best_epoch);
  f.add_scalar("meta/best_val_mae", res.best_val_mae);
  f.add_scalar("meta/layers", cfg.layers);
  f.add_scalar("meta/dim", static_cast<double>(cfg.dim));
  f.add_scalar("meta/batch_size", static_cast<double>(cfg.batch_size));
  f.add_scalar("meta/lr", cfg.lr);
  f.add_scalar("meta/max_epochs", cfg.max_epochs);
  f.add_scalar("meta/patience", cfg.patience);
  f.add_scalar("meta/seed", static_cast<double>(cfg.seed));
  f.add_scalar("meta/mode", static_cast<double>(static_cast<int>(cfg.mode)));
  f.add_scalar("meta/heads", static_cast<double>(cfg.heads));
  f.add_scalar("meta/depth", static_cast<double>(cfg.depth));
  f.add_scalar("meta/val_days", static_cast<double>(res.split.validation_days));
  f.add_scalar("meta/test_days", static_cast<double>(res.split.test_days));
  f.add_scalar("meta/dataset_hash_hi", static_cast<double>(dataset_hash >> 32));
  f.add_scalar("meta/dataset_hash_lo", static_cast<double>(dataset_hash & 0xffffffffull));
  f.write(path);
}

struct LoadedCheckpoint {
  TrainConfig config;
  SplitSpec split;
  int best_epoch = 0;
  double best_val_mae = 0.0;
  std::int64_t step = 0;
  std::uint64_t dataset_hash = 0;
  NamedTensorFile file;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  LoadedCheckpoint c;
  c.file = NamedTensorFile::read(path);
  TrainConfig& cfg = c.config;
  cfg.layers = static_cast<int>(c.file.scalar("meta/layers"));
  cfg.dim = static_cast<std::size_t>(c.file.scalar("meta/dim"));
  cfg.batch_size = static_cast<std::size_t>(c.file.scalar("meta/batch_size"));
  cfg.lr = c.file.scalar("meta/lr");
  cfg.max_epochs = static_cast<int>(c.file.scalar("meta/max_epochs"));
  cfg.patience = static_cast<int>(c.file.scalar("meta/patience"));
  cfg.seed = static_cast<std::uint64_t>(c.file.scalar("meta/seed"));
  cfg.mode = static_cast<Mode>(static_cast<int>(c.file.scalar("meta/mode")));
  cfg.heads = static_cast<std::size_t>(c.file.scalar("meta/heads"));
  cfg.depth = static_cast<std::size_t>(c.file.scalar("meta/depth"));
  c.split.validation_days = static_cast<std::int64_t>(c.file.scalar("meta/val_days"));
  c.split.test_days = static_cast<std::int64_t>(c.file.scalar("meta/test_days"));
  c.best_epoch = static_cast<int>(c.file.scalar("meta/epoch"));
  c.best_val_mae = c.file.scalar("meta/best_val_mae");
  c.step = static_cast<std::int64_t>(c.file.scalar("meta/step"));
  c.dataset_hash = (static_cast<std::uint64_t>(c.file.scalar("meta/dataset_hash_hi")) << 32) |
                   static_cast<std::uint64_t>(c.file.scalar("meta/dataset_hash_lo"));
  return c;
}

// Writes checkpoint tensors into a freshly constructed model; any name or
// shape mismatch is rejected.
inline void restore_model(IgtModel& model, Adam& adam, const LoadedCheckpoint& ckpt) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = ckpt.file.require("param/" + params[i].name);
    if (p.shape != params[i].tensor.shape())
      throw DataError("checkpoint shape mismatch for '" + params[i].name + "': file has " +
                      shape_str(p.shape) + ", model has " + shape_str(params[i].tensor.shape()));
    std::copy(p.values.begin(), p.values.end(), params[i].tensor.mutable_values().begin());
    adam.restore_state(i, ckpt.file.require("adam/m/" + params[i].name).values,
                       ckpt.file.require("adam/v/" + params[i].name).values);
  }
  adam.set_step_count(ckpt.step);
}

// ---------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------

struct GridCell {
  int layers = 0;
  std::size_t dim = 0;
  double val_mae = std::numeric_limits<double>::quiet_NaN();
  double test_mae = std::numeric_limits<double>::quiet_NaN();
  double test_mape = std::numeric_limits<double>::quiet_NaN();
  double test_mare = std::numeric_limits<double>::quiet_NaN();
  double seconds_per_epoch = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

inline void validate_grids(std::span<const int> l_grid, std::span<const std::size_t> d_grid) {
  if (l_grid.empty() || d_grid.empty()) throw ConfigError("grids must be non-empty");
  for (int l : l_grid)
    if (l < 1 || l > 5) throw ConfigError("grid layers must lie in {1..5}, got " + std::to_string(l));
  for (std::size_t d : d_grid)
    if (d != 16 && d != 32 && d != 64 && d != 128 && d != 256)
      throw ConfigError("grid dim must lie in {16,32,64,128,256}, got " + std::to_string(d));
}

// Runs one full train/evaluate per (L, D) cell. `skip` lets a resumable
// caller drop completed cells; failures are recorded and the grid continues.
inline std::vector<GridCell> grid_search(
    const Dataset& ds, const SplitSpec& split_spec, const TrainConfig& base,
    std::span<const int> l_grid, std::span<const std::size_t> d_grid,
    const std::function<bool(int, std::size_t)>& skip = {},
    const std::function<void(const GridCell&)>& on_cell = {}) {
  validate_grids(l_grid, d_grid);
  std::vector<GridCell> cells;
  for (int l : l_grid)
    for (std::size_t d : d_grid) {
      if (skip && skip(l, d)) continue;
      GridCell cell;
      cell.layers = l;
      cell.dim = d;
      try {
        TrainConfig cfg = base;
        cfg.layers = l;
        cfg.dim = d;
        TrainOutput out = train(ds, split_spec, cfg);
        cell.val_mae = out.result.best_val_mae;
        cell.seconds_per_epoch = out.result.seconds_per_epoch;
        auto split = chronological_split(ds, split_spec);
        if (!split.test.empty()) {
          EvalContext ctx;
          const EvalContext* ctx_ptr = nullptr;
          if (out.model.mode() != Mode::EtaFormerOnly) {
            ctx = make_eval_context(out.model, split.test, true);
            ctx_ptr = &ctx;
          }
          auto preds = evaluate_predictions(out.model, ds, split.test, ctx_ptr);
          std::vector<double> y(split.test.size());
          for (std::size_t i = 0; i < y.size(); ++i) y[i] = split.test[i].delivery_hours;
          cell.test_mae = mae(y, preds);
          cell.test_mape = mape(y, preds);
          cell.test_mare = mare(y, preds);
        }
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      cells.push_back(cell);
      if (on_cell) on_cell(cell);
    }
  return cells;
}

}  // namespace igt
