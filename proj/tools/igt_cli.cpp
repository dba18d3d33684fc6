// Command-line entry point: synthetic data generation, training, evaluation
// reports and the L x D grid search, each writing a run manifest.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "igt/checkpoint.hpp"
#include "igt/graph.hpp"
#include "igt/kvconfig.hpp"
#include "igt/linreg.hpp"
#include "igt/metrics.hpp"
#include "igt/model.hpp"
#include "igt/orders.hpp"
#include "igt/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// run manifest
// ---------------------------------------------------------------------------

struct ManifestBuilder {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;
  std::map<std::string, double> timings;

  void hash_input(const std::string& path) { input_hashes[path] = hex64(igt::fnv1a64_file(path)); }

  void write(const fs::path& out_dir) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["input_hashes"] = input_hashes;
    j["outputs"] = outputs;
    j["timings_seconds"] = timings;
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw igt::DataError("cannot write manifest in " + out_dir.string());
    out << j.dump(2) << '\n';
  }
};

fs::path ensure_out_dir(const std::string& out_dir) {
  fs::path p = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// config mapping
// ---------------------------------------------------------------------------

igt::GeneratorConfig generator_from_kv(const igt::KvConfig& kv) {
  igt::GeneratorConfig g;
  g.retailers = static_cast<std::size_t>(kv.get_int("retailers", static_cast<std::int64_t>(g.retailers)));
  g.origins = static_cast<std::size_t>(kv.get_int("origins", static_cast<std::int64_t>(g.origins)));
  g.destinations =
      static_cast<std::size_t>(kv.get_int("destinations", static_cast<std::int64_t>(g.destinations)));
  g.days = static_cast<std::size_t>(kv.get_int("days", static_cast<std::int64_t>(g.days)));
  g.orders_per_day =
      static_cast<std::size_t>(kv.get_int("orders_per_day", static_cast<std::int64_t>(g.orders_per_day)));
  g.sigma_hours = kv.get_num("sigma_hours", g.sigma_hours);
  g.base_hours = kv.get_num("base_hours", g.base_hours);
  g.retailer_sigma_hours = kv.get_num("retailer_sigma_hours", g.retailer_sigma_hours);
  g.speed_hours_per_unit = kv.get_num("speed_hours_per_unit", g.speed_hours_per_unit);
  g.alt_origin_prob = kv.get_num("alt_origin_prob", g.alt_origin_prob);
  g.cutoff_hour = static_cast<int>(kv.get_int("cutoff_hour", g.cutoff_hour));
  g.start_unix_ts = kv.get_int("start_unix_ts", g.start_unix_ts);
  for (int h = 0; h < 24; ++h)
    g.diurnal[h] = kv.get_num("diurnal_h" + std::to_string(h), g.diurnal[h]);
  return g;
}

struct TrainSetup {
  igt::TrainConfig config;
  igt::SplitSpec split{5, 10};
};

TrainSetup train_setup_from_kv(const igt::KvConfig& kv) {
  TrainSetup s;
  igt::TrainConfig& c = s.config;
  c.layers = static_cast<int>(kv.get_int("layers", c.layers));
  c.dim = static_cast<std::size_t>(kv.get_int("dim", static_cast<std::int64_t>(c.dim)));
  c.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<std::int64_t>(c.batch_size)));
  c.lr = kv.get_num("lr", c.lr);
  c.max_epochs = static_cast<int>(kv.get_int("max_epochs", c.max_epochs));
  c.patience = static_cast<int>(kv.get_int("patience", c.patience));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.mode = igt::parse_mode(kv.get_str("mode", igt::mode_name(c.mode)));
  c.heads = static_cast<std::size_t>(kv.get_int("heads", static_cast<std::int64_t>(c.heads)));
  c.depth = static_cast<std::size_t>(kv.get_int("depth", static_cast<std::int64_t>(c.depth)));
  s.split.validation_days = kv.get_int("validation_days", s.split.validation_days);
  s.split.test_days = kv.get_int("test_days", s.split.test_days);
  return s;
}

std::map<std::string, std::string> echo_train_setup(const TrainSetup& s) {
  const igt::TrainConfig& c = s.config;
  return {{"layers", std::to_string(c.layers)},
          {"dim", std::to_string(c.dim)},
          {"batch_size", std::to_string(c.batch_size)},
          {"lr", std::to_string(c.lr)},
          {"max_epochs", std::to_string(c.max_epochs)},
          {"patience", std::to_string(c.patience)},
          {"seed", std::to_string(c.seed)},
          {"mode", igt::mode_name(c.mode)},
          {"heads", std::to_string(c.heads)},
          {"depth", std::to_string(c.depth)},
          {"validation_days", std::to_string(s.split.validation_days)},
          {"test_days", std::to_string(s.split.test_days)}};
}

// ---------------------------------------------------------------------------
// report writers
// ---------------------------------------------------------------------------

json metrics_to_json(const igt::MetricsReport& m) {
  json j;
  j["count"] = m.count;
  if (m.count > 0) {
    j["mae_hours"] = m.mae;
    j["mape_pct"] = m.mape * 100.0;
    j["mare_pct"] = m.mare * 100.0;
  }
  return j;
}

void write_num(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void write_group_csv(const fs::path& path, const std::vector<std::pair<std::string, igt::MetricsReport>>& rows) {
  std::ofstream out(path);
  out << "group_key,count,mae_hours,mape_pct,mare_pct\n";
  for (const auto& [key, m] : rows) {
    out << key << ',' << m.count << ',';
    write_num(out, m.mae);
    out << ',';
    write_num(out, m.mape * 100.0);
    out << ',';
    write_num(out, m.mare * 100.0);
    out << '\n';
  }
}

void write_entropy_csv(const fs::path& path, const std::vector<igt::HourEntropy>& slots) {
  std::ofstream out(path);
  out << "hour,entropy_nats,count\n";
  for (const auto& s : slots) {
    out << s.hour << ',';
    write_num(out, s.entropy_nats);
    out << ',' << s.count << '\n';
  }
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string config_path;
  std::string out_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
};

int run_gen_data(const GenArgs& a) {
  const double t0 = now_seconds();
  const fs::path out_dir = ensure_out_dir(a.out_dir);
  igt::KvConfig kv = a.config_path.empty() ? igt::KvConfig() : igt::KvConfig::parse_file(a.config_path);
  igt::GeneratorConfig gen = generator_from_kv(kv);
  igt::Dataset ds = igt::Dataset::generate_synthetic(gen, a.seed);
  const fs::path out_path = a.out_path.empty() ? out_dir / "dataset.csv" : fs::path(a.out_path);
  ds.write_csv(out_path.string());

  ManifestBuilder mf;
  mf.command = "gen-data";
  for (const auto& [k, v] : kv.entries()) mf.config[k] = v;
  mf.config["orders_total"] = std::to_string(ds.size());
  mf.seed = a.seed;
  if (!a.config_path.empty()) mf.hash_input(a.config_path);
  mf.outputs.push_back(out_path.string());
  mf.timings["total"] = now_seconds() - t0;
  mf.write(out_dir);
  std::cout << "wrote " << ds.size() << " orders to " << out_path.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data_path;
  std::string config_path;
  std::string out_dir = ".";
  std::string export_graph;
  std::map<std::string, std::string> overrides;  // flags win over the file
};

TrainSetup resolve_train_setup(const TrainArgs& a) {
  igt::KvConfig kv = a.config_path.empty() ? igt::KvConfig() : igt::KvConfig::parse_file(a.config_path);
  for (const auto& [k, v] : a.overrides) kv.set(k, v);
  return train_setup_from_kv(kv);
}

igt::MetricsReport metrics_of(std::span<const igt::Order> orders, std::span<const double> preds) {
  std::vector<double> y(orders.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = orders[i].delivery_hours;
  return igt::compute_metrics(y, preds);
}

int run_train(const TrainArgs& a) {
  const double t0 = now_seconds();
  const fs::path out_dir = ensure_out_dir(a.out_dir);
  const TrainSetup setup = resolve_train_setup(a);

  igt::Dataset ds = igt::Dataset::ingest_csv(a.data_path);
  const std::uint64_t data_hash = igt::fnv1a64_file(a.data_path);
  const double t_load = now_seconds();

  igt::TrainOutput out = igt::train(ds, setup.split, setup.config);
  const double t_train = now_seconds();

  auto split = igt::chronological_split(ds, setup.split);
  json metrics;
  metrics["mode"] = igt::mode_name(setup.config.mode);
  metrics["best_epoch"] = out.result.best_epoch;
  metrics["epochs_run"] = out.result.epochs_run;
  metrics["seconds_per_epoch"] = out.result.seconds_per_epoch;
  metrics["diverged"] = out.result.diverged;

  {
    igt::EvalContext ctx;
    const igt::EvalContext* ctx_ptr = nullptr;
    if (out.model.mode() != igt::Mode::EtaFormerOnly) {
      ctx = igt::make_eval_context(out.model, split.validation, false);
      ctx_ptr = &ctx;
    }
    auto preds = igt::evaluate_predictions(out.model, ds, split.validation, ctx_ptr);
    metrics["validation"] = metrics_to_json(metrics_of(split.validation, preds));
  }
  if (!split.test.empty()) {
    igt::EvalContext ctx;
    const igt::EvalContext* ctx_ptr = nullptr;
    if (out.model.mode() != igt::Mode::EtaFormerOnly) {
      ctx = igt::make_eval_context(out.model, split.test, true);
      ctx_ptr = &ctx;
    }
    auto preds = igt::evaluate_predictions(out.model, ds, split.test, ctx_ptr);
    metrics["test"] = metrics_to_json(metrics_of(split.test, preds));

    auto lr = igt::LinearRegression::fit(ds, split.train);
    metrics["lr_baseline"] = metrics_to_json(metrics_of(split.test, lr.predict_all(ds, split.test)));
  }
  json hist = json::array();
  for (const auto& e : out.result.history)
    hist.push_back({{"train_loss", e.train_loss}, {"val_mae", e.val_mae}});
  metrics["history"] = hist;

  const fs::path ckpt_path = out_dir / "checkpoint.bin";
  igt::save_checkpoint(ckpt_path.string(), out.model, out.adam, out.result, data_hash);
  const fs::path metrics_path = out_dir / "metrics.json";
  {
    std::ofstream mout(metrics_path);
    mout << metrics.dump(2) << '\n';
  }
  if (!a.export_graph.empty() && out.model.mode() != igt::Mode::EtaFormerOnly) {
    std::ofstream gout(a.export_graph);
    if (!gout) throw igt::DataError("cannot write graph export: " + a.export_graph);
    out.model.train_graph().export_edge_list(gout);
  }

  ManifestBuilder mf;
  mf.command = "train";
  mf.config = echo_train_setup(setup);
  mf.seed = setup.config.seed;
  mf.hash_input(a.data_path);
  if (!a.config_path.empty()) mf.hash_input(a.config_path);
  mf.outputs.push_back(ckpt_path.string());
  mf.outputs.push_back(metrics_path.string());
  mf.timings["load"] = t_load - t0;
  mf.timings["train"] = t_train - t_load;
  mf.timings["total"] = now_seconds() - t0;
  mf.write(out_dir);

  std::cout << "best validation MAE " << out.result.best_val_mae << " h at epoch "
            << out.result.best_epoch << " (" << out.result.epochs_run << " epochs)\n";
  if (out.result.diverged) {
    std::cerr << "training diverged: non-finite loss; checkpoint holds the last finite state\n";
    return kExitNumeric;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint_path;
  std::string data_path;
  std::string out_dir = ".";
  bool by_hour = false;
  bool entropy = false;
  std::vector<std::string> bins;
};

int run_eval(const EvalArgs& a) {
  const double t0 = now_seconds();
  const fs::path out_dir = ensure_out_dir(a.out_dir);

  igt::LoadedCheckpoint ckpt = igt::load_checkpoint(a.checkpoint_path);
  igt::Dataset ds = igt::Dataset::ingest_csv(a.data_path);
  const std::uint64_t data_hash = igt::fnv1a64_file(a.data_path);
  if (data_hash != ckpt.dataset_hash)
    throw igt::DataError("dataset does not match the checkpoint (content hash " + hex64(data_hash) +
                         " vs " + hex64(ckpt.dataset_hash) + ")");

  auto split = igt::chronological_split(ds, ckpt.split);
  if (split.test.empty()) throw igt::DataError("checkpoint split leaves no test orders to evaluate");

  double label_mean = 0.0;
  for (const igt::Order& o : split.train) label_mean += o.delivery_hours;
  label_mean /= static_cast<double>(split.train.size());
  igt::IgtModel model(ds, split.train, ckpt.config, label_mean);
  igt::Adam adam(model.parameters(), {});
  igt::restore_model(model, adam, ckpt);

  igt::EvalContext ctx;
  const igt::EvalContext* ctx_ptr = nullptr;
  if (model.mode() != igt::Mode::EtaFormerOnly) {
    ctx = igt::make_eval_context(model, split.test, true);
    ctx_ptr = &ctx;
  }
  auto preds = igt::evaluate_predictions(model, ds, split.test, ctx_ptr);

  json report;
  report["overall"] = metrics_to_json(metrics_of(split.test, preds));
  std::vector<std::string> outputs;

  {
    const fs::path p = out_dir / "overall.csv";
    write_group_csv(p, {{"all", metrics_of(split.test, preds)}});
    outputs.push_back(p.string());
  }
  if (a.by_hour) {
    auto rows = igt::by_hour_report(split.test, preds);
    std::vector<std::pair<std::string, igt::MetricsReport>> csv_rows;
    json jrows = json::array();
    for (const auto& r : rows) {
      csv_rows.push_back({std::to_string(r.hour), r.metrics});
      jrows.push_back({{"hour", r.hour}, {"metrics", metrics_to_json(r.metrics)}});
    }
    const fs::path p = out_dir / "by_hour.csv";
    write_group_csv(p, csv_rows);
    outputs.push_back(p.string());
    report["by_hour"] = jrows;
  }
  for (const std::string& bin_type : a.bins) {
    const igt::NodeType t = igt::parse_node_type(bin_type);
    auto spec = igt::BinSpec::for_type(t);
    auto counts = igt::element_order_counts(split.train, t);
    auto rows = igt::binned_report(split.test, preds, counts, spec);
    std::vector<std::pair<std::string, igt::MetricsReport>> csv_rows;
    json jrows = json::array();
    for (const auto& r : rows) {
      csv_rows.push_back({r.label, r.metrics});
      jrows.push_back({{"bin", r.label},
                       {"low_confidence", r.low_confidence},
                       {"metrics", metrics_to_json(r.metrics)}});
    }
    const fs::path p = out_dir / ("bins_" + bin_type + ".csv");
    write_group_csv(p, csv_rows);
    outputs.push_back(p.string());
    report["bins"][bin_type] = jrows;
  }
  if (a.entropy) {
    auto slots = igt::entropy_by_payment_time(split.test);
    const fs::path p = out_dir / "entropy.csv";
    write_entropy_csv(p, slots);
    outputs.push_back(p.string());
    json jrows = json::array();
    for (const auto& s : slots)
      jrows.push_back({{"hour", s.hour}, {"entropy_nats", s.entropy_nats}, {"count", s.count}});
    report["entropy"] = jrows;
  }

  const fs::path report_path = out_dir / "report.json";
  {
    std::ofstream rout(report_path);
    rout << report.dump(2) << '\n';
  }
  outputs.push_back(report_path.string());

  ManifestBuilder mf;
  mf.command = "eval";
  mf.config["checkpoint"] = a.checkpoint_path;
  mf.config["mode"] = igt::mode_name(ckpt.config.mode);
  mf.seed = ckpt.config.seed;
  mf.hash_input(a.data_path);
  mf.hash_input(a.checkpoint_path);
  mf.outputs = outputs;
  mf.timings["total"] = now_seconds() - t0;
  mf.write(out_dir);

  std::cout << "test MAE " << report["overall"]["mae_hours"].get<double>() << " h over "
            << split.test.size() << " orders\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

struct GridArgs {
  std::string data_path;
  std::string config_path;
  std::string out_dir = ".";
  std::string l_grid = "1,2,3,4,5";
  std::string d_grid = "16,32,64,128,256";
  int jobs = 1;
  bool resume = false;
  std::map<std::string, std::string> overrides;
};

std::vector<std::int64_t> parse_int_list(const std::string& csv) {
  std::vector<std::int64_t> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoll(tok));
  }
  return out;
}

std::string grid_row(const igt::GridCell& c) {
  std::ostringstream os;
  os << c.layers << ',' << c.dim << ',';
  write_num(os, c.val_mae);
  os << ',';
  write_num(os, c.test_mae);
  os << ',';
  write_num(os, c.test_mape * 100.0);
  os << ',';
  write_num(os, c.test_mare * 100.0);
  os << ',';
  write_num(os, c.seconds_per_epoch);
  return os.str();
}

std::map<std::pair<int, std::size_t>, std::string> read_grid_rows(const fs::path& path) {
  std::map<std::pair<int, std::size_t>, std::string> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string l, d;
    std::getline(ls, l, ',');
    std::getline(ls, d, ',');
    rows[{std::stoi(l), static_cast<std::size_t>(std::stoull(d))}] = line;
  }
  return rows;
}

void write_grid_csv(const fs::path& path, const std::map<std::pair<int, std::size_t>, std::string>& rows) {
  std::ofstream out(path);
  out << "L,D,val_mae,test_mae,test_mape,test_mare,seconds_per_epoch\n";
  for (const auto& [key, line] : rows) out << line << '\n';
}

int run_grid_cell(const std::string& data_path, const std::string& base_cfg_path, int layers,
                  std::size_t dim, const std::string& row_out) {
  TrainArgs ta;
  ta.data_path = data_path;
  ta.config_path = base_cfg_path;
  const TrainSetup setup = resolve_train_setup(ta);
  igt::Dataset ds = igt::Dataset::ingest_csv(data_path);
  igt::GridCell cell;
  cell.layers = layers;
  cell.dim = dim;
  try {
    std::vector<int> ls = {layers};
    std::vector<std::size_t> dsz = {dim};
    auto cells = igt::grid_search(ds, setup.split, setup.config, ls, dsz);
    cell = cells.at(0);
  } catch (const std::exception& e) {
    cell.failed = true;
    cell.error = e.what();
  }
  std::ofstream out(row_out);
  out << grid_row(cell) << '\n';
  return kExitOk;
}

int run_grid(const GridArgs& a) {
  const double t0 = now_seconds();
  const fs::path out_dir = ensure_out_dir(a.out_dir);
  const fs::path grid_path = out_dir / "grid.csv";

  std::vector<int> l_grid;
  for (auto v : parse_int_list(a.l_grid)) l_grid.push_back(static_cast<int>(v));
  std::vector<std::size_t> d_grid;
  for (auto v : parse_int_list(a.d_grid)) d_grid.push_back(static_cast<std::size_t>(v));
  igt::validate_grids(l_grid, d_grid);

  // resolve the base config once so worker processes see identical settings
  igt::KvConfig kv = a.config_path.empty() ? igt::KvConfig() : igt::KvConfig::parse_file(a.config_path);
  for (const auto& [k, v] : a.overrides) kv.set(k, v);
  const TrainSetup setup = train_setup_from_kv(kv);
  const fs::path base_cfg = out_dir / "grid_base.cfg";
  {
    std::ofstream out(base_cfg);
    for (const auto& [k, v] : echo_train_setup(setup)) out << k << " = " << v << '\n';
  }

  auto done = a.resume ? read_grid_rows(grid_path) : std::map<std::pair<int, std::size_t>, std::string>{};
  std::vector<std::pair<int, std::size_t>> todo;
  for (int l : l_grid)
    for (std::size_t d : d_grid)
      if (!done.count({l, d})) todo.push_back({l, d});
  std::size_t executed = 0;

  if (a.jobs <= 1) {
    igt::Dataset ds = igt::Dataset::ingest_csv(a.data_path);
    for (auto [l, d] : todo) {
      std::vector<int> ls = {l};
      std::vector<std::size_t> dsz = {d};
      auto cells = igt::grid_search(ds, setup.split, setup.config, ls, dsz);
      done[{l, d}] = grid_row(cells.at(0));
      ++executed;
      write_grid_csv(grid_path, done);  // flush per cell so a kill is resumable
      std::cout << "cell L=" << l << " D=" << d << " done (" << done.size() << " of "
                << l_grid.size() * d_grid.size() << ")\n";
    }
  } else {
    const fs::path cell_dir = out_dir / "cells";
    fs::create_directories(cell_dir);
    std::map<pid_t, std::pair<int, std::size_t>> running;
    std::size_t next = 0;
    auto row_path = [&](std::pair<int, std::size_t> cell) {
      return cell_dir / ("L" + std::to_string(cell.first) + "_D" + std::to_string(cell.second) + ".row");
    };
    auto spawn_one = [&](std::pair<int, std::size_t> cell) {
      const pid_t pid = fork();
      if (pid < 0) throw igt::DataError("fork failed");
      if (pid == 0) {
        std::vector<std::string> args = {"/proc/self/exe", "grid-cell",
                                         "--data", a.data_path,
                                         "--config", base_cfg.string(),
                                         "--layers", std::to_string(cell.first),
                                         "--dim", std::to_string(cell.second),
                                         "--row-out", row_path(cell).string()};
        std::vector<char*> argv;
        argv.reserve(args.size() + 1);
        for (auto& s : args) argv.push_back(s.data());
        argv.push_back(nullptr);
        execv("/proc/self/exe", argv.data());
        _exit(127);
      }
      running[pid] = cell;
    };
    while (next < todo.size() || !running.empty()) {
      while (next < todo.size() && running.size() < static_cast<std::size_t>(a.jobs))
        spawn_one(todo[next++]);
      int status = 0;
      const pid_t pid = waitpid(-1, &status, 0);
      if (pid <= 0) continue;
      const auto it = running.find(pid);
      if (it == running.end()) continue;
      const auto cell = it->second;
      running.erase(it);
      std::string line;
      std::ifstream in(row_path(cell));
      if (in && std::getline(in, line) && !line.empty()) {
        done[cell] = line;
      } else {
        igt::GridCell failed;
        failed.layers = cell.first;
        failed.dim = cell.second;
        failed.failed = true;
        done[cell] = grid_row(failed);
      }
      ++executed;
      write_grid_csv(grid_path, done);
      std::cout << "cell L=" << cell.first << " D=" << cell.second << " done (" << done.size()
                << " of " << l_grid.size() * d_grid.size() << ")\n";
    }
  }

  ManifestBuilder mf;
  mf.command = "grid";
  mf.config = echo_train_setup(setup);
  mf.config["l_grid"] = a.l_grid;
  mf.config["d_grid"] = a.d_grid;
  mf.config["cells_total"] = std::to_string(done.size());
  mf.config["cells_executed"] = std::to_string(executed);
  mf.seed = setup.config.seed;
  mf.hash_input(a.data_path);
  if (!a.config_path.empty()) mf.hash_input(a.config_path);
  mf.outputs.push_back(grid_path.string());
  mf.timings["total"] = now_seconds() - t0;
  mf.write(out_dir);
  std::cout << "grid complete: " << done.size() << " cells in " << grid_path.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"origin-destination delivery time estimation"};
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic order dataset");
  gen->add_option("--config", gen_args.config_path, "generator key-value config");
  gen->add_option("--out", gen_args.out_path, "output CSV path (default <out-dir>/dataset.csv)");
  gen->add_option("--out-dir", gen_args.out_dir, "run output directory");
  gen->add_option("--seed", gen_args.seed, "random seed");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "train a model and write checkpoint + metrics");
  tr->add_option("--data", train_args.data_path, "dataset CSV")->required();
  tr->add_option("--config", train_args.config_path, "training key-value config");
  tr->add_option("--out-dir", train_args.out_dir, "run output directory");
  tr->add_option("--export-graph", train_args.export_graph, "write the train graph edge list here");
  for (const char* key : {"layers", "dim", "batch-size", "lr", "max-epochs", "patience", "seed",
                          "mode", "heads", "depth", "validation-days", "test-days"}) {
    std::string flag = key;
    std::string kv_key = flag;
    for (auto& ch : kv_key)
      if (ch == '-') ch = '_';
    tr->add_option_function<std::string>(
        "--" + flag, [&train_args, kv_key](const std::string& v) { train_args.overrides[kv_key] = v; },
        "override config key " + kv_key);
  }

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint and emit reports");
  ev->add_option("--checkpoint", eval_args.checkpoint_path, "checkpoint file")->required();
  ev->add_option("--data", eval_args.data_path, "dataset CSV")->required();
  ev->add_option("--out-dir", eval_args.out_dir, "run output directory");
  ev->add_flag("--by-hour", eval_args.by_hour, "emit the per-payment-hour breakdown");
  ev->add_flag("--entropy", eval_args.entropy, "emit per-hour delivery-time entropy");
  ev->add_option("--bins", eval_args.bins,
                 "order-count bins for an element type (retailer|origin|destination)");

  GridArgs grid_args;
  auto* gr = app.add_subcommand("grid", "L x D grid search");
  gr->add_option("--data", grid_args.data_path, "dataset CSV")->required();
  gr->add_option("--config", grid_args.config_path, "base training key-value config");
  gr->add_option("--out-dir", grid_args.out_dir, "run output directory");
  gr->add_option("--l-grid", grid_args.l_grid, "comma-separated layer counts");
  gr->add_option("--d-grid", grid_args.d_grid, "comma-separated embedding widths");
  gr->add_option("--jobs", grid_args.jobs, "worker processes");
  gr->add_flag("--resume", grid_args.resume, "skip cells already present in grid.csv");
  for (const char* key : {"batch-size", "lr", "max-epochs", "patience", "seed", "mode", "heads",
                          "depth", "validation-days", "test-days"}) {
    std::string flag = key;
    std::string kv_key = flag;
    for (auto& ch : kv_key)
      if (ch == '-') ch = '_';
    gr->add_option_function<std::string>(
        "--" + flag, [&grid_args, kv_key](const std::string& v) { grid_args.overrides[kv_key] = v; },
        "override config key " + kv_key);
  }

  // hidden worker behind grid --jobs
  std::string cell_data, cell_cfg, cell_row;
  int cell_layers = 1;
  std::size_t cell_dim = 16;
  auto* gc = app.add_subcommand("grid-cell");
  gc->group("");
  gc->add_option("--data", cell_data)->required();
  gc->add_option("--config", cell_cfg);
  gc->add_option("--layers", cell_layers)->required();
  gc->add_option("--dim", cell_dim)->required();
  gc->add_option("--row-out", cell_row)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (tr->parsed()) return run_train(train_args);
    if (ev->parsed()) return run_eval(eval_args);
    if (gr->parsed()) return run_grid(grid_args);
    if (gc->parsed()) return run_grid_cell(cell_data, cell_cfg, cell_layers, cell_dim, cell_row);
  } catch (const igt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const igt::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const igt::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
