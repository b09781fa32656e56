#include "supermask/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "supermask/checkpoint.hpp"
#include "supermask/errors.hpp"

namespace supermask {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return exit_numerical;
  if (dynamic_cast<const FormatError*>(&e)) return exit_data;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return exit_usage;
  return exit_data;
}

namespace {

std::filesystem::path locate(const std::filesystem::path& root, const char* subdir, const char* probe) {
  if (std::filesystem::exists(root / probe)) return root;
  if (std::filesystem::exists(root / subdir / probe)) return root / subdir;
  throw FormatError("no " + std::string(probe) + " under " + root.string() + " or " + (root / subdir).string());
}

ConvVariant conv_variant(ArchKind a) {
  switch (a) {
    case ArchKind::conv2: return ConvVariant::conv2;
    case ArchKind::conv4: return ConvVariant::conv4;
    case ArchKind::conv6: return ConvVariant::conv6;
    default: throw ConfigError("not a conv architecture");
  }
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : RunConfig::keys()) j[k] = cfg.get(k);
  return j;
}

}  // namespace

DatasetSplits load_data(const RunConfig& cfg) {
  switch (cfg.dataset) {
    case DatasetKind::cifar10:
      return load_cifar10(locate(cfg.data_root(), "cifar-10-batches-bin", "data_batch_1.bin"));
    case DatasetKind::cifar100:
      return load_cifar100(locate(cfg.data_root(), "cifar-100-binary", "train.bin"));
    case DatasetKind::synthetic:
      break;
  }
  const std::uint64_t seed = derive_seed(cfg.seed, "synthetic");
  if (cfg.arch == ArchKind::mlp) return make_synthetic_task(cfg.synthetic_size, seed);
  return make_synthetic_images(cfg.synthetic_size, seed, 10, {3, cfg.input_size, cfg.input_size});
}

Network<Real> build_network(const RunConfig& cfg, const DatasetSplits& data) {
  const std::uint64_t seed = derive_seed(cfg.seed, "init");
  const Shape example = data.train.example_shape();
  if (cfg.arch == ArchKind::mlp) {
    std::vector<Index> sizes{shape_size(example)};
    sizes.insert(sizes.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
    sizes.push_back(data.n_classes);
    return build_mlp<Real>(sizes, seed, cfg.layer_options());
  }
  if (example.size() != 3) throw ConfigError("conv architectures need image data, got examples of shape " + shape_string(example));
  return build_conv_family<Real>(conv_variant(cfg.arch), data.n_classes, seed, cfg.layer_options(), example,
                                 cfg.width_divisor);
}

ExperimentResult run_experiment(const RunConfig& cfg, const DatasetSplits& data, Network<Real>& net,
                                const EpochCallback& on_epoch) {
  ExperimentResult r;
  r.record = train(net, data, cfg, on_epoch);
  r.test_threshold = evaluate_threshold(net, data.test);
  Rng rng = make_stream(cfg.seed, "test-eval");
  r.test_averaging = evaluate_averaging(net, data.test, cfg.avg_samples, rng, cfg.temperature).mean;
  r.final_pruning_rate = threshold_pruning_rate(net);
  return r;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const DatasetSplits data = load_data(cfg);
  Network<Real> net = build_network(cfg, data);
  log << "training " << to_string(cfg.arch) << " on " << to_string(cfg.dataset) << " (" << data.train.size() << "/"
      << data.val.size() << "/" << data.test.size() << "), " << parameter_count(net) << " frozen weights\n";

  const ExperimentResult r = run_experiment(cfg, data, net, [&](const EpochRecord& e) {
    log << "epoch " << e.epoch << " loss " << num(e.train_loss) << " val " << num(e.val_acc) << " pruned "
        << num(e.pruning_rate) << '\n';
    return true;
  });

  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  {
    std::ofstream csv(out / "metrics.csv", std::ios::binary);
    r.record.write_csv(csv);
    if (!csv) throw FormatError("cannot write " + (out / "metrics.csv").string());
  }
  nlohmann::json summary;
  summary["best_epoch"] = r.record.best_epoch;
  summary["epochs_run"] = r.record.epochs.size();
  summary["best_val_acc"] = r.record.best_val_acc;
  summary["test_acc"] = cfg.eval == EvalMode::threshold ? r.test_threshold : r.test_averaging;
  summary["test_acc_threshold"] = r.test_threshold;
  summary["test_acc_averaging"] = r.test_averaging;
  summary["final_pruning_rate"] = r.final_pruning_rate;
  summary["config"] = config_json(cfg);
  std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
  network_checkpoint(net, cfg.echo()).save(out / "model.smck");

  log << "best epoch " << r.record.best_epoch << " val " << num(r.record.best_val_acc) << " test "
      << num(summary["test_acc"].get<double>()) << " pruning rate " << num(r.final_pruning_rate) << '\n'
      << "wrote " << out.string() << '\n';
  return exit_ok;
}

EvalReport cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& overrides,
                    const std::vector<std::string>& overridden_keys) {
  const Container c = Container::load(checkpoint);
  RunConfig cfg = RunConfig::parse(c.text("config"));
  for (const auto& k : overridden_keys) cfg.set(k, overrides.get(k));
  cfg.validate();
  const DatasetSplits data = load_data(cfg);
  Network<Real> net = build_network(cfg, data);
  restore_network(net, c);

  EvalReport r;
  r.mode = cfg.eval;
  r.examples = data.test.size();
  r.pruning_rate = threshold_pruning_rate(net);
  if (cfg.eval == EvalMode::threshold) {
    r.accuracy = evaluate_threshold(net, data.test);
  } else {
    Rng rng = make_stream(cfg.seed, "test-eval");
    const auto a = evaluate_averaging(net, data.test, cfg.avg_samples, rng, cfg.temperature);
    r.accuracy = a.mean;
    r.variance = a.variance;
  }
  return r;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, int parallel) {
  base.validate();
  if (parallel < 1) throw ConfigError("--parallel must be at least 1");
  const RescaleStrategy wr = base.rescale == RescaleStrategy::none ? RescaleStrategy::smart : base.rescale;
  const std::vector<ArchKind> archs = base.archs.empty() ? std::vector<ArchKind>{base.arch} : base.archs;

  std::vector<AblationRow> rows;
  std::vector<RunConfig> configs;
  for (ArchKind arch : archs)
    for (bool aug : {false, true})
      for (const char* cell : {"none", "WR", "SC", "WR+SC"}) {
        AblationRow row;
        row.arch = arch;
        row.augment = aug;
        row.cell = cell;
        const bool use_wr = row.cell == "WR" || row.cell == "WR+SC";
        const bool use_sc = row.cell == "SC" || row.cell == "WR+SC";
        row.rescale = use_wr ? wr : RescaleStrategy::none;
        row.weights = use_sc ? WeightScheme::signed_constant_of_kaiming : base.weights;
        RunConfig cfg = base;
        cfg.arch = arch;
        cfg.augment = aug;
        cfg.rescale = row.rescale;
        cfg.weights = row.weights;
        rows.push_back(std::move(row));
        configs.push_back(std::move(cfg));
      }

  // Each worker owns its data, network and RNG streams; only the row slot it
  // claimed is written.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < rows.size();) {
      const RunConfig& cfg = configs[i];
      if (cfg.augment && cfg.arch == ArchKind::mlp) {
        rows[i].status = "skipped: augmentation needs image inputs";
        continue;
      }
      try {
        const DatasetSplits data = load_data(cfg);
        Network<Real> net = build_network(cfg, data);
        rows[i].result = run_experiment(cfg, data, net);
        rows[i].status = "ok";
      } catch (const FormatError&) {
        throw;
      } catch (const std::exception& e) {
        rows[i].status = std::string("failed: ") + e.what();
      }
    }
  };
  if (parallel == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(parallel));
    for (int t = 0; t < parallel; ++t)
      threads.emplace_back([&, t] {
        try {
          worker();
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    for (auto& th : threads) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << kAblationHeader << '\n';
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    out << to_string(r.arch) << ',' << (r.augment ? "on" : "off") << ',' << r.cell << ',' << to_string(r.rescale)
        << ',' << to_string(r.weights) << ',' << status << ',';
    if (r.status == "ok") {
      const auto& x = r.result;
      out << x.record.best_epoch << ',' << x.record.epochs.size() << ',' << num(x.record.best_val_acc) << ','
          << num(x.test_threshold) << ',' << num(x.test_averaging) << ',' << num(x.final_pruning_rate);
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
}

void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << std::left << std::setw(8) << "arch" << std::setw(11) << "eval";
  for (const char* aug : {"", "aug "})
    for (const char* cell : {"none", "WR", "SC", "WR+SC"}) out << std::setw(11) << (std::string(aug) + cell);
  out << '\n';
  std::vector<ArchKind> seen;
  for (const auto& r : rows)
    if (std::find(seen.begin(), seen.end(), r.arch) == seen.end()) seen.push_back(r.arch);
  for (ArchKind arch : seen)
    for (int mode = 0; mode < 2; ++mode) {
      out << std::setw(8) << to_string(arch) << std::setw(11) << (mode == 0 ? "threshold" : "averaging");
      for (bool aug : {false, true})
        for (const char* cell : {"none", "WR", "SC", "WR+SC"}) {
          std::string text = "-";
          for (const auto& r : rows)
            if (r.arch == arch && r.augment == aug && r.cell == cell && r.status == "ok") {
              char buf[32];
              std::snprintf(buf, sizeof(buf), "%.2f%%",
                            100.0 * (mode == 0 ? r.result.test_threshold : r.result.test_averaging));
              text = buf;
            }
          out << std::setw(11) << text;
        }
      out << '\n';
    }
}

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

const BenchVariant& BenchReport::variant(RescaleStrategy r) const {
  for (const auto& v : variants)
    if (v.rescale == r) return v;
  throw ContractError("bench report has no " + to_string(r) + " run");
}

Moments BenchReport::wall_overhead(RescaleStrategy r) const {
  const auto& base = variant(RescaleStrategy::none).epoch_seconds;
  const auto& other = variant(r).epoch_seconds;
  std::vector<double> d;
  for (std::size_t i = 0; i < std::min(base.size(), other.size()); ++i) d.push_back(other[i] - base[i]);
  return moments(d);
}

Moments BenchReport::instrumented_overhead(RescaleStrategy r) const { return moments(variant(r).rescale_seconds); }

BenchReport run_bench(const RunConfig& base, int epochs) {
  if (epochs < 10) throw ConfigError("bench needs at least 10 timed epochs");
  BenchReport report;
  report.arch = base.arch;
  report.epochs = epochs;
  for (RescaleStrategy r : {RescaleStrategy::none, RescaleStrategy::smart, RescaleStrategy::dynamic}) {
    RunConfig cfg = base;
    cfg.rescale = r;
    cfg.max_epochs = epochs;
    cfg.patience = epochs;
    cfg.record_time = true;
    cfg.validate();
    const DatasetSplits data = load_data(cfg);
    Network<Real> net = build_network(cfg, data);

    BenchVariant v;
    v.rescale = r;
    RescaleClock clock;
    RescaleClockScope scope(clock);
    auto last = clock.elapsed;
    const TrainRecord record = train(net, data, cfg, [&](const EpochRecord& e) {
      v.epoch_seconds.push_back(e.epoch_seconds);
      v.rescale_seconds.push_back(std::chrono::duration<double>(clock.elapsed - last).count());
      last = clock.elapsed;
      return true;
    });
    v.best_epoch = record.best_epoch;
    report.variants.push_back(std::move(v));
  }
  return report;
}

void print_bench(std::ostream& out, const BenchReport& report) {
  auto pm = [](Moments m) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f +- %.4f s", m.mean, m.std);
    return std::string(buf);
  };
  out << "bench " << to_string(report.arch) << ", " << report.epochs << " epochs per variant\n";
  for (const auto& v : report.variants) {
    out << std::left << std::setw(8) << to_string(v.rescale) << " epoch " << pm(moments(v.epoch_seconds));
    if (v.rescale != RescaleStrategy::none)
      out << "  wall overhead " << pm(report.wall_overhead(v.rescale)) << "  rescale time "
          << pm(report.instrumented_overhead(v.rescale));
    out << "  best epoch " << v.best_epoch << '\n';
  }
  const double sr = report.instrumented_overhead(RescaleStrategy::smart).mean;
  const double dwr = report.instrumented_overhead(RescaleStrategy::dynamic).mean;
  const double sr_wall = report.wall_overhead(RescaleStrategy::smart).mean;
  const double dwr_wall = report.wall_overhead(RescaleStrategy::dynamic).mean;
  out << "SR/DWR overhead ratio: rescale time " << num(dwr > 0 ? sr / dwr : 0.0) << ", wall clock "
      << num(dwr_wall != 0 ? sr_wall / dwr_wall : 0.0) << '\n';
  const int without = report.variant(RescaleStrategy::none).best_epoch + 1;
  const int with = report.variant(RescaleStrategy::smart).best_epoch + 1;
  out << "epochs to best: without SR " << without << ", with SR " << with;
  if (without > 0) out << " (" << num(100.0 * (without - with) / without) << "% fewer with SR)";
  out << '\n';
}

}  // namespace supermask
