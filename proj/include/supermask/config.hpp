#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "supermask/network.hpp"

namespace supermask {

enum class DatasetKind { cifar10, cifar100, synthetic };
enum class ArchKind { conv2, conv4, conv6, mlp };
enum class EvalMode { threshold, averaging };
enum class MaskResample { per_batch, per_epoch };

/// Everything needed to reproduce one experiment. Keys in config files and
/// `--key=value` flags use the dashed names listed by RunConfig::keys().
struct RunConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  ArchKind arch = ArchKind::mlp;
  double mask_lr = 50.0;
  double scale_lr = 0.1;
  double momentum = 0.9;
  int max_epochs = 1000;
  int patience = 100;
  int batch_size = 128;
  double temperature = 1.0;
  RescaleStrategy rescale = RescaleStrategy::none;
  WeightScheme weights = WeightScheme::kaiming_normal;
  bool augment = false;
  EvalMode eval = EvalMode::threshold;
  int avg_samples = 10;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/latest";
  std::string data_dir;  // empty: default_data_root()
  DwrReading dwr_reading = DwrReading::keep;
  MaskResample mask_per = MaskResample::per_batch;
  bool mask_last_layer = true;

  double mask_init = 0.0;
  double sr_init = 0.0;  // <= 0: 1 / sigmoid(mask_init)
  bool biases = false;
  int augment_pad = 4;
  bool record_time = true;      // off writes 0 seconds so CSVs are byte-reproducible
  int synthetic_size = 1000;    // training examples of the synthetic tasks
  std::vector<Index> mlp_hidden = {16, 16};
  int width_divisor = 1;        // shrinks conv/FC widths of the conv family
  int input_size = 32;          // spatial side of synthetic image inputs
  std::vector<ArchKind> archs;  // architectures of an ablation grid; empty: {arch}

  static const std::vector<std::string>& keys();

  /// Sets one key from text; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  /// key=value lines in keys() order; parse(echo()) reproduces the config.
  std::string echo() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  LayerOptions layer_options() const;
  std::filesystem::path data_root() const;
};

std::string to_string(DatasetKind v);
std::string to_string(ArchKind v);
std::string to_string(RescaleStrategy v);
std::string to_string(WeightScheme v);
std::string to_string(EvalMode v);

}  // namespace supermask
