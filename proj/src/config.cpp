#include "supermask/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "supermask/data.hpp"
#include "supermask/errors.hpp"

namespace supermask {

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<DatasetKind> kDatasets[] = {
    {DatasetKind::cifar10, "cifar10"}, {DatasetKind::cifar100, "cifar100"}, {DatasetKind::synthetic, "synthetic"}};
constexpr EnumName<ArchKind> kArchs[] = {
    {ArchKind::conv2, "conv2"}, {ArchKind::conv4, "conv4"}, {ArchKind::conv6, "conv6"}, {ArchKind::mlp, "mlp"}};
constexpr EnumName<RescaleStrategy> kRescale[] = {
    {RescaleStrategy::none, "none"}, {RescaleStrategy::smart, "smart"}, {RescaleStrategy::dynamic, "dynamic"}};
constexpr EnumName<WeightScheme> kWeights[] = {{WeightScheme::kaiming_normal, "kaiming"},
                                               {WeightScheme::kaiming_scaled, "kaiming-scaled"},
                                               {WeightScheme::signed_constant_of_kaiming, "signed-constant"}};
constexpr EnumName<EvalMode> kEval[] = {{EvalMode::threshold, "threshold"}, {EvalMode::averaging, "averaging"}};
constexpr EnumName<DwrReading> kReading[] = {{DwrReading::keep, "keep"}, {DwrReading::prune, "prune"}};
constexpr EnumName<MaskResample> kMaskPer[] = {{MaskResample::per_batch, "batch"}, {MaskResample::per_epoch, "epoch"}};

template <typename E, std::size_t N>
E parse_enum(const EnumName<E> (&table)[N], const std::string& key, const std::string& value) {
  for (const auto& e : table)
    if (value == e.name) return e.value;
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ",") + e.name;
  throw ConfigError("--" + key + ": '" + value + "' is not one of {" + allowed + "}");
}

template <typename E, std::size_t N>
std::string enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("--" + key + ": '" + value + "' is not a valid number");
  return out;
}

bool parse_switch(const std::string& key, const std::string& value) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw ConfigError("--" + key + ": expected on or off, got '" + value + "'");
}

std::string switch_name(bool v) { return v ? "on" : "off"; }

std::string format_double(double v) {
  // Shortest text that round-trips.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(DatasetKind v) { return enum_name(kDatasets, v); }
std::string to_string(ArchKind v) { return enum_name(kArchs, v); }
std::string to_string(RescaleStrategy v) { return enum_name(kRescale, v); }
std::string to_string(WeightScheme v) { return enum_name(kWeights, v); }
std::string to_string(EvalMode v) { return enum_name(kEval, v); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "dataset",    "arch",          "mask-lr",        "scale-lr",      "momentum",    "max-epochs",
      "patience",   "batch-size",    "temperature",    "rescale",       "weights",     "augment",
      "eval",       "avg-samples",   "seed",           "out-dir",       "data-dir",    "dwr-reading",
      "mask-per",   "mask-last-layer", "mask-init",    "sr-init",       "biases",      "augment-pad",
      "record-time", "synthetic-size", "mlp-hidden",   "width-divisor", "input-size", "archs"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") dataset = parse_enum(kDatasets, key, value);
  else if (key == "arch") arch = parse_enum(kArchs, key, value);
  else if (key == "mask-lr") mask_lr = parse_number<double>(key, value);
  else if (key == "scale-lr") scale_lr = parse_number<double>(key, value);
  else if (key == "momentum") momentum = parse_number<double>(key, value);
  else if (key == "max-epochs") max_epochs = parse_number<int>(key, value);
  else if (key == "patience") patience = parse_number<int>(key, value);
  else if (key == "batch-size") batch_size = parse_number<int>(key, value);
  else if (key == "temperature") temperature = parse_number<double>(key, value);
  else if (key == "rescale") rescale = parse_enum(kRescale, key, value);
  else if (key == "weights") weights = parse_enum(kWeights, key, value);
  else if (key == "augment") augment = parse_switch(key, value);
  else if (key == "eval") eval = parse_enum(kEval, key, value);
  else if (key == "avg-samples") avg_samples = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "out-dir") out_dir = value;
  else if (key == "data-dir") data_dir = value;
  else if (key == "dwr-reading") dwr_reading = parse_enum(kReading, key, value);
  else if (key == "mask-per") mask_per = parse_enum(kMaskPer, key, value);
  else if (key == "mask-last-layer") mask_last_layer = parse_switch(key, value);
  else if (key == "mask-init") mask_init = parse_number<double>(key, value);
  else if (key == "sr-init") sr_init = parse_number<double>(key, value);
  else if (key == "biases") biases = parse_switch(key, value);
  else if (key == "augment-pad") augment_pad = parse_number<int>(key, value);
  else if (key == "record-time") record_time = parse_switch(key, value);
  else if (key == "synthetic-size") synthetic_size = parse_number<int>(key, value);
  else if (key == "width-divisor") width_divisor = parse_number<int>(key, value);
  else if (key == "input-size") input_size = parse_number<int>(key, value);
  else if (key == "archs") {
    archs.clear();
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');)
      if (!trim(item).empty()) archs.push_back(parse_enum(kArchs, key, trim(item)));
  } else if (key == "mlp-hidden") {
    mlp_hidden.clear();
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');)
      if (!trim(item).empty()) mlp_hidden.push_back(parse_number<Index>(key, trim(item)));
  } else
    throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "dataset") return to_string(dataset);
  if (key == "arch") return to_string(arch);
  if (key == "mask-lr") return format_double(mask_lr);
  if (key == "scale-lr") return format_double(scale_lr);
  if (key == "momentum") return format_double(momentum);
  if (key == "max-epochs") return std::to_string(max_epochs);
  if (key == "patience") return std::to_string(patience);
  if (key == "batch-size") return std::to_string(batch_size);
  if (key == "temperature") return format_double(temperature);
  if (key == "rescale") return to_string(rescale);
  if (key == "weights") return to_string(weights);
  if (key == "augment") return switch_name(augment);
  if (key == "eval") return to_string(eval);
  if (key == "avg-samples") return std::to_string(avg_samples);
  if (key == "seed") return std::to_string(seed);
  if (key == "out-dir") return out_dir;
  if (key == "data-dir") return data_dir;
  if (key == "dwr-reading") return enum_name(kReading, dwr_reading);
  if (key == "mask-per") return enum_name(kMaskPer, mask_per);
  if (key == "mask-last-layer") return switch_name(mask_last_layer);
  if (key == "mask-init") return format_double(mask_init);
  if (key == "sr-init") return format_double(sr_init);
  if (key == "biases") return switch_name(biases);
  if (key == "augment-pad") return std::to_string(augment_pad);
  if (key == "record-time") return switch_name(record_time);
  if (key == "synthetic-size") return std::to_string(synthetic_size);
  if (key == "width-divisor") return std::to_string(width_divisor);
  if (key == "input-size") return std::to_string(input_size);
  if (key == "archs") {
    std::string s;
    for (ArchKind a : archs) s += (s.empty() ? "" : ",") + to_string(a);
    return s;
  }
  if (key == "mlp-hidden") {
    std::string s;
    for (Index h : mlp_hidden) s += (s.empty() ? "" : ",") + std::to_string(h);
    return s;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (!(mask_lr >= 0) || !(scale_lr >= 0)) throw ConfigError("learning rates must be non-negative");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (max_epochs <= 0) throw ConfigError("max-epochs must be positive");
  if (patience < 0 || patience > max_epochs) throw ConfigError("patience must lie in [0, max-epochs]");
  if (batch_size <= 0) throw ConfigError("batch-size must be positive");
  if (!(temperature > 0)) throw ConfigError("temperature must be positive");
  if (avg_samples <= 0) throw ConfigError("avg-samples must be positive");
  if (augment_pad < 0) throw ConfigError("augment-pad must be non-negative");
  if (synthetic_size < 4) throw ConfigError("synthetic-size must be at least 4");
  if (width_divisor <= 0) throw ConfigError("width-divisor must be positive");
  if (input_size <= 0 || input_size % 8 != 0) throw ConfigError("input-size must be a positive multiple of 8");
  for (Index h : mlp_hidden)
    if (h <= 0) throw ConfigError("mlp-hidden sizes must be positive");
  if (augment && arch == ArchKind::mlp && dataset == DatasetKind::synthetic)
    throw ConfigError("augmentation needs image inputs; the synthetic MLP task is two-dimensional");
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& k : keys()) out += k + "=" + get(k) + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

LayerOptions RunConfig::layer_options() const {
  LayerOptions o;
  o.scheme = weights;
  o.rescale = rescale;
  o.dwr_reading = dwr_reading;
  o.mask_init = mask_init;
  if (sr_init > 0) o.smart_init = sr_init;
  o.biases = biases;
  o.mask_last_layer = mask_last_layer;
  return o;
}

std::filesystem::path RunConfig::data_root() const {
  return data_dir.empty() ? default_data_root() : std::filesystem::path(data_dir);
}

}  // namespace supermask
