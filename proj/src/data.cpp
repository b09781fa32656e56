#include "supermask/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <random>

#include "supermask/errors.hpp"

namespace supermask {

DenseArray<Real> LabeledDataset::gather_images(std::span<const Index> rows) const {
  Shape shape = images.shape();
  shape[0] = static_cast<Index>(rows.size());
  DenseArray<Real> out(shape);
  const Index stride = images.size() / images.dim(0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.values().segment(static_cast<Index>(i) * stride, stride) = images.values().segment(rows[i] * stride, stride);
  return out;
}

std::vector<int> LabeledDataset::gather_labels(std::span<const Index> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RawCifarBatch parse_cifar_batch(std::span<const std::uint8_t> bytes, CifarVariant variant, const std::string& source) {
  const auto record = static_cast<std::size_t>(cifar_record_bytes(variant));
  if (bytes.empty() || bytes.size() % record != 0)
    throw FormatError(source + ": size " + std::to_string(bytes.size()) + " bytes is not a multiple of the " +
                      std::to_string(record) + "-byte record");
  const std::size_t n = bytes.size() / record;
  RawCifarBatch batch;
  batch.variant = variant;
  batch.labels.reserve(n);
  batch.pixels.reserve(n * kCifarPixels);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes.data() + r * record;
    if (variant == CifarVariant::cifar100) {
      if (rec[0] >= 20) throw FormatError(source + ": record " + std::to_string(r) + " has coarse label " + std::to_string(rec[0]));
      batch.coarse_labels.push_back(rec[0]);
      ++rec;
    }
    const int classes = variant == CifarVariant::cifar10 ? 10 : 100;
    if (rec[0] >= classes)
      throw FormatError(source + ": record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
    batch.labels.push_back(rec[0]);
    batch.pixels.insert(batch.pixels.end(), rec + 1, rec + 1 + kCifarPixels);
  }
  return batch;
}

std::vector<std::uint8_t> serialize_cifar_batch(const RawCifarBatch& batch) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(batch.records() * cifar_record_bytes(batch.variant)));
  for (Index r = 0; r < batch.records(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    if (batch.variant == CifarVariant::cifar100) out.push_back(batch.coarse_labels[i]);
    out.push_back(batch.labels[i]);
    auto first = batch.pixels.begin() + static_cast<std::ptrdiff_t>(i * kCifarPixels);
    out.insert(out.end(), first, first + kCifarPixels);
  }
  return out;
}

LabeledDataset to_dataset(const RawCifarBatch& batch, Split split) {
  LabeledDataset d;
  d.split = split;
  d.images = DenseArray<Real>({batch.records(), 3, 32, 32});
  for (std::size_t i = 0; i < batch.pixels.size(); ++i)
    d.images[static_cast<Index>(i)] = static_cast<Real>(batch.pixels[i]) / Real(255);
  d.labels.assign(batch.labels.begin(), batch.labels.end());
  return d;
}

namespace {

RawCifarBatch load_file(const std::filesystem::path& path, CifarVariant variant, Index expected_records) {
  const auto bytes = read_bytes(path);
  const auto expected = static_cast<std::size_t>(expected_records * cifar_record_bytes(variant));
  if (bytes.size() != expected)
    throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(bytes.size()));
  return parse_cifar_batch(bytes, variant, path.string());
}

void append(RawCifarBatch& into, const RawCifarBatch& from) {
  into.variant = from.variant;
  into.coarse_labels.insert(into.coarse_labels.end(), from.coarse_labels.begin(), from.coarse_labels.end());
  into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
  into.pixels.insert(into.pixels.end(), from.pixels.begin(), from.pixels.end());
}

LabeledDataset slice(const LabeledDataset& d, Index begin, Index end, Split split) {
  std::vector<Index> rows(static_cast<std::size_t>(end - begin));
  for (Index i = begin; i < end; ++i) rows[static_cast<std::size_t>(i - begin)] = i;
  LabeledDataset out;
  out.images = d.gather_images(rows);
  out.labels = d.gather_labels(rows);
  out.split = split;
  return out;
}

DatasetSplits split_train_val(const RawCifarBatch& train, const RawCifarBatch& test, int n_classes) {
  const LabeledDataset full = to_dataset(train, Split::train);
  const Index n = full.size();
  if (n <= kCifarValidation) throw FormatError("training set too small for the validation split");
  DatasetSplits s;
  s.train = slice(full, 0, n - kCifarValidation, Split::train);
  s.val = slice(full, n - kCifarValidation, n, Split::val);
  s.test = to_dataset(test, Split::test);
  s.n_classes = n_classes;
  return s;
}

}  // namespace

DatasetSplits load_cifar10(const std::filesystem::path& dir) {
  RawCifarBatch train;
  for (int i = 1; i <= 5; ++i)
    append(train, load_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), CifarVariant::cifar10,
                            kCifarRecordsPerFile));
  const RawCifarBatch test = load_file(dir / "test_batch.bin", CifarVariant::cifar10, kCifarRecordsPerFile);
  return split_train_val(train, test, 10);
}

DatasetSplits load_cifar100(const std::filesystem::path& dir) {
  const RawCifarBatch train = load_file(dir / "train.bin", CifarVariant::cifar100, 5 * kCifarRecordsPerFile);
  const RawCifarBatch test = load_file(dir / "test.bin", CifarVariant::cifar100, kCifarRecordsPerFile);
  return split_train_val(train, test, 100);
}

void crop_and_flip(const Real* src, Real* dst, Index channels, Index height, Index width, Index pad,
                   Index offset_y, Index offset_x, bool flip) {
  // dst(y, x) = padded(y + offset_y, x' + offset_x) with x' mirrored when flipping
  for (Index c = 0; c < channels; ++c)
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) {
        const Index sx = (flip ? width - 1 - x : x) + offset_x - pad;
        const Index sy = y + offset_y - pad;
        const bool inside = sy >= 0 && sy < height && sx >= 0 && sx < width;
        dst[(c * height + y) * width + x] = inside ? src[(c * height + sy) * width + sx] : Real(0);
      }
}

DenseArray<Real> augment(const DenseArray<Real>& batch, Rng& rng, Index pad) {
  if (batch.rank() != 4) throw DimensionError("augment expects NxCxHxW, got " + shape_string(batch.shape()));
  if (pad < 0) throw ConfigError("augmentation padding must be non-negative");
  const Index n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const Index plane = c * h * w;
  DenseArray<Real> out(batch.shape());
  std::uniform_int_distribution<Index> offset(0, 2 * pad);
  for (Index i = 0; i < n; ++i) {
    const Index oy = offset(rng);
    const Index ox = offset(rng);
    const bool flip = (rng() & 1U) != 0;
    crop_and_flip(batch.data() + i * plane, out.data() + i * plane, c, h, w, pad, oy, ox, flip);
  }
  return out;
}

namespace {

LabeledDataset blobs(Index n, Rng& rng, Split split) {
  LabeledDataset d;
  d.split = split;
  d.images = DenseArray<Real>({n, 2});
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double centre = label == 0 ? 1.5 : -1.5;
    d.images[2 * i] = static_cast<Real>(centre + noise(rng));
    d.images[2 * i + 1] = static_cast<Real>(centre + noise(rng));
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace

DatasetSplits make_synthetic_task(Index n, std::uint64_t seed) {
  if (n < 4) throw ConfigError("synthetic task needs at least 4 examples");
  Rng rng = make_stream(seed, "synthetic-blobs");
  DatasetSplits s;
  s.train = blobs(n, rng, Split::train);
  s.val = blobs(n / 4, rng, Split::val);
  s.test = blobs(n / 4, rng, Split::test);
  s.n_classes = 2;
  return s;
}

DatasetSplits make_synthetic_images(Index n, std::uint64_t seed, int n_classes, Shape example_shape) {
  if (n < 4 || n_classes < 2) throw ConfigError("synthetic images need n >= 4 and at least two classes");
  Rng rng = make_stream(seed, "synthetic-images");
  const Index pixels = shape_size(example_shape);
  std::uniform_real_distribution<double> uni(0.2, 0.8);
  std::vector<std::vector<double>> prototypes(static_cast<std::size_t>(n_classes));
  for (auto& p : prototypes) {
    p.resize(static_cast<std::size_t>(pixels));
    for (auto& v : p) v = uni(rng);
  }
  std::normal_distribution<double> noise(0.0, 0.15);
  auto make = [&](Index count, Split split) {
    LabeledDataset d;
    d.split = split;
    Shape shape{count};
    shape.insert(shape.end(), example_shape.begin(), example_shape.end());
    d.images = DenseArray<Real>(shape);
    for (Index i = 0; i < count; ++i) {
      const int label = static_cast<int>(i % n_classes);
      const auto& proto = prototypes[static_cast<std::size_t>(label)];
      for (Index k = 0; k < pixels; ++k)
        d.images[i * pixels + k] =
            static_cast<Real>(std::clamp(proto[static_cast<std::size_t>(k)] + noise(rng), 0.0, 1.0));
      d.labels.push_back(label);
    }
    return d;
  };
  DatasetSplits s;
  s.train = make(n, Split::train);
  s.val = make(std::max<Index>(n / 4, 1), Split::val);
  s.test = make(std::max<Index>(n / 4, 1), Split::test);
  s.n_classes = n_classes;
  return s;
}

std::filesystem::path default_data_root() {
  if (const char* env = std::getenv("SUPERMASK_DATA_DIR"); env && *env) return env;
  return "data";
}

}  // namespace supermask
