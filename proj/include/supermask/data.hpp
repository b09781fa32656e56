#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "supermask/dense_array.hpp"
#include "supermask/random.hpp"

namespace supermask {

using Real = float;

enum class Split { train, val, test };

struct LabeledDataset {
  DenseArray<Real> images;  // N x example shape
  std::vector<int> labels;
  Split split = Split::train;

  Index size() const { return static_cast<Index>(labels.size()); }
  Shape example_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  DenseArray<Real> gather_images(std::span<const Index> rows) const;
  std::vector<int> gather_labels(std::span<const Index> rows) const;
};

struct DatasetSplits {
  LabeledDataset train, val, test;
  int n_classes = 0;
};

enum class CifarVariant { cifar10, cifar100 };

constexpr Index kCifarPixels = 3 * 32 * 32;
constexpr Index kCifarRecordsPerFile = 10000;

inline Index cifar_record_bytes(CifarVariant v) {
  return v == CifarVariant::cifar10 ? 1 + kCifarPixels : 2 + kCifarPixels;
}

/// One binary batch file before normalization. CIFAR-100 records carry a
/// coarse label byte ahead of the fine one.
struct RawCifarBatch {
  CifarVariant variant = CifarVariant::cifar10;
  std::vector<std::uint8_t> coarse_labels;  // empty for CIFAR-10
  std::vector<std::uint8_t> labels;         // CIFAR-10 label or CIFAR-100 fine label
  std::vector<std::uint8_t> pixels;         // records x 3072, R, G, B planes row-major

  Index records() const { return static_cast<Index>(labels.size()); }
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
RawCifarBatch parse_cifar_batch(std::span<const std::uint8_t> bytes, CifarVariant variant,
                                const std::string& source = "<memory>");
std::vector<std::uint8_t> serialize_cifar_batch(const RawCifarBatch& batch);
/// Pixels scaled from [0, 255] to [0, 1].
LabeledDataset to_dataset(const RawCifarBatch& batch, Split split);

/// Five training batches + test batch; the last 5000 training images (file order) form val.
DatasetSplits load_cifar10(const std::filesystem::path& dir);
/// train.bin + test.bin with fine labels; same 45000/5000/10000 split.
DatasetSplits load_cifar100(const std::filesystem::path& dir);

constexpr Index kCifarValidation = 5000;

/// Zero-pads by `pad`, takes a random crop of the original size, then flips
/// horizontally with probability 0.5. Expects N x C x H x W.
DenseArray<Real> augment(const DenseArray<Real>& batch, Rng& rng, Index pad = 4);

/// Deterministic crop/flip of one image, the primitive behind augment().
void crop_and_flip(const Real* src, Real* dst, Index channels, Index height, Index width, Index pad,
                   Index offset_y, Index offset_x, bool flip);

/// Two Gaussian blobs at +-(1.5, 1.5), unit variance. Sizes: n train, n/4 val, n/4 test.
DatasetSplits make_synthetic_task(Index n, std::uint64_t seed);

/// Image-shaped blobs: one random prototype per class plus pixel noise, clipped to [0, 1].
DatasetSplits make_synthetic_images(Index n, std::uint64_t seed, int n_classes = 10,
                                    Shape example_shape = {3, 32, 32});

/// Root used when no data directory is given: $SUPERMASK_DATA_DIR, else "data".
std::filesystem::path default_data_root();

}  // namespace supermask
