#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lnn/tensor.hpp"

namespace lnn {

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;

inline constexpr std::array<const char*, 10> kCifarClassNames = {
    "airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"};

// Labeled images [n, 3, H, W] with pixels in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  std::string split;
  std::vector<std::string> provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t n_classes() const { return class_names.size(); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  Tensor image(std::size_t index) const;
  // Copies the listed samples, in the listed order.
  Dataset select(const std::vector<std::size_t>& indices) const;
};

// Raw CIFAR-10 binary records: one label byte followed by 3072 pixel bytes
// (R plane, G plane, B plane, each 32x32 row-major). Kept as bytes so large
// batches can be subset before being widened to doubles.
struct CifarRecords {
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;  // labels.size() * 3072
  std::vector<std::string> files;

  std::size_t size() const { return labels.size(); }
};

CifarRecords load_cifar10_records(const std::vector<std::string>& batch_files);
Dataset to_dataset(const CifarRecords& records, const std::string& split);
Dataset load_cifar10(const std::vector<std::string>& batch_files, const std::string& split = "train");

// Writes a CIFAR-10 binary batch; pixels are rounded to the nearest byte.
void write_cifar10(const Dataset& dataset, const std::string& path);

// Seeded per-class sampling without replacement (Fisher-Yates prefix over
// each class's indices in file order), optional average-pool downscale, and
// dense relabeling to [0, classes.size()). Output keeps file order.
Dataset subset_and_downscale(const Dataset& ds, const std::vector<std::size_t>& classes,
                             std::size_t per_class, std::size_t scale_factor, std::uint64_t seed);
Dataset subset_and_downscale(const CifarRecords& records, const std::vector<std::size_t>& classes,
                             std::size_t per_class, std::size_t scale_factor, std::uint64_t seed);

// Draws first + second samples per class in one pass; the first `first`
// draws of each class go to .first, the rest to .second (disjoint).
struct DatasetPair {
  Dataset first;
  Dataset second;
};
DatasetPair subset_split(const CifarRecords& records, const std::vector<std::size_t>& classes,
                         std::size_t first, std::size_t second, std::size_t scale_factor,
                         std::uint64_t seed);

// Average-pools each image by an integer factor.
Tensor downscale_average(const Tensor& images, std::size_t factor);

// Stand-in images in the same value range as CIFAR-10: uniform noise in
// [0, 0.4] plus `signal` on channel label % 3, over a label-dependent
// region (whole image, top half, left half, center). Labels cycle through
// 0..n_classes-1, so every class has per_class images.
Dataset synth_color_images(std::uint64_t seed, std::size_t per_class, std::size_t n_classes,
                           std::size_t side = kCifarSide, double signal = 0.2);

// Two-class temporal task: class 0 is a noisy sine at omega; class 1 switches
// to 2*omega at the midpoint (phase-continuous).
struct SynthConfig {
  double omega = 0.3926990816987241;  // 2*pi/16 per sample
  double noise = 0.1;
  double amplitude = 1.0;
};

struct SequenceDataset {
  std::vector<std::vector<std::vector<double>>> sequences;  // [n][length][1]
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

SequenceDataset synth_sequences(std::uint64_t seed, std::size_t n, std::size_t length,
                                const SynthConfig& config = {});

}  // namespace lnn
