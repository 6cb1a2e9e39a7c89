#include "lnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "lnn/atomic_file.hpp"
#include "lnn/error.hpp"
#include "lnn/rng.hpp"

namespace lnn {

Tensor Dataset::image(std::size_t index) const {
  const Shape s = image_shape();
  const std::size_t n = shape_size(s);
  const auto begin = images.values().begin() + static_cast<std::ptrdiff_t>(index * n);
  return Tensor(s, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n)));
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
  Dataset out;
  const Shape s = image_shape();
  const std::size_t n = shape_size(s);
  std::vector<double> data;
  data.reserve(indices.size() * n);
  for (std::size_t i : indices) {
    if (i >= size()) throw ParameterError("dataset index out of range");
    const auto begin = images.values().begin() + static_cast<std::ptrdiff_t>(i * n);
    data.insert(data.end(), begin, begin + static_cast<std::ptrdiff_t>(n));
    out.labels.push_back(labels[i]);
  }
  out.images = Tensor({indices.size(), s[0], s[1], s[2]}, std::move(data));
  out.class_names = class_names;
  out.split = split;
  out.provenance = provenance;
  return out;
}

CifarRecords load_cifar10_records(const std::vector<std::string>& batch_files) {
  CifarRecords r;
  for (const std::string& path : batch_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CIFAR-10 batch file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    if (bytes.size() % kCifarRecordBytes != 0) {
      throw FormatError("'" + path + "' has " + std::to_string(bytes.size()) +
                        " bytes; expected a multiple of " + std::to_string(kCifarRecordBytes));
    }
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
      if (rec[0] > 9) {
        throw FormatError("corrupt record " + std::to_string(i) + " in '" + path + "': label byte " +
                          std::to_string(rec[0]) + " > 9");
      }
      r.labels.push_back(rec[0]);
      r.pixels.insert(r.pixels.end(), rec + 1, rec + kCifarRecordBytes);
    }
    r.files.push_back(path);
  }
  return r;
}

namespace {

Dataset materialize(const CifarRecords& r, const std::vector<std::size_t>& indices,
                    const std::vector<std::size_t>& classes, const std::string& split) {
  Dataset ds;
  std::vector<double> data;
  data.reserve(indices.size() * kCifarPixels);
  std::vector<std::size_t> remap(10, 0);
  for (std::size_t c = 0; c < classes.size(); ++c) remap[classes[c]] = c;
  for (std::size_t i : indices) {
    const std::uint8_t* px = r.pixels.data() + i * kCifarPixels;
    for (std::size_t k = 0; k < kCifarPixels; ++k) data.push_back(px[k] / 255.0);
    ds.labels.push_back(remap[r.labels[i]]);
  }
  ds.images = Tensor({indices.size(), 3, kCifarSide, kCifarSide}, std::move(data));
  for (std::size_t c : classes) ds.class_names.emplace_back(kCifarClassNames[c]);
  ds.split = split;
  ds.provenance = r.files;
  return ds;
}

std::vector<std::size_t> all_classes() { return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}; }

// Per class: Fisher-Yates prefix of `count` over that class's indices.
std::vector<std::vector<std::size_t>> draw_per_class(const std::vector<std::size_t>& labels,
                                                     const std::vector<std::size_t>& classes,
                                                     const std::vector<std::string>& names,
                                                     std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t c : classes) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) pool.push_back(i);
    }
    if (pool.size() < count) {
      const std::string name = c < names.size() ? names[c] : std::to_string(c);
      throw ParameterError("class '" + name + "' has " + std::to_string(pool.size()) +
                           " samples; " + std::to_string(count) + " requested");
    }
    std::vector<std::size_t> picked;
    for (std::size_t k : rng.sample_without_replacement(pool.size(), count)) picked.push_back(pool[k]);
    out.push_back(std::move(picked));
  }
  return out;
}

void check_classes(const std::vector<std::size_t>& classes, std::size_t n_classes) {
  if (classes.empty()) throw ParameterError("no classes requested");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= n_classes) throw ParameterError("class index " + std::to_string(classes[i]) + " out of range");
    for (std::size_t j = 0; j < i; ++j) {
      if (classes[j] == classes[i]) throw ParameterError("class " + std::to_string(classes[i]) + " requested twice");
    }
  }
}

std::vector<std::size_t> flatten_sorted(const std::vector<std::vector<std::size_t>>& groups,
                                        std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin() + static_cast<std::ptrdiff_t>(begin),
                                          g.begin() + static_cast<std::ptrdiff_t>(end));
  std::sort(out.begin(), out.end());
  return out;
}

std::string subset_note(std::size_t per_class, std::size_t factor, std::uint64_t seed) {
  return "subset per_class=" + std::to_string(per_class) + " downscale=" + std::to_string(factor) +
         " seed=" + std::to_string(seed);
}

Dataset finish_subset(Dataset ds, std::size_t factor, const std::string& note) {
  if (factor != 1) ds.images = downscale_average(ds.images, factor);
  ds.provenance.push_back(note);
  return ds;
}

}  // namespace

Dataset to_dataset(const CifarRecords& records, const std::string& split) {
  std::vector<std::size_t> all(records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return materialize(records, all, all_classes(), split);
}

Dataset load_cifar10(const std::vector<std::string>& batch_files, const std::string& split) {
  return to_dataset(load_cifar10_records(batch_files), split);
}

void write_cifar10(const Dataset& ds, const std::string& path) {
  const Shape s = ds.image_shape();
  if (s != Shape{3, kCifarSide, kCifarSide}) {
    throw DimensionError("CIFAR-10 records must be 3x32x32, dataset holds " + shape_to_string(s));
  }
  std::string bytes;
  bytes.reserve(ds.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] > 9) throw ParameterError("label " + std::to_string(ds.labels[i]) + " does not fit CIFAR-10");
    bytes.push_back(static_cast<char>(ds.labels[i]));
    for (std::size_t k = 0; k < kCifarPixels; ++k) {
      const double v = std::clamp(ds.images[i * kCifarPixels + k], 0.0, 1.0);
      bytes.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
    }
  }
  write_file_atomic(path, bytes);
}

Tensor downscale_average(const Tensor& images, std::size_t factor) {
  if (images.rank() != 4) throw DimensionError("downscale expects [n,C,H,W]");
  if (factor == 0) throw ParameterError("downscale factor must be positive");
  const std::size_t n = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  if (H % factor || W % factor) {
    throw DimensionError("image " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by downscale factor " + std::to_string(factor));
  }
  const std::size_t h = H / factor, w = W / factor;
  Tensor out({n, C, h, w});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double sum = 0.0;
          for (std::size_t dy = 0; dy < factor; ++dy) {
            for (std::size_t dx = 0; dx < factor; ++dx) sum += images(i, c, y * factor + dy, x * factor + dx);
          }
          out(i, c, y, x) = sum * inv;
        }
      }
    }
  }
  return out;
}

Dataset subset_and_downscale(const Dataset& ds, const std::vector<std::size_t>& classes,
                             std::size_t per_class, std::size_t scale_factor, std::uint64_t seed) {
  check_classes(classes, ds.n_classes());
  const auto groups = draw_per_class(ds.labels, classes, ds.class_names, per_class, seed);
  Dataset out = ds.select(flatten_sorted(groups, 0, per_class));
  std::vector<std::size_t> remap(ds.n_classes(), 0);
  for (std::size_t c = 0; c < classes.size(); ++c) remap[classes[c]] = c;
  for (std::size_t& label : out.labels) label = remap[label];
  out.class_names.clear();
  for (std::size_t c : classes) out.class_names.push_back(ds.class_names[c]);
  return finish_subset(std::move(out), scale_factor, subset_note(per_class, scale_factor, seed));
}

Dataset subset_and_downscale(const CifarRecords& records, const std::vector<std::size_t>& classes,
                             std::size_t per_class, std::size_t scale_factor, std::uint64_t seed) {
  return subset_split(records, classes, per_class, 0, scale_factor, seed).first;
}

DatasetPair subset_split(const CifarRecords& records, const std::vector<std::size_t>& classes,
                         std::size_t first, std::size_t second, std::size_t scale_factor,
                         std::uint64_t seed) {
  check_classes(classes, kCifarClassNames.size());
  const std::vector<std::size_t> labels(records.labels.begin(), records.labels.end());
  const std::vector<std::string> names(kCifarClassNames.begin(), kCifarClassNames.end());
  const auto groups = draw_per_class(labels, classes, names, first + second, seed);
  const std::string note = subset_note(first, scale_factor, seed);
  DatasetPair pair{
      finish_subset(materialize(records, flatten_sorted(groups, 0, first), classes, "train"), scale_factor, note),
      finish_subset(materialize(records, flatten_sorted(groups, first, first + second), classes, "val"),
                    scale_factor, subset_note(second, scale_factor, seed))};
  return pair;
}

SequenceDataset synth_sequences(std::uint64_t seed, std::size_t n, std::size_t length,
                                const SynthConfig& config) {
  if (n == 0 || length == 0) throw ParameterError("synth_sequences needs n >= 1 and length >= 1");
  Rng rng(seed);
  SequenceDataset ds;
  const std::size_t mid = length / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<std::vector<double>> seq(length, std::vector<double>(1));
    for (std::size_t t = 0; t < length; ++t) {
      const double td = static_cast<double>(t);
      double angle = config.omega * td + phase;
      if (label == 1 && t >= mid) {
        const double tm = static_cast<double>(mid);
        angle = config.omega * tm + phase + 2.0 * config.omega * (td - tm);
      }
      const double noise = config.noise > 0.0 ? config.noise * rng.normal() : 0.0;
      seq[t][0] = config.amplitude * std::sin(angle) + noise;
    }
    ds.sequences.push_back(std::move(seq));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset synth_color_images(std::uint64_t seed, std::size_t per_class, std::size_t n_classes,
                           std::size_t side, double signal) {
  if (per_class == 0 || n_classes == 0 || n_classes > kCifarClassNames.size() || side < 2) {
    throw ParameterError("synth_color_images needs per_class >= 1, 1..10 classes and side >= 2");
  }
  Rng rng(seed);
  const std::size_t n = per_class * n_classes;
  const std::size_t half = side / 2;
  Dataset ds;
  ds.images = Tensor({n, 3, side, side});
  ds.split = "synthetic";
  for (std::size_t c = 0; c < n_classes; ++c) ds.class_names.emplace_back(kCifarClassNames[c]);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % n_classes;
    const std::size_t channel = label % 3;
    const std::size_t region = (label / 3) % 4;
    ds.labels.push_back(label);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          const bool inside = region == 0 || (region == 1 && y < half) || (region == 2 && x < half) ||
                              (region == 3 && y >= side / 4 && y < side - side / 4 && x >= side / 4 &&
                               x < side - side / 4);
          double v = 0.4 * rng.uniform();
          if (ch == channel && inside) v += signal;
          ds.images(i, ch, y, x) = std::min(v, 1.0);
        }
      }
    }
  }
  return ds;
}

}  // namespace lnn
