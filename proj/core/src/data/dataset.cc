#include "fedleak/data/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "fedleak/error.h"

namespace fedleak::data {

Dataset::Dataset(nn::Tensor images, std::vector<std::size_t> labels, std::size_t num_classes)
    : images_(std::move(images)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (images_.shape().size() != 4) {
    throw ConfigError("dataset images must be {N, channels, height, width}");
  }
  if (labels_.empty()) throw ConfigError("dataset must not be empty");
  if (images_.shape()[0] != labels_.size()) {
    throw ConfigError("dataset has " + std::to_string(images_.shape()[0]) + " images but " +
                      std::to_string(labels_.size()) + " labels");
  }
  if (num_classes_ < 2) throw ConfigError("dataset needs at least two classes");
  std::vector<bool> present(num_classes_, false);
  for (auto y : labels_) {
    if (y >= num_classes_) {
      throw ConfigError("label " + std::to_string(y) + " out of range for " +
                        std::to_string(num_classes_) + " classes");
    }
    present[y] = true;
  }
  for (std::size_t c = 0; c < num_classes_; ++c) {
    if (!present[c]) throw ConfigError("class " + std::to_string(c) + " has no examples");
  }
  for (double v : images_.values()) {
    if (v < 0.0 || v > 1.0) throw ConfigError("pixel values must lie in [0, 1]");
  }
}

nn::Shape Dataset::image_shape() const {
  const auto& s = images_.shape();
  return {s[1], s[2], s[3]};
}

std::size_t Dataset::image_size() const { return nn::shape_size(image_shape()); }

nn::Tensor Dataset::image(std::size_t i) const {
  if (i >= size()) throw ConfigError("image index out of range");
  const std::size_t n = image_size();
  auto all = images_.values();
  return nn::Tensor(image_shape(), std::vector<double>(all.begin() + i * n, all.begin() + (i + 1) * n));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ConfigError("subset must not be empty");
  const std::size_t n = image_size();
  std::vector<double> values;
  values.reserve(indices.size() * n);
  Dataset out;
  auto all = images_.values();
  for (auto i : indices) {
    if (i >= size()) throw ConfigError("subset index out of range");
    values.insert(values.end(), all.begin() + i * n, all.begin() + (i + 1) * n);
    out.labels_.push_back(labels_[i]);
  }
  const auto s = image_shape();
  out.images_ = nn::Tensor({indices.size(), s[0], s[1], s[2]}, std::move(values));
  out.num_classes_ = num_classes_;
  return out;
}

nn::Tensor synthetic_template(std::size_t cls, std::size_t classes, std::size_t side,
                              std::size_t channels) {
  const double theta = std::numbers::pi * static_cast<double>(cls) / static_cast<double>(classes);
  const double c = (static_cast<double>(side) - 1.0) / 2.0;
  const double half_width = static_cast<double>(side) / 8.0;
  const double dx = std::cos(theta);
  const double dy = std::sin(theta);
  nn::Tensor t({channels, side, side});
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double fg = 0.85 - 0.2 * static_cast<double>(ch) / static_cast<double>(channels);
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double d = std::abs(-dy * (static_cast<double>(x) - c) + dx * (static_cast<double>(y) - c));
        const double w = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
        t[(ch * side + y) * side + x] = 0.15 + (fg - 0.15) * w;
      }
    }
  }
  return t;
}

Dataset gen_synthetic(std::size_t classes, std::size_t per_class, std::size_t side,
                      std::size_t channels, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (per_class < 1) throw ConfigError("synthetic data needs at least 1 example per class");
  if (side < 4) throw ConfigError("synthetic image side must be at least 4");
  if (channels < 1) throw ConfigError("synthetic data needs at least 1 channel");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  const std::size_t n = channels * side * side;
  std::vector<double> values;
  values.reserve(classes * per_class * n);
  std::vector<std::size_t> labels;
  for (std::size_t cls = 0; cls < classes; ++cls) {
    const nn::Tensor tmpl = synthetic_template(cls, classes, side, channels);
    for (std::size_t k = 0; k < per_class; ++k) {
      for (double v : tmpl.values()) values.push_back(std::clamp(v + noise(rng), 0.0, 1.0));
      labels.push_back(cls);
    }
  }
  nn::Tensor images({classes * per_class, channels, side, side}, std::move(values));
  return Dataset(std::move(images), std::move(labels), classes);
}

namespace {

constexpr std::uint32_t kImageMagic3 = 0x00000803;
constexpr std::uint32_t kImageMagic4 = 0x00000804;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const std::string& name) {
  if (offset + 4 > bytes.size()) throw FormatError(name + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open file for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes, const std::string& images_name,
                  const std::string& labels_name) {
  const std::uint32_t image_magic = read_be32(image_bytes, 0, images_name);
  if (image_magic != kImageMagic3 && image_magic != kImageMagic4) {
    throw FormatError(images_name + ": bad magic number (expected 0x00000803)");
  }
  const std::uint32_t label_magic = read_be32(label_bytes, 0, labels_name);
  if (label_magic != kLabelMagic) {
    throw FormatError(labels_name + ": bad magic number (expected 0x00000801)");
  }
  const std::size_t dims = image_magic & 0xff;
  std::vector<std::size_t> extents;
  for (std::size_t d = 0; d < dims; ++d) {
    extents.push_back(read_be32(image_bytes, 4 + 4 * d, images_name));
    if (extents.back() == 0) throw FormatError(images_name + ": zero extent");
  }
  const std::size_t channels = dims == 4 ? extents[1] : 1;
  const std::size_t height = extents[dims - 2];
  const std::size_t width = extents[dims - 1];
  const std::size_t count = extents[0];
  const std::size_t header = 4 + 4 * dims;
  const std::size_t pixels = channels * height * width;
  if (image_bytes.size() != header + count * pixels) {
    throw FormatError(images_name + ": payload size " + std::to_string(image_bytes.size() - header) +
                      " does not match " + std::to_string(count * pixels) + " pixels");
  }
  const std::size_t label_count = read_be32(label_bytes, 4, labels_name);
  if (label_bytes.size() != 8 + label_count) {
    throw FormatError(labels_name + ": payload size does not match label count");
  }
  if (label_count != count) {
    throw FormatError(labels_name + ": holds " + std::to_string(label_count) + " labels but " +
                      images_name + " holds " + std::to_string(count) + " images");
  }
  std::vector<double> values(count * pixels);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = image_bytes[header + k] / 255.0;
  std::vector<std::size_t> labels(count);
  std::size_t max_label = 0;
  for (std::size_t k = 0; k < count; ++k) {
    labels[k] = label_bytes[8 + k];
    max_label = std::max(max_label, labels[k]);
  }
  nn::Tensor images({count, channels, height, width}, std::move(values));
  return Dataset(std::move(images), std::move(labels), std::max<std::size_t>(max_label + 1, 2));
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);
  return parse_idx(image_bytes, label_bytes, images_path.string(), labels_path.string());
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& dataset) {
  const auto s = dataset.image_shape();
  std::vector<std::uint8_t> out;
  const bool multi = s[0] != 1;
  put_be32(out, multi ? kImageMagic4 : kImageMagic3);
  put_be32(out, static_cast<std::uint32_t>(dataset.size()));
  if (multi) put_be32(out, static_cast<std::uint32_t>(s[0]));
  put_be32(out, static_cast<std::uint32_t>(s[1]));
  put_be32(out, static_cast<std::uint32_t>(s[2]));
  for (double v : dataset.images().values()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& dataset) {
  if (dataset.num_classes() > 256) throw ConfigError("IDX labels hold at most 256 classes");
  std::vector<std::uint8_t> out;
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(dataset.size()));
  for (auto y : dataset.labels()) out.push_back(static_cast<std::uint8_t>(y));
  return out;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  write_file(images_path, encode_idx_images(dataset));
  write_file(labels_path, encode_idx_labels(dataset));
}

}  // namespace fedleak::data
