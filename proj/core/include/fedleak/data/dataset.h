#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedleak/nn/tensor.h"

namespace fedleak::data {

// Labelled images with pixel values in [0, 1].
class Dataset {
 public:
  // images has shape {N, channels, height, width}; throws ConfigError when
  // N == 0, a label is >= num_classes, a class has no example, or a pixel
  // leaves [0, 1].
  Dataset(nn::Tensor images, std::vector<std::size_t> labels, std::size_t num_classes);

  std::size_t size() const { return labels_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  // {channels, height, width}
  nn::Shape image_shape() const;
  std::size_t image_size() const;

  nn::Tensor image(std::size_t i) const;
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const nn::Tensor& images() const { return images_; }

  // Copies the listed examples; the class count is kept, so classes may be
  // absent from the result.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  Dataset() = default;

  nn::Tensor images_;
  std::vector<std::size_t> labels_;
  std::size_t num_classes_ = 0;
};

// Per-class oriented-bar templates plus seeded Gaussian pixel noise (sigma 0.1),
// clamped to [0, 1]. Examples are ordered class-major.
Dataset gen_synthetic(std::size_t classes, std::size_t per_class, std::size_t side,
                      std::size_t channels, std::uint64_t seed);

// The noise-free template of one class, shape {channels, side, side}.
nn::Tensor synthetic_template(std::size_t cls, std::size_t classes, std::size_t side,
                              std::size_t channels);

// IDX image (magic 0x00000803, or 0x00000804 for {N, C, H, W}) and label
// (magic 0x00000801) files, unsigned bytes, big-endian extents.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes, const std::string& images_name = "images",
                  const std::string& labels_name = "labels");

// Pixels are rounded to the nearest multiple of 1/255.
std::vector<std::uint8_t> encode_idx_images(const Dataset& dataset);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& dataset);
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

}  // namespace fedleak::data
