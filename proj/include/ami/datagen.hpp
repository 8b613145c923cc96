#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ami/rng.hpp"
#include "ami/serial.hpp"
#include "ami/tensor.hpp"

namespace ami {

// Small binary pixel stamp (one variant of one attribute).
struct Glyph {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> mask;  // row-major, 0/1

  bool on(std::size_t r, std::size_t c) const { return mask[r * cols + c] != 0; }
};

// Named image region plus the glyph variants that can appear in it.
struct AttributeSpec {
  std::string name;
  std::size_t row = 0, col = 0, height = 0, width = 0;
  std::vector<Glyph> variants;
};

struct DatagenConfig {
  std::size_t classes = 8;
  std::size_t per_class = 200;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise_sigma = 0.1;   // background ~ uniform[0, noise_sigma]
  std::size_t jitter = 1;     // max glyph offset from region center, per axis
  std::uint64_t seed = 42;
  std::vector<AttributeSpec> attributes;  // empty -> default_attributes()
};

// Per-image glyph placement offsets, one {dr, dc} per attribute.
using JitterRecord = std::vector<std::array<int, 2>>;

struct Dataset {
  std::size_t num_classes = 0;
  std::size_t height = 0, width = 0;
  std::vector<Tensor> images;  // each {1, H, W}, values in [0, 1]
  std::vector<std::uint32_t> labels;
  std::vector<JitterRecord> jitter;
  std::vector<AttributeSpec> attributes;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  std::size_t jitter_radius = 0;

  std::size_t size() const { return images.size(); }

  // Mixed-radix decomposition of a class id into one variant index per
  // attribute (attribute order = attributes vector order).
  std::vector<std::size_t> variant_combo(std::size_t class_id) const;

  std::size_t attribute_index(const std::string& name) const;
};

// Face-like defaults: three 6x6 regions holding 4x4 glyphs, two variants
// each. Chosen so a 1-pixel jitter still keeps the stamp inside its region.
std::vector<AttributeSpec> default_attributes();

Dataset generate(const DatagenConfig& config);

// Repaints the attribute's region: zeros plus the donor glyph placed at the
// given jitter offset. Pixels outside the region are untouched.
Tensor substitute_region(const Tensor& image, const AttributeSpec& attr,
                         std::size_t donor_variant, std::array<int, 2> offset);

// Dataset-aware overload using the image's recorded placement.
Tensor substitute_region(const Dataset& ds, std::size_t image_index,
                         const std::string& attribute, std::size_t donor_variant);

// Replaces every pixel outside the attribute's region with fresh
// uniform[0, amplitude] noise, row-major draw order.
Tensor randomize_background(const Tensor& image, const AttributeSpec& attr,
                            double amplitude, Rng& rng);

// Stratified head/tail split per class, preserving order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction);

// AMLD container: magic "AMLD", u32 version, u32 K, u32 count, u32 H, u32 W,
// count*H*W little-endian f64 pixels, count u32 labels, then a u64
// length-prefixed JSON trailer (attribute specs, seed, jitter records, and
// any extra metadata the writer stashes). Bit-exact across platforms.
Bytes dataset_to_bytes(const Dataset& ds, const std::string& extra_json = "");
Dataset dataset_from_bytes(const Bytes& bytes, std::string* extra_json = nullptr);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace ami
