#include "ami/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "ami/errors.hpp"
#include "json.hpp"

namespace ami {

namespace {

using nlohmann::json;

Glyph glyph4(const char* pattern) {
  // 16-char string of '.' and '#', row-major 4x4.
  Glyph g{4, 4, std::vector<std::uint8_t>(16, 0)};
  for (std::size_t i = 0; i < 16; ++i) g.mask[i] = pattern[i] == '#' ? 1 : 0;
  return g;
}

void validate_config(const DatagenConfig& cfg, const std::vector<AttributeSpec>& attrs) {
  if (cfg.classes == 0 || cfg.per_class == 0) {
    throw ConfigError("classes and per_class must be positive");
  }
  std::size_t combos = 1;
  for (const auto& a : attrs) {
    if (a.variants.size() < 2) {
      throw ConfigError("attribute \"" + a.name + "\" needs at least 2 variants");
    }
    combos *= a.variants.size();
    if (a.row + a.height > cfg.height || a.col + a.width > cfg.width) {
      throw ConfigError("attribute \"" + a.name + "\" region leaves the image bounds");
    }
    for (const auto& v : a.variants) {
      if (v.rows > a.height || v.cols > a.width) {
        throw ConfigError("attribute \"" + a.name + "\" glyph larger than its region");
      }
      const std::size_t margin_r = (a.height - v.rows) / 2;
      const std::size_t margin_c = (a.width - v.cols) / 2;
      if (cfg.jitter > margin_r || cfg.jitter > margin_c) {
        throw ConfigError("jitter radius " + std::to_string(cfg.jitter) +
                          " can push attribute \"" + a.name + "\" glyph outside its region");
      }
    }
  }
  if (cfg.classes > combos) {
    throw ConfigError("classes=" + std::to_string(cfg.classes) + " exceeds the " +
                      std::to_string(combos) + " distinct variant combinations");
  }
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    for (std::size_t j = i + 1; j < attrs.size(); ++j) {
      const auto& a = attrs[i];
      const auto& b = attrs[j];
      const bool disjoint = a.row + a.height <= b.row || b.row + b.height <= a.row ||
                            a.col + a.width <= b.col || b.col + b.width <= a.col;
      if (!disjoint) {
        throw ConfigError("attribute regions \"" + a.name + "\" and \"" + b.name +
                          "\" overlap");
      }
    }
  }
}

std::vector<std::size_t> combo_for_class(std::size_t class_id,
                                         const std::vector<AttributeSpec>& attrs) {
  std::vector<std::size_t> combo(attrs.size());
  std::size_t c = class_id;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    combo[i] = c % attrs[i].variants.size();
    c /= attrs[i].variants.size();
  }
  return combo;
}

// Region repaint shared by generation and substitution: zeros plus the glyph
// anchored at the region center shifted by the jitter offset.
void paint_region(Tensor& image, const AttributeSpec& attr, std::size_t variant,
                  std::array<int, 2> offset) {
  const Glyph& g = attr.variants[variant];
  for (std::size_t r = 0; r < attr.height; ++r) {
    for (std::size_t c = 0; c < attr.width; ++c) {
      image.at(0, attr.row + r, attr.col + c) = 0.0;
    }
  }
  const long base_r = static_cast<long>(attr.row + (attr.height - g.rows) / 2) + offset[0];
  const long base_c = static_cast<long>(attr.col + (attr.width - g.cols) / 2) + offset[1];
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      if (g.on(r, c)) {
        image.at(0, static_cast<std::size_t>(base_r) + r,
                 static_cast<std::size_t>(base_c) + c) = 1.0;
      }
    }
  }
}

json glyph_to_json(const Glyph& g) {
  std::string m(g.mask.size(), '.');
  for (std::size_t i = 0; i < g.mask.size(); ++i) m[i] = g.mask[i] ? '#' : '.';
  return json{{"rows", g.rows}, {"cols", g.cols}, {"mask", m}};
}

Glyph glyph_from_json(const json& j) {
  Glyph g;
  g.rows = j.at("rows").get<std::size_t>();
  g.cols = j.at("cols").get<std::size_t>();
  const std::string m = j.at("mask").get<std::string>();
  if (m.size() != g.rows * g.cols) throw ParseError("glyph mask length mismatch");
  g.mask.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) g.mask[i] = m[i] == '#' ? 1 : 0;
  return g;
}

json attribute_to_json(const AttributeSpec& a) {
  json variants = json::array();
  for (const auto& v : a.variants) variants.push_back(glyph_to_json(v));
  return json{{"name", a.name}, {"row", a.row},     {"col", a.col},
              {"height", a.height}, {"width", a.width}, {"variants", variants}};
}

AttributeSpec attribute_from_json(const json& j) {
  AttributeSpec a;
  a.name = j.at("name").get<std::string>();
  a.row = j.at("row").get<std::size_t>();
  a.col = j.at("col").get<std::size_t>();
  a.height = j.at("height").get<std::size_t>();
  a.width = j.at("width").get<std::size_t>();
  for (const auto& v : j.at("variants")) a.variants.push_back(glyph_from_json(v));
  return a;
}

}  // namespace

std::vector<AttributeSpec> default_attributes() {
  std::vector<AttributeSpec> attrs(3);

  attrs[0].name = "eyes";
  attrs[0].row = 1;
  attrs[0].col = 5;
  attrs[0].height = 6;
  attrs[0].width = 6;
  attrs[0].variants = {glyph4("#..#"
                              "#..#"
                              "...."
                              "...."),
                       glyph4("####"
                              "...."
                              "####"
                              "....")};

  attrs[1].name = "nose";
  attrs[1].row = 8;
  attrs[1].col = 1;
  attrs[1].height = 6;
  attrs[1].width = 6;
  attrs[1].variants = {glyph4(".##."
                              ".##."
                              ".##."
                              ".##."),
                       glyph4(".##."
                              ".##."
                              "####"
                              "....")};

  attrs[2].name = "mouth";
  attrs[2].row = 8;
  attrs[2].col = 9;
  attrs[2].height = 6;
  attrs[2].width = 6;
  attrs[2].variants = {glyph4("...."
                              "#..#"
                              ".##."
                              "...."),
                       glyph4("...."
                              "...."
                              "####"
                              "....")};
  return attrs;
}

std::vector<std::size_t> Dataset::variant_combo(std::size_t class_id) const {
  return combo_for_class(class_id, attributes);
}

std::size_t Dataset::attribute_index(const std::string& name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == name) return i;
  }
  throw LookupError("unknown attribute \"" + name + "\"");
}

Dataset generate(const DatagenConfig& config) {
  const std::vector<AttributeSpec> attrs =
      config.attributes.empty() ? default_attributes() : config.attributes;
  validate_config(config, attrs);

  Dataset ds;
  ds.num_classes = config.classes;
  ds.height = config.height;
  ds.width = config.width;
  ds.attributes = attrs;
  ds.seed = config.seed;
  ds.noise_sigma = config.noise_sigma;
  ds.jitter_radius = config.jitter;

  Rng rng(config.seed);
  // One fixed RNG stream: per image, background pixels row-major (only when
  // noise_sigma > 0), then two jitter draws per attribute (only when the
  // radius is nonzero). This ordering is part of the format contract.
  for (std::size_t cls = 0; cls < config.classes; ++cls) {
    const auto combo = combo_for_class(cls, attrs);
    for (std::size_t n = 0; n < config.per_class; ++n) {
      Tensor img({1, config.height, config.width});
      if (config.noise_sigma > 0.0) {
        for (std::size_t i = 0; i < img.size(); ++i) {
          img[i] = rng.uniform() * config.noise_sigma;
        }
      }
      JitterRecord rec(attrs.size(), {0, 0});
      for (std::size_t a = 0; a < attrs.size(); ++a) {
        if (config.jitter > 0) {
          const long span = 2 * static_cast<long>(config.jitter) + 1;
          rec[a][0] = static_cast<int>(static_cast<long>(rng.below(
                          static_cast<std::uint64_t>(span))) -
                      static_cast<long>(config.jitter));
          rec[a][1] = static_cast<int>(static_cast<long>(rng.below(
                          static_cast<std::uint64_t>(span))) -
                      static_cast<long>(config.jitter));
        }
        paint_region(img, attrs[a], combo[a], rec[a]);
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<std::uint32_t>(cls));
      ds.jitter.push_back(std::move(rec));
    }
  }
  return ds;
}

Tensor substitute_region(const Tensor& image, const AttributeSpec& attr,
                         std::size_t donor_variant, std::array<int, 2> offset) {
  if (donor_variant >= attr.variants.size()) {
    throw LookupError("attribute \"" + attr.name + "\" has no variant " +
                      std::to_string(donor_variant));
  }
  Tensor out = image;
  paint_region(out, attr, donor_variant, offset);
  return out;
}

Tensor substitute_region(const Dataset& ds, std::size_t image_index,
                         const std::string& attribute, std::size_t donor_variant) {
  if (image_index >= ds.size()) {
    throw LookupError("image index " + std::to_string(image_index) + " out of range");
  }
  const std::size_t a = ds.attribute_index(attribute);
  return substitute_region(ds.images[image_index], ds.attributes[a], donor_variant,
                           ds.jitter[image_index][a]);
}

Tensor randomize_background(const Tensor& image, const AttributeSpec& attr,
                            double amplitude, Rng& rng) {
  Tensor out = image;
  const std::size_t h = image.shape[1], w = image.shape[2];
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const bool inside = r >= attr.row && r < attr.row + attr.height &&
                          c >= attr.col && c < attr.col + attr.width;
      if (!inside) out.at(0, r, c) = rng.uniform() * amplitude;
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  }
  Dataset train = ds, test = ds;
  train.images.clear(); train.labels.clear(); train.jitter.clear();
  test.images.clear(); test.labels.clear(); test.jitter.clear();

  // Per-class head goes to train, tail to test; dataset order is class-major
  // so a single scan with per-class counters suffices.
  std::vector<std::size_t> seen(ds.num_classes, 0);
  std::vector<std::size_t> totals(ds.num_classes, 0);
  for (std::uint32_t l : ds.labels) totals[l]++;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::uint32_t l = ds.labels[i];
    const auto cut = static_cast<std::size_t>(
        std::floor(static_cast<double>(totals[l]) * train_fraction));
    Dataset& dst = seen[l] < cut ? train : test;
    dst.images.push_back(ds.images[i]);
    dst.labels.push_back(l);
    dst.jitter.push_back(ds.jitter[i]);
    seen[l]++;
  }
  if (train.images.empty() || test.images.empty()) {
    throw ConfigError("split produced an empty partition");
  }
  return {std::move(train), std::move(test)};
}

Bytes dataset_to_bytes(const Dataset& ds, const std::string& extra_json) {
  Bytes out;
  put_bytes(out, "AMLD", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(ds.num_classes));
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  put_u32(out, static_cast<std::uint32_t>(ds.height));
  put_u32(out, static_cast<std::uint32_t>(ds.width));
  for (const Tensor& img : ds.images) {
    for (double v : img.data) put_f64(out, v);
  }
  for (std::uint32_t l : ds.labels) put_u32(out, l);

  json attrs = json::array();
  for (const auto& a : ds.attributes) attrs.push_back(attribute_to_json(a));
  json jit = json::array();
  for (const auto& rec : ds.jitter) {
    json row = json::array();
    for (const auto& off : rec) row.push_back(json::array({off[0], off[1]}));
    jit.push_back(row);
  }
  json trailer{{"attributes", attrs},
               {"seed", ds.seed},
               {"noise_sigma", ds.noise_sigma},
               {"jitter_radius", ds.jitter_radius},
               {"jitter", jit}};
  if (!extra_json.empty()) trailer["extra"] = json::parse(extra_json);
  const std::string text = trailer.dump();
  put_u64(out, text.size());
  put_bytes(out, text.data(), text.size());
  return out;
}

Dataset dataset_from_bytes(const Bytes& bytes, std::string* extra_json) {
  ByteReader r(bytes, "dataset");
  r.expect_magic("AMLD");
  const std::uint32_t version = r.u32();
  if (version != 1) throw ParseError("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  ds.num_classes = r.u32();
  const std::uint32_t count = r.u32();
  ds.height = r.u32();
  ds.width = r.u32();
  const std::size_t pixels = ds.height * ds.width;
  ds.images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor img({1, ds.height, ds.width});
    for (std::size_t p = 0; p < pixels; ++p) img[p] = r.f64();
    ds.images.push_back(std::move(img));
  }
  ds.labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) ds.labels.push_back(r.u32());

  const std::uint64_t len = r.u64();
  const json trailer = json::parse(r.str(len));
  for (const auto& a : trailer.at("attributes")) {
    ds.attributes.push_back(attribute_from_json(a));
  }
  ds.seed = trailer.at("seed").get<std::uint64_t>();
  ds.noise_sigma = trailer.at("noise_sigma").get<double>();
  ds.jitter_radius = trailer.at("jitter_radius").get<std::size_t>();
  for (const auto& row : trailer.at("jitter")) {
    JitterRecord rec;
    for (const auto& off : row) rec.push_back({off.at(0).get<int>(), off.at(1).get<int>()});
    ds.jitter.push_back(std::move(rec));
  }
  if (extra_json != nullptr) {
    *extra_json = trailer.contains("extra") ? trailer.at("extra").dump() : "";
  }
  if (!r.done()) throw ParseError("dataset: trailing bytes after trailer");
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_file(path, dataset_to_bytes(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_bytes(read_file(path));
}

}  // namespace ami
