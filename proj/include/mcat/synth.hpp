// Synthetic desk-scale corpus generator.
//
// Produces an image-folder tree with a two-level structure: each category
// owns a distinct background color, each class within a category places a
// bright patch at a class-specific grid position. Pixel noise and patch
// jitter make classes within a category partially confusable while keeping
// categories well separated, which mirrors the natural-category regime the
// experiments probe.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcat/image.hpp"
#include "mcat/manifest.hpp"
#include "mcat/rng.hpp"

namespace mcat {

struct SynthConfig {
  int num_categories = 10;
  int classes_per_category = 10;
  int train_per_class = 40;
  int test_per_class = 20;
  int image_size = 16;
  double noise_sigma = 0.14;   // per-pixel Gaussian noise
  double patch_jitter = 1.5;   // stddev of patch position jitter, pixels
  double brightness_jitter = 0.10;
  double hue_jitter = 0.0;     // stddev of per-image hue shift, hue-circle units
  double label_noise = 0.0;    // fraction of train images drawn as a sibling class
  std::uint64_t seed = 0;
};

namespace detail {
inline void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  rgb[0] = float(r + m);
  rgb[1] = float(g + m);
  rgb[2] = float(b + m);
}
}  // namespace detail

inline Image synth_image(const SynthConfig& cfg, int category, int cls, Rng& rng) {
  Image img(cfg.image_size, cfg.image_size);
  float bg[3];
  // evenly spaced hues keep category backgrounds apart; a per-image hue
  // shift makes neighboring categories partially confusable when enabled
  const double hue = double(category) / double(cfg.num_categories) +
                     rng.normal(0.0, cfg.hue_jitter);
  detail::hsv_to_rgb(hue - std::floor(hue), 0.65, 0.45, bg);
  const double brightness = 1.0 + rng.normal(0.0, cfg.brightness_jitter);
  for (int y = 0; y < cfg.image_size; ++y)
    for (int x = 0; x < cfg.image_size; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = float(bg[c] * brightness);

  // class feature: a bright patch on a grid position, jittered
  const int grid = int(std::ceil(std::sqrt(double(cfg.classes_per_category))));
  const double cell = double(cfg.image_size) / double(grid);
  const double cx = (double(cls % grid) + 0.5) * cell + rng.normal(0.0, cfg.patch_jitter);
  const double cy = (double(cls / grid) + 0.5) * cell + rng.normal(0.0, cfg.patch_jitter);
  const double radius = cell * 0.45;
  for (int y = 0; y < cfg.image_size; ++y)
    for (int x = 0; x < cfg.image_size; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 <= radius * radius) {
        const float v = float(0.95 * brightness);
        img.at(y, x, 0) = v;
        img.at(y, x, 1) = v;
        img.at(y, x, 2) = v;
      }
    }

  for (auto& p : img.pixels) {
    p += float(rng.normal(0.0, cfg.noise_sigma));
    p = p < 0.f ? 0.f : (p > 1.f ? 1.f : p);
  }
  return img;
}

// Writes root/<class_id>/{train,test}/NNNN.ppm plus root/manifest.csv and
// returns the manifest. Deterministic given cfg.seed; skips nothing (always
// rewrites), callers decide whether regeneration is needed.
inline CategoryManifest generate_synth_corpus(const SynthConfig& cfg,
                                              const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  CategoryManifest manifest;
  for (int g = 0; g < cfg.num_categories; ++g) {
    Category cat;
    char buf[32];
    std::snprintf(buf, sizeof buf, "group%02d", g);
    cat.name = buf;
    for (int k = 0; k < cfg.classes_per_category; ++k) {
      std::snprintf(buf, sizeof buf, "group%02d_class%02d", g, k);
      cat.classes.push_back({buf, buf, ""});

      const fs::path class_dir = root / buf;
      fs::create_directories(class_dir / "train");
      fs::create_directories(class_dir / "test");
      Rng rng(derive_seed(cfg.seed, std::uint64_t(g) * 1000 + std::uint64_t(k)));
      for (int i = 0; i < cfg.train_per_class; ++i) {
        // label noise: the file keeps this class's label but shows a sibling
        // class from the same category, mimicking within-category mislabels
        int shown = k;
        if (rng.uniform() < cfg.label_noise && cfg.classes_per_category > 1) {
          const int other = int(rng.uniform_int(std::uint64_t(cfg.classes_per_category - 1)));
          shown = other >= k ? other + 1 : other;
        }
        std::snprintf(buf, sizeof buf, "%04d.ppm", i);
        write_ppm(synth_image(cfg, g, shown, rng), class_dir / "train" / buf);
      }
      for (int i = 0; i < cfg.test_per_class; ++i) {
        std::snprintf(buf, sizeof buf, "%04d.ppm", i);
        write_ppm(synth_image(cfg, g, k, rng), class_dir / "test" / buf);
      }
    }
    manifest.categories.push_back(std::move(cat));
  }
  save_manifest(manifest, root / "manifest.csv");
  return manifest;
}

}  // namespace mcat
