// Train-time augmentation: random area/aspect crops, PCA color jitter, and
// the deterministic multi-view evaluation transform.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "mcat/image.hpp"
#include "mcat/rng.hpp"

namespace mcat {

struct CropRect {
  int x = 0;
  int y = 0;
  int width = 1;
  int height = 1;
};

// Area reference for the random crop. MaxSquare draws the target area as a
// fraction of the largest inscribed square; FullImage uses the whole image
// area (the more common library behavior).
enum class AreaReference { MaxSquare, FullImage };

struct AugmentConfig {
  double min_area_fraction = 0.08;
  double max_area_fraction = 1.0;
  double min_aspect = 3.0 / 4.0;
  double max_aspect = 4.0 / 3.0;
  AreaReference area_reference = AreaReference::MaxSquare;
  int output_size = 224;
  double color_jitter_strength = 0.1;
  bool horizontal_flip = true;

  void validate() const {
    if (!(min_area_fraction > 0 && min_area_fraction <= max_area_fraction &&
          max_area_fraction <= 1.0))
      throw std::invalid_argument("AugmentConfig: bad area fractions");
    if (!(min_aspect > 0 && min_aspect <= max_aspect))
      throw std::invalid_argument("AugmentConfig: bad aspect range");
    if (output_size < 1) throw std::invalid_argument("AugmentConfig: bad output size");
  }
};

// Draws a crop with area uniform in [min,max] of the reference area and
// aspect ratio log-uniform in [min_aspect, max_aspect]. Infeasible draws are
// retried up to 10 times, then a centered maximum-square crop is returned.
inline CropRect sample_crop(int image_width, int image_height, const AugmentConfig& config,
                            Rng& rng) {
  config.validate();
  if (image_width < 8 || image_height < 8)
    throw std::invalid_argument("sample_crop: image smaller than 8px");

  const double side = double(std::min(image_width, image_height));
  const double ref_area = config.area_reference == AreaReference::MaxSquare
                              ? side * side
                              : double(image_width) * double(image_height);

  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area =
        rng.uniform(config.min_area_fraction, config.max_area_fraction) * ref_area;
    const double aspect =
        std::exp(rng.uniform(std::log(config.min_aspect), std::log(config.max_aspect)));
    const int w = int(std::lround(std::sqrt(area * aspect)));
    const int h = int(std::lround(std::sqrt(area / aspect)));
    if (w >= 1 && h >= 1 && w <= image_width && h <= image_height) {
      CropRect rect;
      rect.width = w;
      rect.height = h;
      rect.x = int(rng.uniform_int(std::uint64_t(image_width - w + 1)));
      rect.y = int(rng.uniform_int(std::uint64_t(image_height - h + 1)));
      return rect;
    }
  }
  // fallback: centered maximum square
  const int s = std::min(image_width, image_height);
  return {(image_width - s) / 2, (image_height - s) / 2, s, s};
}

// RGB covariance eigenpairs of a training set, used for lighting jitter.
// Cache file layout: line 1 holds the 3 eigenvalues, lines 2-4 the 3x3
// matrix whose column i is the eigenvector for eigenvalue i.
struct ColorStats {
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();
};

inline ColorStats compute_color_stats(const std::vector<const Image*>& images,
                                      std::size_t max_pixels = 1000000) {
  std::size_t total = 0;
  for (const auto* img : images) total += img->pixels.size() / 3;
  if (total == 0) throw std::runtime_error("compute_color_stats: no pixels");
  const std::size_t stride = total > max_pixels ? (total + max_pixels - 1) / max_pixels : 1;

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  std::size_t used = 0, counter = 0;
  for (const auto* img : images) {
    const std::size_t n = img->pixels.size() / 3;
    for (std::size_t p = 0; p < n; ++p, ++counter) {
      if (counter % stride != 0) continue;
      Eigen::Vector3d v(img->pixels[p * 3], img->pixels[p * 3 + 1], img->pixels[p * 3 + 2]);
      mean += v;
      second += v * v.transpose();
      ++used;
    }
  }
  mean /= double(used);
  Eigen::Matrix3d cov = second / double(used) - mean * mean.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  ColorStats stats;
  stats.eigenvalues = solver.eigenvalues().cwiseMax(0.0);
  stats.eigenvectors = solver.eigenvectors();
  return stats;
}

inline void save_color_stats(const ColorStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_color_stats: cannot write " + path.string());
  out.precision(17);
  out << stats.eigenvalues(0) << " " << stats.eigenvalues(1) << " " << stats.eigenvalues(2)
      << "\n";
  for (int r = 0; r < 3; ++r)
    out << stats.eigenvectors(r, 0) << " " << stats.eigenvectors(r, 1) << " "
        << stats.eigenvectors(r, 2) << "\n";
}

inline ColorStats load_color_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_color_stats: missing eigenpair cache " + path.string() +
                             " (run the color statistics pass first)");
  ColorStats stats;
  for (int i = 0; i < 3; ++i)
    if (!(in >> stats.eigenvalues(i)))
      throw std::runtime_error("load_color_stats: malformed " + path.string());
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (!(in >> stats.eigenvectors(r, c)))
        throw std::runtime_error("load_color_stats: malformed " + path.string());
  return stats;
}

// Adds sum_i alpha_i * lambda_i * p_i to every pixel, alpha_i ~ N(0, strength).
// strength 0 is an exact identity and leaves the rng untouched.
inline Image color_augment(const Image& image, const ColorStats& stats, double strength,
                           Rng& rng) {
  if (strength == 0.0) return image;
  Eigen::Vector3d alpha(rng.normal(0.0, strength), rng.normal(0.0, strength),
                        rng.normal(0.0, strength));
  Eigen::Vector3d offset = stats.eigenvectors * stats.eigenvalues.cwiseProduct(alpha);
  Image out = image;
  for (std::size_t p = 0; p < out.pixels.size(); p += 3)
    for (int c = 0; c < 3; ++c) {
      float v = out.pixels[p + std::size_t(c)] + float(offset(c));
      out.pixels[p + std::size_t(c)] = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    }
  return out;
}

// Deterministic evaluation views. The default is 20 views: center + four
// corners, at two square scales, each with its horizontal mirror.
struct ViewSpec {
  bool center_only = false;
  std::vector<double> scales = {1.0, 0.75};  // fraction of the maximum square side
  bool include_corners = true;
  bool include_mirrors = true;
};

inline std::vector<Image> multi_crop_views(const Image& image, const ViewSpec& spec,
                                           int output_size) {
  const int s_max = std::min(image.height, image.width);
  if (s_max < 1) throw std::runtime_error("multi_crop_views: empty image");

  std::vector<Image> views;
  if (spec.center_only) {
    Image c = crop(image, (image.height - s_max) / 2, (image.width - s_max) / 2, s_max, s_max);
    views.push_back(resize_bilinear(c, output_size, output_size));
    return views;
  }

  for (double scale : spec.scales) {
    const int side = std::max(1, int(std::lround(scale * double(s_max))));
    const int max_y = image.height - side;
    const int max_x = image.width - side;
    std::vector<std::pair<int, int>> anchors = {{max_y / 2, max_x / 2}};
    if (spec.include_corners) {
      anchors.push_back({0, 0});
      anchors.push_back({0, max_x});
      anchors.push_back({max_y, 0});
      anchors.push_back({max_y, max_x});
    }
    for (auto [y, x] : anchors) {
      Image c = resize_bilinear(crop(image, y, x, side, side), output_size, output_size);
      if (spec.include_mirrors) views.push_back(mirror_horizontal(c));
      views.push_back(std::move(c));
    }
  }
  return views;
}

}  // namespace mcat
