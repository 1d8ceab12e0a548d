// Image container and the minimal I/O the harness needs.
//
// Images are H x W x 3 float arrays in [0,1]. On-disk format is binary PPM
// (P6, 8-bit); anything else should be converted before resolution.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcat {

struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // h*w*3, interleaved RGB

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(std::size_t(h) * std::size_t(w) * 3, 0.f) {}

  float& at(int y, int x, int c) { return pixels[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3 + std::size_t(c)]; }
  float at(int y, int x, int c) const { return pixels[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3 + std::size_t(c)]; }
};

inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_ppm: cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("read_ppm: " + path.string() + " is not binary PPM");
  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments between header fields
    int c;
    while ((c = in.peek()) != EOF) {
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    if (!(in >> v)) throw std::runtime_error("read_ppm: bad header in " + path.string());
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw std::runtime_error("read_ppm: only 8-bit PPM supported");
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(std::size_t(w) * std::size_t(h) * 3);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (std::size_t(in.gcount()) != raw.size())
    throw std::runtime_error("read_ppm: truncated pixel data in " + path.string());
  Image img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = float(raw[i]) / 255.f;
  return img;
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot write " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    float v = img.pixels[i];
    v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
}

inline Image crop(const Image& img, int y, int x, int h, int w) {
  if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > img.height || x + w > img.width)
    throw std::runtime_error("crop: rect out of bounds");
  Image out(h, w);
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      for (int c = 0; c < 3; ++c) out.at(yy, xx, c) = img.at(y + yy, x + xx, c);
  return out;
}

// Bilinear resize with half-pixel centers.
inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  Image out(out_h, out_w);
  const float sy = float(img.height) / float(out_h);
  const float sx = float(img.width) / float(out_w);
  for (int y = 0; y < out_h; ++y) {
    float fy = (float(y) + 0.5f) * sy - 0.5f;
    int y0 = int(std::floor(fy));
    float wy = fy - float(y0);
    int y0c = std::min(std::max(y0, 0), img.height - 1);
    int y1c = std::min(y0 + 1, img.height - 1);
    if (y1c < 0) y1c = 0;
    for (int x = 0; x < out_w; ++x) {
      float fx = (float(x) + 0.5f) * sx - 0.5f;
      int x0 = int(std::floor(fx));
      float wx = fx - float(x0);
      int x0c = std::min(std::max(x0, 0), img.width - 1);
      int x1c = std::min(x0 + 1, img.width - 1);
      if (x1c < 0) x1c = 0;
      for (int c = 0; c < 3; ++c) {
        float top = img.at(y0c, x0c, c) * (1.f - wx) + img.at(y0c, x1c, c) * wx;
        float bot = img.at(y1c, x0c, c) * (1.f - wx) + img.at(y1c, x1c, c) * wx;
        out.at(y, x, c) = top * (1.f - wy) + bot * wy;
      }
    }
  }
  return out;
}

inline Image mirror_horizontal(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

}  // namespace mcat
