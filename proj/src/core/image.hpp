/* Copyright 2026 The LVW Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef LVW_CORE_IMAGE_HPP_
#define LVW_CORE_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lvw {

// 8-bit interleaved RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // height*width*3, row-major RGB

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(size_t(w) * h * 3, 0) {}

  uint8_t* px(int row, int col) { return &pixels[(size_t(row) * width + col) * 3]; }
  const uint8_t* px(int row, int col) const {
    return &pixels[(size_t(row) * width + col) * 3];
  }
};

// File I/O. PNG files are 8-bit gray/RGB/RGBA, non-interlaced; PPM is binary
// P6 (P5 accepted on read). Format chosen by extension on write, by magic on
// read.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);
void write_png(const std::string& path, const Image& img);
void write_ppm(const std::string& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);
Image decode_png(const uint8_t* data, size_t len);

// Raw zlib stream codec (RFC 1950/1951). decode handles stored, fixed and
// dynamic Huffman blocks; encode emits stored blocks.
std::vector<uint8_t> zlib_decompress(const uint8_t* data, size_t len);
std::vector<uint8_t> zlib_compress_stored(const uint8_t* data, size_t len);

Image resize_bilinear(const Image& img, int out_width, int out_height);
Image flip_horizontal(const Image& img);

// Bilinear interpolation of a 2-d grid with corner alignment: source corners
// map exactly onto target corners, so grid values are reproduced at aligned
// points. Works for both up- and downsampling.
Tensor resample_bilinear(const Tensor& grid, int out_height, int out_width);

// Maps to [0,1] in place. Returns false (and zero-fills) when the input is
// constant.
bool minmax_normalize(Tensor& map);

// Perceptual colormap lookup for t in [0,1].
void colormap(double t, uint8_t rgb[3]);

// Alpha-blends the colormapped heat01 map (same resolution, values in [0,1])
// over the image.
Image render_heatmap_overlay(const Image& base, const Tensor& heat01, double alpha);

// Draws a 2-pixel rectangle outline; coordinates are inclusive.
void draw_box(Image& img, int row0, int col0, int row1, int col1,
              uint8_t r, uint8_t g, uint8_t b);

}  // namespace lvw

#endif  // LVW_CORE_IMAGE_HPP_
