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

#include "core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/errors.hpp"

namespace lvw {

// ---------------------------------------------------------------------------
// zlib / DEFLATE
// ---------------------------------------------------------------------------

namespace {

uint32_t adler32(const uint8_t* data, size_t len) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

class BitReader {
 public:
  BitReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

  uint32_t bits(int n) {
    while (bit_count_ < n) {
      if (pos_ >= len_) throw DataError("deflate stream truncated");
      acc_ |= uint64_t(data_[pos_++]) << bit_count_;
      bit_count_ += 8;
    }
    uint32_t out = uint32_t(acc_ & ((1u << n) - 1));
    acc_ >>= n;
    bit_count_ -= n;
    return out;
  }

  void align_byte() {
    acc_ >>= bit_count_ % 8;
    bit_count_ -= bit_count_ % 8;
  }

  uint8_t byte() {
    if (bit_count_ >= 8) return uint8_t(bits(8));
    if (pos_ >= len_) throw DataError("deflate stream truncated");
    return data_[pos_++];
  }

  size_t pos() const { return pos_; }

 private:
  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
  uint64_t acc_ = 0;
  int bit_count_ = 0;
};

// Canonical Huffman decoder from code lengths (RFC 1951 §3.2.2).
struct Huffman {
  // first_code[l], first_symbol[l] per bit length, symbols sorted by code.
  int count[16] = {0};
  int offset[16] = {0};
  std::vector<int> symbols;

  void build(const std::vector<int>& lengths) {
    for (int i = 0; i < 16; ++i) count[i] = 0;
    for (int l : lengths) {
      if (l < 0 || l > 15) throw DataError("invalid huffman code length");
      ++count[l];
    }
    count[0] = 0;
    int total = 0;
    for (int l = 1; l < 16; ++l) {
      offset[l] = total;
      total += count[l];
    }
    symbols.assign(size_t(total), 0);
    std::vector<int> next(16);
    for (int l = 1; l < 16; ++l) next[l] = offset[l];
    for (size_t s = 0; s < lengths.size(); ++s) {
      if (lengths[s] > 0) symbols[size_t(next[lengths[s]]++)] = int(s);
    }
  }

  int decode(BitReader& br) const {
    int code = 0, first = 0, index = 0;
    for (int len = 1; len <= 15; ++len) {
      code |= int(br.bits(1));
      int n = count[len];
      if (code - first < n) return symbols[size_t(index + (code - first))];
      index += n;
      first = (first + n) << 1;
      code <<= 1;
    }
    throw DataError("invalid huffman code");
  }
};

constexpr int kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,
                              15, 17, 19, 23, 27, 31, 35, 43, 51,  59,
                              67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr int kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                               2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr int kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,    13,
                               17,   25,   33,   49,   65,   97,    129,  193,
                               257,  385,  513,  769,  1025, 1537,  2049, 3073,
                               4097, 6145, 8193, 12289, 16385, 24577};
constexpr int kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                                6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

std::vector<uint8_t> inflate(const uint8_t* data, size_t len) {
  BitReader br(data, len);
  std::vector<uint8_t> out;
  Huffman fixed_lit, fixed_dist;
  bool fixed_built = false;

  for (;;) {
    uint32_t bfinal = br.bits(1);
    uint32_t btype = br.bits(2);
    if (btype == 0) {
      br.align_byte();
      uint32_t n = br.byte();
      n |= uint32_t(br.byte()) << 8;
      uint32_t nc = br.byte();
      nc |= uint32_t(br.byte()) << 8;
      if ((n ^ 0xffffu) != nc) throw DataError("stored block length mismatch");
      for (uint32_t i = 0; i < n; ++i) out.push_back(br.byte());
    } else if (btype == 1 || btype == 2) {
      Huffman lit, dist;
      if (btype == 1) {
        if (!fixed_built) {
          std::vector<int> ll(288);
          for (int i = 0; i < 144; ++i) ll[size_t(i)] = 8;
          for (int i = 144; i < 256; ++i) ll[size_t(i)] = 9;
          for (int i = 256; i < 280; ++i) ll[size_t(i)] = 7;
          for (int i = 280; i < 288; ++i) ll[size_t(i)] = 8;
          fixed_lit.build(ll);
          fixed_dist.build(std::vector<int>(30, 5));
          fixed_built = true;
        }
        lit = fixed_lit;
        dist = fixed_dist;
      } else {
        int hlit = int(br.bits(5)) + 257;
        int hdist = int(br.bits(5)) + 1;
        int hclen = int(br.bits(4)) + 4;
        static constexpr int kOrder[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                           11, 4,  12, 3, 13, 2, 14, 1, 15};
        std::vector<int> cl(19, 0);
        for (int i = 0; i < hclen; ++i) cl[size_t(kOrder[i])] = int(br.bits(3));
        Huffman clh;
        clh.build(cl);
        std::vector<int> lengths;
        lengths.reserve(size_t(hlit + hdist));
        while (int(lengths.size()) < hlit + hdist) {
          int sym = clh.decode(br);
          if (sym < 16) {
            lengths.push_back(sym);
          } else if (sym == 16) {
            if (lengths.empty()) throw DataError("repeat with no previous length");
            int rep = 3 + int(br.bits(2));
            lengths.insert(lengths.end(), size_t(rep), lengths.back());
          } else if (sym == 17) {
            int rep = 3 + int(br.bits(3));
            lengths.insert(lengths.end(), size_t(rep), 0);
          } else {
            int rep = 11 + int(br.bits(7));
            lengths.insert(lengths.end(), size_t(rep), 0);
          }
        }
        if (int(lengths.size()) != hlit + hdist) throw DataError("code length overflow");
        lit.build(std::vector<int>(lengths.begin(), lengths.begin() + hlit));
        dist.build(std::vector<int>(lengths.begin() + hlit, lengths.end()));
      }
      for (;;) {
        int sym = lit.decode(br);
        if (sym < 256) {
          out.push_back(uint8_t(sym));
        } else if (sym == 256) {
          break;
        } else {
          sym -= 257;
          if (sym >= 29) throw DataError("invalid length symbol");
          int length = kLenBase[sym] + int(br.bits(kLenExtra[sym]));
          int dsym = dist.decode(br);
          if (dsym >= 30) throw DataError("invalid distance symbol");
          int distance = kDistBase[dsym] + int(br.bits(kDistExtra[dsym]));
          if (size_t(distance) > out.size()) throw DataError("distance too far back");
          size_t from = out.size() - size_t(distance);
          for (int i = 0; i < length; ++i) out.push_back(out[from + size_t(i)]);
        }
      }
    } else {
      throw DataError("invalid deflate block type");
    }
    if (bfinal) break;
  }
  return out;
}

}  // namespace

std::vector<uint8_t> zlib_decompress(const uint8_t* data, size_t len) {
  if (len < 6) throw DataError("zlib stream too short");
  uint8_t cmf = data[0], flg = data[1];
  if ((cmf & 0x0f) != 8) throw DataError("unsupported zlib compression method");
  if ((uint32_t(cmf) * 256 + flg) % 31 != 0) throw DataError("bad zlib header check");
  if (flg & 0x20) throw DataError("preset dictionaries not supported");
  std::vector<uint8_t> out = inflate(data + 2, len - 2 - 4);
  uint32_t expect = (uint32_t(data[len - 4]) << 24) | (uint32_t(data[len - 3]) << 16) |
                    (uint32_t(data[len - 2]) << 8) | uint32_t(data[len - 1]);
  if (adler32(out.data(), out.size()) != expect) throw DataError("zlib adler32 mismatch");
  return out;
}

std::vector<uint8_t> zlib_compress_stored(const uint8_t* data, size_t len) {
  std::vector<uint8_t> out;
  out.reserve(len + len / 65535 * 5 + 16);
  out.push_back(0x78);  // 32K window, deflate
  out.push_back(0x01);  // no preset dict, fastest
  size_t pos = 0;
  do {
    size_t chunk = std::min<size_t>(len - pos, 65535);
    bool final_block = pos + chunk == len;
    out.push_back(final_block ? 1 : 0);  // BFINAL, BTYPE=00
    out.push_back(uint8_t(chunk & 0xff));
    out.push_back(uint8_t(chunk >> 8));
    out.push_back(uint8_t(~chunk & 0xff));
    out.push_back(uint8_t((~chunk >> 8) & 0xff));
    out.insert(out.end(), data + pos, data + pos + chunk);
    pos += chunk;
  } while (pos < len);
  uint32_t a = adler32(data, len);
  out.push_back(uint8_t(a >> 24));
  out.push_back(uint8_t(a >> 16));
  out.push_back(uint8_t(a >> 8));
  out.push_back(uint8_t(a));
  return out;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

uint32_t crc32_update(uint32_t crc, const uint8_t* data, size_t len) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t n = 0; n < 256; ++n) {
      uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[n] = c;
    }
    init = true;
  }
  crc ^= 0xffffffffu;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void put_u32_be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
  put_u32_be(out, uint32_t(payload.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uint32_t crc = crc32_update(0, out.data() + crc_start, out.size() - crc_start);
  put_u32_be(out, crc);
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

}  // namespace

std::vector<uint8_t> encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0) throw ArgumentError("encode_png: empty image");
  std::vector<uint8_t> out(kPngSig, kPngSig + 8);

  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, uint32_t(img.width));
  put_u32_be(ihdr, uint32_t(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type RGB
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  append_chunk(out, "IHDR", ihdr);

  // filter byte 0 (None) per scanline
  std::vector<uint8_t> raw;
  raw.reserve(size_t(img.height) * (size_t(img.width) * 3 + 1));
  for (int r = 0; r < img.height; ++r) {
    raw.push_back(0);
    const uint8_t* row = img.px(r, 0);
    raw.insert(raw.end(), row, row + size_t(img.width) * 3);
  }
  append_chunk(out, "IDAT", zlib_compress_stored(raw.data(), raw.size()));
  append_chunk(out, "IEND", {});
  return out;
}

Image decode_png(const uint8_t* data, size_t len) {
  if (len < 8 || std::memcmp(data, kPngSig, 8) != 0) throw DataError("not a PNG file");
  size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= len && !saw_iend) {
    uint32_t chunk_len = (uint32_t(data[pos]) << 24) | (uint32_t(data[pos + 1]) << 16) |
                         (uint32_t(data[pos + 2]) << 8) | uint32_t(data[pos + 3]);
    if (pos + 12 + chunk_len > len) throw DataError("PNG chunk overruns file");
    const char* type = reinterpret_cast<const char*>(data + pos + 4);
    const uint8_t* payload = data + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = int((uint32_t(payload[0]) << 24) | (uint32_t(payload[1]) << 16) |
                  (uint32_t(payload[2]) << 8) | payload[3]);
      height = int((uint32_t(payload[4]) << 24) | (uint32_t(payload[5]) << 16) |
                   (uint32_t(payload[6]) << 8) | payload[7]);
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0) throw DataError("interlaced PNG not supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + chunk_len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + chunk_len;
  }
  if (!saw_ihdr || width <= 0 || height <= 0) throw DataError("PNG missing IHDR");
  if (bit_depth != 8) throw DataError("only 8-bit PNG supported");
  int nch;
  switch (color_type) {
    case 0: nch = 1; break;
    case 2: nch = 3; break;
    case 4: nch = 2; break;
    case 6: nch = 4; break;
    default: throw DataError("unsupported PNG color type");
  }

  std::vector<uint8_t> raw = zlib_decompress(idat.data(), idat.size());
  size_t stride = size_t(width) * size_t(nch);
  if (raw.size() != (stride + 1) * size_t(height)) throw DataError("PNG data size mismatch");

  // undo per-scanline filters
  std::vector<uint8_t> plane(stride * size_t(height));
  for (int r = 0; r < height; ++r) {
    uint8_t filter = raw[(stride + 1) * size_t(r)];
    const uint8_t* src = raw.data() + (stride + 1) * size_t(r) + 1;
    uint8_t* dst = plane.data() + stride * size_t(r);
    const uint8_t* up = r > 0 ? plane.data() + stride * size_t(r - 1) : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      int a = i >= size_t(nch) ? dst[i - size_t(nch)] : 0;
      int b = up ? up[i] : 0;
      int c = (up && i >= size_t(nch)) ? up[i - size_t(nch)] : 0;
      int x = src[i];
      switch (filter) {
        case 0: dst[i] = uint8_t(x); break;
        case 1: dst[i] = uint8_t(x + a); break;
        case 2: dst[i] = uint8_t(x + b); break;
        case 3: dst[i] = uint8_t(x + (a + b) / 2); break;
        case 4: dst[i] = uint8_t(x + paeth(a, b, c)); break;
        default: throw DataError("unsupported PNG filter");
      }
    }
  }

  Image img(width, height);
  for (int r = 0; r < height; ++r) {
    for (int col = 0; col < width; ++col) {
      const uint8_t* s = plane.data() + stride * size_t(r) + size_t(col) * size_t(nch);
      uint8_t* d = img.px(r, col);
      switch (color_type) {
        case 0: d[0] = d[1] = d[2] = s[0]; break;
        case 4: d[0] = d[1] = d[2] = s[0]; break;  // alpha dropped
        case 2: case 6: d[0] = s[0]; d[1] = s[1]; d[2] = s[2]; break;
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// PPM and dispatch
// ---------------------------------------------------------------------------

void write_png(const std::string& path, const Image& img) {
  std::vector<uint8_t> bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
}

void write_image(const std::string& path, const Image& img) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0) {
    write_ppm(path, img);
  } else {
    write_png(path, img);
  }
}

namespace {

Image read_ppm(std::ifstream& in, const std::string& path) {
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw DataError("unsupported PPM type in " + path);
  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    in >> v;
    if (!in) throw DataError("bad PPM header in " + path);
    return v;
  };
  int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw DataError("only 8-bit PPM supported: " + path);
  in.get();  // single whitespace after header
  Image img(w, h);
  if (magic == "P6") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  } else {
    std::vector<uint8_t> gray(size_t(w) * h);
    in.read(reinterpret_cast<char*>(gray.data()), std::streamsize(gray.size()));
    for (size_t i = 0; i < gray.size(); ++i) {
      img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = gray[i];
    }
  }
  if (!in) throw DataError("truncated PPM: " + path);
  return img;
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  int c0 = in.peek();
  if (c0 == 'P') return read_ppm(in, path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return decode_png(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Resampling, colormap, overlay
// ---------------------------------------------------------------------------

Image resize_bilinear(const Image& img, int out_width, int out_height) {
  if (out_width <= 0 || out_height <= 0) throw ArgumentError("resize to empty size");
  Image out(out_width, out_height);
  double sy = out_height > 1 ? double(img.height - 1) / (out_height - 1) : 0.0;
  double sx = out_width > 1 ? double(img.width - 1) / (out_width - 1) : 0.0;
  for (int r = 0; r < out_height; ++r) {
    double fy = r * sy;
    int y0 = std::min(int(fy), img.height - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double wy = fy - y0;
    for (int c = 0; c < out_width; ++c) {
      double fx = c * sx;
      int x0 = std::min(int(fx), img.width - 1);
      int x1 = std::min(x0 + 1, img.width - 1);
      double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        double v = (1 - wy) * ((1 - wx) * img.px(y0, x0)[ch] + wx * img.px(y0, x1)[ch]) +
                   wy * ((1 - wx) * img.px(y1, x0)[ch] + wx * img.px(y1, x1)[ch]);
        out.px(r, c)[ch] = uint8_t(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const uint8_t* s = img.px(r, img.width - 1 - c);
      uint8_t* d = out.px(r, c);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
    }
  }
  return out;
}

Tensor resample_bilinear(const Tensor& grid, int out_height, int out_width) {
  if (grid.rank() != 2) throw ArgumentError("resample_bilinear expects a 2-d grid");
  if (out_height <= 0 || out_width <= 0) throw ArgumentError("resample to empty size");
  int in_h = grid.dim(0), in_w = grid.dim(1);
  Tensor out({out_height, out_width});
  double sy = out_height > 1 ? double(in_h - 1) / (out_height - 1) : 0.0;
  double sx = out_width > 1 ? double(in_w - 1) / (out_width - 1) : 0.0;
  for (int r = 0; r < out_height; ++r) {
    double fy = r * sy;
    int y0 = std::min(int(fy), in_h - 1);
    int y1 = std::min(y0 + 1, in_h - 1);
    double wy = fy - y0;
    for (int c = 0; c < out_width; ++c) {
      double fx = c * sx;
      int x0 = std::min(int(fx), in_w - 1);
      int x1 = std::min(x0 + 1, in_w - 1);
      double wx = fx - x0;
      out.at2(r, c) = (1 - wy) * ((1 - wx) * grid.at2(y0, x0) + wx * grid.at2(y0, x1)) +
                      wy * ((1 - wx) * grid.at2(y1, x0) + wx * grid.at2(y1, x1));
    }
  }
  return out;
}

bool minmax_normalize(Tensor& map) {
  if (map.size() == 0) throw ArgumentError("minmax_normalize on empty tensor");
  double lo = map.min(), hi = map.max();
  if (hi - lo <= 0.0) {
    map.fill(0.0);
    return false;
  }
  double inv = 1.0 / (hi - lo);
  for (int64_t i = 0; i < map.size(); ++i) map[i] = (map[i] - lo) * inv;
  return true;
}

void colormap(double t, uint8_t rgb[3]) {
  static constexpr double anchors[9][3] = {
      {68, 1, 84},    {71, 44, 122},  {59, 81, 139},  {44, 113, 142}, {33, 144, 141},
      {39, 173, 129}, {92, 200, 99},  {170, 220, 50}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  double f = t * 8.0;
  int i = std::min(int(f), 7);
  double w = f - i;
  for (int ch = 0; ch < 3; ++ch) {
    double v = (1 - w) * anchors[i][ch] + w * anchors[i + 1][ch];
    rgb[ch] = uint8_t(std::lround(v));
  }
}

Image render_heatmap_overlay(const Image& base, const Tensor& heat01, double alpha) {
  if (heat01.rank() != 2 || heat01.dim(0) != base.height || heat01.dim(1) != base.width) {
    throw ArgumentError("overlay: heatmap resolution does not match image");
  }
  Image out(base.width, base.height);
  for (int r = 0; r < base.height; ++r) {
    for (int c = 0; c < base.width; ++c) {
      uint8_t rgb[3];
      colormap(heat01.at2(r, c), rgb);
      const uint8_t* s = base.px(r, c);
      uint8_t* d = out.px(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        double v = (1 - alpha) * s[ch] + alpha * rgb[ch];
        d[ch] = uint8_t(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

void draw_box(Image& img, int row0, int col0, int row1, int col1,
              uint8_t r, uint8_t g, uint8_t b) {
  row0 = std::clamp(row0, 0, img.height - 1);
  row1 = std::clamp(row1, 0, img.height - 1);
  col0 = std::clamp(col0, 0, img.width - 1);
  col1 = std::clamp(col1, 0, img.width - 1);
  auto set = [&](int rr, int cc) {
    uint8_t* p = img.px(rr, cc);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  for (int t = 0; t < 2; ++t) {
    int rt = std::min(row0 + t, img.height - 1);
    int rb = std::max(row1 - t, 0);
    for (int c = col0; c <= col1; ++c) {
      set(rt, c);
      set(rb, c);
    }
    int cl = std::min(col0 + t, img.width - 1);
    int cr = std::max(col1 - t, 0);
    for (int rr = row0; rr <= row1; ++rr) {
      set(rr, cl);
      set(rr, cr);
    }
  }
}

}  // namespace lvw
