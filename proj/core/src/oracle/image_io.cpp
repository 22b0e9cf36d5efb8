#include "anchor/oracle/image_io.hpp"

#include <png.h>

#include <array>
#include <cstring>
#include <fstream>

#include "anchor/core/errors.hpp"
#include "anchor/oracle/render.hpp"

namespace anchor::oracle {
namespace {

// Little-endian LZW bit packer emitting GIF data sub-blocks.
class GifBitWriter {
 public:
  explicit GifBitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void write(std::uint32_t code, int bits) {
    acc_ |= code << nbits_;
    nbits_ += bits;
    while (nbits_ >= 8) {
      push(static_cast<std::uint8_t>(acc_ & 0xFFu));
      acc_ >>= 8;
      nbits_ -= 8;
    }
  }

  void finish() {
    if (nbits_ > 0) push(static_cast<std::uint8_t>(acc_ & 0xFFu));
    acc_ = 0;
    nbits_ = 0;
    flush_block();
    out_.push_back(0);  // block terminator
  }

 private:
  void push(std::uint8_t b) {
    block_[block_len_++] = b;
    if (block_len_ == 255) flush_block();
  }
  void flush_block() {
    if (block_len_ == 0) return;
    out_.push_back(static_cast<std::uint8_t>(block_len_));
    out_.insert(out_.end(), block_.begin(), block_.begin() + block_len_);
    block_len_ = 0;
  }

  std::vector<std::uint8_t>& out_;
  std::uint32_t acc_ = 0;
  int nbits_ = 0;
  std::array<std::uint8_t, 255> block_{};
  int block_len_ = 0;
};

void lzw_encode(const std::vector<std::uint8_t>& indices, std::vector<std::uint8_t>& out) {
  constexpr int kMinCodeSize = 8;
  constexpr std::uint32_t kClear = 1u << kMinCodeSize;
  out.push_back(kMinCodeSize);
  GifBitWriter bits(out);
  std::vector<std::uint16_t> next(4096 * 256, 0);
  int code_size = kMinCodeSize + 1;
  std::uint32_t max_code = kClear + 1;
  bits.write(kClear, code_size);
  std::uint32_t cur = indices.front();
  for (std::size_t i = 1; i < indices.size(); ++i) {
    const std::uint32_t k = indices[i];
    const std::uint16_t child = next[cur * 256 + k];
    if (child) {
      cur = child;
      continue;
    }
    bits.write(cur, code_size);
    next[cur * 256 + k] = static_cast<std::uint16_t>(++max_code);
    if (max_code >= (1u << code_size)) ++code_size;
    if (max_code == 4095) {
      bits.write(kClear, code_size);
      std::fill(next.begin(), next.end(), 0);
      max_code = kClear + 1;
      code_size = kMinCodeSize + 1;
    }
    cur = k;
  }
  bits.write(cur, code_size);
  bits.write(kClear, code_size);
  bits.write(kClear + 1, kMinCodeSize + 1);
  bits.finish();
}

void put16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

std::uint8_t cube_index(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int ri = (r * 5 + 127) / 255;
  const int gi = (g * 6 + 127) / 255;
  const int bi = (b * 5 + 127) / 255;
  return static_cast<std::uint8_t>(ri * 42 + gi * 6 + bi);
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, std::span<const std::uint8_t> rgb,
                   int height, int width) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) {
    throw ShapeError("PNG buffer size does not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

void write_png(const std::filesystem::path& path, const core::FrameImage& frame) {
  const auto rgb = frame_to_rgb(frame);
  write_png_rgb(path, rgb, frame.height(), frame.width());
}

core::FrameImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return rgb_to_frame(rgb, static_cast<int>(image.height), static_cast<int>(image.width));
}

void write_gif(const std::filesystem::path& path, std::span<const core::FrameImage> frames,
               int delay_cs) {
  if (frames.empty()) throw EmptyInputError("GIF needs at least one frame");
  const int h = frames.front().height(), w = frames.front().width();
  std::vector<std::uint8_t> out;
  const char* header = "GIF89a";
  out.insert(out.end(), header, header + 6);
  put16(out, w);
  put16(out, h);
  out.push_back(0xF7);  // global table, 256 entries
  out.push_back(0);
  out.push_back(0);
  for (int i = 0; i < 256; ++i) {
    if (i < 252) {
      out.push_back(static_cast<std::uint8_t>((i / 42) * 255 / 5));
      out.push_back(static_cast<std::uint8_t>(((i / 6) % 7) * 255 / 6));
      out.push_back(static_cast<std::uint8_t>((i % 6) * 255 / 5));
    } else {
      out.insert(out.end(), {0, 0, 0});
    }
  }
  const std::uint8_t loop[] = {0x21, 0xFF, 0x0B, 'N', 'E', 'T', 'S', 'C', 'A', 'P',
                               'E',  '2',  '.',  '0', 0x03, 0x01, 0x00, 0x00, 0x00};
  out.insert(out.end(), std::begin(loop), std::end(loop));
  for (const auto& frame : frames) {
    if (frame.height() != h || frame.width() != w) throw ShapeError("GIF frames differ in size");
    out.insert(out.end(), {0x21, 0xF9, 0x04, 0x00});
    put16(out, delay_cs);
    out.insert(out.end(), {0x00, 0x00});
    out.push_back(0x2C);
    put16(out, 0);
    put16(out, 0);
    put16(out, w);
    put16(out, h);
    out.push_back(0x00);
    const auto rgb = frame_to_rgb(frame);
    std::vector<std::uint8_t> indices(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      indices[i] = cube_index(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
    }
    lzw_encode(indices, out);
  }
  out.push_back(0x3B);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write GIF " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace anchor::oracle
