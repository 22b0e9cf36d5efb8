#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "anchor/core/types.hpp"

namespace anchor::oracle {

void write_png(const std::filesystem::path& path, const core::FrameImage& frame);
void write_png_rgb(const std::filesystem::path& path, std::span<const std::uint8_t> rgb,
                   int height, int width);
core::FrameImage read_png(const std::filesystem::path& path);

// Looping animated GIF over a 6x7x6 color cube. `delay_cs` is per frame in
// hundredths of a second.
void write_gif(const std::filesystem::path& path, std::span<const core::FrameImage> frames,
               int delay_cs = 8);

}  // namespace anchor::oracle
