#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>

namespace kbz {

// Writes a P2 (ASCII) PGM image with maxval 255;
// pixel = round(255 * clamp(v, 0, 1)).
inline void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
                      std::size_t width, std::size_t height) {
    if (pixels.size() != width * height)
        throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
    out << "P2\n" << width << ' ' << height << "\n255\n";
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const double v = std::clamp(pixels[r * width + c], 0.0, 1.0);
            if (c) out << ' ';
            out << static_cast<int>(std::lround(255.0 * v));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

}  // namespace kbz
