#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbz {

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::filesystem::path& path,
                                 std::streamoff offset) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) {
        std::ostringstream os;
        os << "mnist: truncated read at offset " << offset << " in " << path.string();
        throw std::runtime_error(os.str());
    }
    return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) |
           (std::uint32_t{buf[2]} << 8) | std::uint32_t{buf[3]};
}

struct IdxHeader {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
};

inline IdxHeader read_idx3_header(std::istream& in, const std::filesystem::path& path) {
    const std::uint32_t magic = read_be_u32(in, path, 0);
    if (magic != 2051) {
        std::ostringstream os;
        os << "mnist: bad magic " << magic << " at offset 0 in " << path.string()
           << " (expected 2051 for an IDX3 image file)";
        throw std::runtime_error(os.str());
    }
    IdxHeader h;
    h.count = read_be_u32(in, path, 4);
    h.rows = read_be_u32(in, path, 8);
    h.cols = read_be_u32(in, path, 12);
    return h;
}

}  // namespace detail

inline std::size_t mnist_image_count(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("mnist: cannot open " + path.string());
    return detail::read_idx3_header(in, path).count;
}

// Loads one image from an IDX3-ubyte file as a row-major vector of pixel
// values scaled to [0, 1].
inline std::vector<double> load_mnist_image(const std::filesystem::path& path,
                                            std::size_t index) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("mnist: cannot open " + path.string());
    const auto h = detail::read_idx3_header(in, path);
    if (index >= h.count) {
        std::ostringstream os;
        os << "mnist: index " << index << " out of range (file holds " << h.count
           << " images)";
        throw std::invalid_argument(os.str());
    }
    const std::size_t pixels = static_cast<std::size_t>(h.rows) * h.cols;
    const std::streamoff offset = 16 + static_cast<std::streamoff>(index) * pixels;
    in.seekg(offset);
    std::vector<unsigned char> raw(pixels);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels))) {
        std::ostringstream os;
        os << "mnist: truncated image data at offset " << offset << " in " << path.string();
        throw std::runtime_error(os.str());
    }
    std::vector<double> img(pixels);
    for (std::size_t k = 0; k < pixels; ++k) img[k] = raw[k] / 255.0;
    return img;
}

}  // namespace kbz
