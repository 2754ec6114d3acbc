#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kbz/mnist.hpp"
#include "kbz/pgm.hpp"
#include "kbz/solver.hpp"

using namespace kbz;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void put_be_u32(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::filesystem::path write_idx3(const std::string& name, std::uint32_t magic,
                                 std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                 bool truncate_data = false) {
    const auto path = temp_file(name);
    std::ofstream out(path, std::ios::binary);
    put_be_u32(out, magic);
    put_be_u32(out, count);
    put_be_u32(out, rows);
    put_be_u32(out, cols);
    std::size_t total = static_cast<std::size_t>(count) * rows * cols;
    if (truncate_data && total > 10) total -= 10;
    for (std::size_t k = 0; k < total; ++k) {
        const unsigned char byte = static_cast<unsigned char>(k % 256);
        out.write(reinterpret_cast<const char*>(&byte), 1);
    }
    return path;
}

}  // namespace

TEST(Mnist, LoadsScaledPixels) {
    const auto path = write_idx3("kbz_idx_ok.idx", 2051, 2, 28, 28);
    EXPECT_EQ(mnist_image_count(path), 2u);
    const auto img = load_mnist_image(path, 1);
    EXPECT_EQ(img.size(), 784u);
    for (double v : img) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    // pixel value k % 256 scaled by 255, second image starts at byte 784
    EXPECT_DOUBLE_EQ(img[0], ((784u) % 256) / 255.0);
    std::filesystem::remove(path);
}

TEST(Mnist, RejectsLabelFileMagic) {
    const auto path = write_idx3("kbz_idx_labels.idx", 2049, 2, 28, 28);
    try {
        load_mnist_image(path, 0);
        FAIL() << "expected a format error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("2049"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST(Mnist, RejectsTruncatedData) {
    const auto path = write_idx3("kbz_idx_trunc.idx", 2051, 2, 28, 28, true);
    try {
        load_mnist_image(path, 1);
        FAIL() << "expected a format error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST(Mnist, IndexOutOfRange) {
    const auto path = write_idx3("kbz_idx_range.idx", 2051, 2, 28, 28);
    EXPECT_THROW(load_mnist_image(path, 2), std::invalid_argument);
    std::filesystem::remove(path);
}

TEST(Pgm, WritesValidP2) {
    std::vector<double> img(784, 0.0);
    img[0] = 1.0;
    img[1] = 0.5;
    img[2] = -0.25;  // clamps to 0
    img[3] = 2.0;    // clamps to 255
    const auto path = temp_file("kbz_test.pgm");
    write_pgm(path, img, 28, 28);

    std::ifstream in(path);
    std::string tag;
    std::size_t w = 0, h = 0;
    int maxval = 0;
    in >> tag >> w >> h >> maxval;
    EXPECT_EQ(tag, "P2");
    EXPECT_EQ(w, 28u);
    EXPECT_EQ(h, 28u);
    EXPECT_EQ(maxval, 255);
    std::vector<int> pixels;
    int v;
    while (in >> v) pixels.push_back(v);
    ASSERT_EQ(pixels.size(), 784u);
    EXPECT_EQ(pixels[0], 255);
    EXPECT_EQ(pixels[1], 128);
    EXPECT_EQ(pixels[2], 0);
    EXPECT_EQ(pixels[3], 255);
    for (int p : pixels) {
        EXPECT_GE(p, 0);
        EXPECT_LE(p, 255);
    }
    std::filesystem::remove(path);
}

TEST(Pgm, RejectsMismatchedDimensions) {
    EXPECT_THROW(write_pgm(temp_file("kbz_bad.pgm"), std::vector<double>(10, 0.0), 4, 4),
                 std::invalid_argument);
}

TEST(TraceCsv, HeaderAndRows) {
    ConvergenceTrace trace;
    trace.records.push_back({10, 0.5, std::numeric_limits<double>::quiet_NaN(), 1.25, 2.0,
                             3.0, 0.001});
    std::ostringstream os;
    trace.write_csv(os);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    EXPECT_EQ(header, "iter,rel_err,bregman_x,dual_residual,step_z,step_x,elapsed_s");
    EXPECT_EQ(row.substr(0, 7), "10,0.5,");
}
