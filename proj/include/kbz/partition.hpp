#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "kbz/dense_matrix.hpp"
#include "kbz/random.hpp"

namespace kbz {

// Contiguous index blocks over rows or columns of a matrix, with an
// optional cumulative sampling distribution by block Frobenius weight.
// Immutable after construction.
class Partition {
public:
    Partition(Axis axis, std::vector<IndexRange> blocks)
        : axis_(axis), blocks_(std::move(blocks)) {}

    Partition(Axis axis, std::vector<IndexRange> blocks, const DenseMatrix& a)
        : axis_(axis), blocks_(std::move(blocks)) {
        block_frob_sq_.reserve(blocks_.size());
        for (const auto& blk : blocks_) {
            double w = kbz::block_frob_sq(a, blk, axis_);
            if (w < min_block_weight) w = 0.0;  // degenerate blocks get zero probability
            block_frob_sq_.push_back(w);
        }
        double total = 0.0;
        for (double w : block_frob_sq_) total += w;
        total_weight_ = total;
        if (total > 0.0) {
            cumulative_.reserve(blocks_.size());
            double acc = 0.0;
            for (double w : block_frob_sq_) {
                acc += w;
                cumulative_.push_back(acc / total);
            }
            cumulative_.back() = 1.0;
        }
    }

    Axis axis() const { return axis_; }
    const std::vector<IndexRange>& blocks() const { return blocks_; }
    const IndexRange& block(std::size_t i) const { return blocks_[i]; }
    std::size_t size() const { return blocks_.size(); }

    bool weighted() const { return !cumulative_.empty(); }
    const std::vector<double>& block_frob_sq() const { return block_frob_sq_; }
    const std::vector<double>& cumulative() const { return cumulative_; }
    double total_weight() const { return total_weight_; }

private:
    static constexpr double min_block_weight = 1e-300;

    Axis axis_;
    std::vector<IndexRange> blocks_;
    std::vector<double> block_frob_sq_;
    std::vector<double> cumulative_;
    double total_weight_ = 0.0;
};

inline std::vector<IndexRange> uniform_blocks(std::size_t extent, std::size_t tau) {
    if (extent < 1) throw std::invalid_argument("partition_uniform: extent must be >= 1");
    if (tau < 1 || tau > extent)
        throw std::invalid_argument("partition_uniform: tau must satisfy 1 <= tau <= extent");
    std::vector<IndexRange> blocks;
    blocks.reserve((extent + tau - 1) / tau);
    for (std::size_t begin = 0; begin < extent; begin += tau)
        blocks.push_back({begin, std::min(begin + tau, extent)});
    return blocks;
}

// Contiguous blocks of uniform size tau; the last block holds the remainder.
inline Partition partition_uniform(std::size_t extent, std::size_t tau, Axis axis) {
    return Partition(axis, uniform_blocks(extent, tau));
}

// Same, with sampling weights taken from the matrix block Frobenius norms.
inline Partition partition_uniform(const DenseMatrix& a, std::size_t tau, Axis axis) {
    const std::size_t extent = axis == Axis::rows ? a.rows() : a.cols();
    return Partition(axis, uniform_blocks(extent, tau), a);
}

// Returns block index i with probability block_frob_sq[i] / frob_sq.
// Consumes exactly one uniform draw.
inline std::size_t sample_block(const Partition& p, RandomStream& rng) {
    if (!p.weighted() || p.total_weight() <= 0.0)
        throw std::runtime_error("sample_block: partition has no positive block weights");
    const double u = rng.uniform();
    const auto& cum = p.cumulative();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return std::min(static_cast<std::size_t>(it - cum.begin()), p.size() - 1);
}

}  // namespace kbz
