#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "fedsplit/errors.hpp"

namespace fedsplit
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point z = (z_1, ..., z_m) of (R^d)^m. Blocks are the columns of a dense
/// d x m matrix, so each block is contiguous in memory.
class BlockVector
{
public:
    BlockVector(Eigen::Index d, Eigen::Index m) : data_(Matrix::Zero(d, m))
    {
        if (d < 1 || m < 1) {
            throw DimensionMismatch("BlockVector requires d >= 1 and m >= 1");
        }
    }

    explicit BlockVector(Matrix blocks) : data_(std::move(blocks))
    {
        if (data_.rows() < 1 || data_.cols() < 1) {
            throw DimensionMismatch("BlockVector requires d >= 1 and m >= 1");
        }
    }

    static BlockVector replicate(const Vector& x, Eigen::Index m)
    {
        BlockVector z(x.size(), m);
        for (Eigen::Index j = 0; j < m; ++j) {
            z.data_.col(j) = x;
        }
        return z;
    }

    static BlockVector from_blocks(const std::vector<Vector>& blocks)
    {
        if (blocks.empty()) {
            throw DimensionMismatch("BlockVector requires at least one block");
        }
        BlockVector z(blocks.front().size(), static_cast<Eigen::Index>(blocks.size()));
        for (std::size_t j = 0; j < blocks.size(); ++j) {
            if (blocks[j].size() != z.dim()) {
                throw DimensionMismatch("all blocks must share dimension d");
            }
            z.data_.col(static_cast<Eigen::Index>(j)) = blocks[j];
        }
        return z;
    }

    Eigen::Index dim() const noexcept { return data_.rows(); }
    Eigen::Index num_blocks() const noexcept { return data_.cols(); }

    auto block(Eigen::Index j) { return data_.col(j); }
    auto block(Eigen::Index j) const { return data_.col(j); }

    const Matrix& matrix() const noexcept { return data_; }

    /// Euclidean norm on the product space.
    double norm() const { return data_.norm(); }

    BlockVector& operator+=(const BlockVector& other)
    {
        check_same_shape(other);
        data_ += other.data_;
        return *this;
    }

    BlockVector& operator-=(const BlockVector& other)
    {
        check_same_shape(other);
        data_ -= other.data_;
        return *this;
    }

    BlockVector& operator*=(double scale)
    {
        data_ *= scale;
        return *this;
    }

    friend BlockVector operator+(BlockVector lhs, const BlockVector& rhs) { return lhs += rhs; }
    friend BlockVector operator-(BlockVector lhs, const BlockVector& rhs) { return lhs -= rhs; }
    friend BlockVector operator*(double scale, BlockVector z) { return z *= scale; }

    bool operator==(const BlockVector& other) const
    {
        return data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols() &&
               data_ == other.data_;
    }

private:
    void check_same_shape(const BlockVector& other) const
    {
        if (dim() != other.dim() || num_blocks() != other.num_blocks()) {
            throw DimensionMismatch("BlockVector shapes differ");
        }
    }

    Matrix data_;
};

/// (1/m) sum_j z_j, summed in ascending client order.
inline Vector block_average(const BlockVector& z)
{
    Vector sum = z.block(0);
    for (Eigen::Index j = 1; j < z.num_blocks(); ++j) {
        sum += z.block(j);
    }
    return sum / static_cast<double>(z.num_blocks());
}

/// Reflection through the consensus subspace: block j becomes 2 zbar - z_j.
inline BlockVector reflect_consensus(const BlockVector& z)
{
    const Vector twice_avg = 2.0 * block_average(z);
    BlockVector out(z.dim(), z.num_blocks());
    for (Eigen::Index j = 0; j < z.num_blocks(); ++j) {
        out.block(j) = twice_avg - z.block(j);
    }
    return out;
}

inline BlockVector broadcast_add(const Vector& x, const BlockVector& z)
{
    if (x.size() != z.dim()) {
        throw DimensionMismatch("broadcast_add: vector has dimension " +
                                std::to_string(x.size()) + ", blocks have " +
                                std::to_string(z.dim()));
    }
    BlockVector out = z;
    for (Eigen::Index j = 0; j < z.num_blocks(); ++j) {
        out.block(j) += x;
    }
    return out;
}

} // namespace fedsplit
