#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace sonoseg {

// Dense 2-D grid, row-major. Rows run along depth (axial sample index i),
// columns along the A-line index j.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        assert(data_.size() == rows_ * cols_);
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    // Clamped access: out-of-range indices are replicated from the border.
    const T& clamped(long r, long c) const {
        r = std::clamp(r, 0L, static_cast<long>(rows_) - 1);
        c = std::clamp(c, 0L, static_cast<long>(cols_) - 1);
        return (*this)(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }

    bool contains(long r, long c) const {
        return r >= 0 && c >= 0 && r < static_cast<long>(rows_) && c < static_cast<long>(cols_);
    }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T> column(std::size_t c) const {
        std::vector<T> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }
    template <typename Range>
    void set_column(std::size_t c, const Range& values) {
        std::size_t r = 0;
        for (const auto& v : values) (*this)(r++, c) = static_cast<T>(v);
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    bool operator==(const Grid&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using RealGrid = Grid<double>;
using Mask = Grid<unsigned char>;

template <typename To, typename From>
Grid<To> grid_cast(const Grid<From>& g) {
    Grid<To> out(g.rows(), g.cols());
    std::transform(g.begin(), g.end(), out.begin(), [](const From& v) { return static_cast<To>(v); });
    return out;
}

struct PixelSpacing {
    double axial_mm = 1.0;    // row pitch
    double lateral_mm = 1.0;  // column pitch
};

}  // namespace sonoseg
