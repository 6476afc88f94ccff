#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cpmdp {

/// Flat state identifier in [0, S). Row-major over the grid axes.
using StateId = std::uint64_t;

/// Composite state: one coordinate per axis.
using MultiIndex = std::vector<std::uint64_t>;

/**
 * Extents of an n-dimensional grid, one entry per axis (D = rank()).
 *
 * Construction validates that there is at least one axis, every extent is
 * positive and the product of extents fits in a StateId.
 */
class GridShape {
public:
    GridShape() = default;
    explicit GridShape(std::vector<std::uint64_t> dims);

    std::size_t rank() const { return dims_.size(); }
    std::span<const std::uint64_t> dims() const { return dims_; }
    std::uint64_t extent(std::size_t axis) const { return dims_.at(axis); }

    /// Row-major weight of an axis: product of the extents after it.
    std::uint64_t stride(std::size_t axis) const { return strides_.at(axis); }

    std::uint64_t num_states() const { return total_; }

    bool operator==(const GridShape& other) const { return dims_ == other.dims_; }

private:
    std::vector<std::uint64_t> dims_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t total_ = 0;
};

/// Product of the extents. Throws SizingError on overflow.
std::uint64_t num_states(std::span<const std::uint64_t> dims);
inline std::uint64_t num_states(const GridShape& shape) { return shape.num_states(); }

/// Row-major flattening. Throws BoundsError if a coordinate is out of range.
StateId linear_index(std::span<const std::uint64_t> coords, const GridShape& shape);

/// Inverse of linear_index. Throws BoundsError if s >= S.
MultiIndex multi_index(StateId s, const GridShape& shape);

struct StepResult {
    MultiIndex coords;
    bool moved = false;
};

/// Unit move along one axis; the input is returned unchanged when the move
/// would leave the grid. direction must be -1 or +1.
StepResult step(std::span<const std::uint64_t> coords, std::size_t axis, int direction,
                const GridShape& shape);

/// Same as step() but on flat ids, without materializing coordinates.
/// Returns s itself when the move is blocked by the boundary.
StateId step_flat(StateId s, std::size_t axis, int direction, const GridShape& shape);

}  // namespace cpmdp
