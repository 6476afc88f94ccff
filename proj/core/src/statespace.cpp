#include "cpmdp/statespace.hpp"

#include "cpmdp/errors.hpp"

#include <fmt/format.h>

#include <limits>

namespace cpmdp {

std::uint64_t num_states(std::span<const std::uint64_t> dims) {
    if (dims.empty()) throw SizingError("grid shape needs at least one axis");
    std::uint64_t total = 1;
    for (auto d : dims) {
        if (d == 0) throw SizingError("grid extents must be positive");
        if (total > std::numeric_limits<std::uint64_t>::max() / d)
            throw SizingError("number of states overflows 64-bit state ids");
        total *= d;
    }
    return total;
}

GridShape::GridShape(std::vector<std::uint64_t> dims)
    : dims_(std::move(dims)), strides_(dims_.size()), total_(cpmdp::num_states(dims_)) {
    std::uint64_t w = 1;
    for (std::size_t k = dims_.size(); k-- > 0;) {
        strides_[k] = w;
        w *= dims_[k];
    }
}

StateId linear_index(std::span<const std::uint64_t> coords, const GridShape& shape) {
    if (coords.size() != shape.rank())
        throw BoundsError(fmt::format("multi-index has {} coordinates, grid has {} axes",
                                      coords.size(), shape.rank()));
    StateId s = 0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
        if (coords[k] >= shape.extent(k))
            throw BoundsError(fmt::format("coordinate {} on axis {} out of range [0, {})",
                                          coords[k], k, shape.extent(k)));
        s += coords[k] * shape.stride(k);
    }
    return s;
}

MultiIndex multi_index(StateId s, const GridShape& shape) {
    if (s >= shape.num_states())
        throw BoundsError(
            fmt::format("state id {} out of range [0, {})", s, shape.num_states()));
    MultiIndex m(shape.rank());
    for (std::size_t k = 0; k < shape.rank(); ++k) {
        m[k] = s / shape.stride(k);
        s %= shape.stride(k);
    }
    return m;
}

StepResult step(std::span<const std::uint64_t> coords, std::size_t axis, int direction,
                const GridShape& shape) {
    if (axis >= shape.rank())
        throw BoundsError(fmt::format("axis {} out of range for rank {}", axis, shape.rank()));
    StepResult r{MultiIndex(coords.begin(), coords.end()), false};
    auto& c = r.coords[axis];
    if (direction < 0 && c > 0) {
        --c;
        r.moved = true;
    } else if (direction > 0 && c + 1 < shape.extent(axis)) {
        ++c;
        r.moved = true;
    }
    return r;
}

StateId step_flat(StateId s, std::size_t axis, int direction, const GridShape& shape) {
    const auto stride = shape.stride(axis);
    const auto c = (s / stride) % shape.extent(axis);
    if (direction < 0) return c > 0 ? s - stride : s;
    return c + 1 < shape.extent(axis) ? s + stride : s;
}

}  // namespace cpmdp
