#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cubitopo/grid.hpp"

namespace cubitopo {

/// How grid points become cells.
///
/// V: points are vertices (0-cells); foreground is 4-connected in 2D and
///    6-connected in 3D. A cell is present once all of its vertices are.
/// T: points are top-dimensional cells; foreground is 8-/26-connected. A cell
///    is present once any top-cell containing it is.
enum class Construction { V, T };

Construction parse_construction(std::string_view s);
const char* to_string(Construction c);

/// A cell of the cubical complex, identified by its row-major index in the
/// doubled-coordinate grid. The number of odd coordinates is the dimension.
struct Cell {
    std::uint64_t id = 0;
    int dim = 0;

    auto operator<=>(const Cell&) const = default;
};

/// Cubical complex filtered by descending threshold on a scalar field.
///
/// Every cell enters the filtration together with exactly one grid point (its
/// "entry point"): the vertex with the lowest value for V, the incident top
/// cell with the highest value for T. Grid points are ranked by descending
/// value with ties broken by ascending linear index; cells are totally
/// ordered by (entry rank, dimension, id), which puts every face before its
/// cofaces.
///
/// Doubled extents are 2n-1 per axis for V and 2n+1 for T.
class FilteredComplex {
public:
    FilteredComplex(const ScalarField& field, Construction construction);

    const GridShape& shape() const { return shape_; }
    Construction construction() const { return construction_; }
    int ndim() const { return shape_.ndim(); }
    std::span<const double> values() const { return values_; }

    std::span<const std::uint32_t> cell_extents() const { return {cell_extents_.data(), std::size_t(ndim())}; }
    std::uint64_t num_cells() const { return num_cells_; }
    std::uint64_t cell_stride(int axis) const { return cell_strides_[axis]; }

    /// Validated cell for an id; throws std::invalid_argument when out of range.
    Cell cell(std::uint64_t id) const;
    int dim_of(std::uint64_t id) const;
    std::array<std::uint32_t, 3> coords(std::uint64_t id) const;
    std::uint64_t id_of(std::span<const std::uint32_t> coords) const;

    /// Position of grid point `point` in the descending value order.
    std::uint32_t rank(std::size_t point) const { return rank_[point]; }
    std::size_t point_at_rank(std::uint32_t r) const { return order_[r]; }
    std::span<const std::uint32_t> ranks() const { return rank_; }
    std::span<const std::uint32_t> order() const { return order_; }

    std::uint32_t entry_rank(std::uint64_t id) const;
    std::size_t entry_point(std::uint64_t id) const { return order_[entry_rank(id)]; }
    /// Threshold p at which the cell appears: the cell is present for all p <= value.
    double value(std::uint64_t id) const { return values_[entry_point(id)]; }

    /// Codimension-1 faces, 2*dim of them; empty for vertices.
    std::vector<Cell> boundary(Cell cell) const;

    /// Vertex (V) or lowest corner vertex (T) of grid point `point`.
    std::uint64_t point_cell(std::size_t point) const;

private:
    GridShape shape_;
    Construction construction_;
    std::vector<double> values_;
    std::vector<std::uint32_t> rank_;
    std::vector<std::uint32_t> order_;
    std::array<std::uint32_t, 3> cell_extents_{};
    std::array<std::uint64_t, 3> cell_strides_{};
    std::uint64_t num_cells_ = 0;
};

FilteredComplex build_complex(const ScalarField& field, Construction construction);

std::vector<Cell> boundary(const FilteredComplex& complex, Cell cell);

/// Grid-point order by descending value, ties by ascending index.
std::vector<std::uint32_t> descending_order(std::span<const double> values);

}  // namespace cubitopo
