#include "cubitopo/complex.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace cubitopo {

Construction parse_construction(std::string_view s) {
    if (s == "v" || s == "V" || s == "0") return Construction::V;
    if (s == "t" || s == "T" || s == "2") return Construction::T;
    throw std::invalid_argument("unknown construction '" + std::string(s) + "' (expected v or t)");
}

const char* to_string(Construction c) { return c == Construction::V ? "v" : "t"; }

std::vector<std::uint32_t> descending_order(std::span<const double> values) {
    std::vector<std::pair<double, std::uint32_t>> keyed(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        keyed[i] = {values[i], static_cast<std::uint32_t>(i)};
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<std::uint32_t> order(values.size());
    for (std::size_t r = 0; r < keyed.size(); ++r) order[r] = keyed[r].second;
    return order;
}

FilteredComplex::FilteredComplex(const ScalarField& field, Construction construction)
    : shape_(field.shape()),
      construction_(construction),
      values_(field.values().begin(), field.values().end()) {
    const int d = shape_.ndim();
    if (d != 2 && d != 3) throw std::invalid_argument("complex requires a 2D or 3D field");
    if (values_.size() >= std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("grid too large for 32-bit point ranks");

    num_cells_ = 1;
    for (int a = 0; a < d; ++a) {
        const std::size_t n = shape_.extent(a);
        if (n < 1) throw std::invalid_argument("degenerate grid extent");
        cell_extents_[a] = static_cast<std::uint32_t>(construction == Construction::V ? 2 * n - 1 : 2 * n + 1);
        num_cells_ *= cell_extents_[a];
    }
    if (num_cells_ >= std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("grid too large for 32-bit cell ids");
    cell_strides_[d - 1] = 1;
    for (int a = d - 2; a >= 0; --a) cell_strides_[a] = cell_strides_[a + 1] * cell_extents_[a + 1];

    order_ = descending_order(values_);
    rank_.resize(order_.size());
    for (std::uint32_t r = 0; r < order_.size(); ++r) rank_[order_[r]] = r;
}

Cell FilteredComplex::cell(std::uint64_t id) const {
    if (id >= num_cells_)
        throw std::invalid_argument("cell id " + std::to_string(id) + " outside complex of " +
                                    std::to_string(num_cells_) + " cells");
    return Cell{id, dim_of(id)};
}

std::array<std::uint32_t, 3> FilteredComplex::coords(std::uint64_t id) const {
    std::array<std::uint32_t, 3> c{};
    for (int a = 0; a < ndim(); ++a) {
        c[a] = static_cast<std::uint32_t>(id / cell_strides_[a]);
        id %= cell_strides_[a];
    }
    return c;
}

std::uint64_t FilteredComplex::id_of(std::span<const std::uint32_t> c) const {
    std::uint64_t id = 0;
    for (int a = 0; a < ndim(); ++a) id += c[a] * cell_strides_[a];
    return id;
}

int FilteredComplex::dim_of(std::uint64_t id) const {
    const auto c = coords(id);
    int dim = 0;
    for (int a = 0; a < ndim(); ++a) dim += c[a] & 1u;
    return dim;
}

std::uint32_t FilteredComplex::entry_rank(std::uint64_t id) const {
    const auto c = coords(id);
    const auto strides = shape_.strides();
    const int d = ndim();
    // Candidate grid coordinates per axis; a cell touches the product set.
    std::array<std::array<long, 2>, 3> cand{};
    std::array<int, 3> ncand{};
    for (int a = 0; a < d; ++a) {
        const long n = static_cast<long>(shape_.extent(a));
        ncand[a] = 0;
        if (construction_ == Construction::V) {
            if (c[a] & 1u) {
                cand[a][ncand[a]++] = (c[a] - 1) / 2;
                cand[a][ncand[a]++] = (c[a] + 1) / 2;
            } else {
                cand[a][ncand[a]++] = c[a] / 2;
            }
        } else {
            if (c[a] & 1u) {
                cand[a][ncand[a]++] = (c[a] - 1) / 2;
            } else {
                const long hi = c[a] / 2;
                if (hi - 1 >= 0) cand[a][ncand[a]++] = hi - 1;
                if (hi < n) cand[a][ncand[a]++] = hi;
            }
        }
    }
    const bool take_max = construction_ == Construction::V;
    std::uint32_t best = take_max ? 0 : std::numeric_limits<std::uint32_t>::max();
    std::array<int, 3> idx{};
    for (;;) {
        std::size_t p = 0;
        for (int a = 0; a < d; ++a) p += static_cast<std::size_t>(cand[a][idx[a]]) * strides[a];
        best = take_max ? std::max(best, rank_[p]) : std::min(best, rank_[p]);
        int a = d - 1;
        while (a >= 0 && ++idx[a] == ncand[a]) idx[a--] = 0;
        if (a < 0) break;
    }
    return best;
}

std::vector<Cell> FilteredComplex::boundary(Cell cell) const {
    const Cell checked = this->cell(cell.id);
    std::vector<Cell> faces;
    const auto c = coords(checked.id);
    for (int a = 0; a < ndim(); ++a) {
        if (!(c[a] & 1u)) continue;
        faces.push_back(Cell{checked.id - cell_strides_[a], checked.dim - 1});
        faces.push_back(Cell{checked.id + cell_strides_[a], checked.dim - 1});
    }
    std::sort(faces.begin(), faces.end());
    return faces;
}

std::uint64_t FilteredComplex::point_cell(std::size_t point) const {
    const auto strides = shape_.strides();
    std::uint64_t id = 0;
    for (int a = 0; a < ndim(); ++a) {
        const std::size_t x = point / strides[a];
        point %= strides[a];
        id += 2 * x * cell_strides_[a];
    }
    return id;
}

FilteredComplex build_complex(const ScalarField& field, Construction construction) {
    return FilteredComplex(field, construction);
}

std::vector<Cell> boundary(const FilteredComplex& complex, Cell cell) { return complex.boundary(cell); }

}  // namespace cubitopo
