#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "cubitopo/complex.hpp"

using namespace cubitopo;

namespace {

ScalarField random_field(const GridShape& shape, std::mt19937_64& rng, int levels) {
    std::vector<double> v(shape.size());
    for (auto& x : v) x = static_cast<double>(rng() % levels) / levels;
    return ScalarField(shape, std::move(v));
}

}  // namespace

TEST_CASE("construction names") {
    CHECK(parse_construction("V") == Construction::V);
    CHECK(parse_construction("t") == Construction::T);
    CHECK(std::string(to_string(Construction::T)) == "t");
    CHECK(parse_construction(to_string(Construction::V)) == Construction::V);
    CHECK_THROWS_AS(parse_construction("X"), std::invalid_argument);
}

TEST_CASE("doubled extents and cell counts") {
    const ScalarField f(GridShape({3, 4}), std::vector<double>(12, 0.5));
    const FilteredComplex v(f, Construction::V), t(f, Construction::T);
    CHECK(v.cell_extents()[0] == 5);
    CHECK(v.cell_extents()[1] == 7);
    CHECK(t.cell_extents()[0] == 7);
    CHECK(t.cell_extents()[1] == 9);
    CHECK(v.num_cells() == 35);
    CHECK(t.num_cells() == 63);
    CHECK_THROWS_AS(v.cell(35), std::invalid_argument);
}

TEST_CASE("descending order breaks ties by index") {
    const std::vector<double> vals{0.5, 0.9, 0.5, 0.1, 0.9};
    CHECK(descending_order(vals) == std::vector<std::uint32_t>{1, 4, 0, 2, 3});
}

TEST_CASE("boundary faces and dimensions") {
    const ScalarField f(GridShape({3, 3, 3}), std::vector<double>(27, 1.0));
    for (auto con : {Construction::V, Construction::T}) {
        const FilteredComplex c(f, con);
        for (std::uint64_t id = 0; id < c.num_cells(); ++id) {
            const Cell cell = c.cell(id);
            const auto faces = c.boundary(cell);
            CHECK(faces.size() == static_cast<std::size_t>(2 * cell.dim));
            for (const auto& face : faces) CHECK(face.dim == cell.dim - 1);
            // The boundary of a boundary is empty over Z/2.
            std::multiset<std::uint64_t> bb;
            for (const auto& face : faces)
                for (const auto& ff : c.boundary(face)) bb.insert(ff.id);
            for (auto x : bb) CHECK(bb.count(x) % 2 == 0);
        }
    }
}

TEST_CASE("faces enter no later than cofaces") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const GridShape shape = t % 2 ? GridShape({4, 3, 5}) : GridShape({6, 7});
        const ScalarField f = random_field(shape, rng, t % 3 == 0 ? 3 : 1000);
        for (auto con : {Construction::V, Construction::T}) {
            const FilteredComplex c(f, con);
            for (std::uint64_t id = 0; id < c.num_cells(); ++id)
                for (const auto& face : c.boundary(c.cell(id))) {
                    CHECK(c.entry_rank(face.id) <= c.entry_rank(id));
                    CHECK(c.value(face.id) >= c.value(id));
                }
        }
    }
}

TEST_CASE("entry values follow the construction rule") {
    // 2x2 field: V cells take the min of their vertices, T cells the max of
    // their incident squares.
    const ScalarField f(GridShape({2, 2}), {0.1, 0.4, 0.3, 0.8});
    const FilteredComplex v(f, Construction::V);
    const std::uint32_t square[] = {1, 1};
    CHECK(v.value(v.id_of(square)) == 0.1);
    const std::uint32_t edge[] = {0, 1};
    CHECK(v.value(v.id_of(edge)) == 0.1);
    const std::uint32_t edge2[] = {2, 1};
    CHECK(v.value(v.id_of(edge2)) == 0.3);

    const FilteredComplex t(f, Construction::T);
    const std::uint32_t centre[] = {2, 2};
    CHECK(t.value(t.id_of(centre)) == 0.8);
    const std::uint32_t corner[] = {0, 0};
    CHECK(t.value(t.id_of(corner)) == 0.1);
    const std::uint32_t top_edge[] = {0, 3};
    CHECK(t.value(t.id_of(top_edge)) == 0.4);
}

TEST_CASE("point cells") {
    const ScalarField f(GridShape({3, 4}), std::vector<double>(12, 0.0));
    const FilteredComplex v(f, Construction::V), t(f, Construction::T);
    for (std::size_t p = 0; p < 12; ++p) {
        const auto cv = v.coords(v.point_cell(p));
        CHECK(cv[0] == 2 * (p / 4));
        CHECK(cv[1] == 2 * (p % 4));
        CHECK(v.dim_of(v.point_cell(p)) == 0);
        CHECK(t.entry_point(t.point_cell(p) + t.cell_stride(0) + t.cell_stride(1)) == p);
    }
}
