#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cubitopo/complex.hpp"
#include "cubitopo/grid.hpp"

namespace cubitopo {

/// Death threshold assigned to features that never die.
inline constexpr double kEssentialDeath = 0.0;

/// One persistence interval in the descending-threshold convention: the
/// feature exists for thresholds p with death < p <= birth.
struct Bar {
    int dim = 0;
    double birth = 0.0;
    double death = 0.0;
    Cell birth_cell;
    std::optional<Cell> death_cell;  // empty for essential features
    std::size_t birth_point = 0;     // grid point whose value is `birth`
    std::optional<std::size_t> death_point;

    double persistence() const { return birth - death; }
    bool essential() const { return !death_cell.has_value(); }

    bool operator==(const Bar&) const = default;
};

/// Bars of one field. Pairs whose birth and death cells enter at the same
/// grid point are not features and are never stored; bars of zero
/// persistence between distinct, equal-valued points are kept.
struct Barcode {
    std::vector<Bar> bars;
    std::string field_id;
    int ndim = 0;

    std::size_t count(int dim) const;
    /// Betti number of dimension `dim` of the superlevel set {value >= p}.
    int betti_at(int dim, double p) const;
    std::vector<int> betti_at(double p) const;

    bool operator==(const Barcode&) const = default;
};

/// Persistence barcode of the superlevel filtration for dims 0..max_dim.
///
/// Dimension 0 uses union-find over the 1-skeleton with the elder rule. The
/// top dimension N-1 uses union-find on the dual graph of top cells (with the
/// outside as an extra node). In 3D, dimension 1 is reduced over Z/2 with
/// clearing of columns already paired in dimension 2 and compression of rows
/// already paired in dimension 0.
Barcode compute_barcode(const FilteredComplex& complex, int max_dim);
Barcode compute_barcode(const ScalarField& field, Construction construction, int max_dim);

/// Bars of dimension `dim` by descending persistence, then higher birth, then
/// lower birth-cell id.
std::vector<Bar> rank_bars(const Barcode& barcode, int dim);

/// Error from one input of a batch computation.
class FieldError : public std::runtime_error {
public:
    FieldError(std::size_t index, const std::string& what);
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

/// compute_barcode over several fields on a worker pool. The output order
/// matches the input; results do not depend on the thread count.
std::vector<Barcode> barcodes_parallel(const std::vector<ScalarField>& fields, Construction construction,
                                       int max_dim, std::size_t threads = 0);

/// CSV with header `dim,birth,death,persistence,birth_cell,death_cell`; cells
/// are written as doubled-coordinate tuples "(c0 c1 ...)". Bars of zero
/// persistence are omitted.
void write_barcode_csv(std::ostream& out, const Barcode& barcode, const FilteredComplex& complex);

}  // namespace cubitopo
