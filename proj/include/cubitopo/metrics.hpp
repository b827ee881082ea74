#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cubitopo/complex.hpp"
#include "cubitopo/grid.hpp"
#include "cubitopo/prior.hpp"

namespace cubitopo {

/// Connected components of a mask. Face adjacency (4/6) unless `full` is
/// set (8/26). Components are numbered 1.. in order of their lowest linear
/// index; background points get 0.
struct Components {
    std::vector<std::int32_t> labels;
    int count = 0;
    std::vector<std::size_t> sizes;  // sizes[c - 1] for component c
};
Components label_components(const BitField& mask, bool full);

/// Betti numbers of a binary mask, computed without persistence: b0 by
/// component labelling, the Euler characteristic by counting the cells of
/// the binary complex, and in 3D b2 from the enclosed background components.
std::vector<int> betti_oracle(const BitField& mask, Construction construction);

/// Euler characteristic of the cubical complex spanned by a mask.
long long euler_characteristic(const BitField& mask, Construction construction);

struct SubsetBetti {
    ClassSubset subset;
    std::vector<int> predicted;
    std::vector<int> target;
    int error = 0;  // L1 distance between the two
};

struct BettiError {
    int total = 0;
    std::vector<SubsetBetti> subsets;
};

/// Sum over the evaluation subsets of the L1 distance between the Betti
/// vector of the predicted union mask and the prior. The prior must list every
/// foreground singleton and pair, and in 3D every triple.
BettiError betti_error(const LabelMap& pred, const BettiPrior& prior, Construction construction);

/// Subsets betti_error needs for `num_classes` classes in `ndim` dimensions.
std::vector<ClassSubset> required_subsets(int num_classes, int ndim);

/// Dice overlap of class `cls`; 1 when both masks are empty.
double dice(const LabelMap& pred, const LabelMap& gt, int cls);
/// Size-weighted Dice over all foreground classes; 1 when all are empty.
double gdice(const LabelMap& pred, const LabelMap& gt);

/// Symmetric Hausdorff distance in physical units between the boundary
/// points of the class-`cls` masks. Empty when either mask is empty.
std::optional<double> hausdorff(const LabelMap& pred, const LabelMap& gt, int cls);

/// Argmax labels with every foreground class reduced to its largest
/// face-connected component. Removed points become background; equal sizes
/// keep the component with the lowest first index.
LabelMap cca_baseline(const ProbSegmentation& seg);
LabelMap cca_baseline(const LabelMap& labels);

struct TopoReport {
    std::string case_id;
    int be = 0;
    int ts = 0;
    std::vector<double> dice;                     // per foreground class (class 2 first)
    double gdice = 0.0;
    std::vector<std::optional<double>> hausdorff;  // per foreground class, mm
    std::vector<SubsetBetti> subsets;
};

/// Full report for one prediction against its ground truth.
TopoReport evaluate(const LabelMap& pred, const LabelMap& gt, const BettiPrior& prior,
                    Construction construction, std::string case_id = {});

/// Linear-interpolated percentile (0..100) of unsorted values.
double percentile(std::vector<double> values, double q);

struct Quartiles {
    double p25 = 0.0, p50 = 0.0, p75 = 0.0;
};

struct Summary {
    std::size_t n = 0;
    Quartiles be;
    double be_p98 = 0.0, be_p99 = 0.0, be_p100 = 0.0;
    Quartiles gdice;
    std::vector<Quartiles> dice;                    // per foreground class
    std::vector<std::optional<Quartiles>> hausdorff;  // over defined values only
    double rho = 0.0;        // percent of cases with TS = 1
    double sigma_rho = 0.0;  // binomial standard deviation, percent
};

Summary aggregate(const std::vector<TopoReport>& reports);

/// `{"cases": [...], "summary": {...}}`.
std::string report_json(const std::vector<TopoReport>& reports, const Summary& summary,
                        const std::vector<std::string>& class_names);
/// One row per case.
void write_report_csv(std::ostream& out, const std::vector<TopoReport>& reports,
                      const std::vector<std::string>& class_names);

}  // namespace cubitopo
