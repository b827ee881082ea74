#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cubitopo/complex.hpp"
#include "cubitopo/grid.hpp"
#include "cubitopo/prior.hpp"

namespace cubitopo {

enum class PhantomTask { ShortAxis2D, WholeHeart3D };
PhantomTask parse_task(std::string_view s);
const char* to_string(PhantomTask t);

enum class DefectType { ExtraComponent, HolePuncture, Bridge, LoopBreak };
DefectType parse_defect_type(std::string_view s);
const char* to_string(DefectType t);

/// One injected error. `magnitude` is a size in voxels: blob or hole radius,
/// bridge width, gap width.
///
/// `partner` (0 = none) is the second class of pair defects: a hole punched
/// across the target/partner interface, visible only in their union, or the
/// class a bridge grows into.
struct Defect {
    DefectType type = DefectType::ExtraComponent;
    int target = 2;
    double magnitude = 3.0;
    int partner = 0;

    bool operator==(const Defect&) const = default;
};

/// "type:class:magnitude[:partner]" with class names from the task prior,
/// e.g. "hole-puncture:my:1.5:rv".
Defect parse_defect(std::string_view s, const BettiPrior& prior);
std::string format_defect(const Defect& d, const BettiPrior& prior);

struct PhantomSpec {
    PhantomTask task = PhantomTask::ShortAxis2D;
    GridShape shape;  // empty = task default (128x128 or 40^3)
    std::uint64_t seed = 0;
    std::vector<Defect> defects;
    double softness = 0.5;   // (0, 0.5]; larger blurs boundaries more
    double noise = 0.05;     // amplitude of seeded logit jitter

    void validate() const;
};

struct PhantomCase {
    PhantomSpec spec;
    ProbSegmentation probs;  // blurred, defective
    LabelMap truth;          // clean anatomy
    LabelMap defective;      // labels the probabilities were blurred from
    BettiPrior prior;
    // (voxel, new label) written by each defect, in spec.defects order
    std::vector<std::vector<std::pair<std::size_t, int>>> edits;
};

GridShape default_shape(PhantomTask task);
BettiPrior task_prior(PhantomTask task);

/// Deterministic synthetic case. Throws std::invalid_argument when a defect
/// cannot be placed.
PhantomCase generate(const PhantomSpec& spec);

/// Seed of case i in a batch.
std::uint64_t derive_seed(std::uint64_t seed, std::size_t i);

/// n cases from one template, case i using derive_seed(seed, i).
std::vector<PhantomCase> batch(const PhantomSpec& templ, std::size_t n, std::uint64_t seed,
                               std::size_t threads = 0);

/// Draws between `min_count` and `max_count` defects from the task's
/// standard pool.
std::vector<Defect> sample_defects(PhantomTask task, std::uint64_t seed, int min_count = 1, int max_count = 2);

/// Labels of the clean anatomy with only defect i applied.
LabelMap single_defect_labels(const PhantomCase& c, std::size_t i);

/// True when no defect masks another: the argmax Betti error of the case
/// equals the sum of the errors of each defect applied alone. Two defects can
/// cancel in a class union (a bridge plus an extra blob leaves rv|lv with two
/// components), which hands the loss a spurious feature to preserve.
bool defects_independent(const PhantomCase& c, Construction construction = Construction::V);

/// Case with `min_count`..`max_count` sampled defects that do not mask each
/// other. Redraws the defect list (same placement seed) until one qualifies.
PhantomCase random_case(const PhantomSpec& templ, std::uint64_t seed, int min_count = 1, int max_count = 2);

/// Writes probs.npy (K, ...), gt.npy, defective.npy, prior.json and case.json.
void write_case(const PhantomCase& c, const std::filesystem::path& dir);

/// Uniform double in [0, 1) from a 64-bit engine output.
inline double unit_from_bits(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

}  // namespace cubitopo
