#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "cubitopo/complex.hpp"
#include "cubitopo/grid.hpp"
#include "cubitopo/prior.hpp"

namespace cubitopo {

/// Adam with bias-corrected moments; reset for every case.
struct AdamState {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(std::size_t n, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8);
};

/// One Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

/// Probability floor applied before taking logarithms when clamping is on.
inline constexpr double kProbabilityFloor = 1e-7;

struct OptimizerConfig {
    int iterations = 100;
    double learning_rate = 0.1;
    double lambda = 1000.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    Construction construction = Construction::V;
    std::uint64_t seed = 0;
    bool clamp = false;       // floor zero probabilities at kProbabilityFloor
    std::size_t threads = 0;  // barcode workers per iteration; 0 = default

    void validate() const;
};

struct TraceEntry {
    int iteration = 0;
    double topo = 0.0;
    double mse = 0.0;
    double combined = 0.0;
    double ms = 0.0;
};

struct RunTrace {
    std::vector<TraceEntry> entries;
    ProbSegmentation final;
};

/// Test-time adaptation of one case: Adam on a logit field initialised at
/// log(initial), minimising topo + lambda * mse against `initial`. Entry i of
/// the trace holds the losses of the field before update i.
RunTrace post_process(const ProbSegmentation& initial, const BettiPrior& prior, const OptimizerConfig& cfg);

/// Channel-wise softmax of a logit stack.
ProbSegmentation softmax(const ChannelStack& logits);

/// `iter,L_topo,L_mse,L_TP,ms`; timing omitted when `with_timing` is false.
void write_trace_csv(std::ostream& out, const RunTrace& trace, bool with_timing = true);

}  // namespace cubitopo
