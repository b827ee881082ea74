#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "cubitopo/complex.hpp"
#include "cubitopo/grid.hpp"
#include "cubitopo/persistence.hpp"
#include "cubitopo/prior.hpp"

namespace cubitopo {

/// Contribution of one (subset, dimension) pair to the topological loss.
struct TopoTerm {
    ClassSubset subset;
    int dim = 0;
    int target = 0;            // prior Betti number B
    double matched = 0.0;      // A: persistence of the B longest bars
    double superfluous = 0.0;  // Z: persistence of every other bar

    double value() const { return target - matched + superfluous; }
};

struct LossBreakdown {
    double total = 0.0;  // topological loss, sum of term values
    std::vector<TopoTerm> terms;
    double mse = 0.0;
    double lambda = 0.0;
    double combined = 0.0;  // total + lambda * mse
};

struct LossResult {
    LossBreakdown breakdown;
    GradField grad;
};

/// Topological loss of a probability stack against a prior, with its
/// subgradient per channel value.
///
/// Each loss subset (singleton or pair) is summed into one field and its
/// barcode computed; per dimension the B most persistent bars are rewarded
/// and the rest penalised. A rewarded bar pushes its birth point up and its
/// death point down; a penalised bar does the opposite. Union gradients are
/// added to every channel in the subset. Essential bars have a fixed death
/// and only move their birth point. Bars of zero persistence are ignored.
LossResult topo_loss(const ChannelStack& probs, const BettiPrior& prior, Construction construction,
                     std::size_t threads = 0);
LossResult topo_loss(const ProbSegmentation& seg, const BettiPrior& prior, Construction construction,
                     std::size_t threads = 0);

/// Mean over grid points of the squared channel differences, summed over
/// channels, with gradient 2/V * (current - reference).
std::pair<double, GradField> mse_loss(const ChannelStack& current, const ChannelStack& reference);
std::pair<double, GradField> mse_loss(const ProbSegmentation& current, const ProbSegmentation& reference);

/// topo + lambda * mse.
LossResult combined_loss(const ChannelStack& probs, const ChannelStack& reference, const BettiPrior& prior,
                         double lambda, Construction construction, std::size_t threads = 0);
LossResult combined_loss(const ProbSegmentation& seg, const ProbSegmentation& reference,
                         const BettiPrior& prior, double lambda, Construction construction,
                         std::size_t threads = 0);

/// Default similarity weight: 1000 for 2D short-axis work, 1 for 3D volumes.
double default_lambda(int ndim);

}  // namespace cubitopo
