#include "cubitopo/topo_loss.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cubitopo {

LossResult topo_loss(const ChannelStack& probs, const BettiPrior& prior, Construction construction,
                     std::size_t threads) {
    if (prior.num_classes() != probs.num_channels())
        throw std::invalid_argument("prior has " + std::to_string(prior.num_classes()) +
                                    " classes but the segmentation has " +
                                    std::to_string(probs.num_channels()));
    if (prior.ndim() != probs.shape().ndim())
        throw std::invalid_argument("prior dimensionality does not match the grid");

    const std::vector<ClassSubset> subsets = prior.loss_subsets();
    std::vector<ScalarField> fields;
    fields.reserve(subsets.size());
    for (const auto& s : subsets) fields.push_back(union_field(probs, s));

    LossResult result;
    result.grad = GradField(probs.shape(), probs.num_channels(), 0.0);
    if (subsets.empty()) return result;

    const int ndim = probs.shape().ndim();
    const std::vector<Barcode> barcodes = barcodes_parallel(fields, construction, ndim - 1, threads);

    std::vector<double> g(probs.points());
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        const std::vector<int>& target = *prior.find(subsets[i]);
        std::fill(g.begin(), g.end(), 0.0);
        for (int d = 0; d < ndim; ++d) {
            TopoTerm term{subsets[i], d, target[d], 0.0, 0.0};
            int rank = 0;
            for (const Bar& bar : rank_bars(barcodes[i], d)) {
                if (!(bar.persistence() > 0.0)) continue;
                const bool matched = rank++ < target[d];
                const double sign = matched ? -1.0 : 1.0;
                (matched ? term.matched : term.superfluous) += bar.persistence();
                g[bar.birth_point] += sign;
                if (bar.death_point) g[*bar.death_point] -= sign;
            }
            result.breakdown.total += term.value();
            result.breakdown.terms.push_back(std::move(term));
        }
        for (int c : subsets[i]) {
            auto ch = result.grad.channel(c - 1);
            for (std::size_t p = 0; p < g.size(); ++p) ch[p] += g[p];
        }
    }
    result.breakdown.combined = result.breakdown.total;
    return result;
}

LossResult topo_loss(const ProbSegmentation& seg, const BettiPrior& prior, Construction construction,
                     std::size_t threads) {
    return topo_loss(seg.stack(), prior, construction, threads);
}

std::pair<double, GradField> mse_loss(const ChannelStack& current, const ChannelStack& reference) {
    if (!(current.shape().dims() == reference.shape().dims()) ||
        current.num_channels() != reference.num_channels())
        throw std::invalid_argument("mse_loss: shape or class count mismatch");
    const double v = static_cast<double>(current.points());
    GradField grad(current.shape(), current.num_channels(), 0.0);
    double sum = 0.0;
    for (int c = 0; c < current.num_channels(); ++c) {
        auto a = current.channel(c);
        auto b = reference.channel(c);
        auto g = grad.channel(c);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double diff = a[i] - b[i];
            sum += diff * diff;
            g[i] = 2.0 * diff / v;
        }
    }
    return {sum / v, std::move(grad)};
}

std::pair<double, GradField> mse_loss(const ProbSegmentation& current, const ProbSegmentation& reference) {
    return mse_loss(current.stack(), reference.stack());
}

LossResult combined_loss(const ChannelStack& probs, const ChannelStack& reference, const BettiPrior& prior,
                         double lambda, Construction construction, std::size_t threads) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    LossResult result = topo_loss(probs, prior, construction, threads);
    auto [mse, mse_grad] = mse_loss(probs, reference);
    result.breakdown.mse = mse;
    result.breakdown.lambda = lambda;
    result.breakdown.combined = result.breakdown.total + lambda * mse;
    if (lambda != 0.0) {
        for (int c = 0; c < probs.num_channels(); ++c) {
            auto g = result.grad.channel(c);
            auto m = mse_grad.channel(c);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * m[i];
        }
    }
    return result;
}

LossResult combined_loss(const ProbSegmentation& seg, const ProbSegmentation& reference,
                         const BettiPrior& prior, double lambda, Construction construction,
                         std::size_t threads) {
    return combined_loss(seg.stack(), reference.stack(), prior, lambda, construction, threads);
}

double default_lambda(int ndim) { return ndim == 2 ? 1000.0 : 1.0; }

}  // namespace cubitopo
