#include "cubitopo/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cubitopo/topo_loss.hpp"

namespace cubitopo {

AdamState::AdamState(std::size_t n, double lr, double b1, double b2, double eps)
    : learning_rate(lr), beta1(b1), beta2(b2), epsilon(eps), m(n, 0.0), v(n, 0.0) {}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size() || s.m.size() != params.size())
        throw std::invalid_argument("adam_step: size mismatch");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double m_hat = s.m[i] / c1;
        const double v_hat = s.v[i] / c2;
        params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

void OptimizerConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("Adam betas must lie in (0, 1)");
    if (!(adam_epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

ProbSegmentation softmax(const ChannelStack& logits) {
    const int k = logits.num_channels();
    ChannelStack probs(logits.shape(), k, 0.0);
    for (std::size_t i = 0; i < logits.points(); ++i) {
        double hi = logits.at(0, i);
        for (int c = 1; c < k; ++c) hi = std::max(hi, logits.at(c, i));
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += (probs.at(c, i) = std::exp(logits.at(c, i) - hi));
        for (int c = 0; c < k; ++c) probs.at(c, i) /= sum;
    }
    return ProbSegmentation(std::move(probs));
}

RunTrace post_process(const ProbSegmentation& initial, const BettiPrior& prior, const OptimizerConfig& cfg) {
    cfg.validate();
    const int k = initial.num_classes();
    const std::size_t n = initial.stack().points();

    ChannelStack logits(initial.shape(), k, 0.0);
    for (int c = 0; c < k; ++c) {
        auto src = initial.stack().channel(c);
        auto dst = logits.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            double p = src[i];
            if (p <= 0.0) {
                if (!cfg.clamp)
                    throw std::invalid_argument(
                        "initial segmentation contains zero probabilities (class " + std::to_string(c + 1) +
                        ", point " + std::to_string(i) + "); enable clamping to floor them at 1e-7");
            }
            if (cfg.clamp) p = std::max(p, kProbabilityFloor);
            dst[i] = std::log(p);
        }
    }

    // Adam runs on one flat parameter vector holding all channels.
    std::vector<double> params(n * k), grad(n * k);
    for (int c = 0; c < k; ++c)
        std::copy(logits.channel(c).begin(), logits.channel(c).end(), params.begin() + c * n);
    AdamState adam(params.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);

    RunTrace trace;
    trace.entries.reserve(cfg.iterations);
    for (int it = 0; it < cfg.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int c = 0; c < k; ++c)
            std::copy(params.begin() + c * n, params.begin() + (c + 1) * n, logits.channel(c).begin());
        const ProbSegmentation probs = softmax(logits);
        const LossResult loss =
            combined_loss(probs, initial, prior, cfg.lambda, cfg.construction, cfg.threads);

        // Chain rule through the softmax: dL/dz_c = p_c (g_c - sum_j p_j g_j).
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int c = 0; c < k; ++c) dot += probs.prob(c + 1, i) * loss.grad.at(c, i);
            for (int c = 0; c < k; ++c)
                grad[c * n + i] = probs.prob(c + 1, i) * (loss.grad.at(c, i) - dot);
        }
        adam_step(adam, params, grad);

        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        trace.entries.push_back(
            {it, loss.breakdown.total, loss.breakdown.mse, loss.breakdown.combined, ms});
    }
    for (int c = 0; c < k; ++c)
        std::copy(params.begin() + c * n, params.begin() + (c + 1) * n, logits.channel(c).begin());
    trace.final = softmax(logits);
    return trace;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace, bool with_timing) {
    out << "iter,L_topo,L_mse,L_TP" << (with_timing ? ",ms" : "") << '\n';
    char buf[160];
    for (const auto& e : trace.entries) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", e.iteration, e.topo, e.mse, e.combined);
        out << buf;
        if (with_timing) {
            std::snprintf(buf, sizeof(buf), ",%.3f", e.ms);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace cubitopo
