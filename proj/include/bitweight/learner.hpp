#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitweight/core.hpp"
#include "bitweight/error.hpp"
#include "bitweight/sampler.hpp"

namespace bitweight {

enum class Optimizer { Egd, Pgd };

inline const char* to_string(Optimizer o) { return o == Optimizer::Egd ? "egd" : "pgd"; }

struct LearnerConfig {
    double c_xi = 1.0;      // weight of the squared-hinge margin terms
    double c_gamma = 0.1;   // weight of the squared similar-pair deviation terms
    double eta = 1e-3;      // learning rate
    Optimizer optimizer = Optimizer::Egd;
    int max_iters = 500;
    double tol = 1e-6;      // stop once the relative objective decrease falls below this
    std::size_t minibatch_size = 10;
    int inner_iters = 3;
    int max_halvings = 20;  // backtracking budget per step

    void validate() const {
        if (!(c_xi > 0.0) || !std::isfinite(c_xi)) throw std::invalid_argument("c_xi must be > 0");
        if (!(c_gamma >= 0.0) || !std::isfinite(c_gamma)) throw std::invalid_argument("c_gamma must be >= 0");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be > 0");
        if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
        if (!(tol >= 0.0)) throw std::invalid_argument("tol must be >= 0");
        if (minibatch_size < 1) throw std::invalid_argument("minibatch_size must be >= 1");
        if (inner_iters < 1) throw std::invalid_argument("inner_iters must be >= 1");
        if (max_halvings < 0) throw std::invalid_argument("max_halvings must be >= 0");
    }
};

inline constexpr double kEgdMinWeight = 1e-12;
inline constexpr double kEgdMaxWeight = 1e12;

namespace detail {

inline void require_batch_length(std::size_t bits, const TripletBatch& batch) {
    for (const auto& t : batch.triplets) {
        if (t.dissimilar.size() != bits || t.similar_a.size() != bits || t.similar_b.size() != bits) {
            throw std::invalid_argument("triplet length does not match weight length " + std::to_string(bits));
        }
    }
}

/// C_xi * sum max(0, 1 - (w.a - w.b))^2 + C_gamma * sum (w.b - w.c)^2
inline double data_loss(std::span<const double> w, const TripletBatch& batch, const LearnerConfig& cfg) {
    double hinge = 0.0;
    double deviation = 0.0;
    for (const auto& t : batch.triplets) {
        const double da = masked_sum(w, t.dissimilar.words());
        const double db = masked_sum(w, t.similar_a.words());
        const double dc = masked_sum(w, t.similar_b.words());
        const double slack = 1.0 - (da - db);
        if (slack > 0.0) hinge += slack * slack;
        const double dev = db - dc;
        deviation += dev * dev;
    }
    return cfg.c_xi * hinge + cfg.c_gamma * deviation;
}

inline void add_bits(std::vector<double>& g, std::span<const Word> words, double coef) {
    for (std::size_t i = 0; i < words.size(); ++i) {
        Word x = words[i];
        while (x != 0) {
            g[i * kWordBits + static_cast<std::size_t>(std::countr_zero(x))] += coef;
            x &= x - 1;
        }
    }
}

/// Gradient of data_loss, accumulated into g in batch order.
inline void add_data_gradient(std::vector<double>& g, std::span<const double> w, const TripletBatch& batch,
                              const LearnerConfig& cfg) {
    for (const auto& t : batch.triplets) {
        const double da = masked_sum(w, t.dissimilar.words());
        const double db = masked_sum(w, t.similar_a.words());
        const double dc = masked_sum(w, t.similar_b.words());
        const double slack = 1.0 - (da - db);
        if (slack > 0.0) {
            const double coef = 2.0 * cfg.c_xi * slack;
            add_bits(g, t.dissimilar.words(), -coef);
            add_bits(g, t.similar_a.words(), coef);
        }
        const double dev = db - dc;
        if (dev != 0.0) {
            const double coef = 2.0 * cfg.c_gamma * dev;
            add_bits(g, t.similar_a.words(), coef);
            add_bits(g, t.similar_b.words(), -coef);
        }
    }
}

inline double half_sq_norm(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return 0.5 * s;
}

}  // namespace detail

/// J(w) = 1/2 ||w||^2 + C_xi sum max(0, 1 - (w.a - w.b))^2 + C_gamma sum (w.b - w.c)^2
inline double objective(const BitWeights& w, const TripletBatch& batch, const LearnerConfig& cfg) {
    detail::require_batch_length(w.size(), batch);
    return detail::half_sq_norm(w.values()) + detail::data_loss(w.values(), batch, cfg);
}

inline std::vector<double> gradient(const BitWeights& w, const TripletBatch& batch, const LearnerConfig& cfg) {
    detail::require_batch_length(w.size(), batch);
    std::vector<double> g(w.values().begin(), w.values().end());
    detail::add_data_gradient(g, w.values(), batch, cfg);
    return g;
}

/// Multiplicative update w_i <- w_i exp(-eta g_i), clamped to [1e-12, 1e12].
inline BitWeights egd_step(const BitWeights& w, std::span<const double> grad, double eta) {
    detail::require_same_length(w.size(), grad.size(), "egd_step");
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0)) {
            throw InvalidStateError("egd_step needs strictly positive weights (w[" + std::to_string(i) + "] = " +
                                    std::to_string(w[i]) + ")");
        }
        out[i] = std::clamp(w[i] * std::exp(-eta * grad[i]), kEgdMinWeight, kEgdMaxWeight);
    }
    return BitWeights(std::move(out));
}

/// Additive step applied per component only where the result stays >= 0.
inline BitWeights pgd_step(const BitWeights& w, std::span<const double> grad, double eta) {
    detail::require_same_length(w.size(), grad.size(), "pgd_step");
    std::vector<double> out(w.values().begin(), w.values().end());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double candidate = w[i] - eta * grad[i];
        if (candidate >= 0.0 && std::isfinite(candidate)) out[i] = candidate;
    }
    return BitWeights(std::move(out));
}

inline BitWeights optimizer_step(Optimizer o, const BitWeights& w, std::span<const double> grad, double eta) {
    return o == Optimizer::Egd ? egd_step(w, grad, eta) : pgd_step(w, grad, eta);
}

struct StepOutcome {
    BitWeights weights;
    double objective = 0.0;
    double eta = 0.0;       // learning rate that was accepted (or last tried)
    bool accepted = false;  // false when every halving still increased J
};

/// One optimizer step with backtracking: while the step increases J, halve
/// eta and retry, at most cfg.max_halvings times.
template <typename ObjectiveFn>
StepOutcome backtracking_step(const BitWeights& w, double current, std::span<const double> grad, double eta,
                              const LearnerConfig& cfg, ObjectiveFn&& evaluate) {
    for (int h = 0; h <= cfg.max_halvings; ++h, eta *= 0.5) {
        BitWeights candidate = optimizer_step(cfg.optimizer, w, grad, eta);
        const double value = evaluate(candidate);
        if (std::isfinite(value) && value <= current) return {std::move(candidate), value, eta, true};
    }
    return {w, current, eta, false};
}

struct TrainResult {
    BitWeights weights;
    /// Objective at w0 followed by the objective after every accepted step.
    std::vector<double> trace;
    int iterations = 0;
    double final_eta = 0.0;
};

/// Full-batch gradient descent on J from w0 (all ones by default). Stops after
/// max_iters, when the relative decrease drops below tol, or when
/// backtracking cannot find a non-increasing step.
inline TrainResult train_offline(const TripletBatch& batch, const LearnerConfig& cfg,
                                 std::optional<BitWeights> w0 = std::nullopt) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("train_offline needs a non-empty batch");
    const std::size_t bits = batch.bits();
    BitWeights w = w0 ? std::move(*w0) : BitWeights::ones(bits);
    detail::require_batch_length(w.size(), batch);

    auto evaluate = [&](const BitWeights& v) { return objective(v, batch, cfg); };

    TrainResult result;
    double current = evaluate(w);
    result.trace.push_back(current);
    double eta = cfg.eta;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const std::vector<double> g = gradient(w, batch, cfg);
        StepOutcome step = backtracking_step(w, current, g, eta, cfg, evaluate);
        if (!step.accepted) break;
        eta = step.eta;
        const double previous = current;
        w = std::move(step.weights);
        current = step.objective;
        result.trace.push_back(current);
        ++result.iterations;
        const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
        if ((previous - current) / scale < cfg.tol) break;
    }
    result.weights = std::move(w);
    result.final_eta = eta;
    return result;
}

}  // namespace bitweight
