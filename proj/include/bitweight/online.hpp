#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <memory>
#include <mutex>
#include <optional>
#include <ranges>
#include <stdexcept>
#include <vector>

#include "bitweight/learner.hpp"

namespace bitweight {

struct OnlineState {
    BitWeights w;
    std::uint64_t t = 0;  // number of updates applied
    LearnerConfig cfg;
};

/// 1/2 ||w - w_t||^2 plus the same data terms as the offline objective.
inline double online_objective(const BitWeights& w, const BitWeights& w_t, const TripletBatch& minibatch,
                               const LearnerConfig& cfg) {
    detail::require_same_length(w.size(), w_t.size(), "online_objective");
    detail::require_batch_length(w.size(), minibatch);
    double prox = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w[i] - w_t[i];
        prox += d * d;
    }
    return 0.5 * prox + detail::data_loss(w.values(), minibatch, cfg);
}

inline std::vector<double> online_gradient(const BitWeights& w, const BitWeights& w_t, const TripletBatch& minibatch,
                                           const LearnerConfig& cfg) {
    detail::require_same_length(w.size(), w_t.size(), "online_gradient");
    detail::require_batch_length(w.size(), minibatch);
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) g[i] = w[i] - w_t[i];
    detail::add_data_gradient(g, w.values(), minibatch, cfg);
    return g;
}

/// Passive-aggressive update: up to cfg.inner_iters backtracking steps on the
/// proximal objective centred at state.w. A minibatch whose constraints all
/// hold at state.w has zero gradient there and leaves the weights untouched.
inline OnlineState online_update(const OnlineState& state, const TripletBatch& minibatch) {
    if (minibatch.empty()) throw std::invalid_argument("online_update needs a non-empty minibatch");
    detail::require_batch_length(state.w.size(), minibatch);
    const LearnerConfig& cfg = state.cfg;

    const BitWeights& center = state.w;
    auto evaluate = [&](const BitWeights& v) { return online_objective(v, center, minibatch, cfg); };

    BitWeights w = center;
    double current = evaluate(w);
    double eta = cfg.eta;
    for (int it = 0; it < cfg.inner_iters; ++it) {
        const std::vector<double> g = online_gradient(w, center, minibatch, cfg);
        if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) break;
        StepOutcome step = backtracking_step(w, current, g, eta, cfg, evaluate);
        if (!step.accepted) break;
        eta = step.eta;
        w = std::move(step.weights);
        current = step.objective;
    }
    return OnlineState{std::move(w), state.t + 1, cfg};
}

struct OnlineResult {
    BitWeights weights;
    /// Proximal objective after each update.
    std::vector<double> trace;
    std::uint64_t updates = 0;
};

/// Folds online_update over any input range of minibatches. Only the current
/// minibatch and the state are held; with no w0 the weights start at all ones
/// sized from the first minibatch.
template <std::ranges::input_range Stream>
    requires std::convertible_to<std::ranges::range_reference_t<Stream>, const TripletBatch&>
OnlineResult train_online(Stream&& stream, const LearnerConfig& cfg, std::optional<BitWeights> w0 = std::nullopt) {
    cfg.validate();
    std::optional<OnlineState> state;
    if (w0) state = OnlineState{std::move(*w0), 0, cfg};

    OnlineResult result;
    for (const TripletBatch& batch : stream) {
        if (batch.size() > cfg.minibatch_size) {
            throw std::invalid_argument("minibatch of " + std::to_string(batch.size()) +
                                        " exceeds minibatch_size " + std::to_string(cfg.minibatch_size));
        }
        if (!state) {
            if (batch.empty()) throw std::invalid_argument("online_update needs a non-empty minibatch");
            state = OnlineState{BitWeights::ones(batch.bits()), 0, cfg};
        }
        OnlineState next = online_update(*state, batch);
        result.trace.push_back(online_objective(next.w, state->w, batch, cfg));
        state = std::move(next);
    }
    if (!state) throw std::invalid_argument("train_online on an empty stream needs initial weights");
    result.weights = std::move(state->w);
    result.updates = state->t;
    return result;
}

/// Lazy view splitting a batch into consecutive minibatches of at most `size`
/// triplets. Each dereference materialises only one minibatch.
class Minibatches {
public:
    Minibatches(const TripletBatch& batch, std::size_t size) : batch_(&batch), size_(size) {
        if (size == 0) throw std::invalid_argument("minibatch size must be >= 1");
    }

    class iterator {
    public:
        using value_type = TripletBatch;
        using difference_type = std::ptrdiff_t;
        using reference = TripletBatch;

        iterator() = default;
        iterator(const TripletBatch* batch, std::size_t size, std::size_t pos) : batch_(batch), size_(size), pos_(pos) {}

        TripletBatch operator*() const {
            const std::size_t end = std::min(pos_ + size_, batch_->size());
            TripletBatch out;
            out.seed = batch_->seed;
            out.triplets.assign(batch_->triplets.begin() + static_cast<std::ptrdiff_t>(pos_),
                                batch_->triplets.begin() + static_cast<std::ptrdiff_t>(end));
            if (batch_->sources.size() == batch_->triplets.size()) {
                out.sources.assign(batch_->sources.begin() + static_cast<std::ptrdiff_t>(pos_),
                                   batch_->sources.begin() + static_cast<std::ptrdiff_t>(end));
            }
            return out;
        }
        iterator& operator++() {
            pos_ = std::min(pos_ + size_, batch_->size());
            return *this;
        }
        void operator++(int) { ++*this; }
        friend bool operator==(const iterator& a, const iterator& b) { return a.pos_ == b.pos_; }

    private:
        const TripletBatch* batch_ = nullptr;
        std::size_t size_ = 1;
        std::size_t pos_ = 0;
    };

    iterator begin() const { return iterator(batch_, size_, 0); }
    iterator end() const { return iterator(batch_, size_, batch_->size()); }

private:
    const TripletBatch* batch_;
    std::size_t size_;
};

/// Single-writer online learner whose current weights can be read
/// concurrently as immutable snapshots.
class OnlineLearner {
public:
    explicit OnlineLearner(OnlineState initial)
        : state_(std::move(initial)), snapshot_(std::make_shared<const BitWeights>(state_.w)) {
        state_.cfg.validate();
    }

    /// Applies one update; callers must serialise calls to update().
    void update(const TripletBatch& minibatch) {
        state_ = online_update(state_, minibatch);
        auto next = std::make_shared<const BitWeights>(state_.w);
        std::lock_guard lock(mutex_);
        snapshot_ = std::move(next);
    }

    std::shared_ptr<const BitWeights> snapshot() const {
        std::lock_guard lock(mutex_);
        return snapshot_;
    }

    const OnlineState& state() const noexcept { return state_; }

private:
    OnlineState state_;
    mutable std::mutex mutex_;
    std::shared_ptr<const BitWeights> snapshot_;
};

}  // namespace bitweight
