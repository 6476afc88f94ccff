#pragma once

#include "cpmdp/gridworld.hpp"
#include "cpmdp/statespace.hpp"

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace cpmdp {

/// Default ceiling on dense transition storage (bytes), overridable per call.
inline constexpr std::uint64_t kDefaultDenseCapBytes = 2ull << 30;

/// Index type stored inside components. Bounds S at 2^32 - 1.
using PackedState = std::uint32_t;

/// One rank-one term of the transition tensor: P(s_next | s, a) = p > 0.
struct TensorComponent {
    PackedState s;
    PackedState s_next;
    double p;
};

/**
 * Thread-safe counter of multiply operations performed by the kernels.
 * Increments use relaxed atomics; workers may also accumulate locally and
 * add once.
 */
class MultiplyCounter {
public:
    void add(std::uint64_t n) { count_.fetch_add(n, std::memory_order_relaxed); }
    std::uint64_t value() const { return count_.load(std::memory_order_relaxed); }
    void reset() { count_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> count_{0};
};

/**
 * Compressed transition model: for each action, the components of every state
 * laid out contiguously with per-state offsets (CSR layout). Obstacles own no
 * components. Components of a (state, action) group are sorted by successor.
 */
class ComponentModel {
public:
    ComponentModel() = default;

    const GridShape& shape() const { return shape_; }
    std::uint64_t num_states() const { return shape_.num_states(); }
    std::uint32_t num_actions() const { return actions_; }

    /// Non-obstacle states in increasing order.
    std::span<const StateId> active_states() const { return active_; }

    std::span<const TensorComponent> components(ActionId a, StateId s) const {
        const auto& off = offsets_[a];
        return {comps_[a].data() + off[s], comps_[a].data() + off[s + 1]};
    }
    std::span<const TensorComponent> components(ActionId a) const { return comps_[a]; }

    /// C_(s,a).
    std::uint64_t component_count(ActionId a, StateId s) const {
        return offsets_[a][s + 1] - offsets_[a][s];
    }
    /// Sum of C_(s,a) over states for one action.
    std::uint64_t component_count(ActionId a) const { return comps_[a].size(); }
    /// Sum of C_(s,a) over states and actions.
    std::uint64_t total_components() const;
    /// Per-state count summed over actions.
    std::uint64_t state_component_count(StateId s) const;

    /// Sum_{s'} P(s'|s,a) V(s'), accumulated in component order.
    double expected_value(ActionId a, StateId s, std::span<const double> v) const {
        double acc = 0.0;
        for (const auto& c : components(a, s)) acc += c.p * v[c.s_next];
        return acc;
    }

private:
    friend ComponentModel build_component_model(const GridSpec& spec);

    GridShape shape_;
    std::uint32_t actions_ = 0;
    std::vector<StateId> active_;
    std::vector<std::vector<std::uint64_t>> offsets_;  // [a][s], length S + 1
    std::vector<std::vector<TensorComponent>> comps_;  // [a]
};

/// Per-state reward and cell classification.
struct RewardModel {
    enum class Kind : std::uint8_t { Plain, Obstacle, Terminal };

    std::vector<double> reward;    // step reward, terminal reward, or 0 for obstacles
    std::vector<Kind> kind;
    std::vector<StateId> plain;    // plain states, increasing

    std::uint64_t num_states() const { return reward.size(); }
    bool is_plain(StateId s) const { return kind[s] == Kind::Plain; }
    bool is_terminal(StateId s) const { return kind[s] == Kind::Terminal; }
    bool is_obstacle(StateId s) const { return kind[s] == Kind::Obstacle; }
};

/// Dense per-action S x S row-stochastic matrices, row-major, obstacle rows = identity.
class TabularModel {
public:
    TabularModel(std::uint64_t num_states, std::uint32_t num_actions);

    std::uint64_t num_states() const { return states_; }
    std::uint32_t num_actions() const { return actions_; }

    std::span<double> row(ActionId a, StateId s) {
        return {data_.data() + (a * states_ + s) * states_, states_};
    }
    std::span<const double> row(ActionId a, StateId s) const {
        return {data_.data() + (a * states_ + s) * states_, states_};
    }
    double at(ActionId a, StateId s, StateId t) const { return row(a, s)[t]; }

    /// Dense row product in column order. Counts S multiplies.
    double expected_value(ActionId a, StateId s, std::span<const double> v) const {
        double acc = 0.0;
        const auto r = row(a, s);
        for (std::uint64_t t = 0; t < states_; ++t) acc += r[t] * v[t];
        return acc;
    }

private:
    std::uint64_t states_;
    std::uint32_t actions_;
    std::vector<double> data_;
};

struct Models {
    ComponentModel components;
    RewardModel rewards;
};

ComponentModel build_component_model(const GridSpec& spec);
RewardModel build_reward_model(const GridSpec& spec);

/// Components equal transition_distribution() for every (active s, a).
Models build_models(const GridSpec& spec);

/// Bytes a dense model with S states and A actions occupies (8-byte entries).
/// Throws SizingError on overflow.
std::uint64_t dense_model_bytes(std::uint64_t num_states, std::uint32_t num_actions);

/// Expands components into dense matrices. Throws SizingError when the dense
/// storage would exceed `dense_cap_bytes`.
TabularModel to_tabular(const ComponentModel& cm,
                        std::uint64_t dense_cap_bytes = kDefaultDenseCapBytes);

/**
 * out[s] = Sum over components of (s, a) of p * V[s_next], for every state;
 * obstacles yield 0. Adds the number of components touched to `counter`.
 */
std::vector<double> expected_values(const ComponentModel& cm, ActionId a,
                                    std::span<const double> v, MultiplyCounter& counter);

struct StorageEntries {
    std::uint64_t components = 0;
    std::uint64_t bytes_estimate = 0;
};

/// components x sizeof(TensorComponent) plus the per-action offset arrays.
StorageEntries storage_entries(const ComponentModel& cm);

/// Plain-text dump: an "action <a>" header per action, then one
/// "s s_next p" line per component.
void dump_components(const ComponentModel& cm, std::ostream& out);

}  // namespace cpmdp
