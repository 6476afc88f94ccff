#include "cpmdp/transition.hpp"

#include "cpmdp/errors.hpp"

#include <fmt/format.h>

#include <limits>
#include <numeric>
#include <ostream>

namespace cpmdp {

static_assert(sizeof(TensorComponent) == 2 * sizeof(PackedState) + sizeof(double));

std::uint64_t ComponentModel::total_components() const {
    std::uint64_t n = 0;
    for (const auto& c : comps_) n += c.size();
    return n;
}

std::uint64_t ComponentModel::state_component_count(StateId s) const {
    std::uint64_t n = 0;
    for (ActionId a = 0; a < actions_; ++a) n += component_count(a, s);
    return n;
}

ComponentModel build_component_model(const GridSpec& spec) {
    validate(spec);
    const auto S = spec.shape.num_states();
    if (S > std::numeric_limits<PackedState>::max())
        throw SizingError(fmt::format("{} states exceed the 32-bit component index", S));

    ComponentModel cm;
    cm.shape_ = spec.shape;
    cm.actions_ = action_count(spec);
    cm.offsets_.assign(cm.actions_, std::vector<std::uint64_t>(S + 1, 0));
    cm.comps_.resize(cm.actions_);

    const Dynamics dyn(spec);
    for (StateId s = 0; s < S; ++s)
        if (!dyn.is_obstacle(s)) cm.active_.push_back(s);

    std::vector<Transition> dist;
    for (ActionId a = 0; a < cm.actions_; ++a) {
        auto& off = cm.offsets_[a];
        auto& comps = cm.comps_[a];
        comps.reserve(cm.active_.size() * (2 * spec.shape.rank() - 1));
        for (StateId s = 0; s < S; ++s) {
            off[s] = comps.size();
            if (dyn.is_obstacle(s)) continue;
            dyn.distribution(s, a, dist);
            for (const auto& [t, p] : dist)
                comps.push_back({static_cast<PackedState>(s), static_cast<PackedState>(t), p});
        }
        off[S] = comps.size();
        comps.shrink_to_fit();
    }
    return cm;
}

RewardModel build_reward_model(const GridSpec& spec) {
    validate(spec);
    const auto S = spec.shape.num_states();
    RewardModel rm;
    rm.reward.assign(S, spec.step_reward);
    rm.kind.assign(S, RewardModel::Kind::Plain);
    for (auto s : spec.obstacles) {
        rm.reward[s] = 0.0;
        rm.kind[s] = RewardModel::Kind::Obstacle;
    }
    for (const auto& [s, r] : spec.terminals) {
        rm.reward[s] = r;
        rm.kind[s] = RewardModel::Kind::Terminal;
    }
    for (StateId s = 0; s < S; ++s)
        if (rm.kind[s] == RewardModel::Kind::Plain) rm.plain.push_back(s);
    return rm;
}

Models build_models(const GridSpec& spec) {
    return {build_component_model(spec), build_reward_model(spec)};
}

std::uint64_t dense_model_bytes(std::uint64_t num_states, std::uint32_t num_actions) {
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t per_entry = sizeof(double);
    if (num_states != 0 && num_states > kMax / num_states)
        throw SizingError("dense model size overflows");
    const auto entries = num_states * num_states;
    if (num_actions != 0 && entries > kMax / num_actions / per_entry)
        throw SizingError("dense model size overflows");
    return entries * num_actions * per_entry;
}

TabularModel::TabularModel(std::uint64_t num_states, std::uint32_t num_actions)
    : states_(num_states), actions_(num_actions) {
    data_.assign(dense_model_bytes(num_states, num_actions) / sizeof(double), 0.0);
}

TabularModel to_tabular(const ComponentModel& cm, std::uint64_t dense_cap_bytes) {
    const auto S = cm.num_states();
    const auto bytes = dense_model_bytes(S, cm.num_actions());
    if (bytes > dense_cap_bytes)
        throw SizingError(fmt::format(
            "dense model needs {} bytes, above the cap of {} bytes", bytes, dense_cap_bytes));
    TabularModel tm(S, cm.num_actions());
    for (ActionId a = 0; a < cm.num_actions(); ++a) {
        std::vector<bool> seen(S, false);
        for (const auto& c : cm.components(a)) {
            tm.row(a, c.s)[c.s_next] += c.p;
            seen[c.s] = true;
        }
        for (StateId s = 0; s < S; ++s)
            if (!seen[s]) tm.row(a, s)[s] = 1.0;  // obstacle rows
    }
    return tm;
}

std::vector<double> expected_values(const ComponentModel& cm, ActionId a,
                                    std::span<const double> v, MultiplyCounter& counter) {
    if (v.size() != cm.num_states())
        throw BoundsError(fmt::format("value vector has {} entries, model has {} states",
                                      v.size(), cm.num_states()));
    std::vector<double> out(cm.num_states(), 0.0);
    std::uint64_t touched = 0;
    for (auto s : cm.active_states()) {
        out[s] = cm.expected_value(a, s, v);
        touched += cm.component_count(a, s);
    }
    counter.add(touched);
    return out;
}

StorageEntries storage_entries(const ComponentModel& cm) {
    StorageEntries e;
    e.components = cm.total_components();
    e.bytes_estimate = e.components * sizeof(TensorComponent) +
                       std::uint64_t{cm.num_actions()} * (cm.num_states() + 1) *
                           sizeof(std::uint64_t);
    return e;
}

void dump_components(const ComponentModel& cm, std::ostream& out) {
    for (ActionId a = 0; a < cm.num_actions(); ++a) {
        out << fmt::format("action {}\n", a);
        for (const auto& c : cm.components(a))
            out << fmt::format("{} {} {:.17g}\n", c.s, c.s_next, c.p);
    }
}

}  // namespace cpmdp
