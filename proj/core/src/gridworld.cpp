#include "cpmdp/gridworld.hpp"

#include "cpmdp/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cpmdp {

namespace {

// Unbiased draw in [0, bound). std::uniform_int_distribution is
// implementation-defined, so placement would differ across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

void merge_into(std::vector<Transition>& out, StateId s, double p) {
    if (p <= 0.0) return;
    for (auto& [t, q] : out) {
        if (t == s) {
            q += p;
            return;
        }
    }
    out.emplace_back(s, p);
}

}  // namespace

void validate(const GridSpec& spec) {
    const auto S = spec.shape.num_states();
    if (S == 0) throw SpecError("grid shape is empty");
    if (!(spec.noise >= 0.0 && spec.noise <= 1.0))
        throw SpecError(fmt::format("noise {} outside [0, 1]", spec.noise));
    if (!std::isfinite(spec.step_reward)) throw SpecError("step reward must be finite");
    for (auto s : spec.obstacles)
        if (s >= S) throw SpecError(fmt::format("obstacle {} out of range", s));
    for (const auto& [s, r] : spec.terminals) {
        if (s >= S) throw SpecError(fmt::format("terminal {} out of range", s));
        if (spec.obstacles.contains(s))
            throw SpecError(fmt::format("state {} is both obstacle and terminal", s));
        if (!std::isfinite(r)) throw SpecError(fmt::format("terminal {} reward not finite", s));
    }
    if (spec.obstacles.size() >= S) throw SpecError("every state is an obstacle");
}

std::uint32_t action_count(const GridShape& shape) {
    return static_cast<std::uint32_t>(2 * shape.rank());
}

std::uint32_t action_count(const GridSpec& spec) { return action_count(spec.shape); }

std::uint64_t plain_state_count(const GridSpec& spec) {
    return spec.shape.num_states() - spec.obstacles.size() - spec.terminals.size();
}

GridSpec generate_random_spec(const GridShape& shape, std::uint64_t n_obstacles,
                              std::uint64_t n_terminals, std::uint64_t seed, double noise,
                              double step_reward, double terminal_reward) {
    const auto S = shape.num_states();
    if (n_obstacles >= S || n_terminals >= S - n_obstacles)
        throw CapacityError(fmt::format(
            "cannot place {} obstacles and {} terminals on {} states (need at least one "
            "plain state)",
            n_obstacles, n_terminals, S));

    GridSpec spec;
    spec.shape = shape;
    spec.noise = noise;
    spec.step_reward = step_reward;
    spec.seed = seed;

    std::mt19937_64 rng(seed);
    std::set<StateId> taken;
    auto draw = [&] {
        for (;;) {
            auto s = uniform_below(rng, S);
            if (taken.insert(s).second) return s;
        }
    };
    for (std::uint64_t i = 0; i < n_obstacles; ++i) spec.obstacles.insert(draw());
    for (std::uint64_t i = 0; i < n_terminals; ++i)
        spec.terminals.emplace(draw(), i % 2 == 0 ? terminal_reward : -terminal_reward);
    validate(spec);
    return spec;
}

StateId intended_successor(const GridSpec& spec, StateId s, ActionId a) {
    if (s >= spec.shape.num_states())
        throw BoundsError(fmt::format("state id {} out of range", s));
    if (a >= action_count(spec)) throw BoundsError(fmt::format("action {} out of range", a));
    if (spec.is_obstacle(s)) throw InvalidStateError(fmt::format("state {} is an obstacle", s));
    const auto t = step_flat(s, action_axis(a), action_direction(a), spec.shape);
    return spec.is_obstacle(t) ? s : t;
}

std::vector<Transition> transition_distribution(const GridSpec& spec, StateId s, ActionId a) {
    // Range and obstacle checks happen here; Dynamics assumes valid input.
    intended_successor(spec, s, a);
    std::vector<Transition> out;
    Dynamics(spec).distribution(s, a, out);
    return out;
}

Dynamics::Dynamics(const GridSpec& spec)
    : shape_(spec.shape),
      noise_(spec.noise),
      kind_(spec.shape.num_states(), Kind::Plain),
      actions_(action_count(spec)) {
    for (auto s : spec.obstacles) kind_.at(s) = Kind::Obstacle;
    for (const auto& [s, r] : spec.terminals) kind_.at(s) = Kind::Terminal;
}

StateId Dynamics::move(StateId s, ActionId a) const {
    const auto t = step_flat(s, action_axis(a), action_direction(a), shape_);
    return kind_[t] == Kind::Obstacle ? s : t;
}

StateId Dynamics::intended_successor(StateId s, ActionId a) const {
    if (kind_.at(s) == Kind::Obstacle)
        throw InvalidStateError(fmt::format("state {} is an obstacle", s));
    return move(s, a);
}

void Dynamics::distribution(StateId s, ActionId a, std::vector<Transition>& out) const {
    out.clear();
    if (kind_[s] == Kind::Obstacle)
        throw InvalidStateError(fmt::format("state {} is an obstacle", s));
    if (kind_[s] == Kind::Terminal) {
        out.emplace_back(s, 1.0);
        return;
    }
    merge_into(out, move(s, a), noise_);
    const double rest = 1.0 - noise_;
    if (shape_.rank() == 1) {
        merge_into(out, s, rest);
    } else {
        const double slip = rest / static_cast<double>(2 * (shape_.rank() - 1));
        const auto axis = action_axis(a);
        for (ActionId b = 0; b < actions_; ++b)
            if (action_axis(b) != axis) merge_into(out, move(s, b), slip);
    }
    std::sort(out.begin(), out.end());
}

namespace {

nlohmann::ordered_json coords_json(StateId s, const GridShape& shape) {
    return nlohmann::ordered_json(multi_index(s, shape));
}

StateId coords_from_json(const nlohmann::json& j, const GridShape& shape) {
    auto coords = j.get<std::vector<std::uint64_t>>();
    try {
        return linear_index(coords, shape);
    } catch (const BoundsError& e) {
        throw SpecError(e.what());
    }
}

}  // namespace

std::string spec_to_string(const GridSpec& spec) {
    nlohmann::ordered_json j;
    j["dims"] = std::vector<std::uint64_t>(spec.shape.dims().begin(), spec.shape.dims().end());
    auto obstacles = nlohmann::ordered_json::array();
    for (auto s : spec.obstacles) obstacles.push_back(coords_json(s, spec.shape));
    j["obstacles"] = std::move(obstacles);
    auto terminals = nlohmann::ordered_json::array();
    for (const auto& [s, r] : spec.terminals)
        terminals.push_back(nlohmann::ordered_json{{"cell", coords_json(s, spec.shape)},
                                                   {"reward", r}});
    j["terminals"] = std::move(terminals);
    j["step_reward"] = spec.step_reward;
    j["noise"] = spec.noise;
    j["seed"] = spec.seed;
    return j.dump(2) + "\n";
}

GridSpec spec_from_string(const std::string& text) {
    GridSpec spec;
    try {
        const auto j = nlohmann::json::parse(text);
        try {
            spec.shape = GridShape(j.at("dims").get<std::vector<std::uint64_t>>());
        } catch (const SizingError& e) {
            throw SpecError(e.what());
        }
        for (const auto& c : j.at("obstacles"))
            if (!spec.obstacles.insert(coords_from_json(c, spec.shape)).second)
                throw SpecError("duplicate obstacle");
        for (const auto& t : j.at("terminals"))
            if (!spec.terminals
                     .emplace(coords_from_json(t.at("cell"), spec.shape),
                              t.at("reward").get<double>())
                     .second)
                throw SpecError("duplicate terminal");
        spec.step_reward = j.at("step_reward").get<double>();
        spec.noise = j.at("noise").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(fmt::format("malformed spec: {}", e.what()));
    }
    validate(spec);
    return spec;
}

void write_spec_file(const GridSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    out << spec_to_string(spec);
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

GridSpec read_spec_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open {} for reading", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return spec_from_string(buf.str());
}

}  // namespace cpmdp
