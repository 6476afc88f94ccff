#pragma once

#include "cpmdp/statespace.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cpmdp {

/// Action 2k moves down axis k, action 2k+1 moves up axis k.
using ActionId = std::uint32_t;

inline constexpr double kDefaultNoise = 0.8;
inline constexpr double kDefaultStepReward = -3.0;
inline constexpr double kDefaultTerminalReward = 100.0;

inline std::size_t action_axis(ActionId a) { return a / 2; }
inline int action_direction(ActionId a) { return (a % 2 == 0) ? -1 : +1; }

/**
 * Full description of an n-dimensional stochastic gridworld.
 *
 * Obstacles are inaccessible cells. Terminals are absorbing cells whose value
 * is pinned to their reward. Every other ("plain") cell yields step_reward.
 * A move goes in the intended direction with probability `noise`; the rest of
 * the mass is split evenly over the orthogonal unit moves (or stays put when
 * the grid has a single axis). Blocked moves bounce back to the current cell.
 */
struct GridSpec {
    GridShape shape;
    std::set<StateId> obstacles;
    std::map<StateId, double> terminals;
    double step_reward = kDefaultStepReward;
    double noise = kDefaultNoise;
    std::uint64_t seed = 0;

    bool is_obstacle(StateId s) const { return obstacles.contains(s); }
    bool is_terminal(StateId s) const { return terminals.contains(s); }

    bool operator==(const GridSpec&) const = default;
};

/// Throws SpecError when `spec` breaks an invariant.
void validate(const GridSpec& spec);

/// 2·D.
std::uint32_t action_count(const GridSpec& spec);
std::uint32_t action_count(const GridShape& shape);

/// Count of cells that are neither obstacles nor terminals.
std::uint64_t plain_state_count(const GridSpec& spec);

/**
 * Random placement of obstacles and terminals, drawn without replacement.
 * Terminal rewards alternate +terminal_reward / -terminal_reward in draw order.
 * Pure function of its arguments. Throws CapacityError unless
 * n_obstacles + n_terminals < S.
 */
GridSpec generate_random_spec(const GridShape& shape, std::uint64_t n_obstacles,
                              std::uint64_t n_terminals, std::uint64_t seed,
                              double noise = kDefaultNoise,
                              double step_reward = kDefaultStepReward,
                              double terminal_reward = kDefaultTerminalReward);

/// Destination of a's unit move from s, or s itself if it would leave the grid
/// or enter an obstacle. Throws InvalidStateError if s is an obstacle.
StateId intended_successor(const GridSpec& spec, StateId s, ActionId a);

using Transition = std::pair<StateId, double>;

/// Exact P(. | s, a), merged, sorted by successor, without zero entries.
std::vector<Transition> transition_distribution(const GridSpec& spec, StateId s, ActionId a);

/**
 * Bulk form of transition_distribution: caches an obstacle/terminal mask so
 * building a model over every (s, a) avoids per-lookup tree searches.
 */
class Dynamics {
public:
    explicit Dynamics(const GridSpec& spec);

    /// Overwrites `out` with P(. | s, a).
    void distribution(StateId s, ActionId a, std::vector<Transition>& out) const;
    StateId intended_successor(StateId s, ActionId a) const;

    bool is_obstacle(StateId s) const { return kind_[s] == Kind::Obstacle; }
    bool is_terminal(StateId s) const { return kind_[s] == Kind::Terminal; }

private:
    enum class Kind : std::uint8_t { Plain, Obstacle, Terminal };

    StateId move(StateId s, ActionId a) const;

    GridShape shape_;
    double noise_;
    std::vector<Kind> kind_;
    std::uint32_t actions_;
};

/// JSON text form of a spec (see README for the schema).
std::string spec_to_string(const GridSpec& spec);
GridSpec spec_from_string(const std::string& text);

void write_spec_file(const GridSpec& spec, const std::filesystem::path& path);
GridSpec read_spec_file(const std::filesystem::path& path);

}  // namespace cpmdp
