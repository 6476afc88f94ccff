#pragma once

#include "cpmdp/transition.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace cpmdp {

/// V: state -> expected utility. Obstacles hold 0, terminals their reward.
using ValueFunction = std::vector<double>;

/// pi: state -> action. Obstacles and terminals hold kNoAction.
using Policy = std::vector<ActionId>;

inline constexpr ActionId kNoAction = std::numeric_limits<ActionId>::max();

struct SolverConfig {
    double gamma = 0.9;
    /// Stop once the max-norm residual drops below epsilon * (1 - gamma) / gamma.
    double epsilon = 1e-4;
    std::uint64_t max_iter = 1000;
    double eval_epsilon = 1e-4;
    std::uint64_t eval_max_iter = 1000;
    /// Workers per sweep. Results do not depend on this.
    unsigned threads = 1;
};

/// Throws SpecError for gamma outside [0, 1) or non-positive tolerances.
void validate(const SolverConfig& cfg);

/// epsilon * (1 - gamma) / gamma, or +inf when gamma == 0.
double stopping_threshold(double gamma, double epsilon);

struct SolveResult {
    ValueFunction value;
    Policy policy;
    std::uint64_t iterations = 0;
    /// One entry per iteration. VI: ||V_{k+1} - V_k||. PI: Bellman residual
    /// ||T V_pi - V_pi|| of the evaluated policy.
    std::vector<double> residual_trace;
    std::uint64_t multiplies = 0;
    bool converged = false;

    // Breakdown of `multiplies`. For VI the evaluation part is the backups and
    // the improvement part is the final greedy extraction.
    std::uint64_t evaluation_multiplies = 0;
    std::uint64_t improvement_multiplies = 0;
    /// PI only: inner evaluation sweeps summed over rounds.
    std::uint64_t evaluation_sweeps = 0;
    /// PI only: per round, the sweep residuals of its policy evaluation.
    std::vector<std::vector<double>> evaluation_traces;
};

struct BackupResult {
    ValueFunction value;
    Policy policy;
};

/**
 * One Jacobi application of the Bellman operator: for each plain state,
 * V'(s) = r(s) + gamma * max_a Sum_{s'} P(s'|s,a) V(s'), with the lowest action
 * index winning ties. Terminal and obstacle entries are copied through.
 */
BackupResult bellman_backup(const ComponentModel& cm, const RewardModel& rm,
                            std::span<const double> v, const SolverConfig& cfg,
                            MultiplyCounter* counter = nullptr);
BackupResult bellman_backup(const TabularModel& tm, const RewardModel& rm,
                            std::span<const double> v, const SolverConfig& cfg,
                            MultiplyCounter* counter = nullptr);

/// V_0 = r, terminals pinned, obstacles 0.
ValueFunction initial_values(const RewardModel& rm);

/// Lowest-index action on plain states, kNoAction elsewhere.
Policy initial_policy(const RewardModel& rm);

/// CP-VI.
SolveResult value_iteration(const ComponentModel& cm, const RewardModel& rm,
                            const SolverConfig& cfg);
SolveResult tabular_value_iteration(const TabularModel& tm, const RewardModel& rm,
                                    const SolverConfig& cfg);

struct EvaluationResult {
    ValueFunction value;
    std::uint64_t sweeps = 0;
    double residual = 0.0;
    /// ||V_{k+1} - V_k|| per sweep.
    std::vector<double> residual_trace;
    bool converged = false;
};

/**
 * Fixed-policy Jacobi sweeps starting from `start` (defaults to V_0 when empty)
 * until the sweep residual is below eval_epsilon * (1 - gamma) / gamma or
 * eval_max_iter sweeps ran.
 */
EvaluationResult policy_evaluation_iterative(const ComponentModel& cm, const RewardModel& rm,
                                             std::span<const ActionId> policy,
                                             const SolverConfig& cfg,
                                             std::span<const double> start = {},
                                             MultiplyCounter* counter = nullptr);
EvaluationResult policy_evaluation_iterative(const TabularModel& tm, const RewardModel& rm,
                                             std::span<const ActionId> policy,
                                             const SolverConfig& cfg,
                                             std::span<const double> start = {},
                                             MultiplyCounter* counter = nullptr);

/// Largest plain-state count the direct solve accepts.
inline constexpr std::uint64_t kExactEvaluationCap = 4096;

/**
 * Solves (I - gamma P_pi) V = r over plain states by LU elimination, with
 * terminal values as boundary terms. Throws SizingError above
 * kExactEvaluationCap plain states.
 */
ValueFunction policy_evaluation_exact(const TabularModel& tm, const RewardModel& rm,
                                      std::span<const ActionId> policy, const SolverConfig& cfg);

/// Greedy policy with respect to V (lowest index on ties).
Policy policy_improvement(const ComponentModel& cm, const RewardModel& rm,
                          std::span<const double> v, const SolverConfig& cfg,
                          MultiplyCounter* counter = nullptr);
Policy policy_improvement(const TabularModel& tm, const RewardModel& rm,
                          std::span<const double> v, const SolverConfig& cfg,
                          MultiplyCounter* counter = nullptr);

/// Called after every PI round with the evaluated policy and its values.
using PolicyRoundObserver =
    std::function<void(std::uint64_t round, const Policy& policy, const ValueFunction& value)>;

/// CP-PI: alternate iterative evaluation (warm-started) and greedy improvement
/// until the policy is unchanged or max_iter rounds ran.
SolveResult policy_iteration(const ComponentModel& cm, const RewardModel& rm,
                             const SolverConfig& cfg, const PolicyRoundObserver& observer = {});
SolveResult tabular_policy_iteration(const TabularModel& tm, const RewardModel& rm,
                                     const SolverConfig& cfg,
                                     const PolicyRoundObserver& observer = {});

/// Q(s, a) = r(s) + gamma * Sum P V for every action of one plain state.
std::vector<double> q_values(const ComponentModel& cm, const RewardModel& rm,
                             std::span<const double> v, const SolverConfig& cfg, StateId s);

/// Best minus second-best Q per plain state; +inf elsewhere.
std::vector<double> q_gaps(const ComponentModel& cm, const RewardModel& rm,
                           std::span<const double> v, const SolverConfig& cfg);

}  // namespace cpmdp
