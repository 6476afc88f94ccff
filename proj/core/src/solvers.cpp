#include "cpmdp/solvers.hpp"

#include "cpmdp/errors.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <thread>

namespace cpmdp {

namespace {

std::uint64_t row_cost(const ComponentModel& cm, ActionId a, StateId s) {
    return cm.component_count(a, s);
}

std::uint64_t row_cost(const TabularModel& tm, ActionId, StateId) { return tm.num_states(); }

/// Runs fn(begin, end) over [0, n) split into contiguous chunks and returns the
/// sum of what the chunks report. Chunk results are summed in chunk order.
template <class Fn>
std::uint64_t parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(
                                                           std::max<std::size_t>(n, 1))));
    if (threads == 1) return fn(std::size_t{0}, n);
    std::vector<std::uint64_t> partial(threads, 0);
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            const auto begin = n * w / threads;
            const auto end = n * (w + 1) / threads;
            workers.emplace_back([&, w, begin, end] { partial[w] = fn(begin, end); });
        }
    }
    std::uint64_t total = 0;
    for (auto p : partial) total += p;
    return total;
}

void check_sizes(std::uint64_t model_states, const RewardModel& rm, std::size_t v_size) {
    if (rm.num_states() != model_states || v_size != model_states)
        throw BoundsError(fmt::format("size mismatch: model {} states, rewards {}, values {}",
                                      model_states, rm.num_states(), v_size));
}

/// Writes V'(s) and the greedy action for plain states in `plain`.
template <class Model>
std::uint64_t backup_range(const Model& m, const RewardModel& rm, std::span<const double> v,
                           double gamma, std::span<const StateId> plain, double* out_v,
                           ActionId* out_pi) {
    std::uint64_t mults = 0;
    const auto actions = m.num_actions();
    for (auto s : plain) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (ActionId a = 0; a < actions; ++a) {
            const double q = rm.reward[s] + gamma * m.expected_value(a, s, v);
            mults += row_cost(m, a, s);
            if (q > best) {
                best = q;
                arg = a;
            }
        }
        if (out_v) out_v[s] = best;
        if (out_pi) out_pi[s] = arg;
    }
    return mults;
}

template <class Model>
std::uint64_t backup_into(const Model& m, const RewardModel& rm, std::span<const double> v,
                          const SolverConfig& cfg, ValueFunction* out_v, Policy* out_pi) {
    const std::span<const StateId> plain = rm.plain;
    return parallel_chunks(plain.size(), cfg.threads, [&](std::size_t b, std::size_t e) {
        return backup_range(m, rm, v, cfg.gamma, plain.subspan(b, e - b),
                            out_v ? out_v->data() : nullptr,
                            out_pi ? out_pi->data() : nullptr);
    });
}

double max_abs_diff(std::span<const double> a, std::span<const double> b,
                    std::span<const StateId> over) {
    double r = 0.0;
    for (auto s : over) r = std::max(r, std::abs(a[s] - b[s]));
    return r;
}

template <class Model>
BackupResult backup_impl(const Model& m, const RewardModel& rm, std::span<const double> v,
                         const SolverConfig& cfg, MultiplyCounter* counter) {
    check_sizes(m.num_states(), rm, v.size());
    BackupResult r{ValueFunction(v.begin(), v.end()), initial_policy(rm)};
    const auto mults = backup_into(m, rm, v, cfg, &r.value, &r.policy);
    if (counter) counter->add(mults);
    return r;
}

template <class Model>
Policy improvement_impl(const Model& m, const RewardModel& rm, std::span<const double> v,
                        const SolverConfig& cfg, MultiplyCounter* counter) {
    check_sizes(m.num_states(), rm, v.size());
    Policy pi = initial_policy(rm);
    const auto mults = backup_into(m, rm, v, cfg, nullptr, &pi);
    if (counter) counter->add(mults);
    return pi;
}

template <class Model>
SolveResult value_iteration_impl(const Model& m, const RewardModel& rm,
                                 const SolverConfig& cfg) {
    validate(cfg);
    const auto threshold = stopping_threshold(cfg.gamma, cfg.epsilon);
    SolveResult res;
    ValueFunction v = initial_values(rm);
    check_sizes(m.num_states(), rm, v.size());
    ValueFunction next = v;
    for (std::uint64_t k = 0; k < cfg.max_iter; ++k) {
        res.evaluation_multiplies += backup_into(m, rm, v, cfg, &next, nullptr);
        const double residual = max_abs_diff(next, v, rm.plain);
        std::swap(v, next);
        res.residual_trace.push_back(residual);
        ++res.iterations;
        if (residual < threshold) {
            res.converged = true;
            break;
        }
    }
    res.policy = initial_policy(rm);
    res.improvement_multiplies = backup_into(m, rm, v, cfg, nullptr, &res.policy);
    res.multiplies = res.evaluation_multiplies + res.improvement_multiplies;
    res.value = std::move(v);
    return res;
}

template <class Model>
EvaluationResult evaluation_impl(const Model& m, const RewardModel& rm,
                                 std::span<const ActionId> policy, const SolverConfig& cfg,
                                 std::span<const double> start, MultiplyCounter* counter) {
    validate(cfg);
    if (policy.size() != m.num_states())
        throw BoundsError(fmt::format("policy has {} entries, model has {} states",
                                      policy.size(), m.num_states()));
    for (auto s : rm.plain)
        if (policy[s] >= m.num_actions())
            throw BoundsError(fmt::format("policy action {} at state {} out of range",
                                          policy[s], s));
    EvaluationResult res;
    ValueFunction v = start.empty() ? initial_values(rm) : ValueFunction(start.begin(), start.end());
    check_sizes(m.num_states(), rm, v.size());
    ValueFunction next = v;
    const auto threshold = stopping_threshold(cfg.gamma, cfg.eval_epsilon);
    const std::span<const StateId> plain = rm.plain;
    std::uint64_t mults = 0;
    for (std::uint64_t k = 0; k < cfg.eval_max_iter; ++k) {
        mults += parallel_chunks(plain.size(), cfg.threads, [&](std::size_t b, std::size_t e) {
            std::uint64_t n = 0;
            for (auto s : plain.subspan(b, e - b)) {
                const auto a = policy[s];
                next[s] = rm.reward[s] + cfg.gamma * m.expected_value(a, s, v);
                n += row_cost(m, a, s);
            }
            return n;
        });
        res.residual = max_abs_diff(next, v, plain);
        res.residual_trace.push_back(res.residual);
        std::swap(v, next);
        ++res.sweeps;
        if (res.residual < threshold) {
            res.converged = true;
            break;
        }
    }
    if (counter) counter->add(mults);
    res.value = std::move(v);
    return res;
}

template <class Model>
SolveResult policy_iteration_impl(const Model& m, const RewardModel& rm, const SolverConfig& cfg,
                                  const PolicyRoundObserver& observer) {
    validate(cfg);
    SolveResult res;
    Policy pi = initial_policy(rm);
    ValueFunction v = initial_values(rm);
    check_sizes(m.num_states(), rm, v.size());
    ValueFunction bellman(v);
    Policy next_pi(pi);
    for (std::uint64_t round = 0; round < cfg.max_iter; ++round) {
        MultiplyCounter eval_mults;
        auto ev = evaluation_impl(m, rm, pi, cfg, v, &eval_mults);
        v = std::move(ev.value);
        res.evaluation_multiplies += eval_mults.value();
        res.evaluation_sweeps += ev.sweeps;
        res.evaluation_traces.push_back(std::move(ev.residual_trace));

        res.improvement_multiplies += backup_into(m, rm, v, cfg, &bellman, &next_pi);
        res.residual_trace.push_back(max_abs_diff(bellman, v, rm.plain));
        ++res.iterations;
        if (observer) observer(res.iterations, pi, v);
        if (next_pi == pi) {
            res.converged = true;
            break;
        }
        std::swap(pi, next_pi);
    }
    res.multiplies = res.evaluation_multiplies + res.improvement_multiplies;
    res.policy = std::move(pi);
    res.value = std::move(v);
    return res;
}

}  // namespace

void validate(const SolverConfig& cfg) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0))
        throw SpecError(fmt::format("discount {} outside [0, 1)", cfg.gamma));
    if (!(cfg.epsilon > 0.0) || !(cfg.eval_epsilon > 0.0))
        throw SpecError("convergence thresholds must be positive");
    if (cfg.max_iter == 0 || cfg.eval_max_iter == 0)
        throw SpecError("iteration limits must be positive");
}

double stopping_threshold(double gamma, double epsilon) {
    if (gamma == 0.0) return std::numeric_limits<double>::infinity();
    return epsilon * (1.0 - gamma) / gamma;
}

ValueFunction initial_values(const RewardModel& rm) { return rm.reward; }

Policy initial_policy(const RewardModel& rm) {
    Policy pi(rm.num_states(), kNoAction);
    for (auto s : rm.plain) pi[s] = 0;
    return pi;
}

BackupResult bellman_backup(const ComponentModel& cm, const RewardModel& rm,
                            std::span<const double> v, const SolverConfig& cfg,
                            MultiplyCounter* counter) {
    return backup_impl(cm, rm, v, cfg, counter);
}

BackupResult bellman_backup(const TabularModel& tm, const RewardModel& rm,
                            std::span<const double> v, const SolverConfig& cfg,
                            MultiplyCounter* counter) {
    return backup_impl(tm, rm, v, cfg, counter);
}

SolveResult value_iteration(const ComponentModel& cm, const RewardModel& rm,
                            const SolverConfig& cfg) {
    return value_iteration_impl(cm, rm, cfg);
}

SolveResult tabular_value_iteration(const TabularModel& tm, const RewardModel& rm,
                                    const SolverConfig& cfg) {
    return value_iteration_impl(tm, rm, cfg);
}

EvaluationResult policy_evaluation_iterative(const ComponentModel& cm, const RewardModel& rm,
                                             std::span<const ActionId> policy,
                                             const SolverConfig& cfg,
                                             std::span<const double> start,
                                             MultiplyCounter* counter) {
    return evaluation_impl(cm, rm, policy, cfg, start, counter);
}

EvaluationResult policy_evaluation_iterative(const TabularModel& tm, const RewardModel& rm,
                                             std::span<const ActionId> policy,
                                             const SolverConfig& cfg,
                                             std::span<const double> start,
                                             MultiplyCounter* counter) {
    return evaluation_impl(tm, rm, policy, cfg, start, counter);
}

ValueFunction policy_evaluation_exact(const TabularModel& tm, const RewardModel& rm,
                                      std::span<const ActionId> policy,
                                      const SolverConfig& cfg) {
    validate(cfg);
    const auto S = tm.num_states();
    check_sizes(S, rm, policy.size());
    const auto n = rm.plain.size();
    if (n > kExactEvaluationCap)
        throw SizingError(fmt::format("{} plain states exceed the direct-solve cap of {}", n,
                                      kExactEvaluationCap));

    // Position of each plain state among the unknowns.
    std::vector<std::int64_t> slot(S, -1);
    for (std::size_t i = 0; i < n; ++i) slot[rm.plain[i]] = static_cast<std::int64_t>(i);

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(n));
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = rm.plain[i];
        if (policy[s] >= tm.num_actions())
            throw BoundsError(fmt::format("policy action {} at state {} out of range",
                                          policy[s], s));
        const auto row = tm.row(policy[s], s);
        double rhs = rm.reward[s];
        for (StateId t = 0; t < S; ++t) {
            if (row[t] == 0.0) continue;
            if (slot[t] >= 0)
                a(static_cast<Eigen::Index>(i), slot[t]) -= cfg.gamma * row[t];
            else if (rm.is_terminal(t))
                rhs += cfg.gamma * row[t] * rm.reward[t];
        }
        b(static_cast<Eigen::Index>(i)) = rhs;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::VectorXd x = lu.solve(b);
    if (!x.allFinite()) throw Error("policy evaluation system is singular");

    ValueFunction v = initial_values(rm);
    for (std::size_t i = 0; i < n; ++i) v[rm.plain[i]] = x(static_cast<Eigen::Index>(i));
    return v;
}

Policy policy_improvement(const ComponentModel& cm, const RewardModel& rm,
                          std::span<const double> v, const SolverConfig& cfg,
                          MultiplyCounter* counter) {
    return improvement_impl(cm, rm, v, cfg, counter);
}

Policy policy_improvement(const TabularModel& tm, const RewardModel& rm,
                          std::span<const double> v, const SolverConfig& cfg,
                          MultiplyCounter* counter) {
    return improvement_impl(tm, rm, v, cfg, counter);
}

SolveResult policy_iteration(const ComponentModel& cm, const RewardModel& rm,
                             const SolverConfig& cfg, const PolicyRoundObserver& observer) {
    return policy_iteration_impl(cm, rm, cfg, observer);
}

SolveResult tabular_policy_iteration(const TabularModel& tm, const RewardModel& rm,
                                     const SolverConfig& cfg,
                                     const PolicyRoundObserver& observer) {
    return policy_iteration_impl(tm, rm, cfg, observer);
}

std::vector<double> q_values(const ComponentModel& cm, const RewardModel& rm,
                             std::span<const double> v, const SolverConfig& cfg, StateId s) {
    check_sizes(cm.num_states(), rm, v.size());
    if (s >= cm.num_states() || !rm.is_plain(s))
        throw InvalidStateError(fmt::format("state {} is not a plain state", s));
    std::vector<double> q(cm.num_actions());
    for (ActionId a = 0; a < cm.num_actions(); ++a)
        q[a] = rm.reward[s] + cfg.gamma * cm.expected_value(a, s, v);
    return q;
}

std::vector<double> q_gaps(const ComponentModel& cm, const RewardModel& rm,
                           std::span<const double> v, const SolverConfig& cfg) {
    std::vector<double> gaps(cm.num_states(), std::numeric_limits<double>::infinity());
    for (auto s : rm.plain) {
        auto q = q_values(cm, rm, v, cfg, s);
        if (q.size() < 2) continue;
        std::partial_sort(q.begin(), q.begin() + 2, q.end(), std::greater<>());
        gaps[s] = q[0] - q[1];
    }
    return gaps;
}

}  // namespace cpmdp
