#pragma once

// Test-only reference implementations. They work on coordinates and dense
// vectors and do not call into the library's flat-index or CSR code paths.

#include "cpmdp/gridworld.hpp"
#include "cpmdp/solvers.hpp"
#include "cpmdp/transition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace cpmdp::oracle {

/// All multi-indices of `dims` in row-major (odometer) order.
inline std::vector<std::vector<std::uint64_t>> enumerate(const std::vector<std::uint64_t>& dims) {
    std::vector<std::vector<std::uint64_t>> out;
    std::vector<std::uint64_t> c(dims.size(), 0);
    for (;;) {
        out.push_back(c);
        std::size_t k = dims.size();
        while (k > 0) {
            --k;
            if (++c[k] < dims[k]) break;
            c[k] = 0;
            if (k == 0) return out;
        }
        if (dims.empty()) return out;
    }
}

/// Dense P(. | s, a) of length S built from coordinates by enumerating the
/// intended move and every orthogonal slip.
inline std::vector<double> dense_distribution(const GridSpec& spec, StateId s, ActionId a) {
    const auto dims_span = spec.shape.dims();
    const std::vector<std::uint64_t> dims(dims_span.begin(), dims_span.end());
    const auto cells = enumerate(dims);
    std::map<std::vector<std::uint64_t>, StateId> id;
    for (StateId i = 0; i < cells.size(); ++i) id[cells[i]] = i;

    std::vector<double> p(cells.size(), 0.0);
    if (spec.terminals.contains(s)) {
        p[s] = 1.0;
        return p;
    }
    const auto& here = cells[s];
    auto land = [&](std::size_t axis, int dir) -> StateId {
        auto c = here;
        if (dir < 0 && c[axis] == 0) return s;
        if (dir > 0 && c[axis] + 1 == dims[axis]) return s;
        c[axis] = dir < 0 ? c[axis] - 1 : c[axis] + 1;
        const auto t = id.at(c);
        return spec.obstacles.contains(t) ? s : t;
    };
    const std::size_t axis = a / 2;
    const int dir = a % 2 == 0 ? -1 : 1;
    const auto D = dims.size();
    p[land(axis, dir)] += spec.noise;
    if (D == 1) {
        p[s] += 1.0 - spec.noise;
    } else {
        const double slip = (1.0 - spec.noise) / (2.0 * static_cast<double>(D - 1));
        for (std::size_t k = 0; k < D; ++k) {
            if (k == axis) continue;
            p[land(k, -1)] += slip;
            p[land(k, +1)] += slip;
        }
    }
    return p;
}

/// Plain value iteration over dense nested vectors built from dense_distribution.
struct DenseVi {
    ValueFunction value;
    Policy policy;
    std::uint64_t iterations = 0;
};

inline DenseVi dense_value_iteration(const GridSpec& spec, double gamma, double epsilon,
                                     std::uint64_t max_iter) {
    const auto S = spec.shape.num_states();
    const auto A = action_count(spec);
    std::vector<std::vector<std::vector<double>>> P(A, std::vector<std::vector<double>>(S));
    std::vector<double> r(S, spec.step_reward);
    std::vector<bool> plain(S, true);
    for (auto s : spec.obstacles) {
        r[s] = 0.0;
        plain[s] = false;
    }
    for (const auto& [s, rew] : spec.terminals) {
        r[s] = rew;
        plain[s] = false;
    }
    for (ActionId a = 0; a < A; ++a)
        for (StateId s = 0; s < S; ++s)
            if (plain[s]) P[a][s] = dense_distribution(spec, s, a);

    auto greedy = [&](const std::vector<double>& v, std::vector<double>& out, Policy& pi) {
        for (StateId s = 0; s < S; ++s) {
            if (!plain[s]) continue;
            double best = -INFINITY;
            for (ActionId a = 0; a < A; ++a) {
                double acc = 0.0;
                for (StateId t = 0; t < S; ++t) acc += P[a][s][t] * v[t];
                const double q = r[s] + gamma * acc;
                if (q > best) {
                    best = q;
                    pi[s] = a;
                }
            }
            out[s] = best;
        }
    };

    DenseVi res;
    res.value = r;
    res.policy.assign(S, kNoAction);
    const double thr = gamma == 0.0 ? INFINITY : epsilon * (1 - gamma) / gamma;
    auto next = res.value;
    for (std::uint64_t k = 0; k < max_iter; ++k) {
        greedy(res.value, next, res.policy);
        double resid = 0.0;
        for (StateId s = 0; s < S; ++s) resid = std::max(resid, std::abs(next[s] - res.value[s]));
        std::swap(res.value, next);
        ++res.iterations;
        if (resid < thr) break;
    }
    auto scratch = res.value;
    greedy(res.value, scratch, res.policy);
    return res;
}

/// V_pi by Gauss-Jordan elimination on the full S x S system: plain rows
/// v(s) - gamma * P v = r(s), terminal rows v(s) = r(s), obstacle rows v(s) = 0.
inline ValueFunction dense_policy_value(const GridSpec& spec, const Policy& pi, double gamma) {
    const auto S = spec.shape.num_states();
    std::vector<std::vector<double>> a(S, std::vector<double>(S + 1, 0.0));
    for (StateId s = 0; s < S; ++s) {
        a[s][s] = 1.0;
        if (spec.obstacles.contains(s)) continue;
        if (spec.terminals.contains(s)) {
            a[s][S] = spec.terminals.at(s);
            continue;
        }
        const auto p = dense_distribution(spec, s, pi[s]);
        for (StateId t = 0; t < S; ++t) a[s][t] -= gamma * p[t];
        a[s][S] = spec.step_reward;
    }
    for (StateId c = 0; c < S; ++c) {
        StateId piv = c;
        for (StateId r = c + 1; r < S; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (StateId r = 0; r < S; ++r) {
            if (r == c || a[r][c] == 0.0) continue;
            const double f = a[r][c] / a[c][c];
            for (StateId k = c; k <= S; ++k) a[r][k] -= f * a[c][k];
        }
    }
    ValueFunction v(S);
    for (StateId s = 0; s < S; ++s) v[s] = a[s][S] / a[s][s];
    return v;
}

inline double sup_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace cpmdp::oracle
