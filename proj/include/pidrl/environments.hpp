#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pidrl/mdp.hpp"
#include "pidrl/rng.hpp"

namespace pidrl {

/// Parameters of a randomly generated Garnet MDP.
struct GarnetSpec {
    int n_states = 50;
    int n_actions = 3;
    int branching = 5;
    int n_reward_states = 10;
    std::uint64_t seed = 0;
};

/// 50-state circular chain, two actions (0 = left, 1 = right). An action
/// succeeds with probability 0.7, stays in place with 0.1, and moves the
/// opposite way with 0.2. Entering state 10 pays +1, entering state 40 pays
/// -1. The returned policy always moves left.
inline std::pair<TabularMdp, Policy> chain_walk(double gamma = 0.9) {
    const int n = 50;
    const int m = 2;
    Vec p(static_cast<std::size_t>(n) * m * n, 0.0);
    Vec r(p.size(), 0.0);
    auto idx = [&](int x, int a, int y) {
        return (static_cast<std::size_t>(x) * m + a) * n + y;
    };
    for (int x = 0; x < n; ++x) {
        const int left = (x + n - 1) % n;
        const int right = (x + 1) % n;
        p[idx(x, 0, left)] += 0.7;
        p[idx(x, 0, x)] += 0.1;
        p[idx(x, 0, right)] += 0.2;
        p[idx(x, 1, right)] += 0.7;
        p[idx(x, 1, x)] += 0.1;
        p[idx(x, 1, left)] += 0.2;
        for (int a = 0; a < m; ++a)
            for (int y = 0; y < n; ++y)
                r[idx(x, a, y)] = (y == 10) ? 1.0 : (y == 40) ? -1.0 : 0.0;
    }
    return {TabularMdp(n, m, std::move(p), std::move(r), gamma),
            Policy::constant(n, m, 0)};
}

/// 6x6 grid world. States are row*6+col with row 0 at the top; the agent
/// starts at (0,0) and the goal sits at (0,5). The 12 cliff tiles fill
/// columns 1..4 of rows 1..3. Goal and cliff states are absorbing. A move
/// made in the goal pays 20; a move made in a cliff pays -32/-16/-8 for the
/// top/middle/bottom cliff row; any other move pays -1. Off-grid moves stay
/// in place; otherwise the intended direction succeeds with probability 0.9
/// and each other direction happens with probability 0.1/3. The returned
/// policy is a uniform random walk.
inline std::pair<TabularMdp, Policy> cliff_walk(double gamma = 0.9) {
    const int side = 6;
    const int n = side * side;
    const int m = 4;  // up, down, left, right
    auto state_of = [&](int row, int col) { return row * side + col; };
    const int goal = state_of(0, 5);
    auto is_cliff = [&](int s) {
        const int row = s / side, col = s % side;
        return row >= 1 && row <= 3 && col >= 1 && col <= 4;
    };
    auto move_reward = [&](int s) {
        if (s == goal) return 20.0;
        if (is_cliff(s)) {
            const int row = s / side;
            return row == 1 ? -32.0 : row == 2 ? -16.0 : -8.0;
        }
        return -1.0;
    };
    auto step_to = [&](int s, int dir) {
        int row = s / side, col = s % side;
        switch (dir) {
            case 0: row -= 1; break;
            case 1: row += 1; break;
            case 2: col -= 1; break;
            case 3: col += 1; break;
        }
        if (row < 0 || row >= side || col < 0 || col >= side) return s;
        return state_of(row, col);
    };

    Vec p(static_cast<std::size_t>(n) * m * n, 0.0);
    Vec r(p.size(), 0.0);
    auto idx = [&](int x, int a, int y) {
        return (static_cast<std::size_t>(x) * m + a) * n + y;
    };
    for (int x = 0; x < n; ++x) {
        const bool absorbing = (x == goal) || is_cliff(x);
        for (int a = 0; a < m; ++a) {
            if (absorbing) {
                p[idx(x, a, x)] = 1.0;
            } else {
                for (int dir = 0; dir < m; ++dir)
                    p[idx(x, a, step_to(x, dir))] += (dir == a) ? 0.9 : 0.1 / 3.0;
            }
            for (int y = 0; y < n; ++y) r[idx(x, a, y)] = move_reward(x);
        }
    }
    return {TabularMdp(n, m, std::move(p), std::move(r), gamma),
            Policy::uniform(n, m)};
}

/// Random Garnet MDP: each (x, a) moves uniformly to `branching` distinct
/// states other than x; `n_reward_states` states carry a Uniform(0,1) reward
/// that is paid for any move made from them. Fully determined by the seed.
/// The returned policy is a uniform random walk.
inline std::pair<TabularMdp, Policy> garnet(const GarnetSpec& spec, double gamma = 0.99) {
    const int n = spec.n_states;
    const int m = spec.n_actions;
    if (n <= 1 || m <= 0) throw std::invalid_argument("garnet: need at least 2 states and 1 action");
    if (spec.branching <= 0 || spec.branching > n - 1)
        throw std::invalid_argument("garnet: branching must be in [1, n_states-1]");
    if (spec.n_reward_states < 0 || spec.n_reward_states > n)
        throw std::invalid_argument("garnet: n_reward_states must be in [0, n_states]");

    Rng rng(spec.seed);

    // Partial Fisher-Yates: the first `take` entries of `pool` end up as a
    // uniform draw of distinct elements.
    auto draw_distinct = [&rng](std::vector<int>& pool, int take) {
        for (int i = 0; i < take; ++i) {
            const std::size_t j = i + rng.uniform_int(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
    };

    Vec state_reward(n, 0.0);
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    draw_distinct(all, spec.n_reward_states);
    for (int i = 0; i < spec.n_reward_states; ++i) state_reward[all[i]] = rng.uniform();

    Vec p(static_cast<std::size_t>(n) * m * n, 0.0);
    Vec r(p.size(), 0.0);
    auto idx = [&](int x, int a, int y) {
        return (static_cast<std::size_t>(x) * m + a) * n + y;
    };
    const double prob = 1.0 / spec.branching;
    for (int x = 0; x < n; ++x) {
        std::vector<int> others;
        others.reserve(n - 1);
        for (int y = 0; y < n; ++y)
            if (y != x) others.push_back(y);
        for (int a = 0; a < m; ++a) {
            std::vector<int> pool = others;
            draw_distinct(pool, spec.branching);
            for (int i = 0; i < spec.branching; ++i) p[idx(x, a, pool[i])] = prob;
            for (int y = 0; y < n; ++y) r[idx(x, a, y)] = state_reward[x];
        }
    }
    return {TabularMdp(n, m, std::move(p), std::move(r), gamma),
            Policy::uniform(n, m)};
}

}  // namespace pidrl
