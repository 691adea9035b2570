#pragma once

// Random designs and datasets shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "fixtures.hpp"
#include "jkpanel/design.hpp"
#include "jkpanel/estimators.hpp"

namespace generators {

using namespace jkpanel;
using fixtures::spec;

// Random union of disjoint intervals on [0, n), never empty.
inline AxisSelection random_selection(std::mt19937_64& g, std::size_t n) {
    std::vector<Interval> blocks;
    std::size_t pos = 0;
    while (pos < n) {
        const std::size_t len = std::uniform_int_distribution<std::size_t>(1, n - pos)(g);
        if (std::bernoulli_distribution(0.5)(g)) blocks.push_back({pos, pos + len});
        pos += len + std::uniform_int_distribution<std::size_t>(0, 1)(g);
    }
    if (blocks.empty()) {
        const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(g);
        blocks.push_back({i, i + 1});
    }
    return AxisSelection(blocks);
}

// Enumerates every cell of the product set as a flat index.
inline std::set<std::size_t> cells(const SubsampleSpec& s, const PanelShape& shape) {
    std::set<std::size_t> out;
    std::vector<std::vector<std::size_t>> idx;
    for (const auto& a : s.axes) idx.push_back(a.indices());
    std::vector<std::size_t> pos(idx.size(), 0);
    while (true) {
        std::size_t flat = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) flat = flat * shape.dim(k) + idx[k][pos[k]];
        out.insert(flat);
        std::size_t k = idx.size();
        while (k > 0) {
            --k;
            if (++pos[k] < idx[k].size()) break;
            pos[k] = 0;
            if (k == 0) return out;
        }
    }
}

// Random two-axis designs with one or two fixed-effect groups that pass the
// identification checks.
inline std::vector<Design> random_valid_designs(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::vector<Design> out;
    const std::size_t divisors[] = {2, 3, 4, 6};
    while (out.size() < count) {
        const std::size_t n = 12, t = 12;
        const PanelShape s({n, t});
        std::vector<FixedEffectGroup> groups{FixedEffectGroup{{0}, 1}};
        if (std::bernoulli_distribution(0.5)(g)) groups.push_back(FixedEffectGroup{{1}, 1});
        if (std::bernoulli_distribution(0.2)(g)) groups = {FixedEffectGroup{{0}, 2}};
        const auto bias = expand_fixed_effects(groups, 2);
        std::vector<SubsampleSpec> subs{SubsampleSpec::full(s)};
        const std::size_t m = bias.size() + 2 + std::uniform_int_distribution<std::size_t>(0, 4)(g);
        while (subs.size() < m) {
            std::vector<AxisSelection> axes;
            for (std::size_t len : {n, t}) {
                const std::size_t p = divisors[std::uniform_int_distribution<std::size_t>(0, 3)(g)];
                const std::size_t w = len / p;
                const std::size_t lo = std::uniform_int_distribution<std::size_t>(0, p - 1)(g);
                const std::size_t hi = std::uniform_int_distribution<std::size_t>(lo + 1, p)(g);
                axes.push_back(std::bernoulli_distribution(0.3)(g) ? AxisSelection::all(len)
                                                                   : AxisSelection::range(lo * w, hi * w));
            }
            subs.push_back(spec(axes));
        }
        Design d = make_design(s, bias, subs);
        if (validate_design(d).valid()) out.push_back(std::move(d));
    }
    return out;
}

// Two-way probit sample with index λ_i + γ_t + φ d_it.
inline PanelDataset probit_data(std::mt19937_64& g, std::size_t n, std::size_t t, double phi) {
    std::normal_distribution<double> z;
    std::vector<double> lam(n), gam(t);
    for (auto& v : lam) v = 0.5 * z(g);
    for (auto& v : gam) v = 0.5 * z(g);
    std::vector<double> y(n * t), d(n * t);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            d[i * t + s] = z(g);
            y[i * t + s] = (lam[i] + gam[s] + phi * d[i * t + s] >= z(g)) ? 1.0 : 0.0;
        }
    PanelDataset data(PanelShape({n, t}));
    data.set("y", y);
    data.set("d", d);
    return data;
}

inline bool separated(const PanelDataset& data, std::size_t n, std::size_t t) {
    const auto& y = data.get("y");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < t; ++k) s += y[i * t + k];
        if (s == 0 || s == static_cast<double>(t)) return true;
    }
    for (std::size_t k = 0; k < t; ++k) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += y[i * t + k];
        if (s == 0 || s == static_cast<double>(n)) return true;
    }
    return false;
}

}  // namespace generators
