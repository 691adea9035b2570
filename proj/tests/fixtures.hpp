#pragma once

// Worked designs shared by the unit tests and the acceptance binary.

#include <vector>

#include "jkpanel/design.hpp"

namespace fixtures {

using jkpanel::AxisSelection;
using jkpanel::BiasTerm;
using jkpanel::Design;
using jkpanel::FixedEffectGroup;
using jkpanel::PanelShape;
using jkpanel::Rational;
using jkpanel::SubsampleSpec;

inline SubsampleSpec spec(std::vector<AxisSelection> axes) { return SubsampleSpec{std::move(axes)}; }

inline AxisSelection half(std::size_t n, std::size_t which) {
    return AxisSelection::range(which * n / 2, (which + 1) * n / 2);
}

// One-way effects, full sample plus the two time halves.
inline Design oneway_halves(std::size_t n = 100, std::size_t t = 10) {
    PanelShape s({n, t});
    return jkpanel::make_design(s, jkpanel::expand_fixed_effects({FixedEffectGroup{{0}, 1}}, 2),
                                {SubsampleSpec::full(s), spec({AxisSelection::all(n), half(t, 0)}),
                                 spec({AxisSelection::all(n), half(t, 1)})});
}

// Two-way effects: full sample, time halves, then unit halves.
inline Design twoway_halves(std::size_t n = 20, std::size_t t = 20) {
    PanelShape s({n, t});
    return jkpanel::make_design(
        s, jkpanel::expand_fixed_effects({FixedEffectGroup{{0}, 1}, FixedEffectGroup{{1}, 1}}, 2),
        {SubsampleSpec::full(s), spec({AxisSelection::all(n), half(t, 0)}), spec({AxisSelection::all(n), half(t, 1)}),
         spec({half(n, 0), AxisSelection::all(t)}), spec({half(n, 1), AxisSelection::all(t)})});
}

// Three-way interacted effects with halves along each axis in turn.
inline Design threeway_halves(std::size_t n = 8) {
    PanelShape s({n, n, n});
    std::vector<SubsampleSpec> subs{SubsampleSpec::full(s)};
    for (std::size_t axis = 0; axis < 3; ++axis)
        for (std::size_t w = 0; w < 2; ++w) {
            std::vector<AxisSelection> axes(3, AxisSelection::all(n));
            axes[axis] = half(n, w);
            subs.push_back(spec(axes));
        }
    return jkpanel::make_design(
        s,
        jkpanel::expand_fixed_effects(
            {FixedEffectGroup{{0, 1}, 1}, FixedEffectGroup{{1, 2}, 1}, FixedEffectGroup{{2, 0}, 1}}, 3),
        subs);
}

// One-way effects with the time axis cut into thirds.
inline Design thirds(std::size_t n = 30, std::size_t t = 9) {
    PanelShape s({n, t});
    std::vector<SubsampleSpec> subs{SubsampleSpec::full(s)};
    for (std::size_t w = 0; w < 3; ++w)
        subs.push_back(spec({AxisSelection::all(n), AxisSelection::range(w * t / 3, (w + 1) * t / 3)}));
    return jkpanel::make_design(s, jkpanel::expand_fixed_effects({FixedEffectGroup{{0}, 1}}, 2), subs);
}

inline std::vector<BiasTerm> variance_bias_terms() {
    return {BiasTerm{{Rational(1, 2), Rational(-1, 2)}}, BiasTerm{{Rational(-1, 2), Rational(1, 2)}},
            BiasTerm{{Rational(-1, 2), Rational(-1, 2)}}};
}

// Two-way variance model: full, first third and first two thirds in time,
// first third of units, and the corner block.
inline Design variance_design(std::size_t n = 30, std::size_t t = 30) {
    PanelShape s({n, t});
    const auto all_n = AxisSelection::all(n);
    const auto all_t = AxisSelection::all(t);
    const auto n3 = AxisSelection::range(0, n / 3);
    return jkpanel::make_design(s, variance_bias_terms(),
                                {SubsampleSpec::full(s), spec({all_n, AxisSelection::range(0, t / 3)}),
                                 spec({all_n, AxisSelection::range(0, 2 * t / 3)}), spec({n3, all_t}),
                                 spec({n3, AxisSelection::range(0, t / 3)})});
}

inline std::vector<std::vector<Rational>> rational_matrix(const std::vector<std::vector<std::int64_t>>& num,
                                                          std::int64_t den = 1) {
    std::vector<std::vector<Rational>> out;
    for (const auto& row : num) {
        std::vector<Rational> r;
        for (auto x : row) r.emplace_back(x, den);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fixtures
