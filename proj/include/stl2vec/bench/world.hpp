#pragma once

// Benchmark world: four 2x2 regions split into 1x1 quadrants, and the
// specification templates
//   (a) F[0,20] Reg(i,j)
//   (b) F[0,20] Reg(i1,j1) or F[0,20] Reg(i2,j2)                       i1 > i2
//   (c) F[0,10] Reg(i1,j1) and F[11,20] Reg(i3,j2)                     i3 != 1, i1 != i3
//   (d) F[0,15] G[0,5] Reg(i,j)
//   (e) F[0,15] G[0,5] Reg(i1,j1) or F[0,15] G[0,5] Reg(i2,j2)         i1 > i2
//   (f) F[0,20] Reg(4,4) and (not Reg(4,4) U[0,20] Reg(2,3))
// Quadrant j: 1 lower-left, 2 lower-right, 3 upper-left, 4 upper-right.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "stl2vec/embed/dataset.hpp"
#include "stl2vec/error.hpp"
#include "stl2vec/stl/formula.hpp"
#include "stl2vec/trajopt/dynamics.hpp"

namespace stl2vec::bench {

struct Rect {
    double xlo, xhi, ylo, yhi;
};

struct RegionMap {
    std::array<Rect, 4> regions{{{3, 5, 7, 9}, {3, 5, 3, 5}, {7, 9, 3, 5}, {7, 9, 7, 9}}};
    Rect initial{0, 0.7, 0, 0.7};
    double theta0 = 0.0;

    const Rect& region(int i) const {
        if (i < 1 || i > 4) throw InvalidArgument("region index must be 1..4");
        return regions[static_cast<std::size_t>(i - 1)];
    }

    Rect subregion(int i, int j) const {
        if (j < 1 || j > 4) throw InvalidArgument("sub-region index must be 1..4");
        const Rect& r = region(i);
        const double mx = (r.xlo + r.xhi) / 2, my = (r.ylo + r.yhi) / 2;
        const bool right = j == 2 || j == 4, upper = j == 3 || j == 4;
        return {right ? mx : r.xlo, right ? r.xhi : mx, upper ? my : r.ylo, upper ? r.yhi : my};
    }

    stl::Formula reg(int i, int j) const {
        const Rect s = subregion(i, j);
        return stl::rect_region(s.xlo, s.xhi, s.ylo, s.yhi, 3);
    }

    trajopt::Box initial_box() const {
        return {Eigen::Vector3d(initial.xlo, initial.ylo, theta0), Eigen::Vector3d(initial.xhi, initial.yhi, theta0)};
    }
};

struct SpecSelection {
    std::string templates = "abcdef";
    /// Regions that (a)-(e) may use.
    std::vector<int> regions{1, 2, 3, 4};
    /// Quadrants that (a)-(e) may use.
    std::vector<int> subregions{1, 2, 3, 4};
    /// (b), (e): only pairs with j1 == j2.
    bool matched_subregions = false;
    /// (c): explicit (i1, i3) pairs; empty means every pair the constraints allow.
    std::vector<std::pair<int, int>> c_pairs;
    /// (e): explicit (i1, j1, i2, j2) instances, used verbatim; empty means enumerate.
    std::vector<std::array<int, 4>> e_instances;

    static SpecSelection full() { return {}; }

    /// Controller-training subset.
    static SpecSelection training() {
        SpecSelection s;
        s.templates = "abcef";
        s.c_pairs = {{1, 3}, {2, 1}, {2, 3}, {2, 4}, {4, 3}};
        s.e_instances = {{1, 1, 3, 2}};
        return s;
    }
};

inline embed::SpecSet build_specs(const RegionMap& map, const SpecSelection& sel) {
    for (char t : sel.templates)
        if (t < 'a' || t > 'f') throw InvalidArgument(std::string("unknown template '") + t + "'");
    auto allowed = [&](int i) { return std::find(sel.regions.begin(), sel.regions.end(), i) != sel.regions.end(); };
    auto quad = [&](int j) { return std::find(sel.subregions.begin(), sel.subregions.end(), j) != sel.subregions.end(); };
    auto wants = [&](char t) { return sel.templates.find(t) != std::string::npos; };
    auto name = [](int i, int j) { return "Reg(" + std::to_string(i) + "," + std::to_string(j) + ")"; };
    const stl::Interval f20(0, 20), f10(0, 10), f1120(11, 20), f15(0, 15), g5(0, 5);

    embed::SpecSet out;
    auto add = [&](stl::Formula f, std::string n) {
        out.specs.push_back(std::move(f));
        out.names.push_back(std::move(n));
    };
    auto ev = [&](int i, int j) { return stl::Formula::eventually(f20, map.reg(i, j)); };
    auto fg = [&](int i, int j) { return stl::Formula::eventually(f15, stl::Formula::always(g5, map.reg(i, j))); };

    if (wants('a')) {
        for (int i = 1; i <= 4; ++i)
            for (int j = 1; j <= 4; ++j)
                if (allowed(i) && quad(j)) add(ev(i, j), "F[0,20] " + name(i, j));
    }
    auto disjunctions = [&](auto atom, const std::string& prefix) {
        for (int i1 = 1; i1 <= 4; ++i1)
            for (int i2 = 1; i2 < i1; ++i2)
                for (int j1 = 1; j1 <= 4; ++j1)
                    for (int j2 = 1; j2 <= 4; ++j2) {
                        if (!allowed(i1) || !allowed(i2) || !quad(j1) || !quad(j2)) continue;
                        if (sel.matched_subregions && j1 != j2) continue;
                        add(stl::Formula::disjunction(atom(i1, j1), atom(i2, j2)),
                            prefix + name(i1, j1) + " or " + prefix + name(i2, j2));
                    }
    };
    if (wants('b')) disjunctions(ev, "F[0,20] ");
    if (wants('c')) {
        std::vector<std::pair<int, int>> pairs = sel.c_pairs;
        if (pairs.empty()) {
            for (int i1 = 1; i1 <= 4; ++i1)
                for (int i3 = 2; i3 <= 4; ++i3)
                    if (i1 != i3) pairs.emplace_back(i1, i3);
        }
        std::sort(pairs.begin(), pairs.end());
        for (const auto& [i1, i3] : pairs)
            for (int j1 = 1; j1 <= 4; ++j1)
                for (int j2 = 1; j2 <= 4; ++j2) {
                    if (!allowed(i1) || !allowed(i3) || !quad(j1) || !quad(j2)) continue;
                    add(stl::Formula::conjunction(stl::Formula::eventually(f10, map.reg(i1, j1)),
                                                  stl::Formula::eventually(f1120, map.reg(i3, j2))),
                        "F[0,10] " + name(i1, j1) + " and F[11,20] " + name(i3, j2));
                }
    }
    if (wants('d')) {
        for (int i = 1; i <= 4; ++i)
            for (int j = 1; j <= 4; ++j)
                if (allowed(i) && quad(j)) add(fg(i, j), "F[0,15] G[0,5] " + name(i, j));
    }
    if (wants('e')) {
        if (sel.e_instances.empty()) {
            disjunctions(fg, "F[0,15] G[0,5] ");
        } else {
            for (const auto& [i1, j1, i2, j2] : sel.e_instances) {
                add(stl::Formula::disjunction(fg(i1, j1), fg(i2, j2)),
                    "F[0,15] G[0,5] " + name(i1, j1) + " or F[0,15] G[0,5] " + name(i2, j2));
            }
        }
    }
    if (wants('f')) {
        add(stl::Formula::conjunction(
                ev(4, 4), stl::Formula::until(f20, stl::Formula::negation(map.reg(4, 4)), map.reg(2, 3))),
            "F[0,20] Reg(4,4) and (not Reg(4,4) U[0,20] Reg(2,3))");
    }
    return out;
}

}  // namespace stl2vec::bench
