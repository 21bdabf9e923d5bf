#pragma once

// attribution.hpp — decision-faithfulness quantities: leave-any-out (LAO)
// behavioral attribution, self-attribution alignment (Spearman rho with
// seeded permutation p-values), dispersion, feature-label statistical
// dependence (NMI / Cramér's V / Pearson / Spearman), triangulation across
// the three rankings, and quadrant classification.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stads/common.hpp"
#include "stads/corpus.hpp"
#include "stads/parse.hpp"

namespace stads::attribution {

using corpus::Dataset;
using parse::RankingList;

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

struct AttributionRecord {
    RankingList self_rank;             // pi_self
    std::vector<std::string> schema;   // feature names, schema order
    std::vector<double> delta;         // Delta_j aligned with schema
    std::vector<std::string> lao_rank; // pi_LAO, descending Delta
    double sigma_lao = 0.0;
    double self_att_at_k = 0.0;
    std::optional<double> self_faith_rho;  // undefined when <2 common features
    std::optional<double> self_faith_p;
};

struct DependenceRecord {
    std::vector<std::string> features;  // schema order
    std::vector<double> nmi;            // in [0,1]
    std::vector<std::optional<double>> cramers_v;   // categorical/multiclass pairs
    std::vector<std::optional<double>> pearson_r;   // numeric feature, binary target
    std::vector<std::optional<double>> spearman_r;  // numeric feature, binary target
    std::vector<std::string> nmi_rank;  // pi_NMI, descending NMI
};

struct RhoP {
    std::optional<double> rho;
    std::optional<double> p;
};

struct TriangulationRecord {
    RhoP self_lao;
    RhoP self_nmi;
    RhoP lao_nmi;
};

enum class quadrant {
    accurate_faithful,
    accurate_unfaithful,
    inaccurate_faithful,
    inaccurate_unfaithful,
    unclassified
};

inline const char* to_string(quadrant q) {
    switch (q) {
        case quadrant::accurate_faithful: return "accurate-faithful";
        case quadrant::accurate_unfaithful: return "accurate-unfaithful";
        case quadrant::inaccurate_faithful: return "inaccurate-faithful";
        case quadrant::inaccurate_unfaithful: return "inaccurate-unfaithful";
        case quadrant::unclassified: return "unclassified";
    }
    return "unclassified";
}

// ---------------------------------------------------------------------------
// rank statistics
// ---------------------------------------------------------------------------

// 1-based ranks with ties sharing the average of their positions
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> pearson(const std::vector<double>& x,
                                     const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
    return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

// Spearman rho on raw score vectors; average ranks absorb ties, so this equals
// the closed-form 1 - 6*sum(d^2)/(m(m^2-1)) exactly in the tie-free case
inline std::optional<double> spearman_from_scores(const std::vector<double>& a,
                                                  const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return std::nullopt;
    return pearson(average_ranks(a), average_ranks(b));
}

namespace detail {

// positional rank vectors of two orderings restricted to their common names;
// iteration order of the common set is canonical (sorted) so results don't
// depend on which ranking came first
inline bool common_rank_vectors(const std::vector<std::string>& rank_a,
                                const std::vector<std::string>& rank_b,
                                std::vector<double>& ra, std::vector<double>& rb) {
    std::set<std::string> common;
    {
        std::set<std::string> in_a(rank_a.begin(), rank_a.end());
        for (const auto& n : rank_b)
            if (in_a.count(n)) common.insert(n);
    }
    if (common.size() < 2) return false;

    std::map<std::string, double> pos_a, pos_b;
    double next = 1.0;
    for (const auto& n : rank_a)
        if (common.count(n)) pos_a[n] = next++;
    next = 1.0;
    for (const auto& n : rank_b)
        if (common.count(n)) pos_b[n] = next++;

    ra.clear();
    rb.clear();
    for (const auto& n : common) {
        ra.push_back(pos_a[n]);
        rb.push_back(pos_b[n]);
    }
    return true;
}

}  // namespace detail

inline std::optional<double> spearman_rho(const std::vector<std::string>& rank_a,
                                          const std::vector<std::string>& rank_b) {
    std::vector<double> ra, rb;
    if (!detail::common_rank_vectors(rank_a, rank_b, ra, rb)) return std::nullopt;
    return pearson(ra, rb);
}

// two-sided seeded permutation test with +1 smoothing on both counts
inline std::optional<double> permutation_pvalue(
    const std::vector<std::string>& rank_a, const std::vector<std::string>& rank_b,
    std::size_t permutations, std::uint64_t seed) {
    std::vector<double> ra, rb;
    if (!detail::common_rank_vectors(rank_a, rank_b, ra, rb)) return std::nullopt;
    const auto rho_obs = pearson(ra, rb);
    if (!rho_obs) return std::nullopt;
    const double target = std::abs(*rho_obs) - 1e-12;

    det_rng rng(seed);
    std::size_t hits = 0;
    std::vector<double> perm = rb;
    for (std::size_t it = 0; it < permutations; ++it) {
        rng.shuffle(perm);
        const auto rho = pearson(ra, perm);
        if (rho && std::abs(*rho) >= target) ++hits;
    }
    return static_cast<double>(hits + 1) / static_cast<double>(permutations + 1);
}

// ---------------------------------------------------------------------------
// LAO attribution
// ---------------------------------------------------------------------------

inline std::pair<std::vector<double>, std::vector<std::string>> lao_attribution(
    const std::vector<std::string>& schema, double base_perf,
    const std::map<std::string, double>& ablated_perfs) {
    std::vector<double> delta;
    delta.reserve(schema.size());
    for (const auto& name : schema) {
        auto it = ablated_perfs.find(name);
        if (it == ablated_perfs.end())
            throw error("attribution", "no ablated performance for feature: " + name);
        delta.push_back(base_perf - it->second);
    }
    std::vector<std::size_t> order(schema.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return delta[a] > delta[b];  // stable: ties keep schema order
    });
    std::vector<std::string> rank;
    rank.reserve(schema.size());
    for (std::size_t i : order) rank.push_back(schema[i]);
    return {std::move(delta), std::move(rank)};
}

inline double lao_magnitude(const std::vector<double>& delta) {
    if (delta.size() < 2)
        throw error("attribution", "sigma_LAO needs at least 2 features");
    double mean = 0.0;
    for (double d : delta) mean += d;
    mean /= static_cast<double>(delta.size());
    double ss = 0.0;
    for (double d : delta) ss += (d - mean) * (d - mean);
    return std::sqrt(ss / static_cast<double>(delta.size() - 1));
}

inline double self_att_at_k(const RankingList& self_rank,
                            const std::vector<std::string>& schema,
                            std::size_t k) {
    if (k < 1) throw config_error("SelfAtt@k needs k >= 1");
    if (schema.empty()) return 0.0;
    const std::set<std::string> universe(schema.begin(), schema.end());
    const std::size_t top = std::min(k, self_rank.names.size());
    std::size_t covered = 0;
    for (std::size_t i = 0; i < top; ++i)
        if (universe.count(self_rank.names[i])) ++covered;
    return static_cast<double>(covered) / static_cast<double>(schema.size());
}

// ---------------------------------------------------------------------------
// feature–label dependence
// ---------------------------------------------------------------------------

namespace detail {

// equal-frequency bin codes: cut points at sorted[(i*n)/bins], value's code is
// the number of cut points it exceeds
inline std::vector<int> quantile_bin(const std::vector<double>& vals,
                                     std::size_t bins) {
    std::vector<double> srt = vals;
    std::sort(srt.begin(), srt.end());
    std::vector<double> cuts;
    for (std::size_t i = 1; i < bins; ++i)
        cuts.push_back(srt[(i * srt.size()) / bins]);
    std::vector<int> out;
    out.reserve(vals.size());
    for (double v : vals) {
        int code = 0;
        for (double c : cuts)
            if (v > c) ++code;
        out.push_back(code);
    }
    return out;
}

inline double entropy(const std::map<int, std::size_t>& counts, std::size_t n) {
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h;
}

// normalized mutual information of two discrete codings, natural log,
// normalized by the smaller marginal entropy (0 when either side is constant)
inline double nmi(const std::vector<int>& xs, const std::vector<int>& ys) {
    const std::size_t n = xs.size();
    std::map<int, std::size_t> cx, cy;
    std::map<std::pair<int, int>, std::size_t> cxy;
    for (std::size_t i = 0; i < n; ++i) {
        ++cx[xs[i]];
        ++cy[ys[i]];
        ++cxy[{xs[i], ys[i]}];
    }
    const double hx = entropy(cx, n), hy = entropy(cy, n);
    const double hmin = std::min(hx, hy);
    if (hmin <= 0.0) return 0.0;
    double mi = 0.0;
    for (const auto& [xy, c] : cxy) {
        const double pxy = static_cast<double>(c) / static_cast<double>(n);
        const double px = static_cast<double>(cx.at(xy.first)) / static_cast<double>(n);
        const double py = static_cast<double>(cy.at(xy.second)) / static_cast<double>(n);
        mi += pxy * std::log(pxy / (px * py));
    }
    return std::clamp(mi / hmin, 0.0, 1.0);
}

inline double cramers_v(const std::vector<int>& xs, const std::vector<int>& ys) {
    const std::size_t n = xs.size();
    std::map<int, std::size_t> cx, cy;
    std::map<std::pair<int, int>, std::size_t> obs;
    for (std::size_t i = 0; i < n; ++i) {
        ++cx[xs[i]];
        ++cy[ys[i]];
        ++obs[{xs[i], ys[i]}];
    }
    const std::size_t r = cx.size(), c = cy.size();
    if (r < 2 || c < 2) return 0.0;
    double chi2 = 0.0;
    for (const auto& [x, nx] : cx) {
        for (const auto& [y, ny] : cy) {
            const double expected = static_cast<double>(nx) *
                                    static_cast<double>(ny) /
                                    static_cast<double>(n);
            auto it = obs.find({x, y});
            const double o = it == obs.end() ? 0.0 : static_cast<double>(it->second);
            chi2 += (o - expected) * (o - expected) / expected;
        }
    }
    const double denom = static_cast<double>(n) *
                         static_cast<double>(std::min(r, c) - 1);
    return std::clamp(std::sqrt(chi2 / denom), 0.0, 1.0);
}

}  // namespace detail

inline DependenceRecord feature_label_dependence(const Dataset& d,
                                                 std::size_t bins = 10) {
    if (d.n() < 2) throw error("dependence", "need at least 2 rows");
    std::vector<int> ys;
    ys.reserve(d.n());
    for (const auto& r : d.rows) ys.push_back(r.label);
    if (std::set<int>(ys.begin(), ys.end()).size() < 2)
        throw error("dependence", "constant label: dependence undefined");

    const bool multiclass = d.labels.classes.size() > 2;
    DependenceRecord rec;
    for (std::size_t j = 0; j < d.m(); ++j) {
        const auto& f = d.features[j];
        rec.features.push_back(f.name);

        std::vector<int> codes;
        std::vector<double> numeric_vals;
        if (f.kind == corpus::feature_kind::categorical) {
            for (const auto& r : d.rows) {
                long long v = 0;
                parse_long(r.values[j], v);
                codes.push_back(static_cast<int>(v));
            }
        } else {
            for (const auto& r : d.rows) {
                double v = 0.0;
                parse_double(r.values[j], v);
                numeric_vals.push_back(v);
            }
            codes = detail::quantile_bin(numeric_vals, bins);
        }

        rec.nmi.push_back(detail::nmi(codes, ys));

        if (f.kind == corpus::feature_kind::categorical || multiclass)
            rec.cramers_v.push_back(detail::cramers_v(codes, ys));
        else
            rec.cramers_v.push_back(std::nullopt);

        if (f.kind == corpus::feature_kind::numeric && !multiclass) {
            std::vector<double> yd(ys.begin(), ys.end());
            rec.pearson_r.push_back(pearson(numeric_vals, yd).value_or(0.0));
            rec.spearman_r.push_back(spearman_from_scores(numeric_vals, yd).value_or(0.0));
        } else {
            rec.pearson_r.push_back(std::nullopt);
            rec.spearman_r.push_back(std::nullopt);
        }
    }

    std::vector<std::size_t> order(rec.features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rec.nmi[a] > rec.nmi[b];  // ties keep schema order
    });
    for (std::size_t i : order) rec.nmi_rank.push_back(rec.features[i]);
    return rec;
}

// ---------------------------------------------------------------------------
// triangulation and regime classification
// ---------------------------------------------------------------------------

inline TriangulationRecord triangulate(const std::vector<std::string>& self_rank,
                                       const std::vector<std::string>& lao_rank,
                                       const std::vector<std::string>& nmi_rank,
                                       std::size_t permutations = 10000,
                                       std::uint64_t seed = 13) {
    auto pair_stats = [&](const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
        RhoP rp;
        rp.rho = spearman_rho(a, b);
        if (rp.rho) rp.p = permutation_pvalue(a, b, permutations, seed);
        return rp;
    };
    TriangulationRecord t;
    t.self_lao = pair_stats(self_rank, lao_rank);
    t.self_nmi = pair_stats(self_rank, nmi_rank);
    t.lao_nmi = pair_stats(lao_rank, nmi_rank);
    return t;
}

inline quadrant classify_regime(double pen_acc, std::optional<double> self_faith_rho,
                                double acc_threshold = 0.5,
                                double faith_threshold = 0.4) {
    if (!self_faith_rho) return quadrant::unclassified;
    const bool accurate = pen_acc >= acc_threshold;
    const bool faithful = *self_faith_rho >= faith_threshold;
    if (accurate) return faithful ? quadrant::accurate_faithful : quadrant::accurate_unfaithful;
    return faithful ? quadrant::inaccurate_faithful : quadrant::inaccurate_unfaithful;
}

}  // namespace stads::attribution
