#pragma once

// metrics.hpp — predictive-competence and comprehension-fidelity metrics over
// aligned prediction/label pairs: Acc, Macro-F1, Set-Jacc, Len-F1, UnkLbl%,
// and penalized accuracy. Pure and stateless.

#include <algorithm>
#include <map>
#include <set>

#include "stads/common.hpp"
#include "stads/corpus.hpp"
#include "stads/parse.hpp"

namespace stads::metrics {

using corpus::LabelEncoding;
using parse::AlignedPairs;
using parse::PredictionList;

struct PenaltyWeights {
    double alpha = 0.5;
    double beta = 0.5;
};

struct MetricsRecord {
    double acc = 0.0;
    double macro_f1 = 0.0;
    double set_jacc = 0.0;
    double len_f1 = 0.0;
    double unk_rate = 0.0;  // fraction in [0,1]; reports display percent
    double pen_acc = 0.0;
    double acc_delta = 0.0;  // acc - pen_acc, >= 0

    bool operator==(const MetricsRecord&) const = default;
};

// ---------------------------------------------------------------------------

inline double accuracy(const AlignedPairs& pairs) {
    if (pairs.pairs.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& [p, g] : pairs.pairs)
        if (p == g) ++hit;
    return static_cast<double>(hit) / static_cast<double>(pairs.pairs.size());
}

inline double macro_f1(const AlignedPairs& pairs) {
    if (pairs.pairs.empty()) return 0.0;
    std::set<int> gt_classes;  // Y_gt: classes present in the aligned truth
    for (const auto& [p, g] : pairs.pairs) gt_classes.insert(g);

    double sum = 0.0;
    for (int c : gt_classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& [p, g] : pairs.pairs) {
            const bool pc = p == c, gc = g == c;
            if (pc && gc) ++tp;
            else if (pc) ++fp;
            else if (gc) ++fn;
        }
        const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
        sum += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return sum / static_cast<double>(gt_classes.size());
}

inline double set_jaccard(const AlignedPairs& pairs, const LabelEncoding& labels) {
    std::set<long long> pred_set;  // valid predicted labels only
    std::set<long long> gt_set;
    for (const auto& [p, g] : pairs.pairs) {
        if (labels.valid_code(p)) pred_set.insert(p);
        gt_set.insert(g);
    }
    std::set<long long> uni = gt_set;
    uni.insert(pred_set.begin(), pred_set.end());
    if (uni.empty()) return 0.0;
    std::size_t inter = 0;
    for (long long c : pred_set)
        if (gt_set.count(c)) ++inter;
    return static_cast<double>(inter) / static_cast<double>(uni.size());
}

inline double len_f1(std::size_t n_p, std::size_t n_g) {
    if (n_p == 0 || n_g == 0) return 0.0;
    const double n_a = static_cast<double>(std::min(n_p, n_g));
    const double p = n_a / static_cast<double>(n_p);
    const double r = n_a / static_cast<double>(n_g);
    return 2.0 * p * r / (p + r);
}

inline double unknown_label_rate(const PredictionList& pred) {
    if (pred.values.empty()) return 0.0;
    return static_cast<double>(pred.unknown_positions.size()) /
           static_cast<double>(pred.values.size());
}

inline double penalized_accuracy(double acc, double len_f1_value, double unk,
                                 const PenaltyWeights& w = {}) {
    const double raw = acc - (w.alpha * (1.0 - len_f1_value) + w.beta * unk);
    return std::max(0.0, raw);
}

// one-stop record: align, score, and fold in the length/unknown penalties
inline MetricsRecord compute_metrics(const PredictionList& pred,
                                     const std::vector<int>& truth,
                                     const LabelEncoding& labels,
                                     const PenaltyWeights& w = {}) {
    const AlignedPairs pairs = parse::align(pred, truth);
    MetricsRecord r;
    r.acc = accuracy(pairs);
    r.macro_f1 = macro_f1(pairs);
    r.set_jacc = set_jaccard(pairs, labels);
    r.len_f1 = len_f1(pairs.n_p, pairs.n_g);
    r.unk_rate = unknown_label_rate(pred);
    r.pen_acc = penalized_accuracy(r.acc, r.len_f1, r.unk_rate, w);
    r.acc_delta = r.acc - r.pen_acc;
    return r;
}

}  // namespace stads::metrics
