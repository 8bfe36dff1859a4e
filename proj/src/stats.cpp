#include "divfuse/stats.hpp"

#include "divfuse/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace divfuse {

namespace {

// Mid-ranks (1-based) of the pooled sample plus the tie term sum(t^3 - t).
std::pair<std::vector<double>, double> midranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });

    std::vector<double> ranks(n);
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return {std::move(ranks), tie_term};
}

double normal_two_sided_p(double z) {
    // 2 * Phi(-|z|)
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

MwuResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n1 = x.size();
    const std::size_t n2 = y.size();
    if (n1 < 1 || n2 < 1) throw ValidationError("mann_whitney_u: both samples must be non-empty");

    std::vector<double> pooled;
    pooled.reserve(n1 + n2);
    pooled.insert(pooled.end(), x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    for (double v : pooled) {
        if (!std::isfinite(v)) throw ValidationError("mann_whitney_u: non-finite value");
    }

    const auto [ranks, tie_term] = midranks(pooled);
    const double rank_sum_x =
        std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);

    const double dn1 = static_cast<double>(n1);
    const double dn2 = static_cast<double>(n2);
    const double total = dn1 + dn2;

    MwuResult r;
    r.u1 = rank_sum_x - dn1 * (dn1 + 1.0) / 2.0;
    r.u2 = dn1 * dn2 - r.u1;
    r.u = std::min(r.u1, r.u2);

    const double mu = dn1 * dn2 / 2.0;
    const double tie_correction = total > 1.0 ? tie_term / (total * (total - 1.0)) : 0.0;
    const double variance = dn1 * dn2 / 12.0 * ((total + 1.0) - tie_correction);

    if (variance <= 0.0) {
        // all pooled values identical
        r.z = 0.0;
        r.p = 1.0;
        return r;
    }
    const double sd = std::sqrt(variance);
    const double centered = r.u1 - mu;
    const double magnitude = std::max(std::abs(centered) - 0.5, 0.0);  // continuity correction
    r.z = (centered >= 0.0 ? 1.0 : -1.0) * magnitude / sd;
    r.p = std::min(normal_two_sided_p(r.z), 1.0);
    return r;
}

double exact_mwu_p(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n1 = x.size();
    const std::size_t n2 = y.size();
    const std::size_t n = n1 + n2;
    if (n1 < 1 || n2 < 1) throw ValidationError("exact_mwu_p: both samples must be non-empty");
    if (n > 12) {
        throw ConfigError("exact_mwu_p: pooled size " + std::to_string(n) +
                          " exceeds the enumeration limit of 12");
    }

    std::vector<double> pooled;
    pooled.reserve(n);
    pooled.insert(pooled.end(), x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    const auto [ranks, tie_term] = midranks(pooled);
    (void)tie_term;

    const double offset = static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
    const double observed_u1 =
        std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0) - offset;
    const double observed_u =
        std::min(observed_u1, static_cast<double>(n1) * static_cast<double>(n2) - observed_u1);

    // Enumerate subsets of size n1 via a selection mask.
    std::vector<char> mask(n, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n1), 1);
    std::sort(mask.begin(), mask.end(), std::greater<char>());
    long assignments = 0;
    long at_most = 0;
    do {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask[i]) rank_sum += ranks[i];
        }
        // ranks are multiples of 0.5, so u1 and observed_u compare exactly
        const double u1 = rank_sum - offset;
        ++assignments;
        if (u1 <= observed_u) ++at_most;
    } while (std::prev_permutation(mask.begin(), mask.end()));

    const double p = 2.0 * static_cast<double>(at_most) / static_cast<double>(assignments);
    return std::min(p, 1.0);
}

double rank_biserial(double z, long n) {
    if (n < 2) throw ValidationError("rank_biserial: N must be >= 2");
    return std::abs(z) / std::sqrt(static_cast<double>(n));
}

std::vector<char> bonferroni(const std::vector<double>& p_values, double alpha) {
    if (p_values.empty()) throw ValidationError("bonferroni: empty p-value list");
    const double threshold = alpha / static_cast<double>(p_values.size());
    std::vector<char> flags(p_values.size());
    for (std::size_t i = 0; i < p_values.size(); ++i) {
        flags[i] = p_values[i] < threshold ? 1 : 0;
    }
    return flags;
}

std::vector<StatResult> rank_features(const Dataset& ds, double alpha) {
    std::vector<const VideoSample*> pos, neg;
    for (const auto& s : ds.samples) {
        (s.label == 1 ? pos : neg).push_back(&s);
    }
    if (pos.empty() || neg.empty()) {
        throw ConfigError("rank_features: both label groups must be present (" +
                          std::to_string(pos.size()) + " positive, " + std::to_string(neg.size()) +
                          " negative)");
    }

    // Per-video summary features, grouped by label.
    const long n_total = static_cast<long>(ds.samples.size());
    std::vector<VideoSummary> pos_summaries, neg_summaries;
    pos_summaries.reserve(pos.size());
    neg_summaries.reserve(neg.size());
    for (const auto* s : pos) pos_summaries.push_back(video_summary(s->visual));
    for (const auto* s : neg) neg_summaries.push_back(video_summary(s->visual));

    std::vector<StatResult> results;
    std::vector<double> p_values;
    results.reserve(kNumAus * kSummaryStats);
    for (int au = 0; au < kNumAus; ++au) {
        for (int stat = 0; stat < kSummaryStats; ++stat) {
            std::vector<double> xs, ys;
            xs.reserve(pos.size());
            ys.reserve(neg.size());
            for (const auto& summary : pos_summaries) xs.push_back(summary.stats(au, stat));
            for (const auto& summary : neg_summaries) ys.push_back(summary.stats(au, stat));

            const MwuResult m = mann_whitney_u(xs, ys);
            StatResult r;
            r.feature = au_codes()[static_cast<std::size_t>(au)] + " (" +
                        au_labels()[static_cast<std::size_t>(au)] + ")";
            r.metric = stat_name(static_cast<SummaryStat>(stat));
            r.mean_pos = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
            r.mean_neg = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
            r.u = m.u;
            r.z = m.z;
            r.p = m.p;
            r.r = rank_biserial(m.z, n_total);
            results.push_back(std::move(r));
            p_values.push_back(m.p);
        }
    }

    const auto flags = bonferroni(p_values, alpha);
    for (std::size_t i = 0; i < results.size(); ++i) results[i].significant = flags[i] != 0;

    std::sort(results.begin(), results.end(), [](const StatResult& a, const StatResult& b) {
        if (a.r != b.r) return a.r > b.r;
        if (a.feature != b.feature) return a.feature < b.feature;
        return a.metric < b.metric;
    });
    return results;
}

std::string stat_report_csv(const std::vector<StatResult>& results) {
    std::string out = "feature,metric,mean_pos,mean_neg,U,Z,p,r,significant\n";
    for (const auto& r : results) {
        out += r.feature + "," + r.metric + "," + format_double(r.mean_pos) + "," +
               format_double(r.mean_neg) + "," + format_double(r.u) + "," + format_double(r.z) +
               "," + format_double(r.p) + "," + format_double(r.r) + "," +
               (r.significant ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace divfuse
