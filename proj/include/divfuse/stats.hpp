#pragma once

#include "divfuse/common.hpp"
#include "divfuse/data_model.hpp"

#include <string>
#include <vector>

namespace divfuse {

struct MwuResult {
    double u1 = 0.0;  // statistic of the first sample
    double u2 = 0.0;
    double u = 0.0;  // min(u1, u2)
    double z = 0.0;  // signed, from u1; swapping the samples negates it
    double p = 0.0;  // two-sided, normal approximation
};

// Mid-ranks over the pooled sample, tie-corrected variance, continuity
// correction 0.5. Degenerate pooled samples (all values identical) give
// u = n1*n2/2, z = 0, p = 1.
MwuResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y);

// Exact two-sided p by enumerating all C(N, n1) group assignments of the
// pooled values: twice the fraction of assignments whose U1 is <= the
// observed min(U1, U2), clamped to [0, 1]. Refuses N > 12.
double exact_mwu_p(const std::vector<double>& x, const std::vector<double>& y);

// Effect size |r| = |Z| / sqrt(N).
double rank_biserial(double z, long n);

// flag[i] = (p[i] < alpha / m)
std::vector<char> bonferroni(const std::vector<double>& p_values, double alpha = 0.05);

struct StatResult {
    std::string feature;  // e.g. "AU06 (cheek raiser)"
    std::string metric;   // mean|std|slope|range|zcr
    double mean_pos = 0.0;
    double mean_neg = 0.0;
    double u = 0.0;
    double z = 0.0;
    double p = 1.0;
    double r = 0.0;
    bool significant = false;
};

// Whole-video summary statistics per sample (20 channels x 5 stats = 100
// features), Mann-Whitney per feature between the two label groups,
// Bonferroni over all 100, sorted by (r desc, feature asc, metric asc).
std::vector<StatResult> rank_features(const Dataset& ds, double alpha = 0.05);

std::string stat_report_csv(const std::vector<StatResult>& results);

}  // namespace divfuse
