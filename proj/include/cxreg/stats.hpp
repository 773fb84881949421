// stats.hpp - non-parametric model comparison: Friedman, Nemenyi, Wilcoxon, Bonferroni.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cxreg/metrics.hpp"

namespace cxreg {

// Rows are subjects (image pairs), columns are models.
struct ScoreMatrix {
    std::vector<std::string> models;
    std::vector<std::vector<double>> rows;
    std::string metric;
    bool higher_is_better = true;

    std::size_t subjects() const { return rows.size(); }
    std::size_t model_count() const { return models.size(); }
    // Rectangular, finite, at least two models and five subjects.
    void validate() const;
};

ScoreMatrix score_matrix_from_reports(const std::map<std::string, std::vector<MetricsReport>> &reports,
                                      const std::string &metric);

// Mean ranks of `values` (1 = smallest), ties share their average rank.
std::vector<double> average_ranks(const std::vector<double> &values);

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> mean_ranks;  // rank 1 = best model in each row
    bool degenerate = false;         // every row fully tied
};

FriedmanResult friedman_test(const ScoreMatrix &m);

// Upper-tail chi-square probability.
double chi_square_sf(double x, double dof);

// Critical value q_alpha for k models (2..10), alpha 0.05 or 0.005. Throws
// InvalidInput("UnsupportedAlpha") / ("UnsupportedModelCount").
double nemenyi_q(double alpha, std::size_t k);

struct NemenyiResult {
    double alpha = 0.05;
    double q = 0.0;
    double critical_difference = 0.0;
    std::vector<std::vector<bool>> significant;  // |rank_i - rank_j| > CD
};

NemenyiResult nemenyi_posthoc(const std::vector<double> &mean_ranks, std::size_t subjects, double alpha);

inline constexpr std::size_t kWilcoxonExactMax = 25;

struct WilcoxonResult {
    double w_plus = 0.0;
    double w_minus = 0.0;
    double statistic = 0.0;  // min(w_plus, w_minus)
    std::size_t n = 0;       // non-zero differences
    double p_value = 1.0;    // two-sided
    bool exact = true;
};

// Differences a - b; zero differences are dropped and tied magnitudes share mean
// ranks. Exact null distribution for n <= 25, otherwise the normal approximation
// with tie and continuity corrections. Throws InvalidInput("AllZeroDifferences").
WilcoxonResult wilcoxon_signed_rank(const std::vector<double> &a, const std::vector<double> &b);

std::vector<double> bonferroni(const std::vector<double> &pvals, std::size_t comparisons);

struct CompareOptions {
    double alpha_friedman = 0.005;
    double alpha_nemenyi = 0.05;
    double alpha_pairwise = 0.05;
    // With a reference model only reference-vs-other pairs are tested.
    std::optional<std::string> reference;
};

struct PairwiseComparison {
    std::string a;
    std::string b;
    WilcoxonResult wilcoxon;
    double p_adjusted = 1.0;
    bool significant = false;
    double mean_difference = 0.0;  // mean of a - b
    std::optional<std::string> note;
};

struct ComparisonSummary {
    std::string metric;
    bool higher_is_better = true;
    std::vector<std::string> models;
    std::size_t subjects = 0;
    CompareOptions options;
    FriedmanResult friedman;
    bool friedman_significant = false;
    NemenyiResult nemenyi;
    std::size_t comparisons = 0;
    std::vector<PairwiseComparison> pairwise;

    const PairwiseComparison *find(const std::string &a, const std::string &b) const;
};

ComparisonSummary compare_models(const ScoreMatrix &m, const CompareOptions &opt = {});

}  // namespace cxreg
