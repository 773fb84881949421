// stats.cpp - rank tests for comparing registration models.

#include "cxreg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace cxreg {

void ScoreMatrix::validate() const {
    if (models.size() < 2) throw InvalidInput("InvalidScoreMatrix", "need at least two models");
    if (rows.size() < 5) throw InvalidInput("InvalidScoreMatrix", "need at least five subjects");
    for (const auto &r : rows) {
        if (r.size() != models.size()) throw InvalidInput("InvalidScoreMatrix", "score matrix is not rectangular");
        for (double v : r) {
            if (!std::isfinite(v)) throw InvalidInput("InvalidScoreMatrix", "scores must be finite");
        }
    }
}

ScoreMatrix score_matrix_from_reports(const std::map<std::string, std::vector<MetricsReport>> &reports,
                                      const std::string &metric) {
    ScoreMatrix m;
    m.metric = metric;
    m.higher_is_better = higher_is_better(metric);
    std::size_t n = 0;
    for (const auto &[name, list] : reports) {
        if (m.models.empty()) n = list.size();
        else if (list.size() != n) throw InvalidInput("InvalidScoreMatrix", "models have different subject counts");
        m.models.push_back(name);
    }
    m.rows.assign(n, std::vector<double>(m.models.size()));
    std::size_t j = 0;
    for (const auto &[name, list] : reports) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = list[i].metric(metric);
            if (!v) throw InvalidInput("MissingMetric", "report " + std::to_string(i) + " of " + name + " lacks " + metric);
            m.rows[i][j] = *v;
        }
        ++j;
    }
    m.validate();
    return m;
}

std::vector<double> average_ranks(const std::vector<double> &values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

double chi_square_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

FriedmanResult friedman_test(const ScoreMatrix &m) {
    m.validate();
    const std::size_t k = m.model_count();
    const double N = static_cast<double>(m.subjects());
    const double kd = static_cast<double>(k);
    FriedmanResult r;
    r.mean_ranks.assign(k, 0.0);
    r.degenerate = true;
    for (const auto &row : m.rows) {
        std::vector<double> v = row;
        if (m.higher_is_better) {
            for (double &x : v) x = -x;
        }
        const auto ranks = average_ranks(v);
        for (std::size_t j = 0; j < k; ++j) r.mean_ranks[j] += ranks[j] / N;
        if (std::any_of(row.begin(), row.end(), [&](double x) { return x != row.front(); })) r.degenerate = false;
    }
    double ss = 0.0;
    for (double R : r.mean_ranks) ss += R * R;
    r.statistic = 12.0 * N / (kd * (kd + 1.0)) * (ss - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
    // Round-off can leave a tiny negative value for all-tied data.
    r.statistic = r.degenerate ? 0.0 : std::max(0.0, r.statistic);
    r.p_value = r.degenerate ? 1.0 : chi_square_sf(r.statistic, kd - 1.0);
    return r;
}

namespace {

struct QRow {
    double alpha;
    double q[9];
};

constexpr QRow kNemenyiTable[] = {
#include "nemenyi_q.inc"
};

}  // namespace

double nemenyi_q(double alpha, std::size_t k) {
    if (k < 2 || k > 10) throw InvalidInput("UnsupportedModelCount", "Nemenyi table covers 2..10 models");
    for (const auto &row : kNemenyiTable) {
        if (std::abs(row.alpha - alpha) < 1e-12) return row.q[k - 2];
    }
    throw InvalidInput("UnsupportedAlpha", "Nemenyi table covers alpha 0.05 and 0.005");
}

NemenyiResult nemenyi_posthoc(const std::vector<double> &mean_ranks, std::size_t subjects, double alpha) {
    const std::size_t k = mean_ranks.size();
    if (subjects < 1) throw InvalidInput("InvalidScoreMatrix", "need at least one subject");
    NemenyiResult r;
    r.alpha = alpha;
    r.q = nemenyi_q(alpha, k);
    const double kd = static_cast<double>(k);
    r.critical_difference = r.q * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(subjects)));
    r.significant.assign(k, std::vector<bool>(k, false));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            r.significant[i][j] = std::abs(mean_ranks[i] - mean_ranks[j]) > r.critical_difference;
        }
    }
    return r;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double> &a, const std::vector<double> &b) {
    if (a.size() != b.size()) throw DimensionMismatch("wilcoxon_signed_rank: samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = a[i] - b[i];
        if (!std::isfinite(v)) throw InvalidInput("NonFiniteValue", "samples must be finite");
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) throw InvalidInput("AllZeroDifferences", "all paired differences are zero");

    std::vector<double> mag(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
    const auto ranks = average_ranks(mag);

    WilcoxonResult r;
    r.n = d.size();
    for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0.0 ? r.w_plus : r.w_minus) += ranks[i];
    r.statistic = std::min(r.w_plus, r.w_minus);
    const double n = static_cast<double>(r.n);

    if (r.n <= kWilcoxonExactMax) {
        // Null distribution of W+ over all 2^n sign assignments, on doubled ranks so
        // that tied half-integer ranks stay integral.
        std::vector<long> twice(r.n);
        long total = 0;
        for (std::size_t i = 0; i < r.n; ++i) {
            twice[i] = std::lround(2.0 * ranks[i]);
            total += twice[i];
        }
        std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
        ways[0] = 1.0;
        long reach = 0;
        for (long t : twice) {
            for (long s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + t)] += ways[static_cast<std::size_t>(s)];
            reach += t;
        }
        const long limit = std::lround(2.0 * r.statistic);
        double tail = 0.0;
        for (long s = 0; s <= limit; ++s) tail += ways[static_cast<std::size_t>(s)];
        r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(r.n)));
        r.exact = true;
    } else {
        double ties = 0.0;
        auto sorted = mag;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            ties += t * t * t - t;
            i = j + 1;
        }
        const double mean = n * (n + 1.0) / 4.0;
        const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
        const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / std::sqrt(var);
        r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        r.exact = false;
    }
    return r;
}

std::vector<double> bonferroni(const std::vector<double> &pvals, std::size_t comparisons) {
    if (comparisons < 1) throw InvalidInput("InvalidComparisonCount", "need at least one comparison");
    std::vector<double> out;
    for (double p : pvals) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("InvalidProbability", "p-values must lie in [0,1]");
        out.push_back(std::min(1.0, p * static_cast<double>(comparisons)));
    }
    return out;
}

const PairwiseComparison *ComparisonSummary::find(const std::string &a, const std::string &b) const {
    for (const auto &p : pairwise) {
        if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return &p;
    }
    return nullptr;
}

ComparisonSummary compare_models(const ScoreMatrix &m, const CompareOptions &opt) {
    m.validate();
    ComparisonSummary s;
    s.metric = m.metric;
    s.higher_is_better = m.higher_is_better;
    s.models = m.models;
    s.subjects = m.subjects();
    s.options = opt;
    s.friedman = friedman_test(m);
    s.friedman_significant = s.friedman.p_value < opt.alpha_friedman;
    s.nemenyi = nemenyi_posthoc(s.friedman.mean_ranks, m.subjects(), opt.alpha_nemenyi);

    const std::size_t k = m.model_count();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (opt.reference) {
        const auto it = std::find(m.models.begin(), m.models.end(), *opt.reference);
        if (it == m.models.end()) throw InvalidInput("UnknownModel", "reference model " + *opt.reference + " not found");
        const std::size_t r = static_cast<std::size_t>(it - m.models.begin());
        for (std::size_t j = 0; j < k; ++j) {
            if (j != r) pairs.emplace_back(r, j);
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
        }
    }
    s.comparisons = pairs.size();

    for (const auto &[i, j] : pairs) {
        PairwiseComparison c;
        c.a = m.models[i];
        c.b = m.models[j];
        std::vector<double> a, b;
        for (const auto &row : m.rows) {
            a.push_back(row[i]);
            b.push_back(row[j]);
            c.mean_difference += (row[i] - row[j]) / static_cast<double>(m.subjects());
        }
        try {
            c.wilcoxon = wilcoxon_signed_rank(a, b);
        } catch (const InvalidInput &e) {
            if (e.kind() != "AllZeroDifferences") throw;
            c.note = "AllZeroDifferences";
        }
        c.p_adjusted = bonferroni({c.wilcoxon.p_value}, s.comparisons).front();
        c.significant = c.p_adjusted < opt.alpha_pairwise;
        s.pairwise.push_back(std::move(c));
    }
    return s;
}

}  // namespace cxreg
