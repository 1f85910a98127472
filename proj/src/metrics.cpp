#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "util/error.hpp"

namespace commotions {

namespace {

void check_scores(std::span<const ScoredLabel> data, const char* who) {
    long pos = 0, neg = 0;
    for (const auto& d : data) {
        if (d.label != 0 && d.label != 1)
            fail(Error::Code::invalid_argument, std::string(who) + ": labels must be 0 or 1");
        if (!std::isfinite(d.score))
            fail(Error::Code::invalid_argument, std::string(who) + ": score is not finite");
        (d.label == 1 ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0)
        fail(Error::Code::domain, std::string(who) + ": needs at least one sample of each class");
}

}  // namespace

double auc(std::span<const ScoredLabel> data) {
    check_scores(data, "auc");
    std::vector<ScoredLabel> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });

    // rank-sum with average ranks over tie groups
    double rank_sum_pos = 0.0;
    long n_pos = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (sorted[k].label == 1) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    const long n_neg = static_cast<long>(sorted.size()) - n_pos;
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double tnr_pr(std::span<const ScoredLabel> data) {
    check_scores(data, "tnr_pr");
    double threshold = std::numeric_limits<double>::infinity();
    for (const auto& d : data)
        if (d.label == 1) threshold = std::min(threshold, d.score);
    long below = 0, negatives = 0;
    for (const auto& d : data)
        if (d.label == 0) {
            ++negatives;
            if (d.score < threshold) ++below;
        }
    return static_cast<double>(below) / static_cast<double>(negatives);
}

std::vector<RocPoint> roc_points(std::span<const ScoredLabel> data) {
    check_scores(data, "roc_points");
    std::vector<ScoredLabel> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
    double n_pos = 0.0, n_neg = 0.0;
    for (const auto& d : sorted) (d.label == 1 ? n_pos : n_neg) += 1.0;

    std::vector<RocPoint> pts;
    pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) ++j;
        for (std::size_t k = i; k < j; ++k) (sorted[k].label == 1 ? tp : fp) += 1.0;
        pts.push_back({sorted[i].score, fp / n_neg, tp / n_pos});
        i = j;
    }
    return pts;
}

double ade(std::span<const TrajWindow> samples) {
    if (samples.empty()) fail(Error::Code::invalid_argument, "ade: no samples");
    double total = 0.0;
    for (const auto& w : samples) {
        if (w.truth.empty()) fail(Error::Code::invalid_argument, "ade: empty evaluation window");
        if (w.rollouts.empty()) fail(Error::Code::invalid_argument, "ade: sample without rollouts");
        double sample_sum = 0.0;
        for (const auto& roll : w.rollouts) {
            if (roll.size() != w.truth.size())
                fail(Error::Code::invalid_argument,
                     "ade: rollout and truth windows differ in length");
            double disp = 0.0;
            for (std::size_t k = 0; k < roll.size(); ++k) disp += (roll[k] - w.truth[k]).norm();
            sample_sum += disp / static_cast<double>(roll.size());
        }
        total += sample_sum / static_cast<double>(w.rollouts.size());
    }
    return total / static_cast<double>(samples.size());
}

namespace {

double beta_cont_fraction(double a, double b, double x) {
    // Lentz's algorithm for the incomplete-beta continued fraction
    const double tiny = 1e-300;
    const double eps = 1e-15;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double dm = static_cast<double>(m);
        double aa = dm * (b - dm) * x / ((qam + 2.0 * dm) * (a + 2.0 * dm));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + dm) * (qab + dm) * x / ((a + 2.0 * dm) * (qap + 2.0 * dm));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    fail(Error::Code::numeric, "incomplete beta continued fraction did not converge");
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) fail(Error::Code::invalid_argument, "incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_fraction(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) + b * std::log1p(-x) +
                          a * std::log(x)) *
                     beta_cont_fraction(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size())
        fail(Error::Code::invalid_argument, "paired_t_test: result vectors differ in length");
    if (a.size() < 2) fail(Error::Code::invalid_argument, "paired_t_test: needs at least 2 pairs");
    if (!(alpha > 0.0 && alpha < 1.0))
        fail(Error::Code::invalid_argument, "paired_t_test: alpha must be in (0, 1)");
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
            fail(Error::Code::invalid_argument, "paired_t_test: non-finite value");
        mean += a[i] - b[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult res;
    if (sd == 0.0) {
        if (mean == 0.0) return {0.0, 1.0, false};
        // constant nonzero difference: degenerate, treated as maximally certain
        res.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
        res.p = 0.0;
        res.significant = true;
        return res;
    }
    res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const double nu = static_cast<double>(n - 1);
    res.p = reg_incomplete_beta(nu / 2.0, 0.5, nu / (nu + res.t * res.t));
    res.significant = res.p < alpha;
    return res;
}

}  // namespace commotions
