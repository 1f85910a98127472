#pragma once
#include <span>
#include <vector>

#include "scenario.hpp"

namespace commotions {

struct ScoredLabel {
    int label = 0;     // 1 = accepted
    double score = 0.0;
};

// Probability that a random positive outscores a random negative, ties
// counted half (rank-sum formulation).
double auc(std::span<const ScoredLabel> data);

// True negative rate at the threshold that still classifies every positive
// as accepted: threshold = lowest positive score, negatives must fall
// strictly below it.
double tnr_pr(std::span<const ScoredLabel> data);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

// Staircase from (0,0) to (1,1), one point per distinct score; trapezoidal
// integration over these points reproduces auc() exactly.
std::vector<RocPoint> roc_points(std::span<const ScoredLabel> data);

// Aligned evaluation window of one sample: the ground-truth positions and
// every rollout's predicted positions at the same timestamps.
struct TrajWindow {
    std::vector<Vec2> truth;
    std::vector<std::vector<Vec2>> rollouts;
};

// Mean over samples of the mean over rollouts of the mean displacement.
double ade(std::span<const TrajWindow> samples);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool significant = false;
};

// Two-sided paired Student t-test of a against b. All-zero differences give
// t = 0 (not significant); zero variance around a nonzero mean counts as
// significant with p = 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha);

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation. Exposed for the t-distribution tail used by the test.
double reg_incomplete_beta(double a, double b, double x);

}  // namespace commotions
