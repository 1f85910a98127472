#pragma once
#include <span>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace commotions {

inline constexpr double kGapTimeCap = 60.0;  // seconds, for a stationary ego

// Projected states and the ego's time gap. Length 5.
std::vector<double> featurize_1d(const ProjectedState& ego, const ProjectedState& target,
                                 double gap_cap = kGapTimeCap);

// Raw 2D observation windows plus one velocity estimate per agent.
// Length 2 * (2 * n_input + 2).
std::vector<double> featurize_2d(std::span<const TimedPos> ego_window,
                                 std::span<const TimedPos> target_window);

struct LRModel {
    std::string schema;             // "1D" or "2D"
    std::vector<double> weights;    // bias first
    std::vector<double> feat_mean;  // standardization constants
    std::vector<double> feat_scale;
    int iterations = 0;
};

// L2-regularized logistic regression by iteratively reweighted least squares
// with a halving line search; the bias is not penalized and features are
// standardized internally. Converges to gradient norm < 1e-8, or stops once
// the likelihood reaches its rounding floor with a still-small gradient.
LRModel lr_fit(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
               double lambda, const std::string& schema);

// Sigmoid of the standardized affine score, clamped to (1e-9, 1 - 1e-9).
double lr_predict(const LRModel& model, std::span<const double> features);

// Constant-velocity reference: 1 when the target would reach the region
// strictly before the ego at current speeds, else 0.
double cv_accept_score(const ProjectedState& ego, const ProjectedState& target);

// Constant-velocity distance profile for the trajectory reference.
std::vector<double> cv_distances(const ProjectedState& s, std::span<const double> times_rel);

}  // namespace commotions
