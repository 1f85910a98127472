#pragma once
#include <vector>

#include "model.hpp"
#include "scenario.hpp"

namespace commotions {

// Binary outcome and target entry time of one simulated pair.
struct RolloutOutcome {
    bool accepted = false;
    bool entered = false;
    double t_entry = 0.0;  // horizon-imputed when the target never entered
};

RolloutOutcome extract_outcome(const PairRollout& pair, double horizon);

inline constexpr double kVarianceCap = 0.01;

// Aggregated prediction for one sample: acceptance probability, the entry
// time of every rollout, and their capped variance.
struct PredictionRecord {
    double a_pred = 0.0;
    std::vector<unsigned char> accepted_p;
    std::vector<double> t_entry_p;
    double variance = 0.0;          // unbiased estimator, capped at 1/100
    bool variance_capped = false;
    bool single_rollout = false;    // variance undefined, reported as 0
};

PredictionRecord aggregate(const RolloutSet& rollouts, double horizon);

// One decoded 2D target trajectory per recorded rollout, on the simulation
// grid shifted to start at t0. Requires tracks recorded during simulation.
std::vector<std::vector<DecodedPoint>> decode_predictions(const RolloutSet& rollouts,
                                                          const Sample& sample,
                                                          const SimConfig& cfg, double t0);

}  // namespace commotions
