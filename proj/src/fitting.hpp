#pragma once
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"
#include "prediction.hpp"
#include "util/rng.hpp"

namespace commotions {

// Ground truth for one sample, in the same absolute time base as the
// prediction records.
struct TruthRef {
    bool accepted = false;
    double t_accept = 0.0;  // ignored for rejected samples
    double t_cross = 0.0;   // ego arrival
};

// Outcome loss. Per rollout the acceptance mismatch costs 4 and the entry
// time is scored against a clipped reference: accepted samples score against
// the true acceptance time, rejected samples only penalize predictions that
// enter before the ego arrives.
double loss_l1(std::span<const PredictionRecord> preds, std::span<const TruthRef> truth);

// loss_l1 plus a per-sample spread regularizer (100 V - 20 sqrt(V) + 1)
// that is minimized at the variance cap and largest for degenerate,
// zero-variance predictions.
double loss_l2(std::span<const PredictionRecord> preds, std::span<const TruthRef> truth);

// n points stratified per dimension.
std::vector<std::vector<double>> latin_hypercube(std::span<const double> lo,
                                                 std::span<const double> hi, int n, Rng& rng);

struct OptResult {
    std::vector<double> best;
    double best_loss = 0.0;
    std::vector<std::pair<std::vector<double>, double>> trace;  // evaluation order
    std::vector<std::string> warnings;
};

// Minimizes a black-box objective over a box. Evaluates seed points and a
// Latin hypercube first (n_init evaluations total, n_init <= 0 picks a
// default), then spends the rest of the budget on expected-improvement
// acquisition under a Gaussian-process surrogate. Non-finite objective
// values are replaced by a large penalty; surrogate failures fall back to
// random search. Deterministic given the rng state.
OptResult bayes_opt(const std::function<double(std::span<const double>)>& objective,
                    std::span<const double> lo, std::span<const double> hi, int budget, int n_init,
                    Rng& rng, const std::vector<std::vector<double>>& seed_points = {});

enum class LossKind { l1, l2 };
enum class ScheduleKind { one_stage, two_stage };

struct FitConfig {
    SimConfig sim;
    LossKind loss = LossKind::l2;
    ScheduleKind schedule = ScheduleKind::one_stage;
    int n_p = 100;
    int n_init = 40;  // per stage
    int n_acq = 60;   // per stage
    double shrink = 0.25;
    std::uint64_t sim_seed = 1;  // common random numbers across evaluations
    std::uint64_t opt_seed = 1;
    ParamBounds bounds = ParamBounds::defaults();
    int n_input = 2;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const;
};

struct StageResult {
    OptResult opt;
    ParamBounds bounds;
};

struct ModelFitResult {
    ModelParams best;
    double best_loss = 0.0;
    std::vector<StageResult> stages;
    std::vector<std::string> warnings;
    long objective_evals = 0;
};

// Simulates one sample n_p times from its observation cutoff and aggregates
// the outcomes; entry times are shifted into the dataset's absolute time
// base. The rollout streams depend on (seed, sample id, rollout index) only.
PredictionRecord predict_outcomes(const Sample& s, double cutoff, const ModelParams& params,
                                  const SimConfig& sim, int n_p, std::uint64_t seed, int n_input,
                                  int threads);

// Fits the model to the training samples by simulation-based loss
// minimization. The default parameter vector is seeded into the first
// stage, so the result is never worse than the default under the fitting
// loss. Two-stage schedules rerun the optimizer on a box shrunk around the
// stage-1 optimum (shifted to stay inside the original bounds) and seeded
// with the stage-1 optimum.
ModelFitResult fit_model(const Dataset& ds, std::span<const std::string> train_ids,
                         const FitConfig& cfg);

}  // namespace commotions
