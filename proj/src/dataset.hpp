#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace commotions {

struct DatasetMeta {
    std::string name = "unnamed";
    double timestep = 0.1;
    double characteristic_gap_s = 3.0;
    std::map<std::string, std::string> extra;  // provenance keys, round-tripped
};

// Immutable after load/generate; ids unique, all samples on one uniform grid.
struct Dataset {
    DatasetMeta meta;
    std::vector<Sample> samples;

    void validate(int n_input) const;
    int index_of(const std::string& id) const;  // -1 when absent
    const Sample& by_id(const std::string& id) const;
};

// Directory layout: geometry.csv, trajectories.csv, outcomes.csv and an
// optional meta.csv. Field-exact round trip through save/load.
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& ds, const std::string& dir);

// Synthetic perpendicular-intersection scenarios. The ego runs at constant
// speed; the target accepts iff the time gap exceeds a per-sample lognormal
// threshold, crossing under constant acceleration, otherwise it stops short
// and crosses after the ego has left.
struct SynthConfig {
    int n = 400;
    std::uint64_t seed = 7;
    double timestep = 0.1;
    double half_extent = 2.0;
    double ego_speed_lo = 8.0;
    double ego_speed_hi = 14.0;
    double ego_time_lo = 2.5;   // sampled ego arrival time t_C, s
    double ego_time_hi = 8.0;
    double target_dist_lo = 4.0;   // target start distance to the region, m
    double target_dist_hi = 12.0;
    double target_speed_lo = 0.0;
    double target_speed_hi = 6.0;
    double threshold_median_s = 4.0;  // median of the acceptance threshold
    double behavior_noise = 0.25;     // lognormal sigma of the threshold
    double characteristic_gap_s = 3.0;
    double critical_gap_s = 1.5;
    int n_input = 2;

    void validate() const;
};

Dataset synth_generate(const SynthConfig& cfg);

// Analytic acceptance probability of the generative rule at one gap size.
double synth_accept_probability(const SynthConfig& cfg, double gap_seconds);

struct Split {
    std::string kind;  // "random" or "critical"
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

struct SplitPlan {
    std::vector<Split> splits;
    double test_fraction = 0.2;

    void validate(const Dataset& ds) const;
};

// n_random stratified random splits plus one critical split whose test set
// takes the most extreme gaps: smallest accepted and largest rejected,
// merged alternately. Deterministic in (dataset, seed); independent of the
// sample order in the input.
SplitPlan make_splits(const Dataset& ds, int n_random, double test_fraction, std::uint64_t seed,
                      int n_input);

void save_splits(const SplitPlan& plan, const std::string& file);
SplitPlan load_splits(const std::string& file);

}  // namespace commotions
