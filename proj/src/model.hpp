#pragma once
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "scenario.hpp"
#include "util/rng.hpp"

namespace commotions {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ControlScheme { acceleration, jerk };              // AC / JC
enum class InteractionMode { interactive, non_interactive };  // IM / NM
enum class BehaviorIntent { pass_first, pass_second };

ControlScheme parse_scheme(const std::string& s);
InteractionMode parse_mode(const std::string& s);
std::string to_string(ControlScheme s);
std::string to_string(InteractionMode m);

// Discrete set of short-term control magnitudes: accelerations under AC,
// jerks under JC. Must contain 0 and be symmetric about it.
struct ActionSet {
    static constexpr int max_size = 15;

    std::vector<double> values;

    static ActionSet defaults(ControlScheme scheme);
    void validate() const;
    int size() const { return static_cast<int>(values.size()); }
    int zero_index() const;
};

// Gaussian belief one agent holds about the other's (d, v).
struct BeliefState {
    double d = 0.0;
    double v = 0.0;
    double p_dd = 0.0;
    double p_dv = 0.0;
    double p_vv = 0.0;
};

// The fitted parameter vector. Array order matters for the optimizer:
// [sigma_obs, leak, sigma_acc, switch_threshold, w_time, w_ctrl, w_rule, beta]
struct ModelParams {
    static constexpr int dim = 8;

    double sigma_obs = 0.5;         // observation noise std, m
    double leak = 0.8;              // accumulator gain/leak, in (0,1)
    double sigma_acc = 0.3;         // accumulator noise scale
    double switch_threshold = 1.0;  // required accumulated improvement
    double w_time = 1.0;            // delay weight
    double w_ctrl = 0.1;            // control effort weight
    double w_rule = 0.5;            // priority violation weight
    double beta = 1.0;              // theory-of-mind temperature

    std::array<double, dim> to_array() const;
    static ModelParams from_array(const std::array<double, dim>& a);
    static ModelParams from_array(std::span<const double> a);
};

void validate_params(const ModelParams& p);

struct ParamBounds {
    std::array<double, ModelParams::dim> lo{};
    std::array<double, ModelParams::dim> hi{};

    static ParamBounds defaults();
    void validate() const;
    bool contains(const ModelParams& p) const;
    ModelParams midpoint() const;
};

// Fixed simulation constants. Everything here is configuration, not part of
// the fitted vector.
struct SimConfig {
    ControlScheme scheme = ControlScheme::acceleration;
    InteractionMode mode = InteractionMode::non_interactive;
    double dt = 0.1;                 // decision timestep, s
    double horizon = 15.0;           // rollout horizon, s
    double action_duration = 0.5;    // assumed hold time of a candidate action, s
    double accel_limit = 4.0;        // |a| cap, m/s^2
    double resume_accel = 2.0;       // acceleration used when pulling away, m/s^2
    double collision_penalty = 1e4;  // value penalty for overlap / infeasibility
    double process_noise = 0.1;      // belief filter white-acceleration density
    double initial_speed_var = 0.25; // belief v variance at rollout start
    ActionSet actions;               // defaults to the scheme's set when empty

    ActionSet effective_actions() const;
    void validate() const;
};

// One closed-form piece of a 1D trajectory:
//   d(t0+τ) = d0 - (v0 τ + a0 τ²/2 + jerk τ³/6)
//   v(t0+τ) = v0 + a0 τ + jerk τ²/2          (kept >= 0 by construction)
// `control` is the applied control magnitude the effort integral charges for.
struct Segment {
    double t0 = 0.0;
    double dur = 0.0;
    double d0 = 0.0;
    double v0 = 0.0;
    double a0 = 0.0;
    double jerk = 0.0;
    double control = 0.0;

    double d_at(double tau) const { return d0 - (v0 + (a0 / 2.0 + jerk / 6.0 * tau) * tau) * tau; }
    double v_at(double tau) const { return v0 + (a0 + jerk / 2.0 * tau) * tau; }
    double a_at(double tau) const { return a0 + jerk * tau; }
};

// Candidate or realized trajectory over one horizon. Stats are derived once
// at the end of construction; d is non-increasing, so first crossings are
// unique.
struct Trajectory1D {
    static constexpr int cap = 12;

    std::array<Segment, cap> seg{};
    int n = 0;
    double duration = 0.0;
    double entry_time = kInf;  // first d = 0 crossing
    double exit_time = kInf;   // first d = -region_length crossing
    double clear_time = 0.0;   // min(exit_time, duration)
    double effort = 0.0;       // sum of control² · dur
    bool infeasible = false;

    double d_at(double t) const;
    double v_at(double t) const;
    double a_at(double t) const;
    double end_d() const;
    double end_v() const;
    double end_a() const;
};

// Constant-velocity occupancy prediction for the other agent.
struct Occupancy {
    double entry = kInf;
    double exit = kInf;
};

Occupancy constant_velocity_occupancy(double d, double v, double region_length);

// Smallest t >= 0 with d(t) <= level on a recorded piecewise-polynomial
// track; exact root of the segment polynomial.
double first_crossing(std::span<const Segment> segments, double level);
double track_d_at(std::span<const Segment> segments, double t);

// Kinematic state used while generating candidates: d, v and (under JC) the
// current acceleration.
struct KinState {
    double d = 0.0;
    double v = 0.0;
    double a = 0.0;
};

// Candidate trajectory for one (action, intent) option: apply `u` for the
// action duration, then follow the intent against the other's predicted
// occupancy. Infeasible plans (cannot stop before the boundary, cannot clear
// in time) are flagged and carried through as best effort.
Trajectory1D generate_trajectory(const KinState& init, double u, BehaviorIntent intent,
                                 const Occupancy& other, double region_length,
                                 const SimConfig& cfg);

// One constant-velocity Kalman predict step followed by an update with a
// noisy position observation of the other agent.
BeliefState perceive(const ProjectedState& true_other, const BeliefState& belief, double sigma_obs,
                     double dt, const SimConfig& cfg, Rng& rng);

BeliefState initial_belief(const ProjectedState& true_other, double sigma_obs,
                           const SimConfig& cfg, Rng& rng);

// Value of a candidate against one hypothesis of the other's occupancy:
// delay, control effort, a priority-violation term, and a hard penalty when
// the occupancies overlap or the plan is infeasible.
double evaluate_value(const Trajectory1D& self, const Occupancy& other, bool self_has_priority,
                      const ModelParams& params, const SimConfig& cfg);

// Per-intent probabilities: best value over the other's candidate controls,
// then a softmax with temperature 1/beta.
std::array<double, 2> theory_of_mind_weights(std::span<const double> values_pass_first,
                                             std::span<const double> values_pass_second,
                                             double beta);

// Leaky accumulation plus threshold switching. Returns the index of the
// selected action; accumulators are updated in place.
int accumulate_and_select(std::span<double> accumulators, std::span<const double> values,
                          int current, const ModelParams& params, double dt, Rng& rng);

struct AgentRollout {
    std::vector<Segment> track;    // filled only when recording
    double entry_time = kInf;
    double exit_time = kInf;
    int switches = 0;
};

struct PairRollout {
    AgentRollout ego;
    AgentRollout target;
    bool accepted = false;        // target entered strictly before the ego
    double t_target_entry = 0.0;  // horizon when the target never entered
    bool target_entered = false;
    bool resolved = false;        // at least one agent crossed by the horizon
};

struct RolloutOptions {
    bool record_tracks = false;
};

// Runs one stochastic rollout of the interaction from projected initial
// states. Under NM only the target is modeled and the ego keeps its speed
// bit for bit.
PairRollout simulate_pair(const ProjectedState& ego0, const ProjectedState& target0,
                          const ModelParams& params, const SimConfig& cfg, double region_length,
                          Rng& rng, const RolloutOptions& options = {});

struct RolloutSet {
    std::vector<PairRollout> pairs;
};

// n_p rollouts with per-rollout RNG streams derived from (seed, sample_key,
// index); identical results for any thread count.
RolloutSet simulate_batch(const ProjectedState& ego0, const ProjectedState& target0,
                          const ModelParams& params, const SimConfig& cfg, double region_length,
                          int n_p, std::uint64_t seed, std::uint64_t sample_key, int threads,
                          const RolloutOptions& options = {});

}  // namespace commotions
