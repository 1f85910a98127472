#include "model.hpp"

#include <algorithm>
#include <cmath>

#include "util/error.hpp"
#include "util/parallel.hpp"

namespace commotions {
namespace {

constexpr double kTiny = 1e-12;

bool finite(double x) { return std::isfinite(x); }

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) fail(Error::Code::numeric, std::string(what) + " is not finite");
}

// Smallest t in (0, dur] with v0 + a0 t + j t²/2 = 0, or +inf. Roots at
// t == 0 are skipped: the caller has already decided the agent is moving.
double first_speed_zero(double v0, double a0, double j, double dur) {
    const double eps = 1e-14;
    if (j == 0.0) {
        if (a0 >= 0.0) return kInf;
        double t = v0 / -a0;
        return (t > eps && t <= dur) ? t : kInf;
    }
    double disc = a0 * a0 - 2.0 * j * v0;
    if (disc < 0.0) return kInf;
    double sq = std::sqrt(disc);
    double r1 = (-a0 - sq) / j;
    double r2 = (-a0 + sq) / j;
    if (r1 > r2) std::swap(r1, r2);
    for (double r : {r1, r2})
        if (r > eps && r <= dur) return r;
    return kInf;
}

// Smallest tau in [0, dur] with d(tau) == level inside one segment, or +inf.
// Valid because v >= 0 keeps d non-increasing within a segment.
double crossing_in_segment(const Segment& s, double level) {
    double c = s.d0 - level;
    if (c <= 0.0) return 0.0;
    if (s.d_at(s.dur) > level) return kInf;
    if (s.jerk == 0.0) {
        if (s.a0 == 0.0) return s.v0 > 0.0 ? std::min(c / s.v0, s.dur) : kInf;
        double disc = s.v0 * s.v0 + 2.0 * s.a0 * c;
        if (disc < 0.0) disc = 0.0;
        double denom = s.v0 + std::sqrt(disc);
        if (denom <= 0.0) return kInf;
        return std::min(2.0 * c / denom, s.dur);
    }
    // cubic: bisection with Newton refinement, f non-increasing
    auto f = [&](double t) { return s.d_at(t) - level; };
    double lo = 0.0, hi = s.dur;
    double t = 0.5 * s.dur;
    for (int it = 0; it < 200; ++it) {
        double ft = f(t);
        if (ft > 0.0)
            lo = t;
        else
            hi = t;
        double dfdt = -s.v_at(t);
        double tn = (dfdt != 0.0) ? t - ft / dfdt : t;
        t = (tn > lo && tn < hi) ? tn : 0.5 * (lo + hi);
        if (hi - lo < 1e-15 * std::max(1.0, s.dur)) break;
    }
    return 0.5 * (lo + hi);
}

// Incremental construction of a piecewise-polynomial trajectory. The cursor
// (t, d, v, a) always sits at the end of the last pushed segment and v is
// kept non-negative.
struct TrajBuilder {
    Trajectory1D out;
    double t = 0.0;
    double d = 0.0;
    double v = 0.0;
    double a = 0.0;
    bool infeasible = false;

    explicit TrajBuilder(const KinState& k) : d(k.d), v(k.v), a(k.a) {}

    void push(double dur, double a0, double jerk, double control) {
        if (!(dur > kTiny)) return;
        if (out.n >= Trajectory1D::cap) fail(Error::Code::internal, "trajectory segment overflow");
        Segment& s = out.seg[out.n++];
        s.t0 = t;
        s.dur = dur;
        s.d0 = d;
        s.v0 = v;
        s.a0 = a0;
        s.jerk = jerk;
        s.control = control;
        d = s.d_at(dur);
        v = std::max(s.v_at(dur), 0.0);
        a = s.a_at(dur);
        t += dur;
    }

    void stopped(double dur) {
        v = 0.0;
        a = 0.0;
        push(dur, 0.0, 0.0, 0.0);
    }

    void cruise(double dur) {
        a = 0.0;
        push(dur, 0.0, 0.0, 0.0);
    }

    // Constant commanded acceleration; if the speed reaches zero the agent
    // stays stopped for the remainder of the phase.
    void accel_phase(double a_cmd, double dur, double control) {
        if (!(dur > kTiny)) return;
        if (v <= kTiny && a_cmd <= 0.0) {
            stopped(dur);
            return;
        }
        if (a_cmd < 0.0) {
            double tz = v / -a_cmd;
            if (tz < dur) {
                push(tz, a_cmd, 0.0, control);
                if (dur - tz > kTiny) stopped(dur - tz);
                v = 0.0;
                a = 0.0;
                return;
            }
        }
        push(dur, a_cmd, 0.0, control);
    }

    // Constant commanded jerk with the acceleration clamped to ±a_lim and
    // the same stop-and-stay rule. Saturated stretches apply zero jerk and
    // charge no control.
    void jerk_phase(double j, double dur, double a_lim) {
        double rem = dur;
        while (rem > kTiny) {
            if (v <= kTiny && !(a > kTiny || (std::abs(a) <= kTiny && j > 0.0))) {
                stopped(rem);
                return;
            }
            double a_eff = std::clamp(a, -a_lim, a_lim);
            a = a_eff;
            double piece = rem, jp = 0.0, control = 0.0;
            bool hits_clamp = false;
            if (j > 0.0 && a_eff < a_lim) {
                double tc = (a_lim - a_eff) / j;
                jp = j;
                control = j;
                if (tc < rem) {
                    piece = tc;
                    hits_clamp = true;
                }
            } else if (j < 0.0 && a_eff > -a_lim) {
                double tc = (-a_lim - a_eff) / j;
                jp = j;
                control = j;
                if (tc < rem) {
                    piece = tc;
                    hits_clamp = true;
                }
            }
            double tz = first_speed_zero(v, a_eff, jp, piece);
            if (tz < kInf) {
                push(tz, a_eff, jp, control);
                rem -= tz;
                if (rem > kTiny) stopped(rem);
                v = 0.0;
                a = 0.0;
                return;
            }
            push(piece, a_eff, jp, control);
            rem -= piece;
            if (hits_clamp) a = (j > 0.0) ? a_lim : -a_lim;
        }
    }

    Trajectory1D finalize(double region_length) {
        out.duration = t;
        out.effort = 0.0;
        for (int i = 0; i < out.n; ++i)
            out.effort += out.seg[i].control * out.seg[i].control * out.seg[i].dur;
        std::span<const Segment> segs(out.seg.data(), static_cast<std::size_t>(out.n));
        out.entry_time = first_crossing(segs, 0.0);
        out.exit_time = first_crossing(segs, -region_length);
        out.clear_time = std::min(out.exit_time, out.duration);
        out.infeasible = infeasible;
        return out;
    }
};

// Time under constant acceleration from (v0, gap) until the gap is covered.
double covering_time(double gap, double v0, double acc) {
    if (gap <= 0.0) return 0.0;
    if (acc <= 0.0) return v0 > 0.0 ? gap / v0 : kInf;
    double denom = v0 + std::sqrt(v0 * v0 + 2.0 * acc * gap);
    return 2.0 * gap / denom;
}

void continue_pass_first(TrajBuilder& b, const Occupancy& other, double region_length,
                         const SimConfig& cfg) {
    double rem = cfg.horizon - b.t;
    if (!(rem > kTiny)) return;
    double distance = b.d + region_length;  // to clear the far edge
    double t_r = other.entry - b.t;
    if (!(t_r < kInf)) {
        // no predicted arrival: proceed, pulling away if stopped
        if (b.v > kTiny) {
            b.cruise(rem);
        } else {
            double t_go = covering_time(distance, 0.0, cfg.resume_accel);
            b.accel_phase(cfg.resume_accel, std::min(t_go, rem), cfg.resume_accel);
            b.cruise(cfg.horizon - b.t);
        }
        return;
    }
    double a_app;
    if (t_r <= kTiny) {
        b.infeasible = true;
        a_app = cfg.accel_limit;
    } else {
        double a_req = 2.0 * (distance - b.v * t_r) / (t_r * t_r);
        if (a_req <= 0.0) {
            b.cruise(rem);
            return;
        }
        if (a_req > cfg.accel_limit + 1e-9) {
            b.infeasible = true;
            a_app = cfg.accel_limit;
        } else {
            a_app = a_req;
        }
    }
    double t_exit = covering_time(distance, b.v, a_app);
    b.accel_phase(a_app, std::min(t_exit, rem), a_app);
    b.cruise(cfg.horizon - b.t);
}

void continue_pass_second(TrajBuilder& b, const Occupancy& other, double region_length,
                          const SimConfig& cfg) {
    double rem = cfg.horizon - b.t;
    if (!(rem > kTiny)) return;
    if (other.exit > b.t + kTiny) {
        if (b.d < -kTiny) {
            // already inside while meaning to yield
            b.infeasible = true;
            b.cruise(rem);
            return;
        }
        double t_resume = std::min(other.exit, cfg.horizon);
        if (b.v > kTiny) {
            // stop a hair short of the edge: a yielder resting at the boundary
            // must not register as having entered the region (entry is d <= 0)
            double stop_gap = b.d - std::min(0.5 * b.d, 1e-3);
            double a_stop;
            if (b.d <= kTiny) {
                b.infeasible = true;  // moving and at the boundary: cannot stop short
                a_stop = -cfg.accel_limit;
            } else {
                a_stop = -(b.v * b.v) / (2.0 * stop_gap);
                if (-a_stop > cfg.accel_limit + 1e-9) {
                    b.infeasible = true;
                    a_stop = -cfg.accel_limit;
                }
            }
            double t_stop = b.v / -a_stop;
            t_resume = std::max(t_resume, std::min(b.t + t_stop, cfg.horizon));
            b.accel_phase(a_stop, t_resume - b.t, a_stop);
        } else if (t_resume - b.t > kTiny) {
            b.stopped(t_resume - b.t);
        }
    }
    double rem2 = cfg.horizon - b.t;
    if (!(rem2 > kTiny)) return;
    double t_go = covering_time(b.d + region_length, b.v, cfg.resume_accel);
    b.accel_phase(cfg.resume_accel, std::min(t_go, rem2), cfg.resume_accel);
    b.cruise(cfg.horizon - b.t);
}

}  // namespace

ControlScheme parse_scheme(const std::string& s) {
    if (s == "AC" || s == "acceleration") return ControlScheme::acceleration;
    if (s == "JC" || s == "jerk") return ControlScheme::jerk;
    fail(Error::Code::invalid_argument, "unknown control scheme '" + s + "' (want AC or JC)");
}

InteractionMode parse_mode(const std::string& s) {
    if (s == "IM" || s == "interactive") return InteractionMode::interactive;
    if (s == "NM" || s == "non_interactive") return InteractionMode::non_interactive;
    fail(Error::Code::invalid_argument, "unknown interaction mode '" + s + "' (want IM or NM)");
}

std::string to_string(ControlScheme s) {
    return s == ControlScheme::acceleration ? "AC" : "JC";
}

std::string to_string(InteractionMode m) {
    return m == InteractionMode::interactive ? "IM" : "NM";
}

ActionSet ActionSet::defaults(ControlScheme scheme) {
    ActionSet a;
    if (scheme == ControlScheme::acceleration)
        a.values = {-4.0, -2.0, 0.0, 2.0, 4.0};
    else
        a.values = {-10.0, -5.0, 0.0, 5.0, 10.0};
    return a;
}

void ActionSet::validate() const {
    int n = size();
    if (n < 3) fail(Error::Code::invalid_argument, "action set needs at least 3 values");
    if (n > max_size) fail(Error::Code::invalid_argument, "action set larger than 15 values");
    for (int i = 0; i < n; ++i) {
        if (!finite(values[static_cast<std::size_t>(i)]))
            fail(Error::Code::invalid_argument, "action set contains a non-finite value");
        if (i > 0 && !(values[static_cast<std::size_t>(i - 1)] < values[static_cast<std::size_t>(i)]))
            fail(Error::Code::invalid_argument, "action set must be strictly increasing");
    }
    for (int i = 0; i < n; ++i) {
        double want = -values[static_cast<std::size_t>(n - 1 - i)];
        if (std::abs(values[static_cast<std::size_t>(i)] - want) > 1e-9)
            fail(Error::Code::invalid_argument, "action set must be symmetric about zero");
    }
    if (zero_index() < 0) fail(Error::Code::invalid_argument, "action set must contain zero");
}

int ActionSet::zero_index() const {
    for (int i = 0; i < size(); ++i)
        if (values[static_cast<std::size_t>(i)] == 0.0) return i;
    return -1;
}

std::array<double, ModelParams::dim> ModelParams::to_array() const {
    return {sigma_obs, leak, sigma_acc, switch_threshold, w_time, w_ctrl, w_rule, beta};
}

ModelParams ModelParams::from_array(const std::array<double, dim>& a) {
    return from_array(std::span<const double>(a.data(), a.size()));
}

ModelParams ModelParams::from_array(std::span<const double> a) {
    if (a.size() != dim) fail(Error::Code::invalid_argument, "parameter vector must have 8 entries");
    ModelParams p;
    p.sigma_obs = a[0];
    p.leak = a[1];
    p.sigma_acc = a[2];
    p.switch_threshold = a[3];
    p.w_time = a[4];
    p.w_ctrl = a[5];
    p.w_rule = a[6];
    p.beta = a[7];
    return p;
}

ParamBounds ParamBounds::defaults() {
    ParamBounds b;
    b.lo = {0.01, 0.05, 0.0, 0.0, 0.01, 0.0, 0.0, 0.05};
    b.hi = {3.0, 0.98, 2.0, 5.0, 5.0, 2.0, 5.0, 5.0};
    return b;
}

void ParamBounds::validate() const {
    for (int i = 0; i < ModelParams::dim; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        if (!finite(lo[k]) || !finite(hi[k]) || !(lo[k] < hi[k]))
            fail(Error::Code::invalid_argument, "parameter bounds must be finite with lo < hi");
    }
}

bool ParamBounds::contains(const ModelParams& p) const {
    auto a = p.to_array();
    for (int i = 0; i < ModelParams::dim; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        if (a[k] < lo[k] - 1e-12 || a[k] > hi[k] + 1e-12) return false;
    }
    return true;
}

ModelParams ParamBounds::midpoint() const {
    std::array<double, ModelParams::dim> m{};
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (lo[i] + hi[i]);
    return ModelParams::from_array(m);
}

void validate_params(const ModelParams& p) {
    auto a = p.to_array();
    for (double x : a)
        if (!finite(x)) fail(Error::Code::domain, "model parameter is not finite");
    if (p.sigma_obs < 0.0) fail(Error::Code::domain, "sigma_obs must be >= 0");
    if (p.leak < 0.0 || p.leak > 1.0) fail(Error::Code::domain, "leak must be in [0, 1]");
    if (p.sigma_acc < 0.0) fail(Error::Code::domain, "sigma_acc must be >= 0");
    if (p.switch_threshold < 0.0) fail(Error::Code::domain, "switch_threshold must be >= 0");
    if (p.w_time < 0.0 || p.w_ctrl < 0.0 || p.w_rule < 0.0)
        fail(Error::Code::domain, "value weights must be >= 0");
    if (p.beta < 0.0) fail(Error::Code::domain, "beta must be >= 0");
}

ActionSet SimConfig::effective_actions() const {
    if (actions.values.empty()) return ActionSet::defaults(scheme);
    actions.validate();
    return actions;
}

void SimConfig::validate() const {
    if (!(dt > 0.0) || !finite(dt)) fail(Error::Code::domain, "dt must be positive");
    if (!(horizon >= dt) || !finite(horizon)) fail(Error::Code::domain, "horizon must be >= dt");
    if (horizon / dt > 1e6) fail(Error::Code::domain, "horizon/dt too large");
    if (!(action_duration > 0.0) || !finite(action_duration))
        fail(Error::Code::domain, "action_duration must be positive");
    if (!(accel_limit > 0.0)) fail(Error::Code::domain, "accel_limit must be positive");
    if (!(resume_accel > 0.0)) fail(Error::Code::domain, "resume_accel must be positive");
    if (collision_penalty < 0.0) fail(Error::Code::domain, "collision_penalty must be >= 0");
    if (!(process_noise > 0.0)) fail(Error::Code::domain, "process_noise must be positive");
    if (initial_speed_var < 0.0) fail(Error::Code::domain, "initial_speed_var must be >= 0");
    if (!actions.values.empty()) actions.validate();
}

double Trajectory1D::d_at(double t) const {
    if (n == 0) return 0.0;
    if (t <= 0.0) return seg[0].d0;
    std::span<const Segment> s(seg.data(), static_cast<std::size_t>(n));
    return track_d_at(s, t);
}

double Trajectory1D::v_at(double t) const {
    if (n == 0) return 0.0;
    int i = 0;
    while (i + 1 < n && t >= seg[static_cast<std::size_t>(i)].t0 + seg[static_cast<std::size_t>(i)].dur)
        ++i;
    const Segment& s = seg[static_cast<std::size_t>(i)];
    double tau = std::clamp(t - s.t0, 0.0, s.dur);
    return s.v_at(tau);
}

double Trajectory1D::a_at(double t) const {
    if (n == 0) return 0.0;
    int i = 0;
    while (i + 1 < n && t >= seg[static_cast<std::size_t>(i)].t0 + seg[static_cast<std::size_t>(i)].dur)
        ++i;
    const Segment& s = seg[static_cast<std::size_t>(i)];
    double tau = std::clamp(t - s.t0, 0.0, s.dur);
    return s.a_at(tau);
}

double Trajectory1D::end_d() const { return n ? seg[static_cast<std::size_t>(n - 1)].d_at(seg[static_cast<std::size_t>(n - 1)].dur) : 0.0; }
double Trajectory1D::end_v() const { return n ? std::max(seg[static_cast<std::size_t>(n - 1)].v_at(seg[static_cast<std::size_t>(n - 1)].dur), 0.0) : 0.0; }
double Trajectory1D::end_a() const { return n ? seg[static_cast<std::size_t>(n - 1)].a_at(seg[static_cast<std::size_t>(n - 1)].dur) : 0.0; }

Occupancy constant_velocity_occupancy(double d, double v, double region_length) {
    require_finite(d, "occupancy distance");
    require_finite(v, "occupancy speed");
    Occupancy o;
    if (d <= 0.0)
        o.entry = 0.0;
    else if (v > 0.0)
        o.entry = d / v;
    if (d <= -region_length)
        o.exit = 0.0;
    else if (v > 0.0)
        o.exit = (d + region_length) / v;
    return o;
}

double first_crossing(std::span<const Segment> segments, double level) {
    for (const Segment& s : segments) {
        if (s.d0 <= level) return s.t0;
        if (s.d_at(s.dur) <= level) {
            double tau = crossing_in_segment(s, level);
            if (tau < kInf) return s.t0 + tau;
        }
    }
    return kInf;
}

double track_d_at(std::span<const Segment> segments, double t) {
    if (segments.empty()) fail(Error::Code::invalid_argument, "empty track");
    const Segment& first = segments.front();
    if (t <= first.t0) return first.d0;
    std::size_t lo = 0, hi = segments.size();
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (segments[mid].t0 <= t)
            lo = mid;
        else
            hi = mid;
    }
    const Segment& s = segments[lo];
    double tau = t - s.t0;
    if (tau <= s.dur) return s.d_at(tau);
    // beyond the recorded end: extrapolate at the final speed
    double d_end = s.d_at(s.dur);
    double v_end = std::max(s.v_at(s.dur), 0.0);
    return d_end - v_end * (tau - s.dur);
}

Trajectory1D generate_trajectory(const KinState& init, double u, BehaviorIntent intent,
                                 const Occupancy& other, double region_length,
                                 const SimConfig& cfg) {
    require_finite(init.d, "initial distance");
    require_finite(init.v, "initial speed");
    require_finite(init.a, "initial acceleration");
    require_finite(u, "control input");
    if (init.v < 0.0) fail(Error::Code::domain, "initial speed must be >= 0");
    if (!(region_length > 0.0)) fail(Error::Code::domain, "region length must be positive");

    TrajBuilder b(init);
    double t_act = std::min(cfg.action_duration, cfg.horizon);
    if (cfg.scheme == ControlScheme::acceleration)
        b.accel_phase(u, t_act, u);
    else
        b.jerk_phase(u, t_act, cfg.accel_limit);

    if (cfg.horizon - b.t > kTiny) {
        if (b.d <= -region_length + kTiny)
            b.cruise(cfg.horizon - b.t);
        else if (intent == BehaviorIntent::pass_first)
            continue_pass_first(b, other, region_length, cfg);
        else
            continue_pass_second(b, other, region_length, cfg);
    }
    return b.finalize(region_length);
}

BeliefState initial_belief(const ProjectedState& true_other, double sigma_obs,
                           const SimConfig& cfg, Rng& rng) {
    require_finite(true_other.d, "observed distance");
    require_finite(true_other.v, "observed speed");
    BeliefState b;
    b.d = true_other.d + sigma_obs * rng.normal();
    b.v = true_other.v;
    b.p_dd = std::max(sigma_obs * sigma_obs, 1e-4);
    b.p_dv = 0.0;
    b.p_vv = cfg.initial_speed_var;
    return b;
}

BeliefState perceive(const ProjectedState& true_other, const BeliefState& belief, double sigma_obs,
                     double dt, const SimConfig& cfg, Rng& rng) {
    require_finite(true_other.d, "observed distance");
    require_finite(true_other.v, "observed speed");
    require_finite(belief.d, "belief distance");
    require_finite(belief.v, "belief speed");
    if (sigma_obs < 0.0) fail(Error::Code::domain, "sigma_obs must be >= 0");

    double q = cfg.process_noise;
    // predict with d' = -v
    BeliefState p;
    p.d = belief.d - belief.v * dt;
    p.v = belief.v;
    p.p_dd = belief.p_dd - 2.0 * dt * belief.p_dv + dt * dt * belief.p_vv + q * dt * dt * dt / 3.0;
    p.p_dv = belief.p_dv - dt * belief.p_vv - q * dt * dt / 2.0;
    p.p_vv = belief.p_vv + q * dt;

    // update with a position observation
    double z = true_other.d + sigma_obs * rng.normal();
    double s = p.p_dd + sigma_obs * sigma_obs;
    if (!(s > 0.0)) fail(Error::Code::numeric, "belief update with non-positive innovation variance");
    double k_d = p.p_dd / s;
    double k_v = p.p_dv / s;
    double innov = z - p.d;
    BeliefState out;
    out.d = p.d + k_d * innov;
    out.v = p.v + k_v * innov;
    out.p_dd = (1.0 - k_d) * p.p_dd;
    out.p_dv = (1.0 - k_d) * p.p_dv;
    out.p_vv = p.p_vv - k_v * p.p_dv;
    out.p_dd = std::max(out.p_dd, 1e-12);
    out.p_vv = std::max(out.p_vv, 1e-12);
    return out;
}

double evaluate_value(const Trajectory1D& self, const Occupancy& other, bool self_has_priority,
                      const ModelParams& params, const SimConfig& cfg) {
    double value = -params.w_time * self.clear_time - params.w_ctrl * self.effort;
    bool overlap = self.entry_time < other.exit && other.entry < self.exit_time;
    if (!self_has_priority && other.entry < kInf && self.entry_time < other.entry)
        value -= params.w_rule;
    if (overlap || self.infeasible) value -= cfg.collision_penalty;
    return value;
}

std::array<double, 2> theory_of_mind_weights(std::span<const double> values_pass_first,
                                             std::span<const double> values_pass_second,
                                             double beta) {
    if (values_pass_first.empty() || values_pass_second.empty())
        fail(Error::Code::invalid_argument, "theory_of_mind_weights needs values per intent");
    if (beta < 0.0) fail(Error::Code::domain, "beta must be >= 0");
    double m0 = *std::max_element(values_pass_first.begin(), values_pass_first.end());
    double m1 = *std::max_element(values_pass_second.begin(), values_pass_second.end());
    require_finite(m0, "intent value");
    require_finite(m1, "intent value");
    double x0 = beta * m0, x1 = beta * m1;
    double mx = std::max(x0, x1);
    double e0 = std::exp(x0 - mx), e1 = std::exp(x1 - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

int accumulate_and_select(std::span<double> accumulators, std::span<const double> values,
                          int current, const ModelParams& params, double dt, Rng& rng) {
    if (accumulators.size() != values.size() || accumulators.empty())
        fail(Error::Code::invalid_argument, "accumulator and value sizes differ");
    if (current < 0 || current >= static_cast<int>(accumulators.size()))
        fail(Error::Code::invalid_argument, "current action index out of range");
    double noise_scale = params.sigma_acc * std::sqrt(dt);
    for (std::size_t i = 0; i < accumulators.size(); ++i) {
        require_finite(values[i], "action value");
        accumulators[i] = params.leak * accumulators[i] + (1.0 - params.leak) * values[i] +
                          noise_scale * rng.normal();
    }
    int best = 0;
    for (std::size_t i = 1; i < accumulators.size(); ++i)
        if (accumulators[i] > accumulators[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    if (best != current &&
        accumulators[static_cast<std::size_t>(best)] >
            accumulators[static_cast<std::size_t>(current)] + params.switch_threshold)
        return best;
    return current;
}

namespace {

struct Agent {
    KinState kin;
    bool has_priority = false;
    bool modeled = false;
    BeliefState belief;
    int current = 0;
    std::array<double, ActionSet::max_size> acc{};
    bool acc_init = false;
    bool entered = false;
    bool exited = false;
    AgentRollout* roll = nullptr;
};

// One decision: filter the other's state, build candidates for both agents,
// weight by the other's inferred intent, accumulate, select.
void decide(Agent& self, const KinState& other_true, const ActionSet& actions,
            const ModelParams& params, const SimConfig& cfg, double region_length, Rng& rng) {
    self.belief = perceive({other_true.d, other_true.v}, self.belief, params.sigma_obs, cfg.dt,
                           cfg, rng);

    Occupancy other_cv =
        constant_velocity_occupancy(self.belief.d, self.belief.v, region_length);
    Occupancy self_cv = constant_velocity_occupancy(self.kin.d, self.kin.v, region_length);

    // the other's hypothetical plans, from the belief mean
    int n = actions.size();
    std::array<double, ActionSet::max_size> v_first{}, v_second{};
    Occupancy rep_first, rep_second;
    double best_first = -kInf, best_second = -kInf;
    KinState other_kin{self.belief.d, std::max(self.belief.v, 0.0), 0.0};
    for (int i = 0; i < n; ++i) {
        double u_o = actions.values[static_cast<std::size_t>(i)];
        Trajectory1D tf = generate_trajectory(other_kin, u_o, BehaviorIntent::pass_first, self_cv,
                                              region_length, cfg);
        Trajectory1D ts = generate_trajectory(other_kin, u_o, BehaviorIntent::pass_second, self_cv,
                                              region_length, cfg);
        double vf = evaluate_value(tf, self_cv, !self.has_priority, params, cfg);
        double vs = evaluate_value(ts, self_cv, !self.has_priority, params, cfg);
        v_first[static_cast<std::size_t>(i)] = vf;
        v_second[static_cast<std::size_t>(i)] = vs;
        if (vf > best_first) {
            best_first = vf;
            rep_first = {tf.entry_time, tf.exit_time};
        }
        if (vs > best_second) {
            best_second = vs;
            rep_second = {ts.entry_time, ts.exit_time};
        }
    }
    std::array<double, 2> prob = theory_of_mind_weights(
        std::span<const double>(v_first.data(), static_cast<std::size_t>(n)),
        std::span<const double>(v_second.data(), static_cast<std::size_t>(n)), params.beta);

    // own candidates, weighted over the other's intent
    std::array<double, ActionSet::max_size> w{};
    for (int i = 0; i < n; ++i) {
        double u = actions.values[static_cast<std::size_t>(i)];
        Trajectory1D cf =
            generate_trajectory(self.kin, u, BehaviorIntent::pass_first, other_cv, region_length, cfg);
        Trajectory1D cs =
            generate_trajectory(self.kin, u, BehaviorIntent::pass_second, other_cv, region_length, cfg);
        double total = 0.0;
        const Occupancy* reps[2] = {&rep_first, &rep_second};
        for (int k = 0; k < 2; ++k) {
            double vf = evaluate_value(cf, *reps[k], self.has_priority, params, cfg);
            double vs = evaluate_value(cs, *reps[k], self.has_priority, params, cfg);
            total += prob[static_cast<std::size_t>(k)] * std::max(vf, vs);
        }
        w[static_cast<std::size_t>(i)] = total;
    }

    std::span<double> acc(self.acc.data(), static_cast<std::size_t>(n));
    std::span<const double> values(w.data(), static_cast<std::size_t>(n));
    if (!self.acc_init) {
        std::copy(values.begin(), values.end(), acc.begin());
        self.acc_init = true;
    } else {
        int picked = accumulate_and_select(acc, values, self.current, params, cfg.dt, rng);
        if (picked != self.current) {
            self.current = picked;
            ++self.roll->switches;
        }
        return;
    }
    // first step: threshold rule against the freshly initialized accumulators
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (acc[static_cast<std::size_t>(i)] > acc[static_cast<std::size_t>(best)]) best = i;
    if (best != self.current &&
        acc[static_cast<std::size_t>(best)] >
            acc[static_cast<std::size_t>(self.current)] + params.switch_threshold) {
        self.current = best;
        ++self.roll->switches;
    }
}

// Advance one dt by the selected action, recording crossings (and segments
// when asked).
void advance(Agent& ag, double u, double t_now, double region_length, const SimConfig& cfg,
             bool record) {
    TrajBuilder b(ag.kin);
    if (cfg.scheme == ControlScheme::acceleration)
        b.accel_phase(u, cfg.dt, u);
    else
        b.jerk_phase(u, cfg.dt, cfg.accel_limit);
    std::span<const Segment> segs(b.out.seg.data(), static_cast<std::size_t>(b.out.n));
    if (!ag.entered) {
        double tau = first_crossing(segs, 0.0);
        if (tau < kInf) {
            ag.roll->entry_time = t_now + tau;
            ag.entered = true;
        }
    }
    if (!ag.exited) {
        double tau = first_crossing(segs, -region_length);
        if (tau < kInf) {
            ag.roll->exit_time = t_now + tau;
            ag.exited = true;
        }
    }
    if (record)
        for (const Segment& s : segs) {
            Segment abs_seg = s;
            abs_seg.t0 += t_now;
            ag.roll->track.push_back(abs_seg);
        }
    ag.kin = {b.d, b.v, b.a};
}

PairRollout simulate_pair_impl(const ProjectedState& ego0, const ProjectedState& target0,
                               const ModelParams& params, const SimConfig& cfg,
                               double region_length, const ActionSet& actions, Rng& rng,
                               const RolloutOptions& options) {
    PairRollout out;
    bool ego_modeled = cfg.mode == InteractionMode::interactive;
    int zero = actions.zero_index();

    Agent tgt;
    tgt.kin = {target0.d, std::max(target0.v, 0.0), 0.0};
    tgt.has_priority = false;
    tgt.modeled = true;
    tgt.current = zero;
    tgt.roll = &out.target;

    Agent ego;
    ego.kin = {ego0.d, std::max(ego0.v, 0.0), 0.0};
    ego.has_priority = true;
    ego.modeled = ego_modeled;
    ego.current = zero;
    ego.roll = &out.ego;

    tgt.belief = initial_belief({ego.kin.d, ego.kin.v}, params.sigma_obs, cfg, rng);
    if (ego_modeled)
        ego.belief = initial_belief({tgt.kin.d, tgt.kin.v}, params.sigma_obs, cfg, rng);

    long steps = std::lround(cfg.horizon / cfg.dt);
    double sim_end = static_cast<double>(steps) * cfg.dt;

    if (!ego_modeled) {
        // constant-speed ego: crossings are known in closed form
        Occupancy o = constant_velocity_occupancy(ego.kin.d, ego.kin.v, region_length);
        if (o.entry <= sim_end) {
            out.ego.entry_time = o.entry;
            ego.entered = true;
        }
        if (o.exit <= sim_end) {
            out.ego.exit_time = o.exit;
            ego.exited = true;
        }
    }

    for (long k = 0; k < steps; ++k) {
        double t = static_cast<double>(k) * cfg.dt;
        if (!options.record_tracks) {
            // stop once the acceptance outcome is decided
            if (tgt.entered &&
                (!ego_modeled || ego.entered || t > out.target.entry_time + kTiny))
                break;
            if (tgt.exited && ego.exited) break;
        }
        KinState ego_snapshot = ego.kin;
        KinState tgt_snapshot = tgt.kin;
        decide(tgt, ego_snapshot, actions, params, cfg, region_length, rng);
        if (ego_modeled) decide(ego, tgt_snapshot, actions, params, cfg, region_length, rng);

        advance(tgt, actions.values[static_cast<std::size_t>(tgt.current)], t, region_length, cfg,
                options.record_tracks);
        if (ego_modeled)
            advance(ego, actions.values[static_cast<std::size_t>(ego.current)], t, region_length,
                    cfg, options.record_tracks);
        else if (options.record_tracks && k == 0) {
            Segment s;
            s.t0 = 0.0;
            s.dur = sim_end;
            s.d0 = ego.kin.d;
            s.v0 = ego.kin.v;
            out.ego.track.push_back(s);
        }
        if (!ego_modeled) ego.kin.d -= ego.kin.v * cfg.dt;
    }

    out.target_entered = tgt.entered;
    out.t_target_entry = tgt.entered ? out.target.entry_time : cfg.horizon;
    double ego_entry = ego.entered ? out.ego.entry_time : kInf;
    out.accepted = tgt.entered && out.target.entry_time < ego_entry;
    out.resolved = tgt.entered || ego.entered;
    return out;
}

}  // namespace

PairRollout simulate_pair(const ProjectedState& ego0, const ProjectedState& target0,
                          const ModelParams& params, const SimConfig& cfg, double region_length,
                          Rng& rng, const RolloutOptions& options) {
    cfg.validate();
    validate_params(params);
    if (!(region_length > 0.0)) fail(Error::Code::domain, "region length must be positive");
    require_finite(ego0.d, "ego distance");
    require_finite(ego0.v, "ego speed");
    require_finite(target0.d, "target distance");
    require_finite(target0.v, "target speed");
    ActionSet actions = cfg.effective_actions();
    return simulate_pair_impl(ego0, target0, params, cfg, region_length, actions, rng, options);
}

RolloutSet simulate_batch(const ProjectedState& ego0, const ProjectedState& target0,
                          const ModelParams& params, const SimConfig& cfg, double region_length,
                          int n_p, std::uint64_t seed, std::uint64_t sample_key, int threads,
                          const RolloutOptions& options) {
    if (n_p < 1) fail(Error::Code::invalid_argument, "n_p must be >= 1");
    cfg.validate();
    validate_params(params);
    if (!(region_length > 0.0)) fail(Error::Code::domain, "region length must be positive");
    require_finite(ego0.d, "ego distance");
    require_finite(ego0.v, "ego speed");
    require_finite(target0.d, "target distance");
    require_finite(target0.v, "target speed");
    ActionSet actions = cfg.effective_actions();

    RolloutSet set;
    set.pairs.resize(static_cast<std::size_t>(n_p));
    parallel_for(static_cast<std::size_t>(n_p), threads, [&](std::size_t i) {
        Rng rng(derive_stream(seed, sample_key, static_cast<std::uint64_t>(i)));
        set.pairs[i] =
            simulate_pair_impl(ego0, target0, params, cfg, region_length, actions, rng, options);
    });
    return set;
}

}  // namespace commotions
