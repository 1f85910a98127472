#include "scenario.hpp"

#include <algorithm>

#include "util/csv.hpp"
#include "util/error.hpp"

namespace commotions {

Path Path::from_waypoints(std::vector<Vec2> waypoints) {
    if (waypoints.size() < 2)
        fail(Error::Code::domain, "path needs at least 2 waypoints, got " +
                                      std::to_string(waypoints.size()));
    Path path;
    path.pts_ = std::move(waypoints);
    path.arc_.resize(path.pts_.size());
    path.arc_[0] = 0.0;
    for (std::size_t i = 1; i < path.pts_.size(); ++i) {
        const double seg = (path.pts_[i] - path.pts_[i - 1]).norm();
        if (seg <= 0.0)
            fail(Error::Code::domain, "path waypoints " + std::to_string(i - 1) + " and " +
                                          std::to_string(i) + " coincide");
        path.arc_[i] = path.arc_[i - 1] + seg;
    }
    return path;
}

Vec2 Path::point_at(double s) const {
    if (s <= 0.0) return pts_.front();
    if (s >= arc_.back()) return pts_.back();
    const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - arc_.begin());
    const double seg_len = arc_[i] - arc_[i - 1];
    const double f = (s - arc_[i - 1]) / seg_len;
    return pts_[i - 1] + (pts_[i] - pts_[i - 1]) * f;
}

Path::Foot Path::foot_point(Vec2 p) const {
    Foot best{0.0, (p - pts_.front()).norm()};
    bool first = true;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
        const Vec2 a = pts_[i];
        const Vec2 b = pts_[i + 1];
        const Vec2 ab = b - a;
        const double len2 = ab.dot(ab);
        double f = (p - a).dot(ab) / len2;
        f = std::clamp(f, 0.0, 1.0);
        const Vec2 foot = a + ab * f;
        const double dist = (p - foot).norm();
        // strict comparison keeps the earliest segment on ties
        if (first || dist < best.lateral) {
            best.arc = arc_[i] + f * std::sqrt(len2);
            best.lateral = dist;
            first = false;
        }
    }
    return best;
}

void ContestedSpace::validate() const {
    if (!(half_extent > 0.0))
        fail(Error::Code::domain, "contested space half-extent must be positive, got " +
                                      std::to_string(half_extent));
    if (!std::isfinite(center.x) || !std::isfinite(center.y))
        fail(Error::Code::domain, "contested space center is not finite");
}

double entry_arc(const Path& path, const ContestedSpace& contested) {
    contested.validate();
    const double s_center = path.foot_point(contested.center).arc;
    return s_center - contested.half_extent;
}

std::vector<TimedState> project_to_path(std::span<const TimedPos> trajectory, const Path& path,
                                        const ContestedSpace& contested, double lateral_tolerance) {
    if (trajectory.size() < 2) fail(Error::Code::domain, "projection needs at least 2 points");
    const double s_entry = entry_arc(path, contested);
    std::vector<TimedState> out(trajectory.size());
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const auto foot = path.foot_point(trajectory[i].p);
        if (foot.lateral > lateral_tolerance)
            fail(Error::Code::domain,
                 "trajectory point " + std::to_string(i) + " lies " + format_double(foot.lateral) +
                     " m off the path (tolerance " + format_double(lateral_tolerance) + " m)");
        out[i].t = trajectory[i].t;
        out[i].s.d = s_entry - foot.arc;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i == 0 ? 1 : i;
        const double dt = out[b].t - out[a].t;
        if (!(dt > 0.0))
            fail(Error::Code::domain, "trajectory timestamps not strictly increasing at index " +
                                          std::to_string(b));
        out[i].s.v = (out[a].s.d - out[b].s.d) / dt;
    }
    return out;
}

std::vector<DecodedPoint> decode_to_2d(std::span<const TimedState> d_trajectory, const Path& path,
                                       const ContestedSpace& contested) {
    std::vector<double> t(d_trajectory.size()), d(d_trajectory.size());
    for (std::size_t i = 0; i < d_trajectory.size(); ++i) {
        t[i] = d_trajectory[i].t;
        d[i] = d_trajectory[i].s.d;
    }
    return decode_to_2d(t, d, path, contested);
}

std::vector<DecodedPoint> decode_to_2d(std::span<const double> times, std::span<const double> distances,
                                       const Path& path, const ContestedSpace& contested) {
    if (times.size() != distances.size())
        fail(Error::Code::invalid_argument, "decode_to_2d: times and distances differ in length");
    const double s_entry = entry_arc(path, contested);
    std::vector<DecodedPoint> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double s = s_entry - distances[i];
        out[i].t = times[i];
        out[i].clamped = s < 0.0 || s > path.length();
        out[i].p = path.point_at(s);
    }
    return out;
}

void Sample::validate(int n_input) const {
    if (id.empty()) fail(Error::Code::domain, "sample id is empty");
    contested.validate();
    const auto check_traj = [&](const std::vector<TimedPos>& traj, const char* name) {
        if (traj.size() < static_cast<std::size_t>(n_input))
            fail(Error::Code::domain, "sample " + id + ": " + name + " has " +
                                          std::to_string(traj.size()) + " points, needs at least " +
                                          std::to_string(n_input));
        const double dt = traj[1].t - traj[0].t;
        if (!(dt > 0.0)) fail(Error::Code::domain, "sample " + id + ": " + name + " timestep not positive");
        for (std::size_t i = 1; i < traj.size(); ++i) {
            const double step = traj[i].t - traj[i - 1].t;
            if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
                fail(Error::Code::domain, "sample " + id + ": " + name +
                                              " not uniformly spaced at index " + std::to_string(i));
        }
    };
    check_traj(ego_traj, "ego trajectory");
    check_traj(target_traj, "target trajectory");
    if (accepted && !t_accept)
        fail(Error::Code::domain, "sample " + id + ": accepted but t_accept missing");
    if (accepted && !std::isfinite(*t_accept))
        fail(Error::Code::domain, "sample " + id + ": t_accept not finite");
    if (!std::isfinite(t_ego_cross))
        fail(Error::Code::domain, "sample " + id + ": t_ego_cross not finite");
    // both paths must reach the contested region; a path that stops short has
    // its nearest point far from the center
    for (const auto* path : {&ego_path, &target_path}) {
        const double lateral = path->foot_point(contested.center).lateral;
        if (lateral > contested.half_extent + 1e-9)
            fail(Error::Code::domain, "sample " + id + ": path passes " + format_double(lateral) +
                                          " m from the contested space center, outside its half-extent");
    }
}

double Sample::gap_opening_time(int n_input) const {
    if (target_traj.size() < static_cast<std::size_t>(n_input))
        fail(Error::Code::domain, "sample " + id + ": too few observations");
    return target_traj[static_cast<std::size_t>(n_input) - 1].t;
}

std::span<const TimedPos> Sample::input_window(bool ego, double cutoff, int n_input) const {
    const auto& traj = ego ? ego_traj : target_traj;
    std::size_t end = 0;
    while (end < traj.size() && traj[end].t <= cutoff + 1e-9) ++end;
    if (end < static_cast<std::size_t>(n_input))
        fail(Error::Code::domain, "sample " + id + ": only " + std::to_string(end) +
                                      " observations at or before t=" + format_double(cutoff));
    return std::span<const TimedPos>(traj).subspan(end - n_input, n_input);
}

std::pair<ProjectedState, ProjectedState> initial_conditions(const Sample& sample, double cutoff,
                                                             int n_input, double lateral_tolerance) {
    const auto make = [&](bool ego) {
        const auto window = sample.input_window(ego, cutoff, n_input);
        const double span_t = window.back().t - window.front().t;
        if (!(span_t > 0.0))
            fail(Error::Code::domain, "sample " + sample.id + ": observation window has zero duration");
        const auto proj = project_to_path(window, ego ? sample.ego_path : sample.target_path,
                                          sample.contested, lateral_tolerance);
        return proj.back().s;
    };
    return {make(true), make(false)};
}

}  // namespace commotions
