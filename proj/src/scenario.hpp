#pragma once
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace commotions {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double k) const { return {x * k, y * k}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

// Polyline an agent is assumed to follow towards the contested space. The
// cumulative arc length starts at 0 and is strictly increasing.
class Path {
public:
    static Path from_waypoints(std::vector<Vec2> waypoints);

    const std::vector<Vec2>& waypoints() const { return pts_; }
    const std::vector<double>& arc() const { return arc_; }
    double length() const { return arc_.back(); }

    // Position at a given arc length, clamped to the polyline's extent.
    Vec2 point_at(double s) const;

    struct Foot {
        double arc;      // arc length of the nearest point
        double lateral;  // distance from the query to that point
    };
    // Nearest point over all segments; ties go to the earliest segment.
    Foot foot_point(Vec2 p) const;

private:
    std::vector<Vec2> pts_;
    std::vector<double> arc_;
};

// Square region where the two paths cross, described by its center and the
// half-extent measured along either path.
struct ContestedSpace {
    Vec2 center;
    double half_extent = 0.0;

    void validate() const;
};

// Arc length at which a path crosses the near edge of the contested space.
// The path's closest approach to the center anchors the region on the path.
double entry_arc(const Path& path, const ContestedSpace& contested);

// Quasi-1D state: d is the along-path distance to the contested-space entry
// (positive before entry, decreasing while driving forward), v the speed
// along the path.
struct ProjectedState {
    double d = 0.0;
    double v = 0.0;
};

struct TimedPos {
    double t = 0.0;
    Vec2 p;
};

struct TimedState {
    double t = 0.0;
    ProjectedState s;
};

struct DecodedPoint {
    double t = 0.0;
    Vec2 p;
    bool clamped = false;  // requested distance was outside the path's extent
};

inline constexpr double kDefaultLateralTolerance = 5.0;  // meters

// Projects 2D positions onto the path: d(t) from the foot point's arc length
// to the entry point, v(t) by finite differences of d (backward, first point
// forward). Throws if any point lies farther than lateral_tolerance off the
// path, naming the offending index.
std::vector<TimedState> project_to_path(std::span<const TimedPos> trajectory, const Path& path,
                                        const ContestedSpace& contested,
                                        double lateral_tolerance = kDefaultLateralTolerance);

// Inverse of the projection for points on the path. Distances beyond the
// path's extent are clamped to the nearest endpoint and flagged.
std::vector<DecodedPoint> decode_to_2d(std::span<const TimedState> d_trajectory, const Path& path,
                                       const ContestedSpace& contested);
std::vector<DecodedPoint> decode_to_2d(std::span<const double> times, std::span<const double> distances,
                                       const Path& path, const ContestedSpace& contested);

// One recorded gap-acceptance interaction. Trajectories hold the full
// recording on a uniform grid; model inputs are cut out of them later.
struct Sample {
    std::string id;
    std::vector<TimedPos> ego_traj;
    std::vector<TimedPos> target_traj;
    Path ego_path;
    Path target_path;
    ContestedSpace contested;

    bool accepted = false;                // a_i
    std::optional<double> t_accept;       // t_A,i, required iff accepted
    double t_ego_cross = 0.0;             // t_C,i
    double t_characteristic = 0.0;        // characteristic-gap timestamp
    double t_critical = 0.0;              // critical-decision timestamp

    void validate(int n_input) const;

    // Timestamp of the n_input-th observation: the first moment a prediction
    // can be made.
    double gap_opening_time(int n_input) const;

    double gap_seconds(int n_input) const { return t_ego_cross - gap_opening_time(n_input); }

    // Last n_input recorded points with t <= cutoff. Throws if fewer exist.
    std::span<const TimedPos> input_window(bool ego, double cutoff, int n_input) const;
};

// Projected position and speed of both agents at the end of an input window.
// Speed comes from the final finite difference of d.
std::pair<ProjectedState, ProjectedState> initial_conditions(const Sample& sample, double cutoff,
                                                             int n_input,
                                                             double lateral_tolerance = kDefaultLateralTolerance);

}  // namespace commotions
