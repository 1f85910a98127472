#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>

#include "util/csv.hpp"
#include "util/error.hpp"
#include "util/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace commotions {
namespace {

std::string row_context(const fs::path& file, std::size_t row) {
    return file.string() + " data row " + std::to_string(row + 1);
}

double lognormal_cdf(double x, double mu, double sigma) {
    if (x <= 0.0) return 0.0;
    return 0.5 * std::erfc(-(std::log(x) - mu) / (sigma * std::sqrt(2.0)));
}

}  // namespace

void Dataset::validate(int n_input) const {
    std::set<std::string> ids;
    for (const Sample& s : samples) {
        if (!ids.insert(s.id).second)
            fail(Error::Code::domain, "duplicate sample id '" + s.id + "'");
        s.validate(n_input);
    }
    if (!(meta.timestep > 0.0)) fail(Error::Code::domain, "dataset timestep must be positive");
    for (const Sample& s : samples) {
        if (s.ego_traj.size() < 2) continue;
        double dt = s.ego_traj[1].t - s.ego_traj[0].t;
        if (std::abs(dt - meta.timestep) > 1e-9 * std::max(1.0, meta.timestep))
            fail(Error::Code::domain,
                 "sample '" + s.id + "' timestep differs from dataset metadata");
    }
}

int Dataset::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].id == id) return static_cast<int>(i);
    return -1;
}

const Sample& Dataset::by_id(const std::string& id) const {
    int i = index_of(id);
    if (i < 0) fail(Error::Code::invalid_argument, "unknown sample id '" + id + "'");
    return samples[static_cast<std::size_t>(i)];
}

Dataset load_dataset(const std::string& dir) {
    fs::path base(dir);
    Dataset ds;

    fs::path meta_file = base / "meta.csv";
    if (fs::exists(meta_file)) {
        CsvTable t = read_csv(meta_file);
        int ck = t.column("key"), cv = t.column("value");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::string& key = t.rows[r][static_cast<std::size_t>(ck)];
            const std::string& value = t.rows[r][static_cast<std::size_t>(cv)];
            if (key == "name")
                ds.meta.name = value;
            else if (key == "timestep")
                ds.meta.timestep = parse_double(value, row_context(meta_file, r));
            else if (key == "characteristic_gap_s")
                ds.meta.characteristic_gap_s = parse_double(value, row_context(meta_file, r));
            else
                ds.meta.extra[key] = value;
        }
    } else {
        ds.meta.name = base.filename().string();
    }

    // geometry: paths as waypoint lists, contested space as center + extent
    struct Geom {
        std::vector<std::pair<long, Vec2>> ego_wp, target_wp;
        Vec2 center;
        double extent = 0.0;
        bool has_contested = false;
    };
    std::unordered_map<std::string, Geom> geom;
    {
        fs::path file = base / "geometry.csv";
        CsvTable t = read_csv(file);
        int cid = t.column("sample_id"), citem = t.column("item"), cseq = t.column("seq");
        int cx = t.column("x"), cy = t.column("y"), cext = t.column("extent");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            std::string ctx = row_context(file, r);
            Geom& g = geom[row[static_cast<std::size_t>(cid)]];
            const std::string& item = row[static_cast<std::size_t>(citem)];
            long seq = parse_long(row[static_cast<std::size_t>(cseq)], ctx);
            Vec2 p{parse_double(row[static_cast<std::size_t>(cx)], ctx),
                   parse_double(row[static_cast<std::size_t>(cy)], ctx)};
            if (item == "ego_path") {
                g.ego_wp.emplace_back(seq, p);
            } else if (item == "target_path") {
                g.target_wp.emplace_back(seq, p);
            } else if (item == "contested") {
                if (g.has_contested)
                    fail(Error::Code::parse, ctx + ": duplicate contested row for a sample");
                auto ext = parse_optional_double(row[static_cast<std::size_t>(cext)], ctx);
                if (!ext) fail(Error::Code::parse, ctx + ": contested row needs an extent");
                g.center = p;
                g.extent = *ext;
                g.has_contested = true;
            } else {
                fail(Error::Code::parse, ctx + ": unknown item '" + item + "'");
            }
        }
    }

    // trajectories
    std::unordered_map<std::string, std::pair<std::vector<TimedPos>, std::vector<TimedPos>>> traj;
    {
        fs::path file = base / "trajectories.csv";
        CsvTable t = read_csv(file);
        int cid = t.column("sample_id"), cag = t.column("agent"), ct = t.column("t");
        int cx = t.column("x"), cy = t.column("y");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            std::string ctx = row_context(file, r);
            auto& pair = traj[row[static_cast<std::size_t>(cid)]];
            TimedPos tp;
            tp.t = parse_double(row[static_cast<std::size_t>(ct)], ctx);
            tp.p = {parse_double(row[static_cast<std::size_t>(cx)], ctx),
                    parse_double(row[static_cast<std::size_t>(cy)], ctx)};
            const std::string& agent = row[static_cast<std::size_t>(cag)];
            if (agent == "ego")
                pair.first.push_back(tp);
            else if (agent == "target")
                pair.second.push_back(tp);
            else
                fail(Error::Code::parse, ctx + ": unknown agent '" + agent + "'");
        }
    }

    // outcomes define the sample order
    {
        fs::path file = base / "outcomes.csv";
        CsvTable t = read_csv(file);
        int cid = t.column("sample_id"), ca = t.column("a"), cta = t.column("t_a");
        int ctc = t.column("t_c"), cch = t.column("t_char"), ccr = t.column("t_crit");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            std::string ctx = row_context(file, r);
            Sample s;
            s.id = row[static_cast<std::size_t>(cid)];
            long a = parse_long(row[static_cast<std::size_t>(ca)], ctx);
            if (a != 0 && a != 1) fail(Error::Code::parse, ctx + ": outcome a must be 0 or 1");
            s.accepted = a == 1;
            auto ta = parse_optional_double(row[static_cast<std::size_t>(cta)], ctx);
            if (s.accepted && !ta)
                fail(Error::Code::parse, ctx + ": accepted sample without acceptance time");
            if (!s.accepted && ta)
                fail(Error::Code::parse, ctx + ": rejected sample carries an acceptance time");
            s.t_accept = ta;
            s.t_ego_cross = parse_double(row[static_cast<std::size_t>(ctc)], ctx);
            s.t_characteristic = parse_double(row[static_cast<std::size_t>(cch)], ctx);
            s.t_critical = parse_double(row[static_cast<std::size_t>(ccr)], ctx);

            auto g = geom.find(s.id);
            if (g == geom.end() || g->second.ego_wp.empty() || g->second.target_wp.empty() ||
                !g->second.has_contested)
                fail(Error::Code::parse,
                     ctx + ": sample '" + s.id + "' lacks complete geometry rows");
            auto build_path = [&](std::vector<std::pair<long, Vec2>>& wp, const char* what) {
                std::sort(wp.begin(), wp.end(),
                          [](const auto& a_, const auto& b_) { return a_.first < b_.first; });
                for (std::size_t i = 1; i < wp.size(); ++i)
                    if (wp[i].first == wp[i - 1].first)
                        fail(Error::Code::parse, ctx + ": duplicate " + std::string(what) +
                                                     " seq " + std::to_string(wp[i].first));
                std::vector<Vec2> pts;
                pts.reserve(wp.size());
                for (const auto& [seq, p] : wp) pts.push_back(p);
                return Path::from_waypoints(std::move(pts));
            };
            s.ego_path = build_path(g->second.ego_wp, "ego_path");
            s.target_path = build_path(g->second.target_wp, "target_path");
            s.contested = {g->second.center, g->second.extent};
            s.contested.validate();

            auto tr = traj.find(s.id);
            if (tr == traj.end() || tr->second.first.empty() || tr->second.second.empty())
                fail(Error::Code::parse,
                     ctx + ": sample '" + s.id + "' lacks trajectories for both agents");
            s.ego_traj = std::move(tr->second.first);
            s.target_traj = std::move(tr->second.second);
            ds.samples.push_back(std::move(s));
        }
    }

    if (ds.samples.empty()) fail(Error::Code::parse, (base / "outcomes.csv").string() + ": no samples");
    if (!fs::exists(meta_file) && ds.samples[0].ego_traj.size() >= 2)
        ds.meta.timestep = ds.samples[0].ego_traj[1].t - ds.samples[0].ego_traj[0].t;
    ds.validate(2);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    fs::path base(dir);
    std::error_code ec;
    fs::create_directories(base, ec);
    if (ec) fail(Error::Code::io, "cannot create directory '" + base.string() + "': " + ec.message());

    {
        CsvWriter w(base / "meta.csv", {"key", "value"});
        w.row({"name", ds.meta.name});
        w.row({"timestep", format_double(ds.meta.timestep)});
        w.row({"characteristic_gap_s", format_double(ds.meta.characteristic_gap_s)});
        for (const auto& [k, v] : ds.meta.extra) w.row({k, v});
        w.close();
    }
    {
        CsvWriter w(base / "geometry.csv", {"sample_id", "item", "seq", "x", "y", "extent"});
        for (const Sample& s : ds.samples) {
            auto dump_path = [&](const Path& p, const char* item) {
                const auto& pts = p.waypoints();
                for (std::size_t i = 0; i < pts.size(); ++i)
                    w.row({s.id, item, std::to_string(i), format_double(pts[i].x),
                           format_double(pts[i].y), ""});
            };
            dump_path(s.ego_path, "ego_path");
            dump_path(s.target_path, "target_path");
            w.row({s.id, "contested", "0", format_double(s.contested.center.x),
                   format_double(s.contested.center.y), format_double(s.contested.half_extent)});
        }
        w.close();
    }
    {
        CsvWriter w(base / "trajectories.csv", {"sample_id", "agent", "t", "x", "y"});
        for (const Sample& s : ds.samples) {
            for (const TimedPos& p : s.ego_traj)
                w.row({s.id, "ego", format_double(p.t), format_double(p.p.x), format_double(p.p.y)});
            for (const TimedPos& p : s.target_traj)
                w.row({s.id, "target", format_double(p.t), format_double(p.p.x),
                       format_double(p.p.y)});
        }
        w.close();
    }
    {
        CsvWriter w(base / "outcomes.csv", {"sample_id", "a", "t_a", "t_c", "t_char", "t_crit"});
        for (const Sample& s : ds.samples)
            w.row({s.id, s.accepted ? "1" : "0", s.t_accept ? format_double(*s.t_accept) : "",
                   format_double(s.t_ego_cross), format_double(s.t_characteristic),
                   format_double(s.t_critical)});
        w.close();
    }
}

void SynthConfig::validate() const {
    if (n < 1) fail(Error::Code::invalid_argument, "synth n must be >= 1");
    if (!(timestep > 0.0)) fail(Error::Code::invalid_argument, "synth timestep must be positive");
    if (!(half_extent > 0.0)) fail(Error::Code::invalid_argument, "synth half_extent must be positive");
    auto range = [&](double lo, double hi, const char* what) {
        if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
            fail(Error::Code::invalid_argument, std::string("synth ") + what + " range invalid");
    };
    range(ego_speed_lo, ego_speed_hi, "ego speed");
    range(ego_time_lo, ego_time_hi, "ego time");
    range(target_dist_lo, target_dist_hi, "target distance");
    range(target_speed_lo, target_speed_hi, "target speed");
    if (!(ego_speed_lo > 0.0)) fail(Error::Code::invalid_argument, "synth ego speed must be positive");
    if (!(ego_time_lo > 0.0)) fail(Error::Code::invalid_argument, "synth ego time must be positive");
    if (!(target_dist_lo > 0.0))
        fail(Error::Code::invalid_argument, "synth target distance must be positive");
    if (target_speed_lo < 0.0)
        fail(Error::Code::invalid_argument, "synth target speed must be >= 0");
    if (!(threshold_median_s > 0.0))
        fail(Error::Code::invalid_argument, "synth threshold median must be positive");
    if (behavior_noise < 0.0) fail(Error::Code::invalid_argument, "synth behavior noise must be >= 0");
    if (n_input < 2) fail(Error::Code::invalid_argument, "synth n_input must be >= 2");
}

double synth_accept_probability(const SynthConfig& cfg, double gap_seconds) {
    if (cfg.behavior_noise == 0.0) return gap_seconds > cfg.threshold_median_s ? 1.0 : 0.0;
    return lognormal_cdf(gap_seconds, std::log(cfg.threshold_median_s), cfg.behavior_noise);
}

Dataset synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.meta.name = "synth";
    ds.meta.timestep = cfg.timestep;
    ds.meta.characteristic_gap_s = cfg.characteristic_gap_s;
    ds.meta.extra["generator"] = "synth";
    ds.meta.extra["gen.seed"] = std::to_string(cfg.seed);
    ds.meta.extra["gen.threshold_median_s"] = format_double(cfg.threshold_median_s);
    ds.meta.extra["gen.behavior_noise"] = format_double(cfg.behavior_noise);
    ds.meta.extra["gen.critical_gap_s"] = format_double(cfg.critical_gap_s);
    ds.meta.extra["gen.half_extent"] = format_double(cfg.half_extent);
    ds.meta.extra["gen.n_input"] = std::to_string(cfg.n_input);

    const double h = cfg.half_extent;
    const double dt = cfg.timestep;
    const double t_open = static_cast<double>(cfg.n_input - 1) * dt;

    ds.samples.reserve(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) {
        Rng rng(derive_stream(cfg.seed, fnv1a("synth"), static_cast<std::uint64_t>(i)));
        Sample s;
        {
            char buf[16];
            std::snprintf(buf, sizeof buf, "s%04d", i);
            s.id = buf;
        }

        double v_e = rng.uniform(cfg.ego_speed_lo, cfg.ego_speed_hi);
        double t_c = rng.uniform(cfg.ego_time_lo, cfg.ego_time_hi);
        double d_e0 = v_e * t_c;  // ego distance to the near edge at t = 0
        double gap = t_c - t_open;

        double threshold = cfg.threshold_median_s *
                           std::exp(cfg.behavior_noise * rng.normal());
        bool accept = gap > threshold;
        double t_ego_exit = t_c + 2.0 * h / v_e;

        // target motion profile toward the region: d_t(t), piecewise
        double d_t0 = 0.0, v_t0 = 0.0;
        double t_entry = 0.0;        // target reaches d = 0
        double a_approach = 0.0;     // constant acceleration until entry (accepted)
        double v_entry = 0.0;
        double stop_margin = 0.0, a_brake = 0.0;            // rejected profile
        double t_brake = 0.0, t_stop = 0.0;
        double t_depart = 0.0, a_resume = 0.0;

        if (accept) {
            // commit to entering within the gap and clearing the region with a
            // real margin before the ego arrives; start distance follows
            v_t0 = rng.uniform(cfg.target_speed_lo, cfg.target_speed_hi);
            double v_entry_hi = std::max(2.0, cfg.target_speed_hi) + 0.5;
            double buffer = std::min(rng.uniform(0.5, 1.5), 0.3 * gap);
            double t_exit_max = t_c - buffer;
            double rho_hi =
                std::clamp(1.0 - (buffer + 2.0 * h / (0.92 * v_entry_hi)) / gap, 0.15, 0.78);
            double rho = rng.uniform(std::min(0.12, rho_hi), rho_hi);
            t_entry = t_open + rho * gap;
            double v_entry_lo =
                std::min(std::max(2.8, 2.0 * h / (t_exit_max - t_entry)), v_entry_hi);
            v_entry = rng.uniform(v_entry_lo, v_entry_hi);
            d_t0 = 0.5 * t_entry * (v_t0 + v_entry);  // trapezoid rule, exact
            a_approach = (v_entry - v_t0) / t_entry;
            s.accepted = true;
            s.t_accept = t_entry;
        } else {
            // give up the gap decisively: cruise if far, then brake firmly to a
            // stop short of the edge, well before the ego arrives when possible
            d_t0 = rng.uniform(cfg.target_dist_lo, cfg.target_dist_hi);
            v_t0 = rng.uniform(cfg.target_speed_lo, cfg.target_speed_hi);
            if (v_t0 < 0.3) v_t0 = 0.0;
            v_t0 = std::min(v_t0, std::sqrt(6.0 * std::max(d_t0 - 0.4, 0.05)));
            if (v_t0 > 0.0) {
                stop_margin = std::min(rng.uniform(0.4, 1.2), 0.5 * d_t0);
                a_brake = rng.uniform(1.2, 2.4);
                double s_brake = v_t0 * v_t0 / (2.0 * a_brake);
                if (s_brake >= d_t0 - stop_margin) {
                    a_brake = v_t0 * v_t0 / (2.0 * (d_t0 - stop_margin));
                    t_brake = 0.0;
                } else {
                    t_brake = (d_t0 - stop_margin - s_brake) / v_t0;
                }
                t_stop = t_brake + v_t0 / a_brake;
                double deadline = t_c - rng.uniform(2.6, 3.4);
                if (t_stop > deadline) {
                    // brake from the start, harder if needed, stopping early
                    a_brake = std::min(3.2, v_t0 / std::max(deadline, v_t0 / 3.2));
                    t_brake = 0.0;
                    t_stop = v_t0 / a_brake;
                    stop_margin = d_t0 - v_t0 * v_t0 / (2.0 * a_brake);
                }
            } else {
                stop_margin = d_t0;  // already standing
            }
            t_depart = std::max(t_ego_exit + rng.uniform(0.3, 1.0), t_stop);
            a_resume = rng.uniform(1.5, 2.5);
            t_entry = t_depart + std::sqrt(2.0 * stop_margin / a_resume);
            s.accepted = false;
        }

        // distance of the target to the near edge at time t
        auto target_d = [&](double t) {
            if (accept) {
                if (t <= t_entry) return d_t0 - (v_t0 + 0.5 * a_approach * t) * t;
                return -(v_entry * (t - t_entry));  // constant speed past the edge
            }
            if (v_t0 > 0.0 && t < t_stop) {
                if (t < t_brake) return d_t0 - v_t0 * t;
                double tau = t - t_brake;
                return d_t0 - v_t0 * t_brake - (v_t0 - 0.5 * a_brake * tau) * tau;
            }
            if (t < t_depart) return stop_margin;
            double tau = t - t_depart;
            return stop_margin - 0.5 * a_resume * tau * tau;
        };

        // record until both agents are past the far edge, plus a margin
        double t_target_exit;
        if (accept) {
            t_target_exit = t_entry + 2.0 * h / v_entry;
        } else {
            t_target_exit = t_depart + std::sqrt(2.0 * (stop_margin + 2.0 * h) / a_resume);
        }
        double t_end = std::max(t_target_exit, t_ego_exit) + 0.5;
        long steps = static_cast<long>(std::ceil(t_end / dt)) + 1;
        double t_last = static_cast<double>(steps - 1) * dt;

        // geometry: contested space centered at the origin, straight paths
        // long enough to cover every recorded position
        double x0 = -(d_e0 + h);
        double y0 = d_t0 + h;
        double x_end = x0 + v_e * t_last + 1.0;
        double y_end = std::min(target_d(t_last) + h, -h) - 1.0;
        s.contested = {{0.0, 0.0}, h};
        s.ego_path = Path::from_waypoints({{x0 - 2.0, 0.0}, {x_end, 0.0}});
        s.target_path = Path::from_waypoints({{0.0, y0 + 2.0}, {0.0, y_end}});

        s.ego_traj.reserve(static_cast<std::size_t>(steps));
        s.target_traj.reserve(static_cast<std::size_t>(steps));
        for (long k = 0; k < steps; ++k) {
            double t = static_cast<double>(k) * dt;
            s.ego_traj.push_back({t, {x0 + v_e * t, 0.0}});
            s.target_traj.push_back({t, {0.0, target_d(t) + h}});
        }

        s.t_ego_cross = t_c;
        s.t_characteristic = std::max(t_open, t_c - cfg.characteristic_gap_s);
        s.t_critical = std::max(t_open, t_c - cfg.critical_gap_s);
        ds.samples.push_back(std::move(s));
    }
    ds.validate(cfg.n_input);
    return ds;
}

SplitPlan make_splits(const Dataset& ds, int n_random, double test_fraction, std::uint64_t seed,
                      int n_input) {
    if (n_random < 0) fail(Error::Code::invalid_argument, "n_random must be >= 0");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        fail(Error::Code::invalid_argument, "test_fraction must be in (0, 1)");

    struct Entry {
        std::string id;
        double gap;
        bool accepted;
    };
    std::vector<Entry> accepted, rejected;
    for (const Sample& s : ds.samples) {
        Entry e{s.id, s.gap_seconds(n_input), s.accepted};
        (s.accepted ? accepted : rejected).push_back(std::move(e));
    }
    auto by_id = [](const Entry& a, const Entry& b) { return a.id < b.id; };
    std::sort(accepted.begin(), accepted.end(), by_id);
    std::sort(rejected.begin(), rejected.end(), by_id);

    auto stratum_test_count = [&](std::size_t n_class) {
        if (n_class < 2)
            fail(Error::Code::domain, "need at least 2 samples in each outcome class for splits");
        long k = std::lround(test_fraction * static_cast<double>(n_class));
        k = std::clamp<long>(k, 1, static_cast<long>(n_class) - 1);
        return static_cast<std::size_t>(k);
    };
    std::size_t test_acc = stratum_test_count(accepted.size());
    std::size_t test_rej = stratum_test_count(rejected.size());

    SplitPlan plan;
    plan.test_fraction = test_fraction;

    for (int r = 0; r < n_random; ++r) {
        Rng rng(derive_stream(seed, fnv1a("splits"), static_cast<std::uint64_t>(r)));
        auto shuffled = [&](std::vector<Entry> v) {
            for (std::size_t i = v.size(); i > 1; --i)
                std::swap(v[i - 1], v[static_cast<std::size_t>(rng.below(i))]);
            return v;
        };
        std::vector<Entry> acc = shuffled(accepted);
        std::vector<Entry> rej = shuffled(rejected);
        Split sp;
        sp.kind = "random";
        for (std::size_t i = 0; i < acc.size(); ++i)
            (i < test_acc ? sp.test_ids : sp.train_ids).push_back(acc[i].id);
        for (std::size_t i = 0; i < rej.size(); ++i)
            (i < test_rej ? sp.test_ids : sp.train_ids).push_back(rej[i].id);
        std::sort(sp.train_ids.begin(), sp.train_ids.end());
        std::sort(sp.test_ids.begin(), sp.test_ids.end());
        plan.splits.push_back(std::move(sp));
    }

    // critical: smallest accepted gaps and largest rejected gaps, alternately
    std::vector<Entry> acc = accepted, rej = rejected;
    std::sort(acc.begin(), acc.end(), [](const Entry& a, const Entry& b) {
        if (a.gap != b.gap) return a.gap < b.gap;
        return a.id < b.id;
    });
    std::sort(rej.begin(), rej.end(), [](const Entry& a, const Entry& b) {
        if (a.gap != b.gap) return a.gap > b.gap;
        return a.id < b.id;
    });
    std::size_t total = accepted.size() + rejected.size();
    std::size_t want = static_cast<std::size_t>(std::clamp<long>(
        std::lround(test_fraction * static_cast<double>(total)), 1,
        static_cast<long>(total) - 1));
    Split crit;
    crit.kind = "critical";
    std::set<std::string> in_test;
    std::size_t ia = 0, ir = 0;
    while (in_test.size() < want && (ia < acc.size() || ir < rej.size())) {
        if (ia < acc.size()) in_test.insert(acc[ia++].id);
        if (in_test.size() >= want) break;
        if (ir < rej.size()) in_test.insert(rej[ir++].id);
    }
    for (const Sample& s : ds.samples)
        (in_test.count(s.id) ? crit.test_ids : crit.train_ids).push_back(s.id);
    std::sort(crit.train_ids.begin(), crit.train_ids.end());
    std::sort(crit.test_ids.begin(), crit.test_ids.end());
    plan.splits.push_back(std::move(crit));

    plan.validate(ds);
    return plan;
}

void SplitPlan::validate(const Dataset& ds) const {
    std::set<std::string> all;
    for (const Sample& s : ds.samples) all.insert(s.id);
    for (const Split& sp : splits) {
        std::set<std::string> seen;
        for (const auto& id : sp.train_ids)
            if (!seen.insert(id).second)
                fail(Error::Code::domain, "split lists id '" + id + "' twice");
        for (const auto& id : sp.test_ids)
            if (!seen.insert(id).second)
                fail(Error::Code::domain, "split lists id '" + id + "' in train and test");
        if (seen != all)
            fail(Error::Code::domain, "split does not partition the dataset ids");
        if (sp.train_ids.empty() || sp.test_ids.empty())
            fail(Error::Code::domain, "split with an empty side");
    }
}

void save_splits(const SplitPlan& plan, const std::string& file) {
    nlohmann::ordered_json j;
    j["test_fraction"] = plan.test_fraction;
    j["splits"] = nlohmann::ordered_json::array();
    for (const Split& sp : plan.splits) {
        nlohmann::ordered_json s;
        s["kind"] = sp.kind;
        s["train"] = sp.train_ids;
        s["test"] = sp.test_ids;
        j["splits"].push_back(std::move(s));
    }
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(Error::Code::io, "cannot open '" + file + "' for writing");
    out << j.dump(2) << '\n';
    if (!out.good()) fail(Error::Code::io, "write failed for '" + file + "'");
}

SplitPlan load_splits(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(Error::Code::io, "cannot open '" + file + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(Error::Code::parse, "invalid split file '" + file + "': " + e.what());
    }
    SplitPlan plan;
    try {
        plan.test_fraction = j.at("test_fraction").get<double>();
        for (const auto& s : j.at("splits")) {
            Split sp;
            sp.kind = s.at("kind").get<std::string>();
            sp.train_ids = s.at("train").get<std::vector<std::string>>();
            sp.test_ids = s.at("test").get<std::vector<std::string>>();
            plan.splits.push_back(std::move(sp));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Error::Code::parse, "invalid split file '" + file + "': " + e.what());
    }
    return plan;
}

}  // namespace commotions
