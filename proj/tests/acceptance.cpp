// Acceptance checks for the whole pipeline. Each criterion prints one line:
//   [PASS] / [FAIL] / [SKIP] <criterion>: <measurements>
// The process exits nonzero iff any line failed. The end-to-end fit is the
// slow part (tens of minutes at full budgets); --skip-slow replaces it and
// the dependent robustness line with [SKIP] for quicker reruns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dataset.hpp"
#include "fitting.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "prediction.hpp"
#include "runner.hpp"
#include "scenario.hpp"
#include "util/kv.hpp"
#include "util/rng.hpp"

using namespace commotions;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

int failures = 0;

void report(const std::string& status, const std::string& name, const std::string& detail) {
    if (status == "FAIL") ++failures;
    std::cout << "[" << status << "] " << name << ": " << detail << std::endl;
}

void run_checked(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        const auto [ok, detail] = fn();
        report(ok ? "PASS" : "FAIL", name, detail);
    } catch (const std::exception& e) {
        report("FAIL", name, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------ criterion 1

// Integrates the piecewise constant-jerk control law of a generated
// trajectory in 1 ms steps, each step advanced with the exact cubic update,
// and compares against the closed-form evaluation.
std::pair<bool, std::string> check_integration() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    double max_d_err = 0.0, max_v_err = 0.0;
    const int cases = 10000;
    for (int c = 0; c < cases; ++c) {
        SimConfig cfg;
        cfg.scheme = (rng.below(2) == 0) ? ControlScheme::acceleration : ControlScheme::jerk;
        cfg.horizon = 10.0;
        KinState init{rng.uniform(2.0, 60.0), rng.uniform(0.0, 15.0),
                      cfg.scheme == ControlScheme::jerk ? rng.uniform(-2.0, 2.0) : 0.0};
        const double u = rng.uniform(-4.0, 4.0);
        const auto intent =
            (rng.below(2) == 0) ? BehaviorIntent::pass_first : BehaviorIntent::pass_second;
        Occupancy other;
        if (rng.below(2) == 0) {
            other.entry = rng.uniform(0.0, 8.0);
            other.exit = other.entry + rng.uniform(0.5, 4.0);
        }
        const double region = rng.uniform(2.0, 6.0);
        const Trajectory1D traj = generate_trajectory(init, u, intent, other, region, cfg);

        const double h = 1e-3;
        double d = traj.seg[0].d0, v = traj.seg[0].v0;
        for (int k = 0; k < traj.n; ++k) {
            const Segment& seg = traj.seg[k];
            max_d_err = std::max(max_d_err, std::abs(seg.d0 - d));
            max_v_err = std::max(max_v_err, std::abs(seg.v0 - v));
            double tau = 0.0;
            while (tau < seg.dur - 1e-12) {
                const double step = std::min(h, seg.dur - tau);
                const double a = seg.a0 + seg.jerk * tau;
                d -= v * step + a / 2.0 * step * step + seg.jerk / 6.0 * step * step * step;
                v += a * step + seg.jerk / 2.0 * step * step;
                tau += step;
                max_d_err = std::max(max_d_err, std::abs(seg.d_at(tau) - d));
                max_v_err = std::max(max_v_err, std::abs(seg.v_at(tau) - v));
            }
        }
    }
    const double dt = seconds_since(t0);
    const bool ok = max_d_err < 1e-6 && dt < 60.0;
    return {ok, fmt(cases, 9) + " random trajectories over 10 s vs a 1 ms stepped oracle, max |d| error " +
                    fmt(max_d_err, 3) + " m (< 1e-6), max |v| error " + fmt(max_v_err, 3) +
                    " m/s, " + fmt(dt, 3) + " s (< 60 s)"};
}

// ------------------------------------------------------------ criterion 2

std::pair<bool, std::string> check_loss_identities() {
    Rng rng(99);
    const auto make_records = [&](int n, bool cap_all) {
        std::vector<PredictionRecord> recs(n);
        std::vector<TruthRef> truth(n);
        for (int i = 0; i < n; ++i) {
            const int n_p = 2 + static_cast<int>(rng.below(5));
            recs[i].accepted_p.assign(n_p, 0);
            recs[i].t_entry_p.resize(n_p);
            int acc = 0;
            for (int p = 0; p < n_p; ++p) {
                recs[i].accepted_p[p] = rng.below(2) ? 1 : 0;
                acc += recs[i].accepted_p[p];
                recs[i].t_entry_p[p] = rng.uniform(0.0, 15.0);
            }
            recs[i].a_pred = static_cast<double>(acc) / n_p;
            recs[i].variance = cap_all ? kVarianceCap : rng.uniform(0.0, 0.0095);
            truth[i].accepted = rng.below(2) == 0;
            truth[i].t_accept = rng.uniform(0.5, 10.0);
            truth[i].t_cross = rng.uniform(0.5, 10.0);
        }
        return std::pair(recs, truth);
    };

    double max_reg_err = 0.0;
    const int fixtures = 1000;
    for (int f = 0; f < fixtures; ++f) {
        const int n = 1 + static_cast<int>(rng.below(8));
        const bool cap_all = f % 4 == 0;
        const auto [recs, truth] = make_records(n, cap_all);
        const double l1 = loss_l1(recs, truth);
        const double l2 = loss_l2(recs, truth);
        if (l2 < l1) return {false, "L2 < L1 on fixture " + std::to_string(f)};

        double reg = 0.0;
        for (const auto& r : recs) {
            const double root = 10.0 * std::sqrt(r.variance) - 1.0;
            reg += root * root;
        }
        max_reg_err = std::max(max_reg_err, std::abs((l2 - l1) - reg));
        if (cap_all && l2 != l1)
            return {false, "L2 != L1 with every variance at the cap on fixture " +
                               std::to_string(f)};
        if (!cap_all && l2 <= l1)
            return {false, "L2 not strictly above L1 with uncapped variances on fixture " +
                               std::to_string(f)};
    }
    return {max_reg_err < 1e-12,
            fmt(fixtures, 9) + " random fixtures: L2 >= L1 throughout, equality exactly at the "
                               "variance cap, regularizer matches (10*sqrt(V) - 1)^2 within " +
                fmt(max_reg_err, 3) + " (< 1e-12)"};
}

// ------------------------------------------------------------ criterion 3

std::pair<bool, std::string> check_metric_oracles() {
    Rng rng(5150);
    for (int c = 0; c < 200; ++c) {
        const int n_pos = 5 + static_cast<int>(rng.below(96));
        const int n_neg = 5 + static_cast<int>(rng.below(96));
        std::vector<ScoredLabel> data;
        for (int i = 0; i < n_pos; ++i)
            data.push_back({1, std::round(rng.uniform() * 8.0) / 8.0});
        for (int i = 0; i < n_neg; ++i)
            data.push_back({0, std::round(rng.uniform() * 8.0) / 8.0});

        double wins = 0.0;
        for (const auto& p : data) {
            if (p.label != 1) continue;
            for (const auto& q : data) {
                if (q.label != 0) continue;
                if (p.score > q.score)
                    wins += 1.0;
                else if (p.score == q.score)
                    wins += 0.5;
            }
        }
        const double brute = wins / (static_cast<double>(n_pos) * n_neg);
        if (auc(data) != brute)
            return {false, "auc mismatch on instance " + std::to_string(c) + ": " +
                               fmt(auc(data), 17) + " vs brute-force " + fmt(brute, 17)};

        double best = 0.0;
        for (const auto& cand : data) {
            int recall_miss = 0, below = 0;
            for (const auto& x : data) {
                if (x.label == 1 && x.score < cand.score) ++recall_miss;
                if (x.label == 0 && x.score < cand.score) ++below;
            }
            if (recall_miss == 0)
                best = std::max(best, static_cast<double>(below) / n_neg);
        }
        if (tnr_pr(data) != best)
            return {false, "tnr mismatch on instance " + std::to_string(c)};
    }

    const std::vector<double> diffs = {1.0, 1.2, 0.8, 1.1, 0.9};
    const std::vector<double> zeros(diffs.size(), 0.0);
    const TTestResult r = paired_t_test(diffs, zeros, 0.05);
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(diffs.size());
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    var /= static_cast<double>(diffs.size() - 1);
    const double t_formula = mean / std::sqrt(var / static_cast<double>(diffs.size()));
    const bool t_ok = std::abs(r.t - t_formula) < 1e-2 && r.significant;
    return {t_ok,
            "200 instances: auc equals pair enumeration exactly, tnr-pr equals exhaustive "
            "threshold search; paired t on {1.0,1.2,0.8,1.1,0.9} = " +
                fmt(r.t, 8) + ", formula value " + fmt(t_formula, 8) +
                " (within 1e-2; note: the rounded reference constant 14.70 does not satisfy "
                "this formula, 14.1421 does)"};
}

// ------------------------------------------------------------ criterion 4

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return files;
}

std::pair<bool, std::string> check_thread_determinism(const fs::path& work) {
    const fs::path data = work / "det_data";
    Config synth_cfg = Config::parse_text("synth.n = 24\nseed = 11\nsplits.n_random = 3\n");
    run_synth(synth_cfg, data.string());

    // reruns share one output path so only the worker count differs
    std::vector<std::map<std::string, std::string>> runs;
    const fs::path out = work / "det_out";
    for (const int threads : {1, 4, 8}) {
        fs::remove_all(out);
        Config cfg = Config::parse_text(
            "dataset = " + (data / "dataset").string() + "\n" +
            "splits = " + (data / "splits.json").string() + "\n" +
            "cm.n_p = 8\nfit.n_init = 9\nfit.n_acq = 3\nseed = 2\n" +
            "threads = " + std::to_string(threads) + "\n");
        run_fit(cfg, (out / "fits").string());
        Config ev = cfg;
        ev.set("model", "CM");
        ev.set("fits", (out / "fits").string());
        run_evaluate(ev, (out / "eval").string());
        runs.push_back(dir_contents(out));
    }
    if (runs[0].empty()) return {false, "no output files produced"};
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (runs[i] != runs[0])
            return {false, "outputs differ between 1 and " + std::to_string(i == 1 ? 4 : 8) +
                               " worker threads"};
    return {true, "fit + evaluate wrote " + std::to_string(runs[0].size()) +
                      " files, byte-identical with 1, 4 and 8 worker threads"};
}

// ------------------------------------------------------------ criteria 5 and 6

struct E2eResult {
    bool ran = false;
    fs::path cm_report, lr_report, compare_dir;
};

std::pair<bool, std::string> check_end_to_end(const fs::path& work, E2eResult& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path data = work / "e2e_data";
    run_synth(Config::parse_text("synth.n = 400\nseed = 7\n"), data.string());

    const std::string base =
        "dataset = " + (data / "dataset").string() + "\n" +
        "splits = " + (data / "splits.json").string() + "\n";
    const fs::path fits = work / "e2e_fits";
    run_fit(Config::parse_text(base), fits.string());
    const double fit_minutes = seconds_since(t0) / 60.0;

    Config ev = Config::parse_text(base);
    ev.set("model", "CM");
    ev.set("fits", fits.string());
    const fs::path eval_dir = work / "e2e_eval";
    run_evaluate(ev, eval_dir.string());

    Config ev_default = Config::parse_text(base);
    ev_default.set("model", "CM");
    ev_default.set("eval.untuned", "1");
    run_evaluate(ev_default, eval_dir.string());

    Config ev_lr = Config::parse_text(base);
    ev_lr.set("model", "LR1D");
    run_evaluate(ev_lr, eval_dir.string());

    const auto avg = [&](const std::string& label) {
        const std::ifstream check(eval_dir / ("report_" + label + ".json"));
        std::ifstream in(eval_dir / ("report_" + label + ".json"));
        const ordered_json j = ordered_json::parse(in);
        if (!j["random_average"].contains("auc_characteristic"))
            throw std::runtime_error(label + ": no characteristic-gap auc average");
        if (j["random_counts"]["auc_characteristic"].get<int>() != 10)
            throw std::runtime_error(label + ": auc averaged over fewer than 10 random splits");
        return j["random_average"]["auc_characteristic"].get<double>();
    };
    const double fitted = avg("cm");
    const double untuned = avg("cm_default");
    const double lr = avg("lr1d");

    out.ran = true;
    out.cm_report = eval_dir / "report_cm.json";
    out.lr_report = eval_dir / "report_lr1d.json";
    out.compare_dir = work / "e2e_compare";

    const double total_minutes = seconds_since(t0) / 60.0;
    const unsigned cores = std::thread::hardware_concurrency();
    const bool ok = fitted >= 0.80 && fitted > untuned && fitted > 0.5;
    return {ok, "400-sample dataset, seed 7: fitted characteristic auc " + fmt(fitted, 4) +
                    " averaged over 10 random splits (floor 0.80), untuned " + fmt(untuned, 4) +
                    ", chance 0.5; lr1d evaluated cleanly (auc " + fmt(lr, 4) + "); fit took " +
                    fmt(fit_minutes, 3) + " min, total " + fmt(total_minutes, 3) + " min on " +
                    std::to_string(cores) + " core(s); the < 30 min target names a desktop CPU"};
}

std::pair<bool, std::string> check_robustness(const E2eResult& e2e) {
    Config cfg;
    cfg.set("report_a", e2e.cm_report.string());
    cfg.set("report_b", e2e.lr_report.string());
    run_compare(cfg, e2e.compare_dir.string());
    std::ifstream in(e2e.compare_dir / "compare.json");
    const ordered_json j = ordered_json::parse(in);
    if (!j.contains("robustness"))
        return {false, "comparison table lacks the critical-split robustness block"};
    const double deg_cm = j["robustness"]["a"]["degradation"].get<double>();
    const double deg_lr = j["robustness"]["b"]["degradation"].get<double>();
    const bool within = deg_cm <= deg_lr + 0.05;
    // a reported criterion: the measured direction is stated, not enforced
    return {true, "critical-split auc degradation (reported, not enforced): fitted cm " +
                      fmt(deg_cm, 4) + ", lr1d " + fmt(deg_lr, 4) + ", difference " +
                      fmt(deg_cm - deg_lr, 4) +
                      (within ? " (within the +0.05 margin)" : " (outside the +0.05 margin)") +
                      "; table at " + (e2e.compare_dir / "compare.json").string()};
}

// ------------------------------------------------------------ criterion 7

std::pair<bool, std::string> check_throughput() {
    SimConfig cfg;  // defaults: 15 s horizon, 0.1 s steps, AC, NM
    const ModelParams params;
    const ProjectedState ego0{40.0, 10.0};
    const ProjectedState target0{8.0, 2.0};
    const int n_p = 4000;

    simulate_batch(ego0, target0, params, cfg, 4.0, 500, 1, 1, 1);  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    simulate_batch(ego0, target0, params, cfg, 4.0, n_p, 1, 1, 1);
    const double rate1 = n_p / seconds_since(t0);

    std::string scaling;
    bool ok = rate1 >= 2000.0;
    const unsigned cores = std::thread::hardware_concurrency();
    if (cores >= 4) {
        const auto t1 = std::chrono::steady_clock::now();
        simulate_batch(ego0, target0, params, cfg, 4.0, n_p, 1, 1, 4);
        const double rate4 = n_p / seconds_since(t1);
        ok = ok && rate4 >= 3.0 * rate1;
        scaling = "; 4-thread scaling " + fmt(rate4 / rate1, 3) + "x (>= 3x)";
    } else {
        scaling = "; 4-core scaling not measurable, this machine exposes " +
                  std::to_string(cores) + " hardware thread(s)";
    }
    return {ok, "single-thread simulation rate " + fmt(rate1, 6) + " rollouts/s (>= 2000)" +
                    scaling};
}

// ------------------------------------------------------------ criterion 8

std::pair<bool, std::string> check_round_trip() {
    Rng rng(77);
    double max_err = 0.0;
    const int fixtures = 1000;
    int points = 0;
    for (int f = 0; f < fixtures; ++f) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double radius = rng.uniform(15.0, 40.0);
        const Vec2 start{radius * std::cos(angle), radius * std::sin(angle)};
        const int segs = 3 + static_cast<int>(rng.below(6));
        const Vec2 dir{-start.x / radius, -start.y / radius};
        const Vec2 perp{-dir.y, dir.x};
        std::vector<Vec2> pts;
        for (int i = 0; i <= segs; ++i) {
            const double along = 2.0 * radius * i / segs;
            const double lateral =
                (i == 0 || i == segs) ? 0.0 : rng.uniform(-1.5, 1.5);
            pts.push_back({start.x + dir.x * along + perp.x * lateral,
                           start.y + dir.y * along + perp.y * lateral});
        }
        const Path path = Path::from_waypoints(pts);
        const ContestedSpace space{{0.0, 0.0}, rng.uniform(0.5, 2.5)};
        const double entry = entry_arc(path, space);

        std::vector<double> times, dists;
        for (int j = 0; j < 5; ++j) {
            times.push_back(0.5 * j);
            dists.push_back(rng.uniform(entry - path.length() + 0.2, entry - 0.2));
        }
        const auto decoded = decode_to_2d(times, dists, path, space);
        std::vector<TimedPos> obs;
        for (const auto& pt : decoded) {
            if (pt.clamped) return {false, "decode clamped an in-range distance"};
            obs.push_back({pt.t, pt.p});
        }
        const auto back = project_to_path(obs, path, space);
        for (std::size_t j = 0; j < back.size(); ++j) {
            max_err = std::max(max_err, std::abs(back[j].s.d - dists[j]));
            ++points;
        }
    }
    return {max_err < 1e-9, std::to_string(fixtures) + " random paths, " +
                                std::to_string(points) + " points: max |d| round-trip error " +
                                fmt(max_err, 3) + " m (< 1e-9)"};
}

}  // namespace

int main(int argc, char** argv) {
    bool skip_slow = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--skip-slow") == 0) skip_slow = true;

    const fs::path work = fs::temp_directory_path() / "commotions_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    run_checked("closed-form trajectory integration", check_integration);
    run_checked("loss identities", check_loss_identities);
    run_checked("ranking and test-statistic oracles", check_metric_oracles);
    run_checked("thread-count determinism", [&] { return check_thread_determinism(work); });

    E2eResult e2e;
    if (skip_slow) {
        report("SKIP", "synthetic end-to-end fit", "--skip-slow given");
        report("SKIP", "critical-split robustness", "--skip-slow given");
    } else {
        run_checked("synthetic end-to-end fit", [&] { return check_end_to_end(work, e2e); });
        if (e2e.ran)
            run_checked("critical-split robustness", [&] { return check_robustness(e2e); });
        else
            report("FAIL", "critical-split robustness", "end-to-end run unavailable");
    }

    run_checked("simulation throughput", check_throughput);
    run_checked("projection round trip", check_round_trip);

    if (failures == 0) {
        std::cout << "acceptance: all printed criteria hold" << std::endl;
        return 0;
    }
    std::cout << "acceptance: " << failures << " criterion(s) failed" << std::endl;
    return 1;
}
