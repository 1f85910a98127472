#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "baselines.hpp"
#include "dataset.hpp"
#include "fitting.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "prediction.hpp"
#include "util/csv.hpp"
#include "util/error.hpp"

namespace commotions {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

enum class ModelId { cm, lr1d, lr2d, cv };

ModelId parse_model_id(const std::string& s) {
    if (s == "CM") return ModelId::cm;
    if (s == "LR1D") return ModelId::lr1d;
    if (s == "LR2D") return ModelId::lr2d;
    if (s == "CV") return ModelId::cv;
    fail(Error::Code::invalid_argument,
         "unknown model '" + s + "' (want CM, LR1D, LR2D or CV)");
}

std::string model_name(ModelId m) {
    switch (m) {
        case ModelId::cm: return "CM";
        case ModelId::lr1d: return "LR1D";
        case ModelId::lr2d: return "LR2D";
        case ModelId::cv: return "CV";
    }
    return "?";
}

const std::vector<std::string> kMetricNames = {"auc_gap_opening", "auc_characteristic",
                                               "ade_characteristic", "tnr_pr_critical"};

// orientation: is a larger value better?
bool metric_higher_better(const std::string& name) { return name != "ade_characteristic"; }

enum class Tag { gap_opening, characteristic, critical };

std::string tag_name(Tag t) {
    switch (t) {
        case Tag::gap_opening: return "gap_opening";
        case Tag::characteristic: return "characteristic";
        case Tag::critical: return "critical";
    }
    return "?";
}

double cutoff_of(const Sample& s, Tag tag, int n_input) {
    switch (tag) {
        case Tag::gap_opening: return s.gap_opening_time(n_input);
        case Tag::characteristic: return s.t_characteristic;
        case Tag::critical: return s.t_critical;
    }
    return 0.0;
}

// ---------------------------------------------------------------- config

SynthConfig synth_from(const Config& c) {
    SynthConfig sc;
    sc.n = c.get_int("synth.n", sc.n);
    sc.seed = c.get_u64("synth.seed", c.get_u64("seed", sc.seed));
    sc.timestep = c.get_double("synth.timestep", sc.timestep);
    sc.half_extent = c.get_double("synth.half_extent", sc.half_extent);
    sc.ego_speed_lo = c.get_double("synth.ego_speed_lo", sc.ego_speed_lo);
    sc.ego_speed_hi = c.get_double("synth.ego_speed_hi", sc.ego_speed_hi);
    sc.ego_time_lo = c.get_double("synth.ego_time_lo", sc.ego_time_lo);
    sc.ego_time_hi = c.get_double("synth.ego_time_hi", sc.ego_time_hi);
    sc.target_dist_lo = c.get_double("synth.target_dist_lo", sc.target_dist_lo);
    sc.target_dist_hi = c.get_double("synth.target_dist_hi", sc.target_dist_hi);
    sc.target_speed_lo = c.get_double("synth.target_speed_lo", sc.target_speed_lo);
    sc.target_speed_hi = c.get_double("synth.target_speed_hi", sc.target_speed_hi);
    sc.threshold_median_s = c.get_double("synth.threshold_median_s", sc.threshold_median_s);
    sc.behavior_noise = c.get_double("synth.behavior_noise", sc.behavior_noise);
    sc.characteristic_gap_s = c.get_double("synth.characteristic_gap_s", sc.characteristic_gap_s);
    sc.critical_gap_s = c.get_double("synth.critical_gap_s", sc.critical_gap_s);
    sc.n_input = c.get_int("n_input", sc.n_input);
    return sc;
}

SimConfig sim_from(const Config& c) {
    SimConfig sim;
    sim.scheme = parse_scheme(c.get_string("cm.scheme", "AC"));
    sim.mode = parse_mode(c.get_string("cm.mode", "NM"));
    sim.dt = c.get_double("cm.dt", sim.dt);
    sim.horizon = c.get_double("cm.horizon", sim.horizon);
    sim.action_duration = c.get_double("cm.action_duration", sim.action_duration);
    sim.accel_limit = c.get_double("cm.accel_limit", sim.accel_limit);
    sim.resume_accel = c.get_double("cm.resume_accel", sim.resume_accel);
    sim.collision_penalty = c.get_double("cm.collision_penalty", sim.collision_penalty);
    sim.process_noise = c.get_double("cm.process_noise", sim.process_noise);
    sim.initial_speed_var = c.get_double("cm.initial_speed_var", sim.initial_speed_var);
    const std::string actions = c.get_string("cm.actions", "");
    if (!actions.empty()) {
        std::stringstream ss(actions);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const auto b = tok.find_first_not_of(" \t");
            const auto e = tok.find_last_not_of(" \t");
            sim.actions.values.push_back(parse_double(
                b == std::string::npos ? tok : tok.substr(b, e - b + 1), "cm.actions"));
        }
    }
    sim.validate();
    return sim;
}

FitConfig fit_from(const Config& c) {
    FitConfig fc;
    fc.sim = sim_from(c);
    const std::string loss = c.get_string("cm.loss", "L2");
    if (loss == "L1")
        fc.loss = LossKind::l1;
    else if (loss == "L2")
        fc.loss = LossKind::l2;
    else
        fail(Error::Code::invalid_argument, "unknown loss '" + loss + "' (want L1 or L2)");
    const std::string sched = c.get_string("cm.schedule", "1O");
    if (sched == "1O")
        fc.schedule = ScheduleKind::one_stage;
    else if (sched == "2O")
        fc.schedule = ScheduleKind::two_stage;
    else
        fail(Error::Code::invalid_argument, "unknown schedule '" + sched + "' (want 1O or 2O)");
    fc.n_p = c.get_int("cm.n_p", 100);
    fc.n_init = c.get_int("fit.n_init", fc.n_init);
    fc.n_acq = c.get_int("fit.n_acq", fc.n_acq);
    fc.shrink = c.get_double("fit.shrink", fc.shrink);
    fc.sim_seed = c.get_u64("fit.sim_seed", c.get_u64("seed", 1));
    fc.opt_seed = c.get_u64("fit.opt_seed", c.get_u64("seed", 1));
    fc.n_input = c.get_int("n_input", fc.n_input);
    fc.threads = c.get_int("threads", fc.threads);
    fc.validate();
    return fc;
}

// ---------------------------------------------------------------- output

ordered_json provenance(const Config& c, const std::string& command) {
    ordered_json j;
    j["command"] = command;
    ordered_json conf = ordered_json::object();
    // threads only schedules work, it never changes a result; leaving it out
    // keeps outputs identical across machines
    for (const auto& [k, v] : c.effective())
        if (k != "threads") conf[k] = v;
    j["config"] = conf;
    return j;
}

// non-finite doubles have no JSON literal; keep them readable
ordered_json json_num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0.0 ? "inf" : "-inf";
}

void write_json(const fs::path& file, const ordered_json& j) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(Error::Code::io, "cannot write " + file.string());
    out << j.dump(2) << '\n';
    if (!out.good()) fail(Error::Code::io, "write failed for " + file.string());
}

ordered_json read_json(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(Error::Code::io, "cannot read " + file.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Error::Code::parse, file.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- shared

Dataset load_ds(const Config& c, int n_input) {
    Dataset ds = load_dataset(c.require_string("dataset"));
    ds.validate(n_input);
    return ds;
}

std::vector<std::string> split_ids(const SplitPlan& plan) {
    std::vector<std::string> ids;
    std::map<std::string, int> counters;
    for (const auto& sp : plan.splits) {
        if (sp.kind == "critical" && counters["critical"] == 0 &&
            std::count_if(plan.splits.begin(), plan.splits.end(),
                          [](const Split& x) { return x.kind == "critical"; }) == 1) {
            ids.push_back("critical");
            counters["critical"] = 1;
        } else {
            ids.push_back(sp.kind + "_" + std::to_string(counters[sp.kind]++));
        }
    }
    return ids;
}

ModelParams params_from_fit_file(const fs::path& file) {
    const ordered_json j = read_json(file);
    if (!j.contains("best") || !j["best"].contains("theta"))
        fail(Error::Code::parse, file.string() + ": missing best.theta");
    const auto& arr = j["best"]["theta"];
    if (!arr.is_array() || arr.size() != ModelParams::dim)
        fail(Error::Code::parse, file.string() + ": best.theta must hold " +
                                     std::to_string(ModelParams::dim) + " values");
    std::array<double, ModelParams::dim> theta{};
    for (int i = 0; i < ModelParams::dim; ++i) theta[i] = arr[i].get<double>();
    return ModelParams::from_array(theta);
}

const std::vector<std::string> kParamNames = {"sigma_obs", "leak",   "sigma_acc",
                                              "switch_threshold", "w_time", "w_ctrl",
                                              "w_rule",           "beta"};

}  // namespace

// ---------------------------------------------------------------- synth

void run_synth(const Config& cfg, const std::string& out_dir) {
    const SynthConfig sc = synth_from(cfg);
    const int n_random = cfg.get_int("splits.n_random", 10);
    const double test_fraction = cfg.get_double("splits.test_fraction", 0.2);
    const std::uint64_t split_seed = cfg.get_u64("splits.seed", cfg.get_u64("seed", sc.seed));

    const Dataset ds = synth_generate(sc);
    const SplitPlan plan = make_splits(ds, n_random, test_fraction, split_seed, sc.n_input);

    const fs::path out(out_dir);
    save_dataset(ds, (out / "dataset").string());
    save_splits(plan, (out / "splits.json").string());

    ordered_json j = provenance(cfg, "synth");
    j["samples"] = ds.samples.size();
    long accepted = 0;
    for (const auto& s : ds.samples) accepted += s.accepted ? 1 : 0;
    j["accepted"] = accepted;
    j["splits"] = plan.splits.size();
    j["outputs"] = {"dataset/geometry.csv", "dataset/trajectories.csv", "dataset/outcomes.csv",
                    "dataset/meta.csv", "splits.json"};
    write_json(out / "synth.json", j);
}

// ---------------------------------------------------------------- fit

void run_fit(const Config& cfg, const std::string& out_dir) {
    const FitConfig fc = fit_from(cfg);
    const Dataset ds = load_ds(cfg, fc.n_input);
    const SplitPlan plan = load_splits(cfg.require_string("splits"));
    plan.validate(ds);

    const fs::path out(out_dir);
    const auto ids = split_ids(plan);
    std::vector<std::string> files;
    for (std::size_t k = 0; k < plan.splits.size(); ++k) {
        const Split& sp = plan.splits[k];
        const ModelFitResult res = fit_model(ds, sp.train_ids, fc);

        ordered_json j = provenance(cfg, "fit");
        j["split"] = {{"id", ids[k]},
                      {"kind", sp.kind},
                      {"n_train", sp.train_ids.size()},
                      {"n_test", sp.test_ids.size()}};
        j["parameter_names"] = kParamNames;
        ordered_json stages = ordered_json::array();
        for (const auto& st : res.stages) {
            ordered_json sj;
            sj["bounds"] = {{"lo", st.bounds.lo}, {"hi", st.bounds.hi}};
            sj["best"] = {{"theta", st.opt.best}, {"loss", st.opt.best_loss}};
            ordered_json trace = ordered_json::array();
            for (const auto& [theta, loss] : st.opt.trace)
                trace.push_back({{"theta", theta}, {"loss", loss}});
            sj["trace"] = trace;
            sj["warnings"] = st.opt.warnings;
            stages.push_back(sj);
        }
        j["stages"] = stages;
        j["best"] = {{"theta", res.best.to_array()}, {"loss", res.best_loss}};
        j["objective_evals"] = res.objective_evals;
        j["warnings"] = res.warnings;

        const std::string file = "fit_" + ids[k] + ".json";
        write_json(out / file, j);
        files.push_back(file);
    }

    ordered_json index = provenance(cfg, "fit");
    index["splits"] = ids;
    index["outputs"] = files;
    write_json(out / "fit.json", index);
}

// ---------------------------------------------------------------- predict

void run_predict(const Config& cfg, const std::string& out_dir) {
    const int n_input = cfg.get_int("n_input", 2);
    const Dataset ds = load_ds(cfg, n_input);
    const SimConfig sim = sim_from(cfg);
    const int n_p = cfg.get_int("cm.n_p", 100);
    const std::uint64_t seed = cfg.get_u64("eval.seed", cfg.get_u64("seed", 1));
    const int threads = cfg.get_int("threads", 0);
    const bool tracks = cfg.get_bool("predict.tracks", false);
    const std::string at = cfg.get_string("predict.at", "gap_opening");
    Tag tag = Tag::gap_opening;
    if (at == "characteristic")
        tag = Tag::characteristic;
    else if (at == "critical")
        tag = Tag::critical;
    else if (at != "gap_opening")
        fail(Error::Code::invalid_argument,
             "unknown predict.at '" + at + "' (want gap_opening, characteristic or critical)");

    ModelParams params;
    std::string params_source = "defaults";
    if (cfg.has("fit_file")) {
        const std::string file = cfg.require_string("fit_file");
        params = params_from_fit_file(file);
        params_source = file;
    }

    const fs::path out(out_dir);
    fs::create_directories(out);
    CsvWriter summary(out / "predict_summary.csv",
                      {"sample_id", "cutoff", "a_pred", "t_entry_mean", "variance",
                       "variance_capped", "single_rollout"});
    CsvWriter rollouts(out / "predict_rollouts.csv",
                       {"sample_id", "rollout", "accepted", "t_entry"});
    std::optional<CsvWriter> track_file;
    if (tracks)
        track_file.emplace(out / "predict_tracks.csv",
                           std::vector<std::string>{"sample_id", "rollout", "t", "x", "y",
                                                    "clamped"});

    RolloutOptions opts;
    opts.record_tracks = tracks;
    for (const auto& s : ds.samples) {
        const double cutoff = cutoff_of(s, tag, n_input);
        const auto [ego0, tgt0] = initial_conditions(s, cutoff, n_input);
        const RolloutSet set = simulate_batch(ego0, tgt0, params, sim,
                                              2.0 * s.contested.half_extent, n_p, seed,
                                              fnv1a(s.id), threads, opts);
        PredictionRecord rec = aggregate(set, sim.horizon);
        for (double& t : rec.t_entry_p) t += cutoff;

        double t_mean = 0.0;
        for (double t : rec.t_entry_p) t_mean += t;
        t_mean /= static_cast<double>(rec.t_entry_p.size());
        summary.row({s.id, format_double(cutoff), format_double(rec.a_pred),
                     format_double(t_mean), format_double(rec.variance),
                     rec.variance_capped ? "1" : "0", rec.single_rollout ? "1" : "0"});
        for (std::size_t p = 0; p < rec.t_entry_p.size(); ++p)
            rollouts.row({s.id, std::to_string(p), rec.accepted_p[p] ? "1" : "0",
                          format_double(rec.t_entry_p[p])});
        if (tracks) {
            const auto decoded = decode_predictions(set, s, sim, cutoff);
            for (std::size_t p = 0; p < decoded.size(); ++p)
                for (const auto& pt : decoded[p])
                    track_file->row({s.id, std::to_string(p), format_double(pt.t),
                                     format_double(pt.p.x), format_double(pt.p.y),
                                     pt.clamped ? "1" : "0"});
        }
    }
    summary.close();
    rollouts.close();
    if (track_file) track_file->close();

    ordered_json j = provenance(cfg, "predict");
    j["at"] = tag_name(tag);
    j["parameters"] = {{"source", params_source}, {"theta", params.to_array()}};
    j["samples"] = ds.samples.size();
    j["outputs"] = ordered_json::array({"predict_summary.csv", "predict_rollouts.csv"});
    if (tracks) j["outputs"].push_back("predict_tracks.csv");
    write_json(out / "predict.json", j);
}

// ---------------------------------------------------------------- evaluate

namespace {

struct MetricCell {
    bool present = false;
    double value = 0.0;
    std::string skip_reason;
};

struct SplitReport {
    std::string id;
    std::string kind;
    std::map<std::string, MetricCell> cells;
};

struct EvalSetup {
    const Dataset* ds = nullptr;
    ModelId model = ModelId::cm;
    bool untuned = false;
    SimConfig sim;
    int n_p = 100;
    int n_input = 2;
    int threads = 0;
    std::uint64_t seed = 1;
    double lr_lambda = 1.0;
    fs::path fits_dir;
    fs::path roc_dir;
    std::string label;
};

std::vector<const Sample*> resolve(const Dataset& ds, const std::vector<std::string>& ids) {
    std::vector<const Sample*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(&ds.by_id(id));
    return out;
}

// a sample is undecided at the critical timestamp if its acceptance (when
// accepted) happens strictly after it
bool qualifies_at_critical(const Sample& s) {
    return !s.accepted || *s.t_accept > s.t_critical;
}

std::vector<double> lr_features(const EvalSetup& ev, const Sample& s, Tag tag) {
    const double cutoff = cutoff_of(s, tag, ev.n_input);
    if (ev.model == ModelId::lr1d) {
        const auto [ego0, tgt0] = initial_conditions(s, cutoff, ev.n_input);
        return featurize_1d(ego0, tgt0);
    }
    return featurize_2d(s.input_window(true, cutoff, ev.n_input),
                        s.input_window(false, cutoff, ev.n_input));
}

LRModel fit_lr_at(const EvalSetup& ev, const std::vector<const Sample*>& train, Tag tag) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const Sample* s : train) {
        x.push_back(lr_features(ev, *s, tag));
        y.push_back(s->accepted ? 1 : 0);
    }
    return lr_fit(x, y, ev.lr_lambda, ev.model == ModelId::lr1d ? "1D" : "2D");
}

double score_one(const EvalSetup& ev, const Sample& s, Tag tag, const ModelParams& cm_params,
                 const LRModel* lr) {
    const double cutoff = cutoff_of(s, tag, ev.n_input);
    switch (ev.model) {
        case ModelId::cm:
            return predict_outcomes(s, cutoff, cm_params, ev.sim, ev.n_p, ev.seed, ev.n_input,
                                    ev.threads)
                .a_pred;
        case ModelId::lr1d:
        case ModelId::lr2d:
            return lr_predict(*lr, lr_features(ev, s, tag));
        case ModelId::cv: {
            const auto [ego0, tgt0] = initial_conditions(s, cutoff, ev.n_input);
            return cv_accept_score(ego0, tgt0);
        }
    }
    return 0.0;
}

std::vector<ScoredLabel> score_set(const EvalSetup& ev, const std::vector<const Sample*>& test,
                                   const std::vector<const Sample*>& train, Tag tag,
                                   const ModelParams& cm_params) {
    std::optional<LRModel> lr;
    if (ev.model == ModelId::lr1d || ev.model == ModelId::lr2d)
        lr = fit_lr_at(ev, train, tag);
    std::vector<ScoredLabel> scored;
    scored.reserve(test.size());
    for (const Sample* s : test)
        scored.push_back(
            {s->accepted ? 1 : 0, score_one(ev, *s, tag, cm_params, lr ? &*lr : nullptr)});
    return scored;
}

void write_roc(const EvalSetup& ev, const std::string& split_id, Tag tag,
               std::span<const ScoredLabel> scored) {
    const fs::path file =
        ev.roc_dir / (ev.label + "_" + split_id + "_" + tag_name(tag) + ".csv");
    CsvWriter w(file, {"threshold", "fpr", "tpr"});
    for (const auto& pt : roc_points(scored))
        w.row({format_double(pt.threshold), format_double(pt.fpr), format_double(pt.tpr)});
    w.close();
}

MetricCell ade_cell(const EvalSetup& ev, const std::vector<const Sample*>& test,
                    const ModelParams& cm_params) {
    MetricCell cell;
    if (ev.model == ModelId::lr1d || ev.model == ModelId::lr2d) {
        cell.skip_reason = "outcome-only baseline, no trajectory decoder";
        return cell;
    }
    std::vector<TrajWindow> windows;
    int dropped = 0;
    RolloutOptions opts;
    opts.record_tracks = true;
    for (const Sample* s : test) {
        const double cutoff = cutoff_of(*s, Tag::characteristic, ev.n_input);
        std::vector<double> abs_t;
        TrajWindow w;
        for (const auto& tp : s->target_traj)
            if (tp.t > cutoff + 1e-9 && tp.t <= cutoff + ev.sim.horizon + 1e-9) {
                abs_t.push_back(tp.t);
                w.truth.push_back(tp.p);
            }
        if (abs_t.empty()) {
            ++dropped;
            continue;
        }
        std::vector<double> taus(abs_t.size());
        for (std::size_t k = 0; k < abs_t.size(); ++k) taus[k] = abs_t[k] - cutoff;

        const auto [ego0, tgt0] = initial_conditions(*s, cutoff, ev.n_input);
        if (ev.model == ModelId::cv) {
            const auto dists = cv_distances(tgt0, taus);
            const auto pts = decode_to_2d(abs_t, dists, s->target_path, s->contested);
            std::vector<Vec2> roll;
            for (const auto& pt : pts) roll.push_back(pt.p);
            w.rollouts.push_back(std::move(roll));
        } else {
            const RolloutSet set =
                simulate_batch(ego0, tgt0, cm_params, ev.sim, 2.0 * s->contested.half_extent,
                               ev.n_p, ev.seed, fnv1a(s->id), ev.threads, opts);
            std::vector<double> dists(taus.size());
            for (const auto& pair : set.pairs) {
                for (std::size_t k = 0; k < taus.size(); ++k)
                    dists[k] = track_d_at(pair.target.track, taus[k]);
                const auto pts = decode_to_2d(abs_t, dists, s->target_path, s->contested);
                std::vector<Vec2> roll;
                for (const auto& pt : pts) roll.push_back(pt.p);
                w.rollouts.push_back(std::move(roll));
            }
        }
        windows.push_back(std::move(w));
    }
    if (windows.empty()) {
        cell.skip_reason = "no ground-truth points inside the prediction window";
        return cell;
    }
    cell.present = true;
    cell.value = ade(windows);
    if (dropped > 0)
        cell.skip_reason = std::to_string(dropped) + " samples without window points excluded";
    return cell;
}

}  // namespace

void run_evaluate(const Config& cfg, const std::string& out_dir) {
    EvalSetup ev;
    ev.model = parse_model_id(cfg.get_string("model", "CM"));
    ev.untuned = cfg.get_bool("eval.untuned", false);
    ev.sim = sim_from(cfg);
    ev.n_p = cfg.get_int("cm.n_p", 100);
    ev.n_input = cfg.get_int("n_input", 2);
    ev.threads = cfg.get_int("threads", 0);
    ev.seed = cfg.get_u64("eval.seed", cfg.get_u64("seed", 1));
    ev.lr_lambda = cfg.get_double("lr.lambda", 1.0);

    std::string default_label = model_name(ev.model);
    std::transform(default_label.begin(), default_label.end(), default_label.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ev.model == ModelId::cm && ev.untuned) default_label += "_default";
    ev.label = cfg.get_string("eval.label", default_label);

    const Dataset ds = load_ds(cfg, ev.n_input);
    ev.ds = &ds;
    const SplitPlan plan = load_splits(cfg.require_string("splits"));
    plan.validate(ds);
    const bool needs_fits = ev.model == ModelId::cm && !ev.untuned;
    if (needs_fits) ev.fits_dir = cfg.require_string("fits");

    const fs::path out(out_dir);
    ev.roc_dir = out / "roc";
    fs::create_directories(ev.roc_dir);

    const auto ids = split_ids(plan);
    std::vector<SplitReport> reports;
    for (std::size_t k = 0; k < plan.splits.size(); ++k) {
        const Split& sp = plan.splits[k];
        SplitReport rep;
        rep.id = ids[k];
        rep.kind = sp.kind;

        ModelParams cm_params;
        if (needs_fits) cm_params = params_from_fit_file(ev.fits_dir / ("fit_" + ids[k] + ".json"));

        const auto train = resolve(ds, sp.train_ids);
        const auto test = resolve(ds, sp.test_ids);

        for (const Tag tag : {Tag::gap_opening, Tag::characteristic}) {
            const std::string metric =
                tag == Tag::gap_opening ? "auc_gap_opening" : "auc_characteristic";
            MetricCell cell;
            try {
                const auto scored = score_set(ev, test, train, tag, cm_params);
                cell.value = auc(scored);
                cell.present = true;
                write_roc(ev, rep.id, tag, scored);
            } catch (const Error& e) {
                cell.skip_reason = e.what();
            }
            rep.cells[metric] = cell;
        }

        {
            MetricCell cell;
            try {
                cell = ade_cell(ev, test, cm_params);
            } catch (const Error& e) {
                cell.skip_reason = e.what();
            }
            rep.cells["ade_characteristic"] = cell;
        }

        {
            MetricCell cell;
            std::vector<const Sample*> q_test, q_train;
            for (const Sample* s : test)
                if (qualifies_at_critical(*s)) q_test.push_back(s);
            for (const Sample* s : train)
                if (qualifies_at_critical(*s)) q_train.push_back(s);
            long positives = 0;
            for (const Sample* s : q_test) positives += s->accepted ? 1 : 0;
            if (positives == 0) {
                cell.skip_reason =
                    "no accepted sample remains undecided at the critical timestamp";
            } else {
                try {
                    const auto scored = score_set(ev, q_test, q_train, Tag::critical, cm_params);
                    cell.value = tnr_pr(scored);
                    cell.present = true;
                } catch (const Error& e) {
                    cell.skip_reason = e.what();
                }
            }
            rep.cells["tnr_pr_critical"] = cell;
        }
        reports.push_back(std::move(rep));
    }

    // averages over the random splits only
    std::map<std::string, double> random_avg;
    std::map<std::string, int> random_count;
    for (const auto& rep : reports) {
        if (rep.kind != "random") continue;
        for (const auto& name : kMetricNames) {
            const auto& cell = rep.cells.at(name);
            if (!cell.present) continue;
            random_avg[name] += cell.value;
            random_count[name] += 1;
        }
    }
    for (auto& [name, sum] : random_avg) sum /= random_count[name];

    ordered_json j = provenance(cfg, "evaluate");
    j["model"] = model_name(ev.model);
    j["label"] = ev.label;
    j["metrics"] = kMetricNames;
    ordered_json splits_json = ordered_json::array();
    for (const auto& rep : reports) {
        ordered_json sj;
        sj["id"] = rep.id;
        sj["kind"] = rep.kind;
        ordered_json values = ordered_json::object();
        ordered_json skips = ordered_json::object();
        for (const auto& name : kMetricNames) {
            const auto& cell = rep.cells.at(name);
            if (cell.present) values[name] = cell.value;
            if (!cell.skip_reason.empty()) skips[name] = cell.skip_reason;
        }
        sj["values"] = values;
        sj["skips"] = skips;
        splits_json.push_back(sj);
    }
    j["splits"] = splits_json;
    ordered_json avg = ordered_json::object(), counts = ordered_json::object();
    for (const auto& name : kMetricNames) {
        if (random_count.count(name)) {
            avg[name] = random_avg[name];
            counts[name] = random_count[name];
        }
    }
    j["random_average"] = avg;
    j["random_counts"] = counts;
    for (const auto& rep : reports) {
        if (rep.kind != "critical") continue;
        ordered_json cj = ordered_json::object(), cs = ordered_json::object();
        for (const auto& name : kMetricNames) {
            const auto& cell = rep.cells.at(name);
            if (cell.present) cj[name] = cell.value;
            if (!cell.skip_reason.empty()) cs[name] = cell.skip_reason;
        }
        j["critical"] = {{"values", cj}, {"skips", cs}};
    }
    write_json(out / ("report_" + ev.label + ".json"), j);

    std::vector<std::string> header = {"split", "kind"};
    header.insert(header.end(), kMetricNames.begin(), kMetricNames.end());
    CsvWriter csv(out / ("report_" + ev.label + ".csv"), header);
    for (const auto& rep : reports) {
        std::vector<std::string> row = {rep.id, rep.kind};
        for (const auto& name : kMetricNames) {
            const auto& cell = rep.cells.at(name);
            row.push_back(cell.present ? format_double(cell.value) : "");
        }
        csv.row(row);
    }
    {
        std::vector<std::string> row = {"random_average", "average"};
        for (const auto& name : kMetricNames)
            row.push_back(random_count.count(name) ? format_double(random_avg[name]) : "");
        csv.row(row);
    }
    csv.close();
}

// ---------------------------------------------------------------- compare

namespace {

struct ReportData {
    std::string label;
    std::vector<std::string> split_ids;           // random splits, in order
    std::map<std::string, std::vector<double>> random_values;  // metric -> per split
    std::map<std::string, std::vector<bool>> random_present;
    std::map<std::string, MetricCell> critical;
    std::map<std::string, double> random_average;
};

ReportData load_report(const fs::path& file) {
    const ordered_json j = read_json(file);
    ReportData rd;
    if (!j.contains("splits") || !j.contains("label"))
        fail(Error::Code::parse, file.string() + ": not an evaluation report");
    rd.label = j["label"].get<std::string>();
    for (const auto& sj : j["splits"]) {
        const std::string kind = sj["kind"].get<std::string>();
        const std::string id = sj["id"].get<std::string>();
        if (kind == "random") rd.split_ids.push_back(id);
        for (const auto& name : kMetricNames) {
            const bool present = sj["values"].contains(name);
            const double value = present ? sj["values"][name].get<double>() : 0.0;
            if (kind == "random") {
                rd.random_values[name].push_back(value);
                rd.random_present[name].push_back(present);
            } else if (kind == "critical") {
                MetricCell cell;
                cell.present = present;
                cell.value = value;
                if (sj["skips"].contains(name))
                    cell.skip_reason = sj["skips"][name].get<std::string>();
                rd.critical[name] = cell;
            }
        }
    }
    if (j.contains("random_average"))
        for (const auto& [k, v] : j["random_average"].items())
            rd.random_average[k] = v.get<double>();
    return rd;
}

std::string pct_cell(double random_pct, double critical_pct) {
    const auto fmt = [](double p) { return std::to_string(std::lround(p)) + "%"; };
    return fmt(random_pct) + " (" + fmt(critical_pct) + ")";
}

}  // namespace

void run_compare(const Config& cfg, const std::string& out_dir) {
    const double alpha = cfg.get_double("alpha", 0.05);
    const ReportData a = load_report(cfg.require_string("report_a"));
    const ReportData b = load_report(cfg.require_string("report_b"));
    if (a.split_ids != b.split_ids)
        fail(Error::Code::invalid_argument, "reports do not share the same splits");
    if (a.split_ids.size() < 2)
        fail(Error::Code::invalid_argument, "need at least 2 random splits to compare");

    struct Cell {
        std::string metric;
        bool comparable = false;
        std::string note;
        double mean_a = 0.0, mean_b = 0.0;
        TTestResult test;
        std::string better_random = "none";
        MetricCell crit_a, crit_b;
        std::string better_critical = "none";
    };
    std::vector<Cell> cells;
    int comparable = 0, a_random = 0, b_random = 0, a_crit = 0, b_crit = 0;
    for (const auto& name : kMetricNames) {
        Cell cell;
        cell.metric = name;
        const auto& pa = a.random_present.at(name);
        const auto& pb = b.random_present.at(name);
        const bool all_a = std::all_of(pa.begin(), pa.end(), [](bool x) { return x; });
        const bool all_b = std::all_of(pb.begin(), pb.end(), [](bool x) { return x; });
        cell.crit_a = a.critical.count(name) ? a.critical.at(name) : MetricCell{};
        cell.crit_b = b.critical.count(name) ? b.critical.at(name) : MetricCell{};
        if (!all_a || !all_b) {
            cell.note = "skipped: metric missing on some random splits";
            cells.push_back(cell);
            continue;
        }
        const auto& va = a.random_values.at(name);
        const auto& vb = b.random_values.at(name);
        cell.comparable = true;
        ++comparable;
        for (double v : va) cell.mean_a += v;
        cell.mean_a /= static_cast<double>(va.size());
        for (double v : vb) cell.mean_b += v;
        cell.mean_b /= static_cast<double>(vb.size());
        cell.test = paired_t_test(va, vb, alpha);
        const bool higher = metric_higher_better(name);
        if (cell.test.significant) {
            const bool a_wins = higher ? cell.mean_a > cell.mean_b : cell.mean_a < cell.mean_b;
            cell.better_random = a_wins ? "a" : "b";
            (a_wins ? a_random : b_random) += 1;
        }
        if (cell.crit_a.present && cell.crit_b.present && cell.crit_a.value != cell.crit_b.value) {
            const bool a_wins = higher ? cell.crit_a.value > cell.crit_b.value
                                       : cell.crit_a.value < cell.crit_b.value;
            cell.better_critical = a_wins ? "a" : "b";
            (a_wins ? a_crit : b_crit) += 1;
        }
        cells.push_back(cell);
    }
    if (comparable == 0)
        fail(Error::Code::domain, "reports have no metric comparable on all random splits");

    const double denom = static_cast<double>(comparable);
    const double a_rand_pct = 100.0 * a_random / denom;
    const double b_rand_pct = 100.0 * b_random / denom;
    const double a_crit_pct = 100.0 * a_crit / denom;
    const double b_crit_pct = 100.0 * b_crit / denom;

    ordered_json j = provenance(cfg, "compare");
    j["alpha"] = alpha;
    j["label_a"] = a.label;
    j["label_b"] = b.label;
    j["random_splits"] = a.split_ids.size();
    ordered_json cj = ordered_json::array();
    for (const auto& cell : cells) {
        ordered_json e;
        e["metric"] = cell.metric;
        e["orientation"] = metric_higher_better(cell.metric) ? "higher" : "lower";
        e["comparable"] = cell.comparable;
        if (!cell.note.empty()) e["note"] = cell.note;
        if (cell.comparable) {
            e["mean_a"] = cell.mean_a;
            e["mean_b"] = cell.mean_b;
            e["t"] = json_num(cell.test.t);
            e["p"] = cell.test.p;
            e["significant"] = cell.test.significant;
            e["better_random"] = cell.better_random;
        }
        if (cell.crit_a.present) e["critical_a"] = cell.crit_a.value;
        if (cell.crit_b.present) e["critical_b"] = cell.crit_b.value;
        if (cell.comparable) e["better_critical"] = cell.better_critical;
        cj.push_back(e);
    }
    j["cells"] = cj;
    j["summary"] = {
        {"compared_metrics", comparable},
        {"a",
         {{"random_significantly_better", a_random},
          {"critical_better", a_crit},
          {"random_pct", a_rand_pct},
          {"critical_pct", a_crit_pct},
          {"cell", pct_cell(a_rand_pct, a_crit_pct)}}},
        {"b",
         {{"random_significantly_better", b_random},
          {"critical_better", b_crit},
          {"random_pct", b_rand_pct},
          {"critical_pct", b_crit_pct},
          {"cell", pct_cell(b_rand_pct, b_crit_pct)}}},
    };

    // robustness of the headline discrimination metric on the critical split
    const std::string head = "auc_characteristic";
    const bool head_ok = a.random_average.count(head) && b.random_average.count(head) &&
                         a.critical.count(head) && a.critical.at(head).present &&
                         b.critical.count(head) && b.critical.at(head).present;
    if (head_ok) {
        const double deg_a = a.random_average.at(head) - a.critical.at(head).value;
        const double deg_b = b.random_average.at(head) - b.critical.at(head).value;
        j["robustness"] = {{"metric", head},
                           {"a",
                            {{"random_average", a.random_average.at(head)},
                             {"critical", a.critical.at(head).value},
                             {"degradation", deg_a}}},
                           {"b",
                            {{"random_average", b.random_average.at(head)},
                             {"critical", b.critical.at(head).value},
                             {"degradation", deg_b}}},
                           {"degradation_difference", deg_a - deg_b}};
    }

    const fs::path out(out_dir);
    write_json(out / "compare.json", j);

    CsvWriter csv(out / "compare.csv",
                  {"metric", "orientation", "mean_a", "mean_b", "t", "p", "significant",
                   "better_random", "critical_a", "critical_b", "better_critical", "note"});
    for (const auto& cell : cells) {
        std::vector<std::string> row(12);
        row[0] = cell.metric;
        row[1] = metric_higher_better(cell.metric) ? "higher" : "lower";
        if (cell.comparable) {
            row[2] = format_double(cell.mean_a);
            row[3] = format_double(cell.mean_b);
            row[4] = format_double(cell.test.t);
            row[5] = format_double(cell.test.p);
            row[6] = cell.test.significant ? "1" : "0";
            row[7] = cell.better_random;
            row[10] = cell.better_critical;
        }
        if (cell.crit_a.present) row[8] = format_double(cell.crit_a.value);
        if (cell.crit_b.present) row[9] = format_double(cell.crit_b.value);
        row[11] = cell.note;
        csv.row(row);
    }
    csv.row({"summary_a", "", "", "", "", "", "", pct_cell(a_rand_pct, a_crit_pct), "", "", "",
             a.label});
    csv.row({"summary_b", "", "", "", "", "", "", pct_cell(b_rand_pct, b_crit_pct), "", "", "",
             b.label});
    csv.close();
}

void run_command(const std::string& command, const Config& cfg, const std::string& out_dir) {
    if (command == "synth") return run_synth(cfg, out_dir);
    if (command == "fit") return run_fit(cfg, out_dir);
    if (command == "predict") return run_predict(cfg, out_dir);
    if (command == "evaluate") return run_evaluate(cfg, out_dir);
    if (command == "compare") return run_compare(cfg, out_dir);
    fail(Error::Code::invalid_argument,
         "unknown command '" + command + "' (want synth, fit, predict, evaluate or compare)");
}

}  // namespace commotions
