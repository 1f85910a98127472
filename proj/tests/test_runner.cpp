#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "model.hpp"
#include "runner.hpp"
#include "util/csv.hpp"
#include "util/error.hpp"
#include "util/kv.hpp"

using namespace commotions;
using doctest::Approx;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ordered_json load(const fs::path& file) { return ordered_json::parse(slurp(file)); }

void dump(const fs::path& file, const ordered_json& j) {
    std::ofstream out(file, std::ios::binary);
    out << j.dump(2) << '\n';
}

// One small pipeline run shared by the test cases below: synthesize a
// dataset, fit on every split, evaluate two models. Built once.
struct Workspace {
    fs::path root;
    fs::path data_dir, fit_dir, cm_dir, lr_dir, predict_dir;
    Config base;

    Workspace() {
        root = fs::temp_directory_path() / "commotions_runner_test";
        fs::remove_all(root);
        fs::create_directories(root);
        data_dir = root / "data";
        fit_dir = root / "fits";
        cm_dir = root / "eval_cm";
        lr_dir = root / "eval_lr";
        predict_dir = root / "predict";

        Config synth_cfg = Config::parse_text(
            "synth.n = 24\n"
            "seed = 7\n"
            "splits.n_random = 3\n"
            "splits.test_fraction = 0.25\n");
        run_synth(synth_cfg, data_dir.string());

        base = Config::parse_text(
            "dataset = " + (data_dir / "dataset").string() + "\n" +
            "splits = " + (data_dir / "splits.json").string() + "\n" +
            "cm.mode = NM\n"
            "cm.n_p = 4\n"
            "fit.n_init = 9\n"
            "fit.n_acq = 2\n"
            "seed = 5\n"
            "threads = 1\n");
        run_fit(base, fit_dir.string());

        Config cm_cfg = base;
        cm_cfg.set("model", "CM");
        cm_cfg.set("fits", fit_dir.string());
        run_evaluate(cm_cfg, cm_dir.string());

        Config lr_cfg = base;
        lr_cfg.set("model", "LR1D");
        run_evaluate(lr_cfg, lr_dir.string());

        Config p_cfg = base;
        p_cfg.set("predict.at", "characteristic");
        p_cfg.set("predict.tracks", "1");
        p_cfg.set("fit_file", (fit_dir / "fit_random_0.json").string());
        run_predict(p_cfg, predict_dir.string());
    }
};

const Workspace& ws() {
    static Workspace w;
    return w;
}

const std::vector<std::string> kSplitIds = {"random_0", "random_1", "random_2", "critical"};

double trapezoid(const CsvTable& roc) {
    const int fc = roc.column("fpr"), tc = roc.column("tpr");
    double area = 0.0;
    for (std::size_t i = 1; i < roc.rows.size(); ++i) {
        const double x0 = parse_double(roc.rows[i - 1][fc], "fpr");
        const double x1 = parse_double(roc.rows[i][fc], "fpr");
        const double y0 = parse_double(roc.rows[i - 1][tc], "tpr");
        const double y1 = parse_double(roc.rows[i][tc], "tpr");
        area += 0.5 * (x1 - x0) * (y0 + y1);
    }
    return area;
}

}  // namespace

TEST_CASE("synth writes the dataset, the splits and its provenance") {
    const auto& w = ws();
    for (const char* f : {"dataset/geometry.csv", "dataset/trajectories.csv",
                          "dataset/outcomes.csv", "dataset/meta.csv", "splits.json",
                          "synth.json"})
        CHECK(fs::exists(w.data_dir / f));

    const ordered_json j = load(w.data_dir / "synth.json");
    CHECK(j["command"] == "synth");
    CHECK(j["samples"] == 24);
    CHECK(j["splits"] == 4);
    // explicit keys and consulted defaults both land in the echoed config
    CHECK(j["config"]["synth.n"] == "24");
    CHECK(j["config"].contains("synth.timestep"));
    CHECK(j["config"].contains("splits.test_fraction"));
}

TEST_CASE("synth reruns are byte identical") {
    const auto& w = ws();
    const fs::path again = w.root / "data_again";
    Config cfg = Config::parse_text(
        "synth.n = 24\n"
        "seed = 7\n"
        "splits.n_random = 3\n"
        "splits.test_fraction = 0.25\n");
    run_synth(cfg, again.string());
    for (const char* f : {"dataset/geometry.csv", "dataset/trajectories.csv",
                          "dataset/outcomes.csv", "dataset/meta.csv", "splits.json",
                          "synth.json"})
        CHECK(slurp(w.data_dir / f) == slurp(again / f));
}

TEST_CASE("fit writes one file per split plus an index") {
    const auto& w = ws();
    const ordered_json index = load(w.fit_dir / "fit.json");
    CHECK(index["splits"].get<std::vector<std::string>>() == kSplitIds);
    for (const auto& id : kSplitIds) {
        const fs::path file = w.fit_dir / ("fit_" + id + ".json");
        REQUIRE(fs::exists(file));
        const ordered_json j = load(file);
        CHECK(j["split"]["id"] == id);
        CHECK(j["parameter_names"].size() == ModelParams::dim);
        CHECK(j["best"]["theta"].size() == ModelParams::dim);
        CHECK(j["objective_evals"] == 11);

        // the default parameters are evaluated first, so the fit can only
        // improve on them
        const auto& trace = j["stages"][0]["trace"];
        REQUIRE(trace.size() == 11);
        const auto defaults = ModelParams{}.to_array();
        for (std::size_t i = 0; i < defaults.size(); ++i)
            CHECK(trace[0]["theta"][i].get<double>() == Approx(defaults[i]).epsilon(1e-12));
        for (const auto& step : trace)
            CHECK(j["best"]["loss"].get<double>() <= step["loss"].get<double>() + 1e-12);
    }
}

TEST_CASE("evaluation report covers every split and metric") {
    const auto& w = ws();
    const ordered_json j = load(w.cm_dir / "report_cm.json");
    CHECK(j["model"] == "CM");
    CHECK(j["label"] == "cm");
    REQUIRE(j["splits"].size() == 4);

    std::vector<std::string> seen;
    for (const auto& sj : j["splits"]) {
        seen.push_back(sj["id"].get<std::string>());
        for (const auto& name : {"auc_gap_opening", "auc_characteristic", "ade_characteristic",
                                 "tnr_pr_critical"})
            CHECK((sj["values"].contains(name) || sj["skips"].contains(name)));
    }
    CHECK(seen == kSplitIds);

    // the random average is the plain mean over the random splits
    for (const auto& [name, avg] : j["random_average"].items()) {
        double sum = 0.0;
        int n = 0;
        for (const auto& sj : j["splits"])
            if (sj["kind"] == "random" && sj["values"].contains(name)) {
                sum += sj["values"][name].get<double>();
                ++n;
            }
        REQUIRE(n == j["random_counts"][name].get<int>());
        CHECK(avg.get<double>() == Approx(sum / n).epsilon(1e-12));
    }

    // csv mirror: same rows, same cells
    const CsvTable csv = read_csv(w.cm_dir / "report_cm.csv");
    REQUIRE(csv.rows.size() == 5);
    CHECK(csv.rows[4][0] == "random_average");
    const int col = csv.column("auc_characteristic");
    for (int k = 0; k < 4; ++k) {
        const auto& sj = j["splits"][k];
        if (sj["values"].contains("auc_characteristic"))
            CHECK(parse_double(csv.rows[k][col], "cell") ==
                  Approx(sj["values"]["auc_characteristic"].get<double>()).epsilon(1e-12));
        else
            CHECK(csv.rows[k][col].empty());
    }
}

TEST_CASE("roc files integrate back to the reported auc") {
    const auto& w = ws();
    const ordered_json j = load(w.cm_dir / "report_cm.json");
    int checked = 0;
    for (const auto& sj : j["splits"]) {
        for (const auto& [metric, tag] :
             std::vector<std::pair<std::string, std::string>>{
                 {"auc_gap_opening", "gap_opening"}, {"auc_characteristic", "characteristic"}}) {
            if (!sj["values"].contains(metric)) continue;
            const fs::path roc_file =
                w.cm_dir / "roc" / ("cm_" + sj["id"].get<std::string>() + "_" + tag + ".csv");
            REQUIRE(fs::exists(roc_file));
            const CsvTable roc = read_csv(roc_file);
            CHECK(trapezoid(roc) == Approx(sj["values"][metric].get<double>()).epsilon(1e-9));
            ++checked;
        }
    }
    CHECK(checked >= 6);
}

TEST_CASE("outcome-only baseline reports a displacement skip, not a number") {
    const auto& w = ws();
    const ordered_json j = load(w.lr_dir / "report_lr1d.json");
    CHECK(j["label"] == "lr1d");
    for (const auto& sj : j["splits"]) {
        CHECK(!sj["values"].contains("ade_characteristic"));
        CHECK(sj["skips"]["ade_characteristic"].get<std::string>().find("outcome-only") !=
              std::string::npos);
    }
    const CsvTable csv = read_csv(w.lr_dir / "report_lr1d.csv");
    const int col = csv.column("ade_characteristic");
    for (const auto& row : csv.rows) CHECK(row[col].empty());
}

TEST_CASE("evaluation reruns are byte identical") {
    const auto& w = ws();
    const fs::path again = w.root / "eval_cm_again";
    Config cfg = w.base;
    cfg.set("model", "CM");
    cfg.set("fits", w.fit_dir.string());
    run_evaluate(cfg, again.string());
    CHECK(slurp(w.cm_dir / "report_cm.json") == slurp(again / "report_cm.json"));
    CHECK(slurp(w.cm_dir / "report_cm.csv") == slurp(again / "report_cm.csv"));
    CHECK(slurp(w.cm_dir / "roc" / "cm_random_0_gap_opening.csv") ==
          slurp(again / "roc" / "cm_random_0_gap_opening.csv"));
}

TEST_CASE("predict writes summaries, rollouts and decoded tracks") {
    const auto& w = ws();
    const ordered_json j = load(w.predict_dir / "predict.json");
    CHECK(j["at"] == "characteristic");
    CHECK(j["parameters"]["source"].get<std::string>().find("fit_random_0") !=
          std::string::npos);

    const CsvTable summary = read_csv(w.predict_dir / "predict_summary.csv");
    CHECK(summary.rows.size() == 24);
    const CsvTable rollouts = read_csv(w.predict_dir / "predict_rollouts.csv");
    CHECK(rollouts.rows.size() == 24 * 4);
    const CsvTable tracks = read_csv(w.predict_dir / "predict_tracks.csv");
    CHECK(tracks.rows.size() > 0);

    // acceptance probability matches the mean of the per-rollout outcomes
    const int sid = rollouts.column("sample_id"), acc = rollouts.column("accepted");
    const std::string first = summary.rows[0][summary.column("sample_id")];
    double mean = 0.0;
    int n = 0;
    for (const auto& row : rollouts.rows)
        if (row[sid] == first) {
            mean += parse_double(row[acc], "accepted");
            ++n;
        }
    REQUIRE(n == 4);
    CHECK(parse_double(summary.rows[0][summary.column("a_pred")], "a_pred") ==
          Approx(mean / n).epsilon(1e-12));

    const fs::path again = w.root / "predict_again";
    Config cfg = w.base;
    cfg.set("predict.at", "characteristic");
    cfg.set("predict.tracks", "1");
    cfg.set("fit_file", (w.fit_dir / "fit_random_0.json").string());
    run_predict(cfg, again.string());
    CHECK(slurp(w.predict_dir / "predict_summary.csv") ==
          slurp(again / "predict_summary.csv"));
    CHECK(slurp(w.predict_dir / "predict_tracks.csv") == slurp(again / "predict_tracks.csv"));
}

TEST_CASE("custom action set changes predictions and is echoed") {
    const auto& w = ws();
    Config plain = w.base;
    plain.set("predict.at", "characteristic");
    const fs::path plain_dir = w.root / "predict_plain";
    run_predict(plain, plain_dir.string());

    Config custom = plain;
    custom.set("cm.actions", "-2,0,2");
    const fs::path custom_dir = w.root / "predict_custom";
    run_predict(custom, custom_dir.string());

    const ordered_json j = load(custom_dir / "predict.json");
    CHECK(j["config"]["cm.actions"] == "-2,0,2");
    CHECK(slurp(plain_dir / "predict_summary.csv") != slurp(custom_dir / "predict_summary.csv"));

    Config bad = plain;
    bad.set("cm.actions", "slow,0,fast");
    CHECK_THROWS_WITH_AS(run_predict(bad, (w.root / "x").string()),
                         doctest::Contains("cm.actions"), Error);
}

TEST_CASE("comparing a report against itself finds no differences") {
    const auto& w = ws();
    const fs::path out = w.root / "compare_self";
    Config cfg;
    cfg.set("report_a", (w.cm_dir / "report_cm.json").string());
    cfg.set("report_b", (w.cm_dir / "report_cm.json").string());
    run_compare(cfg, out.string());

    const ordered_json j = load(out / "compare.json");
    for (const auto& cell : j["cells"]) {
        if (!cell["comparable"].get<bool>()) continue;
        CHECK(cell["significant"] == false);
        CHECK(cell["better_random"] == "none");
        CHECK(cell["better_critical"] == "none");
    }
    CHECK(j["summary"]["a"]["cell"] == "0% (0%)");
    CHECK(j["summary"]["b"]["cell"] == "0% (0%)");
    CHECK(fs::exists(out / "compare.csv"));
}

TEST_CASE("a uniformly shifted report is flagged as significantly different") {
    const auto& w = ws();
    ordered_json shifted = load(w.lr_dir / "report_lr1d.json");
    shifted["label"] = "lr1d_shift";
    for (auto& sj : shifted["splits"])
        if (sj["values"].contains("auc_characteristic"))
            sj["values"]["auc_characteristic"] =
                sj["values"]["auc_characteristic"].get<double>() + 0.1;
    shifted["random_average"]["auc_characteristic"] =
        shifted["random_average"]["auc_characteristic"].get<double>() + 0.1;
    const fs::path shifted_file = w.root / "report_shift.json";
    dump(shifted_file, shifted);

    const fs::path out = w.root / "compare_shift";
    Config cfg;
    cfg.set("report_a", (w.lr_dir / "report_lr1d.json").string());
    cfg.set("report_b", shifted_file.string());
    run_compare(cfg, out.string());

    const ordered_json j = load(out / "compare.json");
    bool found = false;
    for (const auto& cell : j["cells"])
        if (cell["metric"] == "auc_characteristic") {
            found = true;
            REQUIRE(cell["comparable"].get<bool>());
            CHECK(cell["significant"] == true);
            CHECK(cell["better_random"] == "b");
            CHECK(cell["mean_b"].get<double>() ==
                  Approx(cell["mean_a"].get<double>() + 0.1).epsilon(1e-12));
        }
    CHECK(found);
    CHECK(j["summary"]["b"]["random_significantly_better"].get<int>() >= 1);
    CHECK(j["summary"]["a"]["random_significantly_better"].get<int>() == 0);

    // the robustness block tracks the headline metric's critical degradation
    REQUIRE(j.contains("robustness"));
    CHECK(j["robustness"]["metric"] == "auc_characteristic");
    const double deg_a = j["robustness"]["a"]["degradation"].get<double>();
    const double deg_b = j["robustness"]["b"]["degradation"].get<double>();
    CHECK(j["robustness"]["degradation_difference"].get<double>() ==
          Approx(deg_a - deg_b).epsilon(1e-12));
}

TEST_CASE("compare rejects reports over different splits") {
    const auto& w = ws();
    ordered_json renamed = load(w.lr_dir / "report_lr1d.json");
    renamed["splits"][0]["id"] = "random_7";
    const fs::path file = w.root / "report_renamed.json";
    dump(file, renamed);

    Config cfg;
    cfg.set("report_a", (w.lr_dir / "report_lr1d.json").string());
    cfg.set("report_b", file.string());
    CHECK_THROWS_WITH_AS(run_compare(cfg, (w.root / "compare_bad").string()),
                         doctest::Contains("do not share the same splits"), Error);
}

TEST_CASE("runner input errors name the valid options") {
    const auto& w = ws();
    Config bad_model = w.base;
    bad_model.set("model", "XX");
    CHECK_THROWS_WITH_AS(run_evaluate(bad_model, (w.root / "x").string()),
                         doctest::Contains("want CM, LR1D, LR2D or CV"), Error);

    Config bad_at = w.base;
    bad_at.set("predict.at", "soon");
    CHECK_THROWS_WITH_AS(run_predict(bad_at, (w.root / "x").string()),
                         doctest::Contains("want gap_opening, characteristic or critical"),
                         Error);

    Config missing_fits = w.base;
    missing_fits.set("model", "CM");
    missing_fits.set("fits", (w.root / "no_such_dir").string());
    CHECK_THROWS_WITH_AS(run_evaluate(missing_fits, (w.root / "x").string()),
                         doctest::Contains("cannot read"), Error);

    CHECK_THROWS_WITH_AS(run_command("bogus", w.base, (w.root / "x").string()),
                         doctest::Contains("want synth, fit, predict, evaluate or compare"),
                         Error);

    Config no_ds;
    CHECK_THROWS_WITH_AS(run_fit(no_ds, (w.root / "x").string()),
                         doctest::Contains("dataset"), Error);
}
