#include <CLI11.hpp>
#include <commotions/commotions.h>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct ConfigDeleter {
    void operator()(cm_config* c) const { cm_config_free(c); }
};
using ConfigPtr = std::unique_ptr<cm_config, ConfigDeleter>;

// Flag values to forward into the configuration, gathered while parsing.
struct Pending {
    std::vector<std::string> config_files;
    std::vector<std::pair<std::string, std::string>> keys;  // applied in order
    std::vector<std::string> sets;                          // raw key=value, strongest
    std::string out;
    std::string cm_code;
};

// One compact code selects all four model axes, e.g. NA12.
bool apply_cm_code(Pending& p, std::string& err) {
    const std::string& code = p.cm_code;
    const auto bad = [&](const std::string& what) {
        err = "invalid model configuration '" + code + "': " + what +
              "; want one character per axis: interaction mode N (non-interactive) or I "
              "(interactive), control A (acceleration) or J (jerk), fit schedule 1 (one stage) "
              "or 2 (two stages), loss 1 or 2, e.g. NA12";
        return false;
    };
    if (code.size() != 4) return bad("need exactly 4 characters");
    switch (code[0]) {
        case 'N': p.keys.emplace_back("cm.mode", "NM"); break;
        case 'I': p.keys.emplace_back("cm.mode", "IM"); break;
        default: return bad(std::string("bad interaction mode '") + code[0] + "'");
    }
    switch (code[1]) {
        case 'A': p.keys.emplace_back("cm.scheme", "AC"); break;
        case 'J': p.keys.emplace_back("cm.scheme", "JC"); break;
        default: return bad(std::string("bad control axis '") + code[1] + "'");
    }
    switch (code[2]) {
        case '1': p.keys.emplace_back("cm.schedule", "1O"); break;
        case '2': p.keys.emplace_back("cm.schedule", "2O"); break;
        default: return bad(std::string("bad schedule axis '") + code[2] + "'");
    }
    switch (code[3]) {
        case '1': p.keys.emplace_back("cm.loss", "L1"); break;
        case '2': p.keys.emplace_back("cm.loss", "L2"); break;
        default: return bad(std::string("bad loss axis '") + code[3] + "'");
    }
    return true;
}

void add_common(CLI::App* cmd, Pending& p) {
    cmd->add_option("--config", p.config_files, "configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", p.sets, "override one configuration key (key=value)");
    cmd->add_option("--out", p.out,
                    "output directory (default: $COMMOTIONS_OUT, else current directory)");
}

// binds --flag to configuration key
void opt(CLI::App* cmd, Pending& p, const std::string& flag, const std::string& key,
         const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&p, key](const std::string& v) { p.keys.emplace_back(key, v); }, help);
}

void flag(CLI::App* cmd, Pending& p, const std::string& name, const std::string& key,
          const std::string& help) {
    cmd->add_flag_callback(
        name, [&p, key] { p.keys.emplace_back(key, "1"); }, help);
}

void add_model_opts(CLI::App* cmd, Pending& p) {
    cmd->add_option("--cm", p.cm_code,
                    "model axes as a 4-character code ([N|I][A|J][1|2][1|2], e.g. NA12)");
    opt(cmd, p, "--n-p", "cm.n_p", "stochastic rollouts per prediction");
    opt(cmd, p, "--actions", "cm.actions", "comma-separated control actions (empty = scheme defaults)");
    opt(cmd, p, "--seed", "seed", "master random seed");
    opt(cmd, p, "--threads", "threads", "worker threads (0 = all cores)");
    opt(cmd, p, "--n-input", "n_input", "observed timesteps fed to the model");
}

int fail_usage(const std::string& msg) {
    std::cerr << "error: " << msg << '\n';
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gap-acceptance interaction model: data synthesis, fitting, prediction, "
                 "evaluation and model comparison"};
    app.require_subcommand(1);
    app.set_version_flag("--version", []() { return std::string(cm_version()); });

    Pending p;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with splits");
    opt(synth, p, "--n", "synth.n", "number of samples");
    opt(synth, p, "--seed", "seed", "master random seed");
    opt(synth, p, "--timestep", "synth.timestep", "recording timestep, s");
    opt(synth, p, "--n-random", "splits.n_random", "number of random splits");
    opt(synth, p, "--test-fraction", "splits.test_fraction", "test fraction per split");
    opt(synth, p, "--n-input", "n_input", "observed timesteps fed to the model");
    add_common(synth, p);

    CLI::App* fit = app.add_subcommand("fit", "fit the model on every training split");
    opt(fit, p, "--dataset", "dataset", "dataset directory");
    opt(fit, p, "--splits", "splits", "splits file");
    opt(fit, p, "--n-init", "fit.n_init", "space-filling evaluations per stage");
    opt(fit, p, "--n-acq", "fit.n_acq", "guided evaluations per stage");
    opt(fit, p, "--shrink", "fit.shrink", "bound shrink factor of the second stage");
    add_model_opts(fit, p);
    add_common(fit, p);

    CLI::App* predict = app.add_subcommand("predict", "predict outcomes for every sample");
    opt(predict, p, "--dataset", "dataset", "dataset directory");
    opt(predict, p, "--splits", "splits", "splits file");
    opt(predict, p, "--fit-file", "fit_file", "fitted parameters to load");
    opt(predict, p, "--at", "predict.at",
        "prediction timestamp (gap_opening, characteristic or critical)");
    flag(predict, p, "--tracks", "predict.tracks", "also write decoded 2D tracks");
    add_model_opts(predict, p);
    add_common(predict, p);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a model on every split");
    opt(evaluate, p, "--dataset", "dataset", "dataset directory");
    opt(evaluate, p, "--splits", "splits", "splits file");
    opt(evaluate, p, "--fits", "fits", "directory with fitted parameters");
    opt(evaluate, p, "--model", "model", "model to score (CM, LR1D, LR2D or CV)");
    opt(evaluate, p, "--label", "eval.label", "report label");
    flag(evaluate, p, "--untuned", "eval.untuned", "score CM with default parameters");
    opt(evaluate, p, "--lambda", "lr.lambda", "logistic regression regularization");
    add_model_opts(evaluate, p);
    add_common(evaluate, p);

    CLI::App* compare = app.add_subcommand("compare", "compare two evaluation reports");
    opt(compare, p, "--a", "report_a", "first report file");
    opt(compare, p, "--b", "report_b", "second report file");
    opt(compare, p, "--alpha", "alpha", "significance level of the paired t-test");
    add_common(compare, p);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (!p.cm_code.empty()) {
        std::string err;
        if (!apply_cm_code(p, err)) return fail_usage(err);
    }

    ConfigPtr cfg(cm_config_new());
    if (!cfg) {
        std::cerr << "error: out of memory\n";
        return kExitError;
    }
    const auto check = [&](cm_status s) {
        if (s == CM_OK) return true;
        std::cerr << "error: " << cm_last_error() << '\n';
        return false;
    };
    for (const auto& file : p.config_files)
        if (!check(cm_config_parse_file(cfg.get(), file.c_str()))) return kExitError;
    for (const auto& [key, value] : p.keys)
        if (!check(cm_config_set(cfg.get(), key.c_str(), value.c_str()))) return kExitError;
    for (const auto& kv : p.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            return fail_usage("--set needs key=value, got '" + kv + "'");
        if (!check(cm_config_set(cfg.get(), kv.substr(0, eq).c_str(),
                                 kv.substr(eq + 1).c_str())))
            return kExitError;
    }

    std::string out = p.out;
    if (out.empty())
        if (const char* env = std::getenv("COMMOTIONS_OUT")) out = env;
    if (out.empty()) out = ".";

    const std::string command = app.get_subcommands().front()->get_name();
    const cm_status s = cm_run(cfg.get(), command.c_str(), out.c_str());
    if (s == CM_OK) return 0;
    std::cerr << "error: " << cm_last_error() << '\n';
    return s == CM_ERR_INVALID_ARGUMENT ? kExitUsage : kExitError;
}
