#include "fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gp.hpp"
#include "util/error.hpp"

namespace commotions {

namespace {

constexpr double kMismatchWeight = 4.0;
constexpr double kPenalty = 1e12;

double sample_loss_l1(const PredictionRecord& rec, const TruthRef& truth) {
    if (rec.t_entry_p.empty() || rec.t_entry_p.size() != rec.accepted_p.size())
        fail(Error::Code::invalid_argument, "malformed prediction record");
    const double t_upper =
        truth.accepted ? truth.t_accept : std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t p = 0; p < rec.t_entry_p.size(); ++p) {
        const double a_pred = rec.accepted_p[p] ? 1.0 : 0.0;
        const double a_true = truth.accepted ? 1.0 : 0.0;
        const double t_p = rec.t_entry_p[p];
        const double ref = std::min(t_upper, std::max(truth.t_cross, t_p));
        sum += kMismatchWeight * std::abs(a_true - a_pred) + (ref - t_p) * (ref - t_p);
    }
    return sum / static_cast<double>(rec.t_entry_p.size());
}

}  // namespace

double loss_l1(std::span<const PredictionRecord> preds, std::span<const TruthRef> truth) {
    if (preds.size() != truth.size())
        fail(Error::Code::invalid_argument, "prediction and truth counts differ");
    if (preds.empty()) fail(Error::Code::invalid_argument, "loss needs at least one sample");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum += sample_loss_l1(preds[i], truth[i]);
    return sum;
}

double loss_l2(std::span<const PredictionRecord> preds, std::span<const TruthRef> truth) {
    double sum = loss_l1(preds, truth);
    for (const auto& rec : preds) {
        const double v = rec.variance;
        sum += 100.0 * v - 20.0 * std::sqrt(v) + 1.0;
    }
    return sum;
}

std::vector<std::vector<double>> latin_hypercube(std::span<const double> lo,
                                                 std::span<const double> hi, int n, Rng& rng) {
    if (lo.size() != hi.size() || lo.empty())
        fail(Error::Code::invalid_argument, "bad bounds for the hypercube");
    if (n <= 0) return {};
    const std::size_t d = lo.size();
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    std::vector<int> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
        for (int i = 0; i < n; ++i) {
            const double u = (perm[i] + rng.uniform()) / n;
            pts[i][j] = lo[j] + (hi[j] - lo[j]) * u;
        }
    }
    return pts;
}

namespace {

struct CubeMap {
    std::vector<double> lo, width;

    std::vector<double> to_unit(std::span<const double> x) const {
        std::vector<double> u(x.size());
        for (std::size_t j = 0; j < x.size(); ++j)
            u[j] = width[j] > 0.0 ? (x[j] - lo[j]) / width[j] : 0.5;
        return u;
    }
    std::vector<double> from_unit(std::span<const double> u) const {
        std::vector<double> x(u.size());
        for (std::size_t j = 0; j < u.size(); ++j) x[j] = lo[j] + width[j] * u[j];
        return x;
    }
};

}  // namespace

OptResult bayes_opt(const std::function<double(std::span<const double>)>& objective,
                    std::span<const double> lo, std::span<const double> hi, int budget, int n_init,
                    Rng& rng, const std::vector<std::vector<double>>& seed_points) {
    const int d = static_cast<int>(lo.size());
    if (d == 0 || hi.size() != lo.size())
        fail(Error::Code::invalid_argument, "bad optimizer bounds");
    for (int j = 0; j < d; ++j)
        if (!(lo[j] <= hi[j])) fail(Error::Code::invalid_argument, "optimizer bounds inverted");
    if (budget < d + 1)
        fail(Error::Code::invalid_argument, "optimizer budget must be at least dimension + 1");
    if (n_init <= 0) n_init = std::clamp(static_cast<int>(std::lround(0.4 * budget)), d + 1, budget);
    n_init = std::min(n_init, budget);

    CubeMap cube;
    cube.lo.assign(lo.begin(), lo.end());
    cube.width.resize(d);
    for (int j = 0; j < d; ++j) cube.width[j] = hi[j] - lo[j];

    OptResult out;
    out.best_loss = std::numeric_limits<double>::infinity();
    int non_finite = 0;
    int surrogate_failures = 0;

    std::vector<std::vector<double>> unit_x;  // evaluated, unit cube
    std::vector<double> ys;
    auto evaluate = [&](std::vector<double> x) {
        for (int j = 0; j < d; ++j) x[j] = std::clamp(x[j], lo[j], hi[j]);
        double y = objective(x);
        if (!std::isfinite(y)) {
            ++non_finite;
            y = kPenalty;
        }
        unit_x.push_back(cube.to_unit(x));
        ys.push_back(y);
        if (y < out.best_loss) {
            out.best_loss = y;
            out.best = x;
        }
        out.trace.emplace_back(std::move(x), y);
    };

    for (const auto& s : seed_points) {
        if (static_cast<int>(s.size()) != d)
            fail(Error::Code::invalid_argument, "seed point has the wrong dimension");
        if (static_cast<int>(out.trace.size()) >= n_init) break;
        evaluate(s);
    }
    {
        const int n_lhs = n_init - static_cast<int>(out.trace.size());
        for (auto& p : latin_hypercube(lo, hi, n_lhs, rng)) evaluate(std::move(p));
    }

    while (static_cast<int>(out.trace.size()) < budget) {
        GpSurrogate gp;
        bool ok = false;
        try {
            ok = gp.fit(unit_x, ys);
        } catch (const Error&) {
            ok = false;
        }
        std::vector<double> next_unit(d);
        if (!ok) {
            ++surrogate_failures;
            for (int j = 0; j < d; ++j) next_unit[j] = rng.uniform();
        } else {
            const std::vector<double> inc = cube.to_unit(out.best);
            double best_ei = -1.0;
            std::vector<double> cand(d);
            const int n_uniform = 512, n_local = 256;
            for (int c = 0; c < n_uniform + n_local; ++c) {
                if (c < n_uniform) {
                    for (int j = 0; j < d; ++j) cand[j] = rng.uniform();
                } else {
                    for (int j = 0; j < d; ++j)
                        cand[j] = std::clamp(inc[j] + 0.1 * rng.normal(), 0.0, 1.0);
                }
                const double ei = gp.expected_improvement(cand, out.best_loss);
                if (ei > best_ei) {
                    best_ei = ei;
                    next_unit = cand;
                }
            }
        }
        evaluate(cube.from_unit(next_unit));
    }

    if (non_finite > 0)
        out.warnings.push_back(std::to_string(non_finite) +
                               " non-finite objective values replaced by a 1e12 penalty");
    if (surrogate_failures > 0)
        out.warnings.push_back("surrogate fit failed on " + std::to_string(surrogate_failures) +
                               " iterations, used random search instead");
    return out;
}

void FitConfig::validate() const {
    sim.validate();
    bounds.validate();
    if (n_p < 1) fail(Error::Code::invalid_argument, "n_p must be >= 1");
    if (n_init < 1 || n_acq < 0)
        fail(Error::Code::invalid_argument, "optimizer budgets must be positive");
    if (!(shrink > 0.0 && shrink <= 1.0))
        fail(Error::Code::invalid_argument, "shrink factor must be in (0, 1]");
    if (n_input < 2) fail(Error::Code::invalid_argument, "n_input must be >= 2");
}

PredictionRecord predict_outcomes(const Sample& s, double cutoff, const ModelParams& params,
                                  const SimConfig& sim, int n_p, std::uint64_t seed, int n_input,
                                  int threads) {
    const auto [ego0, target0] = initial_conditions(s, cutoff, n_input);
    const double region = 2.0 * s.contested.half_extent;
    const RolloutSet set = simulate_batch(ego0, target0, params, sim, region, n_p, seed,
                                          fnv1a(s.id), threads);
    PredictionRecord rec = aggregate(set, sim.horizon);
    for (double& t : rec.t_entry_p) t += cutoff;
    return rec;
}

namespace {

struct ObjectiveRow {
    const Sample* sample = nullptr;
    double cutoff = 0.0;
    TruthRef truth;
};

}  // namespace

ModelFitResult fit_model(const Dataset& ds, std::span<const std::string> train_ids,
                         const FitConfig& cfg) {
    cfg.validate();
    if (train_ids.empty()) fail(Error::Code::invalid_argument, "empty training set");

    std::vector<ObjectiveRow> rows;
    rows.reserve(train_ids.size());
    for (const auto& id : train_ids) {
        ObjectiveRow row;
        row.sample = &ds.by_id(id);
        row.cutoff = row.sample->gap_opening_time(cfg.n_input);
        row.truth.accepted = row.sample->accepted;
        row.truth.t_accept = row.sample->accepted ? *row.sample->t_accept : 0.0;
        row.truth.t_cross = row.sample->t_ego_cross;
        rows.push_back(std::move(row));
    }

    auto objective = [&](std::span<const double> theta) {
        const ModelParams p = ModelParams::from_array(theta);
        std::vector<PredictionRecord> recs;
        std::vector<TruthRef> truths;
        recs.reserve(rows.size());
        truths.reserve(rows.size());
        for (const auto& row : rows) {
            recs.push_back(predict_outcomes(*row.sample, row.cutoff, p, cfg.sim, cfg.n_p,
                                            cfg.sim_seed, cfg.n_input, cfg.threads));
            truths.push_back(row.truth);
        }
        return cfg.loss == LossKind::l1 ? loss_l1(recs, truths) : loss_l2(recs, truths);
    };

    Rng rng(derive_stream(cfg.opt_seed, fnv1a("fit"), 0));
    ModelFitResult out;
    out.best_loss = std::numeric_limits<double>::infinity();
    if (cfg.n_p == 1 && cfg.loss == LossKind::l2)
        out.warnings.push_back("variance regularizer is constant with a single rollout");

    const int budget = cfg.n_init + cfg.n_acq;
    ParamBounds stage_bounds = cfg.bounds;
    std::vector<std::vector<double>> seeds;
    {
        auto def = ModelParams{}.to_array();
        for (int j = 0; j < ModelParams::dim; ++j)
            def[j] = std::clamp(def[j], cfg.bounds.lo[j], cfg.bounds.hi[j]);
        seeds.push_back({def.begin(), def.end()});
    }

    const int n_stages = cfg.schedule == ScheduleKind::two_stage ? 2 : 1;
    for (int stage = 0; stage < n_stages; ++stage) {
        OptResult opt = bayes_opt(objective, stage_bounds.lo, stage_bounds.hi, budget, cfg.n_init,
                                  rng, seeds);
        out.objective_evals += static_cast<long>(opt.trace.size());
        for (const auto& w : opt.warnings)
            out.warnings.push_back("stage " + std::to_string(stage + 1) + ": " + w);
        if (opt.best_loss < out.best_loss) {
            out.best_loss = opt.best_loss;
            out.best = ModelParams::from_array(opt.best);
        }
        const std::vector<double> incumbent = opt.best;
        out.stages.push_back({std::move(opt), stage_bounds});

        if (stage + 1 < n_stages) {
            // shrink around the incumbent, shifted to stay inside the
            // original box so the width is exactly shrink * original
            ParamBounds next = stage_bounds;
            for (int j = 0; j < ModelParams::dim; ++j) {
                const double w = cfg.shrink * (stage_bounds.hi[j] - stage_bounds.lo[j]);
                next.lo[j] = std::clamp(incumbent[j] - 0.5 * w, stage_bounds.lo[j],
                                        stage_bounds.hi[j] - w);
                next.hi[j] = next.lo[j] + w;
            }
            stage_bounds = next;
            seeds = {incumbent};
        }
    }
    return out;
}

}  // namespace commotions
