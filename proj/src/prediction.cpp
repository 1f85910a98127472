#include "prediction.hpp"

#include <algorithm>
#include <cmath>

#include "util/error.hpp"

namespace commotions {

RolloutOutcome extract_outcome(const PairRollout& pair, double horizon) {
    RolloutOutcome out;
    out.accepted = pair.accepted;
    out.entered = pair.target_entered;
    out.t_entry = pair.target_entered ? pair.target.entry_time : horizon;
    return out;
}

PredictionRecord aggregate(const RolloutSet& rollouts, double horizon) {
    const std::size_t n = rollouts.pairs.size();
    if (n == 0) fail(Error::Code::invalid_argument, "aggregate needs at least one rollout");
    PredictionRecord rec;
    rec.accepted_p.reserve(n);
    rec.t_entry_p.reserve(n);
    double acc_sum = 0.0;
    double t_sum = 0.0;
    for (const auto& pair : rollouts.pairs) {
        const auto o = extract_outcome(pair, horizon);
        rec.accepted_p.push_back(o.accepted ? 1 : 0);
        rec.t_entry_p.push_back(o.t_entry);
        acc_sum += o.accepted ? 1.0 : 0.0;
        t_sum += o.t_entry;
    }
    rec.a_pred = acc_sum / static_cast<double>(n);
    if (n == 1) {
        rec.single_rollout = true;
        return rec;
    }
    const double mean = t_sum / static_cast<double>(n);
    double ss = 0.0;
    for (double t : rec.t_entry_p) ss += (t - mean) * (t - mean);
    const double raw = ss / static_cast<double>(n - 1);
    rec.variance = std::min(raw, kVarianceCap);
    rec.variance_capped = raw > kVarianceCap;
    return rec;
}

std::vector<std::vector<DecodedPoint>> decode_predictions(const RolloutSet& rollouts,
                                                          const Sample& sample,
                                                          const SimConfig& cfg, double t0) {
    std::vector<std::vector<DecodedPoint>> out;
    out.reserve(rollouts.pairs.size());
    const long steps = std::lround(cfg.horizon / cfg.dt);
    std::vector<double> times(static_cast<std::size_t>(steps) + 1);
    std::vector<double> dists(times.size());
    for (const auto& pair : rollouts.pairs) {
        if (pair.target.track.empty())
            fail(Error::Code::invalid_argument,
                 "decode_predictions needs rollouts recorded with tracks");
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double tau = static_cast<double>(k) * cfg.dt;
            times[k] = t0 + tau;
            dists[k] = track_d_at(pair.target.track, tau);
        }
        out.push_back(decode_to_2d(times, dists, sample.target_path, sample.contested));
    }
    return out;
}

}  // namespace commotions
