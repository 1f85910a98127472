#include "baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "util/error.hpp"

namespace commotions {

std::vector<double> featurize_1d(const ProjectedState& ego, const ProjectedState& target,
                                 double gap_cap) {
    double ego_time = gap_cap;
    if (ego.d <= 0.0)
        ego_time = 0.0;
    else if (ego.v > 0.0)
        ego_time = std::min(ego.d / ego.v, gap_cap);
    return {ego.d, ego.v, target.d, target.v, ego_time};
}

std::vector<double> featurize_2d(std::span<const TimedPos> ego_window,
                                 std::span<const TimedPos> target_window) {
    if (ego_window.size() != target_window.size())
        fail(Error::Code::invalid_argument, "observation windows differ in length");
    if (ego_window.size() < 2)
        fail(Error::Code::invalid_argument, "need at least 2 observations per window");
    std::vector<double> out;
    out.reserve(2 * (2 * ego_window.size() + 2));
    for (const auto window : {ego_window, target_window}) {
        for (const auto& tp : window) {
            out.push_back(tp.p.x);
            out.push_back(tp.p.y);
        }
        const auto& a = window[window.size() - 2];
        const auto& b = window[window.size() - 1];
        const double dt = b.t - a.t;
        if (dt <= 0.0)
            fail(Error::Code::invalid_argument, "window timestamps must increase");
        out.push_back((b.p.x - a.p.x) / dt);
        out.push_back((b.p.y - a.p.y) / dt);
    }
    return out;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// penalized negative log-likelihood; bias (w[0]) is unpenalized
double lr_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    double lambda) {
    const Eigen::VectorXd eta = x * w;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double z = eta[i];
        // log(1 + exp(z)) - y z, computed without overflow
        nll += (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[i] * z;
    }
    return nll + 0.5 * lambda * w.tail(w.size() - 1).squaredNorm();
}

}  // namespace

LRModel lr_fit(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
               double lambda, const std::string& schema) {
    if (features.empty())
        fail(Error::Code::invalid_argument, "no training rows");
    if (features.size() != labels.size())
        fail(Error::Code::invalid_argument, "feature and label counts differ");
    if (lambda < 0.0)
        fail(Error::Code::invalid_argument, "lambda must be >= 0");
    const std::size_t n = features.size();
    const std::size_t m = features[0].size();
    for (const auto& row : features)
        if (row.size() != m)
            fail(Error::Code::invalid_argument, "feature rows differ in length");
    for (int y : labels)
        if (y != 0 && y != 1)
            fail(Error::Code::invalid_argument, "labels must be 0 or 1");

    LRModel model;
    model.schema = schema;
    model.feat_mean.assign(m, 0.0);
    model.feat_scale.assign(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        double mean = 0.0;
        for (const auto& row : features) mean += row[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& row : features) var += (row[j] - mean) * (row[j] - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        model.feat_mean[j] = mean;
        model.feat_scale[j] = sd > 1e-12 ? sd : 1.0;
    }

    Eigen::MatrixXd x(n, m + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (std::size_t j = 0; j < m; ++j)
            x(i, j + 1) = (features[i][j] - model.feat_mean[j]) / model.feat_scale[j];
        y[i] = labels[i];
    }
    Eigen::VectorXd reg = Eigen::VectorXd::Constant(m + 1, lambda);
    reg[0] = 0.0;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(m + 1);
    double obj = lr_objective(x, y, w, lambda);
    const int max_iter = 200;
    for (int iter = 1; iter <= max_iter; ++iter) {
        const Eigen::VectorXd eta = x * w;
        Eigen::VectorXd p(n), wt(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = sigmoid(eta[i]);
            wt[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
        }
        Eigen::VectorXd grad = x.transpose() * (p - y) + reg.cwiseProduct(w);
        if (grad.norm() < 1e-8) {
            model.iterations = iter - 1;
            model.weights.assign(w.data(), w.data() + w.size());
            return model;
        }
        Eigen::MatrixXd h = x.transpose() * wt.asDiagonal() * x;
        h.diagonal() += reg;
        Eigen::VectorXd step = h.ldlt().solve(grad);
        // halve until the penalized likelihood does not get worse
        double scale = 1.0;
        Eigen::VectorXd w_next = w - step;
        double obj_next = lr_objective(x, y, w_next, lambda);
        for (int k = 0; k < 40 && obj_next > obj; ++k) {
            scale *= 0.5;
            w_next = w - scale * step;
            obj_next = lr_objective(x, y, w_next, lambda);
        }
        // at the likelihood's rounding floor no representable step improves
        // the objective; a small gradient there is convergence
        if (obj_next > obj || (w_next - w).norm() <= 1e-12 * (1.0 + w.norm())) {
            if (grad.norm() < 1e-6 * (1.0 + std::abs(obj))) {
                model.iterations = iter;
                model.weights.assign(w.data(), w.data() + w.size());
                return model;
            }
            fail(Error::Code::numeric, "logistic regression line search failed at iteration " +
                                           std::to_string(iter));
        }
        w = w_next;
        obj = obj_next;
    }
    fail(Error::Code::numeric,
         "logistic regression did not converge in " + std::to_string(max_iter) + " iterations");
}

double lr_predict(const LRModel& model, std::span<const double> features) {
    if (features.size() + 1 != model.weights.size())
        fail(Error::Code::invalid_argument, "feature count does not match the model");
    double z = model.weights[0];
    for (std::size_t j = 0; j < features.size(); ++j)
        z += model.weights[j + 1] * (features[j] - model.feat_mean[j]) / model.feat_scale[j];
    return std::clamp(sigmoid(z), 1e-9, 1.0 - 1e-9);
}

namespace {

double cv_entry_time(const ProjectedState& s) {
    if (s.d <= 0.0) return 0.0;
    if (s.v <= 0.0) return std::numeric_limits<double>::infinity();
    return s.d / s.v;
}

}  // namespace

double cv_accept_score(const ProjectedState& ego, const ProjectedState& target) {
    return cv_entry_time(target) < cv_entry_time(ego) ? 1.0 : 0.0;
}

std::vector<double> cv_distances(const ProjectedState& s, std::span<const double> times_rel) {
    std::vector<double> out;
    out.reserve(times_rel.size());
    for (double t : times_rel) out.push_back(s.d - s.v * t);
    return out;
}

}  // namespace commotions
