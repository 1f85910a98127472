#include "gp.hpp"

#include <cmath>
#include <limits>

#include "util/error.hpp"

namespace commotions {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

constexpr double kLengthScales[] = {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0};
constexpr double kNoiseVars[] = {1e-6, 1e-4, 1e-3, 1e-2, 1e-1};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

bool GpSurrogate::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    if (x.empty() || x.size() != y.size())
        fail(Error::Code::invalid_argument, "surrogate needs matching, non-empty x and y");
    const auto n = static_cast<Eigen::Index>(x.size());
    x_ = x;

    y_mean_ = 0.0;
    for (double v : y) y_mean_ += v;
    y_mean_ /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - y_mean_) * (v - y_mean_);
    y_sd_ = std::sqrt(var / static_cast<double>(n));
    if (y_sd_ < 1e-12) y_sd_ = 1.0;
    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) ys[i] = (y[i] - y_mean_) / y_sd_;

    Eigen::MatrixXd d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = sq_dist(x[i], x[j]);

    double best_lml = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (double ell : kLengthScales) {
        const Eigen::MatrixXd base = (-d2 / (2.0 * ell * ell)).array().exp();
        for (double noise : kNoiseVars) {
            Eigen::MatrixXd k = base;
            k.diagonal().array() += noise;
            Eigen::LLT<Eigen::MatrixXd> llt(k);
            if (llt.info() != Eigen::Success) continue;
            const Eigen::VectorXd alpha = llt.solve(ys);
            double log_det = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
            const double lml = -0.5 * ys.dot(alpha) - log_det -
                               0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
            if (lml > best_lml) {
                best_lml = lml;
                ell_ = ell;
                noise_ = noise;
                chol_l_ = llt.matrixL();
                alpha_ = alpha;
                found = true;
            }
        }
    }
    return found;
}

GpSurrogate::Posterior GpSurrogate::predict(std::span<const double> x) const {
    if (alpha_.size() == 0) fail(Error::Code::internal, "surrogate queried before fit");
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i)
        ks[i] = std::exp(-sq_dist(x_[i], x) / (2.0 * ell_ * ell_));
    Posterior out;
    out.mean = y_mean_ + y_sd_ * ks.dot(alpha_);
    const Eigen::VectorXd v = chol_l_.triangularView<Eigen::Lower>().solve(ks);
    out.var = y_sd_ * y_sd_ * std::max(0.0, 1.0 - v.squaredNorm());
    return out;
}

double GpSurrogate::expected_improvement(std::span<const double> x, double best_y) const {
    const Posterior p = predict(x);
    const double sd = std::sqrt(p.var);
    const double gap = best_y - p.mean;
    if (sd < 1e-12) return std::max(gap, 0.0);
    const double z = gap / sd;
    return gap * normal_cdf(z) + sd * normal_pdf(z);
}

}  // namespace commotions
