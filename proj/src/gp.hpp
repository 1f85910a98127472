#pragma once
#include <Eigen/Dense>
#include <span>
#include <vector>

namespace commotions {

// Gaussian-process regressor with an isotropic squared-exponential kernel,
// used as the surrogate inside the optimizer. Inputs live in the unit cube;
// outputs are standardized internally. Hyperparameters (length scale, noise
// variance) are picked by grid search on the log marginal likelihood.
class GpSurrogate {
  public:
    // Returns false when no hyperparameter candidate yields a successful
    // Cholesky factorization.
    bool fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y);

    struct Posterior {
        double mean = 0.0;
        double var = 0.0;  // latent (noise-free) variance, raw output scale
    };
    Posterior predict(std::span<const double> x) const;

    // Expected reduction below best_y (minimization, raw output scale).
    double expected_improvement(std::span<const double> x, double best_y) const;

    double length_scale() const { return ell_; }
    double noise_var() const { return noise_; }

  private:
    std::vector<std::vector<double>> x_;
    Eigen::MatrixXd chol_l_;
    Eigen::VectorXd alpha_;
    double ell_ = 0.3;
    double noise_ = 1e-4;
    double y_mean_ = 0.0;
    double y_sd_ = 1.0;
};

}  // namespace commotions
