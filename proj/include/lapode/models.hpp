#ifndef LAPODE_MODELS_HPP
#define LAPODE_MODELS_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lapode/laplace.hpp"

namespace lapode {

struct ModelCatalogEntry {
    std::string name;
    OdeSystem system;
    Vector theta_true;
    Vector x1_true;
    double sigma2 = 1.0;
    int n = 0;
    double h = 1.0;
    PriorSpec prior;       // mu_x1 left empty; filled from the first observation
    Vector theta_center;   // reference grid center
    Vector reported_y1;    // reference first observation (regression fixture)
    ClosedFormFn closed_form;  // empty when no closed form is known
    bool positive_data = false;
    int default_M2 = 25;
    std::string default_sampler = "grid";

    TimeGrid grid(int m = 1) const { return TimeGrid::uniform(n, h, m); }
    std::vector<double> times() const { return grid().times(); }
    // Prior with mu_x1 = first observation of `data`.
    PriorSpec prior_for(const Dataset& data) const;
};

ModelCatalogEntry newton_cooling(int n = 20);
ModelCatalogEntry fitzhugh_nagumo();
ModelCatalogEntry predator_prey();
ModelCatalogEntry logistic();

// Sample sizes and spacings of the cooling designs.
struct CoolingDesign {
    int n;
    double h;
};
inline constexpr CoolingDesign kCoolingDesigns[] = {{20, 0.75}, {50, 0.3}, {100, 0.15}, {150, 0.1}};

std::vector<std::string> model_names();
ModelCatalogEntry model_by_name(std::string_view name);

// Exact marginal posterior of theta for the cooling model (x1 and tau^2
// integrated out analytically), up to an additive constant.
struct ExactCoolingEval {
    double log_post = kNegInf;
    double u = 0.0;  // minimum over x1 of sum (y_i - x_i)^2 + (x1 - mu)^2 / c
    GammaParams tau2;
};

ExactCoolingEval cooling_exact(const Vector& theta, const Dataset& data, const PriorSpec& prior);
double cooling_exact_posterior(const Vector& theta, const Dataset& data, const PriorSpec& prior);

// y_i = x_i + eps_i with x from RK4 using m_fine sub-steps per interval.
Dataset simulate_data(const OdeSystem& sys, const Vector& theta, const Vector& x1, double sigma2,
                      const std::vector<double>& times, std::uint64_t seed, int m_fine = 100,
                      bool positivity = false);
Dataset simulate_data(const ModelCatalogEntry& entry, std::uint64_t seed, int m_fine = 100);

}  // namespace lapode

#endif  // LAPODE_MODELS_HPP
