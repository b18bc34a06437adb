#ifndef LAPODE_INFERENCE_HPP
#define LAPODE_INFERENCE_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lapode/models.hpp"
#include "lapode/sampler.hpp"

namespace lapode {

struct PipelineOptions {
    Method method = Method::Rk4;
    SensitivityMode sensitivity = SensitivityMode::Discrete;
    bool closed_form = false;       // use the model's exact solution instead of integration
    std::string sampler = "auto";   // grid | griddy | auto (grid when q <= 4)
    int M1 = 5;
    int M2 = 25;
    double eta = 1e-5;
    std::size_t N = 10000;
    std::size_t thin = 5;
    std::uint64_t seed = 1;
    int gibbs_points = 31;
    std::string gibbs_space = "theta";  // axes on raw theta or on the decorrelated z
    bool find_mode = true;
    unsigned threads = 0;
};

// Trajectory source for the entry: exact solution or numerical integration.
std::shared_ptr<const TrajectoryModel> make_trajectory_model(const ModelCatalogEntry& entry,
                                                             const std::vector<double>& times, int m,
                                                             const PipelineOptions& opts);

struct PosteriorRun {
    int m = 1;
    std::string sampler;
    Vector theta_start;
    Vector theta0;             // grid center actually used
    Matrix sigma_hat;
    GridSpec spec;
    PosteriorGrid grid;        // empty for griddy Gibbs
    SampleSet samples;
    Vector mean;               // exact grid mean, or sample mean for griddy Gibbs
    std::size_t evaluations = 0;
    int diverged = 0;
    MultiStartReport multistart;  // extra x1 starts at the center
    std::vector<std::string> warnings;
    std::map<std::string, double> seconds;
};

// Full posterior computation at one m: center, Sigma_hat, grid (or griddy
// Gibbs) and draws.
PosteriorRun run_posterior(const ModelCatalogEntry& entry, const Dataset& data, const PriorSpec& prior, int m,
                           const Vector& theta_start, const PipelineOptions& opts);

struct InferenceResult {
    PosteriorRun run;          // at the chosen m
    RefineResult refine;
    double seconds = 0.0;
};

// Runs at each m of `m_sequence` until the posterior mean stabilizes.
InferenceResult infer(const ModelCatalogEntry& entry, const Dataset& data, const PriorSpec& prior,
                      const std::vector<int>& m_sequence, double rel_tol, const Vector& theta_start,
                      const PipelineOptions& opts);

}  // namespace lapode

#endif  // LAPODE_INFERENCE_HPP
