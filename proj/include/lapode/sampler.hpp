#ifndef LAPODE_SAMPLER_HPP
#define LAPODE_SAMPLER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lapode/laplace.hpp"

namespace lapode {

using LogDensity = std::function<double(const Vector& theta)>;

// Value of the marginal posterior at one theta. x1_hat is carried along so
// neighbouring evaluations can warm-start from it.
struct PointEval {
    double log_post = kNegInf;
    GammaParams tau2;
    Vector x1_hat;
    bool diverged = false;  // inside the prior support but the evaluation failed
};

using Target = std::function<PointEval(const Vector& theta, const Vector* warm_start)>;

// Plain log density; tau2 draws come from Gamma(1, 1).
Target make_target(LogDensity density);
// Laplace-approximated posterior of theta.
Target make_target(const LaplacePosterior& posterior);

// Sigma_hat = H^{-1}, H the negative Hessian of `density` at theta0 by central
// differences. Non-positive eigenvalues of H are replaced by its smallest
// positive eigenvalue.
Matrix hessian_center(const LogDensity& density, const Vector& theta0);

// Same but with the raw (unrepaired) negative Hessian, for diagnostics.
Matrix negative_hessian_fd(const LogDensity& density, const Vector& theta0);

struct ModeSearch {
    Vector theta;
    double log_post = kNegInf;
    int iterations = 0;
    bool converged = false;
};

// Newton ascent on `density` with the repaired finite-difference Hessian and
// step halving, starting from theta0.
ModeSearch find_mode(const LogDensity& density, const Vector& theta0, int max_iter = 20);

struct AxisRange {
    double lower = -4.0;
    double upper = 4.0;
};

struct GridSpec {
    Vector theta0;
    Matrix sigma_hat;
    Matrix U;       // eigenvectors of sigma_hat
    Vector D;       // eigenvalues of sigma_hat
    int M1 = 5;
    int M2 = 25;
    double eta = 1e-5;
    std::vector<AxisRange> ranges;  // in z coordinates
    std::vector<std::string> warnings;

    int dim() const { return static_cast<int>(theta0.size()); }
    Vector theta_of(const Vector& z) const;  // theta0 + U D^{1/2} z
    Vector z_of(const Vector& theta) const;
};

GridSpec make_grid_spec(const Vector& theta0, const Matrix& sigma_hat);

struct RangeSearch {
    int evaluations = 0;
    int expansions = 0;
};

// Coarse (2 M1 + 1)^q sweep of z over [-L, L] per axis (L = 4, doubled up to
// twice for axes whose mass reaches the edge), normalized to a unit maximum.
// Sets spec.ranges to the extent of points whose relative mass exceeds eta.
// `anchor` (optional) is the x1 minimizer at theta0, used to warm-start rows.
RangeSearch find_ranges(const Target& target, GridSpec& spec, int M1, double eta,
                        unsigned threads = 0, const Vector* anchor = nullptr);

// Relative mass on the edge of the coarse box above which an axis is expanded.
inline constexpr double kEdgeMassThreshold = 1e-3;

struct PosteriorGrid {
    std::vector<Vector> z;
    std::vector<Vector> theta;
    std::vector<double> log_post;
    std::vector<GammaParams> tau2;
    std::vector<double> mass;
    double log_norm = kNegInf;
    int diverged = 0;  // points with log_post = -inf inside the prior support

    std::size_t size() const { return theta.size(); }
};

inline constexpr std::size_t kMaxGridPoints = 10'000'000;

PosteriorGrid build_grid(const Target& target, const GridSpec& spec, int M2, unsigned threads = 0,
                         const Vector* anchor = nullptr);

// Discrete posterior over arbitrary points from their log values.
PosteriorGrid make_grid(std::vector<Vector> theta, std::vector<double> log_post,
                        std::vector<GammaParams> tau2);

// Exact mean of theta under the grid masses.
Vector grid_mean(const PosteriorGrid& grid);

struct SampleSet {
    Matrix theta;               // N x q
    std::vector<double> tau2;   // length N
    std::vector<std::size_t> index;  // grid point index per draw (grid sampling)
    std::uint64_t seed = 0;
    std::string method;         // "grid" or "griddy-gibbs"
    int m = 1;
    double seconds = 0.0;

    std::size_t size() const { return tau2.size(); }
};

SampleSet grid_sample(const PosteriorGrid& grid, std::size_t N, std::uint64_t seed);

struct GibbsOptions {
    std::size_t N = 10000;
    std::size_t thin = 5;
    double burn_in_fraction = 0.1;  // of the N * thin recorded scans, run beforehand
    std::uint64_t seed = 1;
};

struct GibbsResult {
    SampleSet samples;
    std::size_t evaluations = 0;  // distinct grid points evaluated
    std::size_t scans = 0;
};

// Coordinate-wise Gibbs sampler on the product grid `axes` (raw theta values).
// `init` holds the starting index on each axis.
GibbsResult griddy_gibbs(const Target& target, const std::vector<std::vector<double>>& axes,
                         const GibbsOptions& opts, std::vector<std::size_t> init);

// Equal-width axes of `points` values on theta0 +- 4 sqrt(Sigma_ii), clipped to the box.
std::vector<std::vector<double>> gibbs_axes(const Vector& theta0, const Matrix& sigma_hat,
                                            const Box& box, int points);

struct RefineResult {
    int chosen_m = 1;
    bool stabilized = false;
    std::vector<std::pair<int, Vector>> history;  // (m, posterior mean)
};

// Runs `pipeline(m)` along `m_sequence` and stops at the first consecutive pair
// whose means differ by less than rel_tol (relative, every component); the
// earlier m of that pair is chosen.
RefineResult refine_m(const std::function<Vector(int m)>& pipeline, const std::vector<int>& m_sequence,
                      double rel_tol = 1e-3);

// Calls fn(i) for i in [0, count) over up to `threads` workers (0 = hardware).
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace lapode

#endif  // LAPODE_SAMPLER_HPP
