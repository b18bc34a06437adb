#ifndef LAPODE_COMMANDS_HPP
#define LAPODE_COMMANDS_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lapode/config.hpp"
#include "lapode/inference.hpp"

namespace lapode {

inline constexpr const char* kVersion = "1.0.0";

// Named numeric columns, one row per record.
struct Table {
    std::vector<std::string> columns;
    Matrix values;

    int column(const std::string& name) const;  // -1 when absent
};

Table read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const Table& table);

// samples.csv layout: theta1..thetaq, tau2, sigma2.
Table samples_table(const SampleSet& samples);
// summary.csv layout: parameter, mean, median, q05, q95 for every column.
void write_summary(const std::filesystem::path& path, const Table& samples);

struct PredictionBands {
    std::vector<double> times;
    int observed = 0;        // leading rows that are observation times
    Matrix mean, q05, q95;   // state bands, T x p
    Matrix y_mean, y_q05, y_q95;  // predictive bands (with noise), empty unless requested
    std::size_t used = 0;
    std::size_t excluded = 0;
};

// For every draw: x1 from its conditional Gaussian, trajectory over `times`
// via `solve`, optional observation noise. Draws whose trajectory fails are
// excluded and counted.
using Solver = std::function<Matrix(const Vector& x1, const Vector& theta)>;
PredictionBands predict_bands(const LaplacePosterior& posterior, const Solver& solve,
                              const std::vector<double>& times, int observed, const Matrix& theta_draws,
                              const std::vector<double>& tau2_draws, bool predictive, std::uint64_t seed);

// Resolved pieces of a run configuration.
struct RunSetup {
    ModelCatalogEntry entry;
    Dataset data;
    PriorSpec prior;
    PipelineOptions options;
    Vector theta_start;
};

RunSetup resolve(const RunConfig& cfg);

void cmd_simulate(const RunConfig& cfg, std::ostream& log);
InferenceResult cmd_infer(const RunConfig& cfg, std::ostream& log);
PredictionBands cmd_predict(const RunConfig& cfg, std::ostream& log);
void cmd_summarize(const RunConfig& cfg, std::ostream& log);

}  // namespace lapode

#endif  // LAPODE_COMMANDS_HPP
