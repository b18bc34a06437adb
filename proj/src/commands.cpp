#include "lapode/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "lapode/dataset.hpp"

namespace lapode {

namespace fs = std::filesystem;
using json = nlohmann::json;

int Table::column(const std::string& name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json to_json(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(to_json(Vector(m.row(i).transpose())));
    }
    return rows;
}

Vector to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ModelCatalogEntry entry_for(const RunConfig& cfg)
{
    if (cfg.model == "cooling" && cfg.n > 0 && cfg.h == 0.0) {
        return newton_cooling(cfg.n);
    }
    ModelCatalogEntry e = model_by_name(cfg.model);
    if (cfg.n > 0) {
        e.n = cfg.n;
    }
    if (cfg.h > 0.0) {
        e.h = cfg.h;
    }
    return e;
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << j.dump(2) << "\n";
}

}  // namespace

Table read_table(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    Table t;
    std::string line;
    if (!std::getline(in, line)) {
        throw SpecError(path.string() + ": missing header row");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    t.columns = split(line);
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split(line);
        if (fields.size() != t.columns.size()) {
            throw SpecError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.columns.size()) + " fields");
        }
        std::vector<double> row(fields.size());
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const auto& f = fields[k];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[k]);
            if (ec != std::errc() || ptr != f.data() + f.size()) {
                throw SpecError(path.string() + ":" + std::to_string(line_no) + ": malformed value '" + f + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
    }
    return t;
}

void write_table(const fs::path& path, const Table& table)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    for (std::size_t k = 0; k < table.columns.size(); ++k) {
        out << (k ? "," : "") << table.columns[k];
    }
    out << "\n";
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        for (Eigen::Index k = 0; k < table.values.cols(); ++k) {
            out << (k ? "," : "") << format_double(table.values(i, k));
        }
        out << "\n";
    }
}

Table samples_table(const SampleSet& samples)
{
    const auto N = static_cast<Eigen::Index>(samples.size());
    const auto q = samples.theta.cols();
    Table t;
    for (Eigen::Index j = 0; j < q; ++j) {
        t.columns.push_back("theta" + std::to_string(j + 1));
    }
    t.columns.push_back("tau2");
    t.columns.push_back("sigma2");
    t.values.resize(N, q + 2);
    t.values.leftCols(q) = samples.theta;
    for (Eigen::Index i = 0; i < N; ++i) {
        const double tau2 = samples.tau2[static_cast<std::size_t>(i)];
        t.values(i, q) = tau2;
        t.values(i, q + 1) = 1.0 / tau2;
    }
    return t;
}

void write_summary(const fs::path& path, const Table& samples)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << "parameter,mean,median,q05,q95\n";
    for (std::size_t k = 0; k < samples.columns.size(); ++k) {
        const Vector col = samples.values.col(static_cast<Eigen::Index>(k));
        const ParameterSummary s = summarize_draws(std::span<const double>(col.data(), col.size()));
        out << samples.columns[k] << "," << format_double(s.mean) << "," << format_double(s.median) << ","
            << format_double(s.q05) << "," << format_double(s.q95) << "\n";
    }
}

PredictionBands predict_bands(const LaplacePosterior& posterior, const Solver& solve,
                              const std::vector<double>& times, int observed, const Matrix& theta_draws,
                              const std::vector<double>& tau2_draws, bool predictive, std::uint64_t seed)
{
    if (theta_draws.rows() != static_cast<Eigen::Index>(tau2_draws.size()) || tau2_draws.empty()) {
        throw SpecError("prediction needs matching, non-empty theta and tau2 draws");
    }
    const auto T = static_cast<Eigen::Index>(times.size());
    const int p = posterior.p();
    std::map<std::vector<double>, LaplaceEval> cache;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Matrix> paths;
    std::vector<Matrix> noisy;
    PredictionBands out;
    out.times = times;
    out.observed = observed;

    for (Eigen::Index d = 0; d < theta_draws.rows(); ++d) {
        const Vector theta = theta_draws.row(d).transpose();
        const double tau2 = tau2_draws[static_cast<std::size_t>(d)];
        const std::vector<double> key(theta.data(), theta.data() + theta.size());
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, posterior.evaluate(theta)).first;
        }
        try {
            if (!it->second.finite()) {
                throw NumericalError(it->second.diagnostic);
            }
            const Vector x1 = sample_gaussian(x1_conditional(it->second, tau2), rng);
            Matrix path = solve(x1, theta);
            if (path.rows() != T || !path.allFinite()) {
                throw NumericalError("trajectory failed");
            }
            if (predictive) {
                Matrix y = path;
                const double sd = std::sqrt(1.0 / tau2);
                for (Eigen::Index i = 0; i < y.size(); ++i) {
                    y.data()[i] += sd * normal(rng);
                }
                noisy.push_back(std::move(y));
            }
            paths.push_back(std::move(path));
        } catch (const EvalError&) {
            ++out.excluded;
        } catch (const NumericalError&) {
            ++out.excluded;
        }
    }
    out.used = paths.size();
    if (paths.empty()) {
        throw NumericalError("prediction: every posterior draw failed to produce a trajectory");
    }

    auto bands = [&](const std::vector<Matrix>& src, Matrix& mean, Matrix& lo, Matrix& hi) {
        mean.resize(T, p);
        lo.resize(T, p);
        hi.resize(T, p);
        std::vector<double> v(src.size());
        for (Eigen::Index i = 0; i < T; ++i) {
            for (int j = 0; j < p; ++j) {
                for (std::size_t d = 0; d < src.size(); ++d) {
                    v[d] = src[d](i, j);
                }
                const ParameterSummary s = summarize_draws(v);
                mean(i, j) = s.mean;
                lo(i, j) = s.q05;
                hi(i, j) = s.q95;
            }
        }
    };
    bands(paths, out.mean, out.q05, out.q95);
    if (predictive) {
        bands(noisy, out.y_mean, out.y_q05, out.y_q95);
    }
    return out;
}

RunSetup resolve(const RunConfig& cfg)
{
    RunSetup s;
    try {
        s.entry = entry_for(cfg);
    } catch (const SpecError& e) {
        throw ConfigError(e.what());
    }
    if (cfg.data.empty()) {
        throw ConfigError("a data file is required (--data)");
    }
    if (!fs::exists(cfg.data)) {
        throw ConfigError("data file not found: " + cfg.data);
    }
    s.data = load_csv(cfg.data);
    if (s.data.p() != s.entry.system.p) {
        throw ConfigError("data has " + std::to_string(s.data.p()) + " observation columns, model '" +
                          s.entry.name + "' has " + std::to_string(s.entry.system.p) + " states");
    }
    s.prior = s.entry.prior_for(s.data);
    s.prior.a = cfg.a;
    s.prior.b = cfg.b;
    s.prior.c = cfg.c;
    if (!cfg.mu_x1.empty()) {
        if (static_cast<int>(cfg.mu_x1.size()) != s.entry.system.p) {
            throw ConfigError("mu_x1 needs " + std::to_string(s.entry.system.p) + " values");
        }
        s.prior.mu_x1 = to_vector(cfg.mu_x1);
    }
    s.theta_start = cfg.theta0.empty() ? s.entry.theta_center : to_vector(cfg.theta0);
    if (s.theta_start.size() != s.entry.system.q) {
        throw ConfigError("theta0 needs " + std::to_string(s.entry.system.q) + " values");
    }
    PipelineOptions& o = s.options;
    o.method = cfg.method;
    o.sensitivity = cfg.sensitivity;
    o.closed_form = cfg.closed_form;
    o.sampler = cfg.sampler;
    o.M1 = cfg.M1;
    o.M2 = cfg.M2 > 0 ? cfg.M2 : s.entry.default_M2;
    o.eta = cfg.eta;
    o.N = cfg.N;
    o.thin = cfg.thin;
    o.seed = cfg.seed;
    o.gibbs_points = cfg.gibbs_points;
    o.gibbs_space = cfg.gibbs_space;
    o.find_mode = cfg.find_mode;
    o.threads = cfg.threads;
    if (o.closed_form && !s.entry.closed_form) {
        throw ConfigError("model '" + s.entry.name + "' has no closed-form solution");
    }
    return s;
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log)
{
    ModelCatalogEntry e;
    try {
        e = entry_for(cfg);
    } catch (const SpecError& ex) {
        throw ConfigError(ex.what());
    }
    if (!cfg.theta.empty()) {
        if (static_cast<int>(cfg.theta.size()) != e.system.q) {
            throw ConfigError("theta needs " + std::to_string(e.system.q) + " values");
        }
        e.theta_true = to_vector(cfg.theta);
    }
    if (!cfg.x1.empty()) {
        if (static_cast<int>(cfg.x1.size()) != e.system.p) {
            throw ConfigError("x1 needs " + std::to_string(e.system.p) + " values");
        }
        e.x1_true = to_vector(cfg.x1);
    }
    if (cfg.sigma2 >= 0.0) {
        e.sigma2 = cfg.sigma2;
    }
    const Dataset data = simulate_data(e, cfg.seed, cfg.m_fine);
    const fs::path dir(cfg.out);
    ensure_dir(dir);
    write_csv(dir / "data.csv", data);

    json truth;
    truth["version"] = kVersion;
    truth["model"] = e.name;
    truth["theta"] = to_json(e.theta_true);
    truth["x1"] = to_json(e.x1_true);
    truth["sigma2"] = e.sigma2;
    truth["n"] = e.n;
    truth["h"] = e.h;
    truth["seed"] = cfg.seed;
    truth["m_fine"] = cfg.m_fine;
    truth["absolute_value"] = e.positive_data;
    write_json(dir / "truth.json", truth);
    log << "wrote " << (dir / "data.csv").string() << " (" << data.n() << " rows, p = " << data.p() << ")\n";
}

InferenceResult cmd_infer(const RunConfig& cfg, std::ostream& log)
{
    const RunSetup s = resolve(cfg);
    const fs::path dir(cfg.out);
    ensure_dir(dir);

    log << "model " << s.entry.name << ", n = " << s.data.n() << ", p = " << s.data.p() << ", q = "
        << s.entry.system.q << "\n";
    InferenceResult res = infer(s.entry, s.data, s.prior, cfg.m, cfg.rel_tol, s.theta_start, s.options);
    const PosteriorRun& run = res.run;

    const Table samples = samples_table(run.samples);
    write_table(dir / "samples.csv", samples);
    write_summary(dir / "summary.csv", samples);

    Table grid;
    const int q = s.entry.system.q;
    for (int j = 0; j < q; ++j) {
        grid.columns.push_back("theta" + std::to_string(j + 1));
    }
    grid.columns.push_back("log_post");
    grid.columns.push_back("mass");
    if (run.sampler == "grid") {
        grid.values.resize(static_cast<Eigen::Index>(run.grid.size()), q + 2);
        for (std::size_t k = 0; k < run.grid.size(); ++k) {
            const auto r = static_cast<Eigen::Index>(k);
            grid.values.row(r).head(q) = run.grid.theta[k].transpose();
            grid.values(r, q) = run.grid.log_post[k];
            grid.values(r, q + 1) = run.grid.mass[k];
        }
    } else {
        std::map<std::vector<double>, std::size_t> counts;
        for (Eigen::Index i = 0; i < run.samples.theta.rows(); ++i) {
            const Vector t = run.samples.theta.row(i).transpose();
            ++counts[std::vector<double>(t.data(), t.data() + t.size())];
        }
        grid.columns[static_cast<std::size_t>(q)] = "count";
        grid.values.resize(static_cast<Eigen::Index>(counts.size()), q + 2);
        Eigen::Index r = 0;
        for (const auto& [theta, count] : counts) {
            for (int j = 0; j < q; ++j) {
                grid.values(r, j) = theta[static_cast<std::size_t>(j)];
            }
            grid.values(r, q) = static_cast<double>(count);
            grid.values(r, q + 1) = static_cast<double>(count) / static_cast<double>(run.samples.size());
            ++r;
        }
    }
    write_table(dir / "grid.csv", grid);

    const std::string cfg_text = cfg.to_text();
    json m;
    m["version"] = kVersion;
    m["command"] = "infer";
    m["config"] = cfg_text;
    m["config_hash"] = hex64(fnv1a(cfg_text));
    m["seed"] = cfg.seed;
    m["model"] = s.entry.name;
    m["data"] = cfg.data;
    m["n"] = s.data.n();
    m["p"] = s.data.p();
    m["q"] = q;
    m["method"] = std::string(to_string(s.options.method));
    m["sensitivity"] = std::string(to_string(s.options.sensitivity));
    m["closed_form"] = s.options.closed_form;
    m["sampler"] = run.sampler;
    if (run.sampler == "griddy") {
        m["gibbs_points"] = s.options.gibbs_points;
        m["gibbs_space"] = s.options.gibbs_space;
    }
    m["m_chosen"] = run.m;
    m["m_stabilized"] = res.refine.stabilized;
    json hist = json::array();
    for (const auto& [mm, mean] : res.refine.history) {
        hist.push_back({{"m", mm}, {"mean", to_json(mean)}});
    }
    m["m_history"] = hist;
    m["theta_start"] = to_json(run.theta_start);
    m["theta0"] = to_json(run.theta0);
    m["sigma_hat"] = to_json(run.sigma_hat);
    json ranges = json::array();
    for (const auto& r : run.spec.ranges) {
        ranges.push_back({r.lower, r.upper});
    }
    m["z_ranges"] = ranges;
    m["M1"] = s.options.M1;
    m["M2"] = s.options.M2;
    m["eta"] = s.options.eta;
    m["N"] = s.options.N;
    m["thin"] = s.options.thin;
    m["grid_points"] = run.grid.size();
    m["evaluations"] = run.evaluations;
    m["diverged_points"] = run.diverged;
    m["multistart"] = {{"starts", run.multistart.starts},
                       {"failed", run.multistart.failed},
                       {"max_disagreement", run.multistart.max_disagreement}};
    m["posterior_mean"] = to_json(run.mean);
    m["timings_seconds"] = run.seconds;
    m["total_seconds"] = res.seconds;
    std::vector<std::string> warnings = run.warnings;
    if (cfg.m.size() > 1 && !res.refine.stabilized) {
        warnings.push_back("posterior mean did not stabilize over the m sequence; using the last m");
    }
    m["warnings"] = warnings;
    write_json(dir / "manifest.json", m);

    for (const auto& w : warnings) {
        log << "warning: " << w << "\n";
    }
    log << "m = " << run.m << ", " << run.samples.size() << " draws, " << run.evaluations
        << " posterior evaluations, " << res.seconds << " s\n";
    log << "wrote samples.csv, summary.csv, grid.csv, manifest.json to " << dir.string() << "\n";
    return res;
}

PredictionBands cmd_predict(const RunConfig& cfg, std::ostream& log)
{
    const RunSetup s = resolve(cfg);
    const fs::path dir(cfg.out);
    const fs::path samples_path = cfg.samples.empty() ? dir / "samples.csv" : fs::path(cfg.samples);
    const Table samples = read_table(samples_path);
    const int q = s.entry.system.q;
    for (int j = 0; j < q; ++j) {
        if (samples.column("theta" + std::to_string(j + 1)) != j) {
            throw ConfigError(samples_path.string() + ": expected columns theta1..theta" + std::to_string(q));
        }
    }
    const int tau_col = samples.column("tau2");
    if (tau_col < 0) {
        throw ConfigError(samples_path.string() + ": missing tau2 column");
    }

    int m = cfg.m.front();
    const fs::path manifest_path = samples_path.parent_path() / "manifest.json";
    if (cfg.m.size() > 1 && fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        m = json::parse(in).at("m_chosen").get<int>();
    }

    const LaplacePosterior posterior(make_trajectory_model(s.entry, s.data.times, m, s.options), s.data, s.prior);
    const TimeGrid extended = TimeGrid(s.data.times, m).extended(cfg.horizon);
    Solver solve;
    if (s.options.closed_form) {
        solve = [&](const Vector& x1, const Vector& theta) {
            return s.entry.closed_form(x1, theta, extended.times()).states;
        };
    } else {
        solve = [&](const Vector& x1, const Vector& theta) {
            return integrate(s.entry.system, x1, theta, extended, s.options.method).states;
        };
    }
    const Matrix theta = samples.values.leftCols(q);
    const Vector tau = samples.values.col(tau_col);
    const std::vector<double> tau2(tau.data(), tau.data() + tau.size());
    PredictionBands bands =
        predict_bands(posterior, solve, extended.times(), s.data.n(), theta, tau2, cfg.predictive, cfg.seed);

    ensure_dir(dir);
    Table out;
    out.columns = {"t", "future"};
    const int p = s.data.p();
    for (int j = 1; j <= p; ++j) {
        for (const char* stat : {"mean", "q05", "q95"}) {
            out.columns.push_back("x" + std::to_string(j) + "_" + stat);
        }
    }
    if (cfg.predictive) {
        for (int j = 1; j <= p; ++j) {
            for (const char* stat : {"mean", "q05", "q95"}) {
                out.columns.push_back("y" + std::to_string(j) + "_" + stat);
            }
        }
    }
    const auto T = static_cast<Eigen::Index>(bands.times.size());
    out.values.resize(T, static_cast<Eigen::Index>(out.columns.size()));
    for (Eigen::Index i = 0; i < T; ++i) {
        Eigen::Index c = 0;
        out.values(i, c++) = bands.times[static_cast<std::size_t>(i)];
        out.values(i, c++) = i >= bands.observed ? 1.0 : 0.0;
        for (int j = 0; j < p; ++j) {
            out.values(i, c++) = bands.mean(i, j);
            out.values(i, c++) = bands.q05(i, j);
            out.values(i, c++) = bands.q95(i, j);
        }
        if (cfg.predictive) {
            for (int j = 0; j < p; ++j) {
                out.values(i, c++) = bands.y_mean(i, j);
                out.values(i, c++) = bands.y_q05(i, j);
                out.values(i, c++) = bands.y_q95(i, j);
            }
        }
    }
    write_table(dir / "predictions.csv", out);
    const double total = static_cast<double>(bands.used + bands.excluded);
    if (bands.excluded > 0) {
        log << (static_cast<double>(bands.excluded) > 0.1 * total ? "warning: " : "") << bands.excluded << " of "
            << static_cast<std::size_t>(total) << " draws excluded (trajectory failure)\n";
    }
    log << "wrote " << (dir / "predictions.csv").string() << " (" << T << " times, " << cfg.horizon
        << " ahead)\n";
    return bands;
}

void cmd_summarize(const RunConfig& cfg, std::ostream& log)
{
    const fs::path dir(cfg.out);
    const fs::path samples_path = cfg.samples.empty() ? dir / "samples.csv" : fs::path(cfg.samples);
    const Table samples = read_table(samples_path);
    if (samples.values.rows() == 0) {
        throw SpecError(samples_path.string() + ": at least one draw is required");
    }
    ensure_dir(dir);
    write_summary(dir / "summary.csv", samples);
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %12s %12s %12s %12s\n", "parameter", "mean", "median", "q05", "q95");
    log << line;
    for (std::size_t k = 0; k < samples.columns.size(); ++k) {
        const Vector col = samples.values.col(static_cast<Eigen::Index>(k));
        const ParameterSummary s = summarize_draws(std::span<const double>(col.data(), col.size()));
        std::snprintf(line, sizeof line, "%-10s %12.6g %12.6g %12.6g %12.6g\n", samples.columns[k].c_str(), s.mean,
                      s.median, s.q05, s.q95);
        log << line;
    }
}

}  // namespace lapode
