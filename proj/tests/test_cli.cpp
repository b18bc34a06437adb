#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lapode/commands.hpp"
#include "lapode/dataset.hpp"
#include "support.hpp"

using namespace lapode;
using namespace lapode::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("lapode_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(LAPODE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig simulated(const std::string& name, const std::string& model, std::uint64_t seed)
{
    RunConfig cfg;
    cfg.model = model;
    cfg.seed = seed;
    cfg.out = scratch(name).string();
    std::ostringstream log;
    cmd_simulate(cfg, log);
    cfg.data = (fs::path(cfg.out) / "data.csv").string();
    return cfg;
}

}  // namespace

TEST_CASE("configuration text")
{
    const RunConfig cfg = parse_config("# cooling run\nmodel = cooling\nm = 1, 2, 4  # refine\nN = 500\n"
                                       "theta0 = -0.5,80\nclosed_form = yes\n",
                                       "run.cfg");
    CHECK(cfg.model == "cooling");
    CHECK(cfg.m == std::vector<int>{1, 2, 4});
    CHECK(cfg.N == 500);
    CHECK(cfg.theta0 == std::vector<double>{-0.5, 80.0});
    CHECK(cfg.closed_form);
    CHECK(cfg.a == 0.1);
    CHECK(cfg.c == 100.0);

    CHECK(parse_config(cfg.to_text(), "copy").to_text() == cfg.to_text());

    auto message = [](const std::string& text) {
        try {
            parse_config(text, "bad.cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("model = fhn\ncolour = red\n").find("bad.cfg:2") != std::string::npos);
    CHECK(message("N = 0\n").find("at least one draw") != std::string::npos);
    CHECK_FALSE(message("m = 4, 2\n").empty());
    CHECK_FALSE(message("eta = 2\n").empty());
    CHECK_FALSE(message("method = leapfrog\n").empty());
    CHECK_FALSE(message("just text\n").empty());
    CHECK_FALSE(message("gibbs_space = w\n").empty());
    CHECK(fnv1a("abc") != fnv1a("abd"));
}

TEST_CASE("reading observation files")
{
    std::istringstream ok("t,y1\n0,3.929\n10,5.308\n");
    const Dataset d = parse_csv(ok);
    CHECK(d.n() == 2);
    CHECK(d.times == std::vector<double>{0.0, 10.0});
    CHECK(d.y(1, 0) == 5.308);

    std::istringstream empty("t,y1\n");
    CHECK_THROWS_WITH_AS(parse_csv(empty), doctest::Contains("no observations"), SpecError);

    std::istringstream unsorted("t,y1\n0,1\n2,2\n1,3\n");
    CHECK_THROWS_WITH_AS(parse_csv(unsorted, "obs.csv"), doctest::Contains("obs.csv:4"), SpecError);

    std::istringstream ragged("t,y1,y2\n0,1\n");
    CHECK_THROWS_AS(parse_csv(ragged), SpecError);
}

TEST_CASE("written data read back exactly")
{
    const Dataset d = simulate_data(fitzhugh_nagumo(), 31);
    std::stringstream buf;
    write_csv(buf, d);
    CHECK(parse_csv(buf) == d);
}

TEST_CASE("simulate command")
{
    const RunConfig cooling = simulated("sim_cooling", "cooling", 5);
    const Dataset c = load_csv(cooling.data);
    CHECK(c.n() == 20);
    CHECK(c.times.back() == doctest::Approx(14.25));
    CHECK(fs::exists(fs::path(cooling.out) / "truth.json"));

    const RunConfig fhn = simulated("sim_fhn", "fhn", 5);
    const Dataset f = load_csv(fhn.data);
    CHECK(f.n() == 100);
    CHECK(f.p() == 2);

    const RunConfig again = simulated("sim_fhn_again", "fhn", 5);
    CHECK(slurp(fhn.data) == slurp(again.data));

    RunConfig bad;
    bad.model = "fhn";
    bad.theta = {1.0};
    bad.out = scratch("sim_bad").string();
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_simulate(bad, log), ConfigError);
}

TEST_CASE("infer, summarize and predict on the cooling model")
{
    RunConfig cfg = simulated("infer_cooling", "cooling", 7);
    cfg.N = 2000;
    cfg.M2 = 15;
    std::ostringstream log;
    const InferenceResult res = cmd_infer(cfg, log);
    const fs::path dir(cfg.out);
    for (const char* f : {"samples.csv", "summary.csv", "grid.csv", "manifest.json"}) {
        CHECK(fs::exists(dir / f));
    }
    CHECK(res.run.samples.size() == 2000);

    const Table samples = read_table(dir / "samples.csv");
    CHECK(samples.columns == std::vector<std::string>{"theta1", "theta2", "tau2", "sigma2"});
    const double theta1_mean = samples.values.col(0).mean();
    CHECK(theta1_mean > -0.8);
    CHECK(theta1_mean < -0.3);

    std::istringstream summary(slurp(dir / "summary.csv"));
    std::string line;
    std::getline(summary, line);
    CHECK(line == "parameter,mean,median,q05,q95");
    for (std::size_t k = 0; k < samples.columns.size(); ++k) {
        REQUIRE(std::getline(summary, line));
        const Vector col = samples.values.col(static_cast<Eigen::Index>(k));
        const ParameterSummary s = summarize_draws(std::span<const double>(col.data(), col.size()));
        CHECK(line == samples.columns[k] + "," + format_double(s.mean) + "," + format_double(s.median) + "," +
                          format_double(s.q05) + "," + format_double(s.q95));
    }

    cfg.horizon = 5;
    cfg.predictive = true;
    const PredictionBands bands = cmd_predict(cfg, log);
    CHECK(bands.times.size() == 25);
    CHECK(bands.excluded == 0);
    const Table pred = read_table(dir / "predictions.csv");
    CHECK(pred.values.rows() == 25);
    for (Eigen::Index i = 0; i < pred.values.rows(); ++i) {
        CHECK(pred.values(i, 1) == (i >= 20 ? 1.0 : 0.0));
        CHECK(pred.values(i, pred.column("x1_q05")) <= pred.values(i, pred.column("x1_mean")));
        CHECK(pred.values(i, pred.column("x1_mean")) <= pred.values(i, pred.column("x1_q95")));
        CHECK(pred.values(i, pred.column("y1_q05")) <= pred.values(i, pred.column("x1_q05")) + 1e-9);
    }

    const fs::path copy = scratch("summarize_copy");
    fs::copy_file(dir / "samples.csv", copy / "samples.csv");
    RunConfig sc;
    sc.out = copy.string();
    std::ostringstream table;
    cmd_summarize(sc, table);
    CHECK(slurp(copy / "summary.csv") == slurp(dir / "summary.csv"));
    CHECK(table.str().find("theta1") != std::string::npos);
}

TEST_CASE("griddy Gibbs agrees with grid sampling on either axis system")
{
    const ModelCatalogEntry e = newton_cooling(20);
    const Dataset data = simulate_data(e, 14);
    const PriorSpec pr = e.prior_for(data);
    PipelineOptions o;
    o.M2 = 20;
    o.N = 4000;
    const PosteriorRun grid = run_posterior(e, data, pr, 1, e.theta_center, o);
    o.sampler = "griddy";
    for (const char* space : {"theta", "z"}) {
        o.gibbs_space = space;
        const PosteriorRun gibbs = run_posterior(e, data, pr, 1, e.theta_center, o);
        CAPTURE(space);
        CHECK(gibbs.samples.method == "griddy-gibbs");
        CHECK(std::abs(gibbs.mean[0] - grid.mean[0]) < 0.03);
        CHECK(std::abs(gibbs.mean[1] - grid.mean[1]) < 1.0);
    }
    o.gibbs_space = "w";
    CHECK_THROWS_AS(run_posterior(e, data, pr, 1, e.theta_center, o), SpecError);
}

TEST_CASE("prediction bands collapse for a concentrated posterior")
{
    const ModelCatalogEntry e = newton_cooling(20);
    const Dataset data = simulate_data(e, 3);
    const LaplacePosterior post(std::make_shared<ClosedFormTrajectory>(1, 2, data.times, e.closed_form), data,
                                e.prior_for(data));
    const Matrix theta = e.theta_true.transpose().replicate(50, 1);
    const std::vector<double> tau2(50, 1e14);
    const TimeGrid ext = TimeGrid(data.times).extended(3);
    const PredictionBands b = predict_bands(
        post, [&](const Vector& x1, const Vector& th) { return e.closed_form(x1, th, ext.times()).states; },
        ext.times(), data.n(), theta, tau2, false, 1);
    CHECK(b.used == 50);
    CHECK((b.q95 - b.q05).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(b.y_mean.size() == 0);
}

TEST_CASE("command-line exit codes")
{
    const fs::path dir = scratch("exit_codes");
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("infer --help") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("infer --N 0") == 2);
    CHECK(run_cli("infer --config " + (dir / "missing.cfg").string()) == 2);
    CHECK(run_cli("infer --model cooling --out " + dir.string()) == 2);
    CHECK(run_cli("simulate --model lorenz --out " + dir.string()) == 2);

    REQUIRE(run_cli("simulate --model cooling --seed 3 --out " + dir.string()) == 0);
    const std::string data = (dir / "data.csv").string();
    CHECK(run_cli("infer --model fhn --data " + data + " --out " + dir.string()) == 2);
    CHECK(run_cli("infer --model cooling --theta0 0.5,80 --find_mode false --data " + data + " --out " +
                  dir.string()) == 3);
    CHECK(run_cli("infer --model cooling --N 500 --M2 10 --data " + data + " --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "manifest.json"));
}
