#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "lapode/commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv)
{
    using namespace lapode;

    CLI::App app{"Laplace-approximated grid posteriors for ODE models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;
    std::map<std::string, std::string> overrides;
    const char* about[][2] = {
        {"simulate", "generate a synthetic dataset from a built-in model"},
        {"infer", "compute the posterior and draw samples"},
        {"predict", "posterior bands for the states, including future times"},
        {"summarize", "recompute summary statistics from samples.csv"},
    };
    for (const auto& [name, text] : about) {
        CLI::App* sub = app.add_subcommand(name, text);
        sub->set_help_flag("--help", "print this help message and exit");
        sub->add_option("--config", config_path, "file of 'key = value' lines")->check(CLI::ExistingFile);
        for (const auto& key : RunConfig::keys()) {
            sub->add_option_function<std::string>(
                "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "see README");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        for (const auto& [key, value] : overrides) {
            cfg.set(key, value);
        }
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "simulate") {
            cmd_simulate(cfg, std::cerr);
        } else if (cmd == "infer") {
            cmd_infer(cfg, std::cerr);
        } else if (cmd == "predict") {
            cmd_predict(cfg, std::cerr);
        } else {
            cmd_summarize(cfg, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const EvalError& e) {
        std::cerr << "ode evaluation failed: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
