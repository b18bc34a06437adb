#ifndef LAPODE_CONFIG_HPP
#define LAPODE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lapode/ode.hpp"
#include "lapode/sensitivity.hpp"

namespace lapode {

// Invalid run configuration (unknown key, malformed value, missing file).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every run-level setting. The text form is one "key = value" per line,
// lists comma-separated, '#' starts a comment.
struct RunConfig {
    std::string model = "cooling";
    std::string data;      // input CSV (infer, predict)
    std::string out = "out";
    std::string samples;   // samples.csv for predict/summarize

    double a = 0.1;
    double b = 0.01;
    double c = 100.0;
    std::vector<double> mu_x1;  // empty: first observation

    Method method = Method::Rk4;
    std::vector<int> m = {1};   // several values: refine m along the list
    double rel_tol = 1e-3;
    SensitivityMode sensitivity = SensitivityMode::Discrete;
    bool closed_form = false;

    std::string sampler = "auto";  // grid | griddy | auto
    int M1 = 5;
    int M2 = 0;                    // 0: model default
    double eta = 1e-5;
    std::size_t N = 10000;
    std::size_t thin = 5;
    std::uint64_t seed = 20240601;
    int gibbs_points = 31;
    std::string gibbs_space = "theta";  // theta | z
    std::vector<double> theta0;    // empty: model's reference center
    bool find_mode = true;
    unsigned threads = 0;

    int horizon = 10;
    bool predictive = false;

    int n = 0;                     // simulate: 0 = model default
    double h = 0.0;
    double sigma2 = -1.0;          // < 0: model default
    std::vector<double> theta;     // simulate: empty = model default
    std::vector<double> x1;
    int m_fine = 100;

    void set(std::string_view key, std::string_view value);
    std::string to_text() const;

    static std::vector<std::string> keys();
};

RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a, used to fingerprint configurations.
std::uint64_t fnv1a(std::string_view text);

}  // namespace lapode

#endif  // LAPODE_CONFIG_HPP
