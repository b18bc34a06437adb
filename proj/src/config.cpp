#include "lapode/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lapode/dataset.hpp"

namespace lapode {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text)
{
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key));
    }
    return value;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text)
{
    std::vector<T> out;
    text = trim(text);
    if (text.empty()) {
        return out;
    }
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        out.push_back(parse_number<T>(key, text.substr(pos, comma - pos)));
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view text)
{
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw ConfigError("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

template <class T>
std::string join(const std::vector<T>& values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) {
            s += ",";
        }
        if constexpr (std::is_floating_point_v<T>) {
            s += format_double(values[i]);
        } else {
            s += std::to_string(values[i]);
        }
    }
    return s;
}

template <class T>
T non_negative(std::string_view key, T value)
{
    if (value < T(0)) {
        throw ConfigError(std::string(key) + " must be non-negative");
    }
    return value;
}

template <class T>
T positive(std::string_view key, T value)
{
    if (!(value > T(0))) {
        throw ConfigError(std::string(key) + " must be positive");
    }
    return value;
}

}  // namespace

std::vector<std::string> RunConfig::keys()
{
    return {"model", "data",    "out",        "samples", "a",         "b",         "c",          "mu_x1",
            "method", "m",      "rel_tol",    "sensitivity", "closed_form", "sampler", "M1",      "M2",
            "eta",   "N",       "thin",       "seed",    "gibbs_points", "gibbs_space", "theta0", "find_mode",  "threads",
            "horizon", "predictive", "n",     "h",       "sigma2",    "theta",     "x1",         "m_fine"};
}

void RunConfig::set(std::string_view key, std::string_view raw)
{
    const std::string_view value = trim(raw);
    try {
        if (key == "model") {
            model = value;
        } else if (key == "data") {
            data = value;
        } else if (key == "out") {
            out = value;
        } else if (key == "samples") {
            samples = value;
        } else if (key == "a") {
            a = positive(key, parse_number<double>(key, value));
        } else if (key == "b") {
            b = positive(key, parse_number<double>(key, value));
        } else if (key == "c") {
            c = positive(key, parse_number<double>(key, value));
        } else if (key == "mu_x1") {
            mu_x1 = value == "first-observation" ? std::vector<double>{} : parse_list<double>(key, value);
        } else if (key == "method") {
            method = parse_method(value);
        } else if (key == "m") {
            m = parse_list<int>(key, value);
            if (m.empty()) {
                throw ConfigError("m needs at least one value");
            }
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (m[i] < 1 || (i > 0 && m[i] <= m[i - 1])) {
                    throw ConfigError("m values must be positive and increasing");
                }
            }
        } else if (key == "rel_tol") {
            rel_tol = positive(key, parse_number<double>(key, value));
        } else if (key == "sensitivity") {
            sensitivity = parse_sensitivity_mode(value);
        } else if (key == "closed_form") {
            closed_form = parse_bool(key, value);
        } else if (key == "sampler") {
            if (value != "grid" && value != "griddy" && value != "auto") {
                throw ConfigError("sampler must be grid, griddy or auto");
            }
            sampler = value;
        } else if (key == "M1") {
            M1 = positive(key, parse_number<int>(key, value));
        } else if (key == "M2") {
            M2 = non_negative(key, parse_number<int>(key, value));
        } else if (key == "eta") {
            eta = parse_number<double>(key, value);
            if (!(eta > 0.0 && eta < 1.0)) {
                throw ConfigError("eta must lie in (0, 1)");
            }
        } else if (key == "N") {
            N = parse_number<std::size_t>(key, value);
            if (N == 0) {
                throw ConfigError("N: at least one draw is required");
            }
        } else if (key == "thin") {
            thin = positive(key, parse_number<std::size_t>(key, value));
        } else if (key == "seed") {
            seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "gibbs_points") {
            gibbs_points = positive(key, parse_number<int>(key, value));
        } else if (key == "gibbs_space") {
            if (value != "theta" && value != "z") {
                throw ConfigError("gibbs_space must be theta or z");
            }
            gibbs_space = value;
        } else if (key == "theta0") {
            theta0 = parse_list<double>(key, value);
        } else if (key == "find_mode") {
            find_mode = parse_bool(key, value);
        } else if (key == "threads") {
            threads = parse_number<unsigned>(key, value);
        } else if (key == "horizon") {
            horizon = non_negative(key, parse_number<int>(key, value));
        } else if (key == "predictive") {
            predictive = parse_bool(key, value);
        } else if (key == "n") {
            n = non_negative(key, parse_number<int>(key, value));
        } else if (key == "h") {
            h = non_negative(key, parse_number<double>(key, value));
        } else if (key == "sigma2") {
            sigma2 = value == "default" ? -1.0 : non_negative(key, parse_number<double>(key, value));
        } else if (key == "theta") {
            theta = parse_list<double>(key, value);
        } else if (key == "x1") {
            x1 = parse_list<double>(key, value);
        } else if (key == "m_fine") {
            m_fine = positive(key, parse_number<int>(key, value));
        } else {
            throw ConfigError("unknown configuration key '" + std::string(key) + "'");
        }
    } catch (const SpecError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

std::string RunConfig::to_text() const
{
    std::ostringstream o;
    o << "model = " << model << "\n"
      << "data = " << data << "\n"
      << "out = " << out << "\n"
      << "samples = " << samples << "\n"
      << "a = " << format_double(a) << "\n"
      << "b = " << format_double(b) << "\n"
      << "c = " << format_double(c) << "\n"
      << "mu_x1 = " << (mu_x1.empty() ? std::string("first-observation") : join(mu_x1)) << "\n"
      << "method = " << to_string(method) << "\n"
      << "m = " << join(m) << "\n"
      << "rel_tol = " << format_double(rel_tol) << "\n"
      << "sensitivity = " << to_string(sensitivity) << "\n"
      << "closed_form = " << (closed_form ? "true" : "false") << "\n"
      << "sampler = " << sampler << "\n"
      << "M1 = " << M1 << "\n"
      << "M2 = " << M2 << "\n"
      << "eta = " << format_double(eta) << "\n"
      << "N = " << N << "\n"
      << "thin = " << thin << "\n"
      << "seed = " << seed << "\n"
      << "gibbs_points = " << gibbs_points << "\n"
      << "gibbs_space = " << gibbs_space << "\n"
      << "theta0 = " << join(theta0) << "\n"
      << "find_mode = " << (find_mode ? "true" : "false") << "\n"
      << "threads = " << threads << "\n"
      << "horizon = " << horizon << "\n"
      << "predictive = " << (predictive ? "true" : "false") << "\n"
      << "n = " << n << "\n"
      << "h = " << format_double(h) << "\n"
      << "sigma2 = " << (sigma2 < 0.0 ? std::string("default") : format_double(sigma2)) << "\n"
      << "theta = " << join(theta) << "\n"
      << "x1 = " << join(x1) << "\n"
      << "m_fine = " << m_fine << "\n";
    return o.str();
}

RunConfig parse_config(std::string_view text, const std::string& source)
{
    RunConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        try {
            cfg.set(key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::uint64_t fnv1a(std::string_view text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace lapode
