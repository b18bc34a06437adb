#include "lapode/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lapode {

namespace {

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

bool parse_number(const std::string& text, double& value)
{
    if (text.empty()) {
        return false;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last && std::isfinite(value);
}

bool blank(const std::string& line)
{
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

void Dataset::validate() const
{
    if (times.empty() || y.rows() == 0) {
        throw SpecError("no observations");
    }
    if (static_cast<Eigen::Index>(times.size()) != y.rows()) {
        throw SpecError("dataset time count does not match observation rows");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw SpecError("dataset times must be strictly increasing (row " + std::to_string(i + 1) + ")");
        }
    }
    if (!y.allFinite()) {
        throw SpecError("dataset contains non-finite observations");
    }
}

bool Dataset::operator==(const Dataset& other) const
{
    return times == other.times && y.rows() == other.y.rows() && y.cols() == other.y.cols() &&
           y == other.y && columns == other.columns;
}

Dataset parse_csv(std::istream& in, const std::string& source)
{
    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!blank(line)) {
            header = split_fields(line);
            break;
        }
    }
    if (header.empty()) {
        throw SpecError(source + ": missing header row");
    }
    if (header.size() < 2 || header[0] != "t") {
        throw SpecError(source + ":" + std::to_string(line_no) +
                        ": header must be 't,y1,...,yp'");
    }
    const std::size_t p = header.size() - 1;

    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto fields = split_fields(line);
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        if (fields.size() != p + 1) {
            throw SpecError(where + "expected " + std::to_string(p + 1) + " fields, found " +
                            std::to_string(fields.size()));
        }
        double t = 0.0;
        if (!parse_number(fields[0], t)) {
            throw SpecError(where + "malformed time value '" + fields[0] + "'");
        }
        if (!times.empty()) {
            if (t == times.back()) {
                throw SpecError(where + "duplicate time " + fields[0]);
            }
            if (t < times.back()) {
                throw SpecError(where + "times are not increasing");
            }
        }
        times.push_back(t);
        for (std::size_t j = 1; j <= p; ++j) {
            double v = 0.0;
            if (!parse_number(fields[j], v)) {
                throw SpecError(where + "malformed value '" + fields[j] + "' in column " + header[j]);
            }
            values.push_back(v);
        }
    }
    if (times.empty()) {
        throw SpecError(source + ": no observations");
    }

    Dataset data;
    data.times = std::move(times);
    data.columns.assign(header.begin() + 1, header.end());
    data.y = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(data.times.size()), static_cast<Eigen::Index>(p));
    return data;
}

Dataset load_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SpecError("cannot open data file " + path.string());
    }
    return parse_csv(in, path.string());
}

std::string format_double(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data)
{
    out << "t";
    for (int j = 0; j < data.p(); ++j) {
        out << ","
            << (static_cast<std::size_t>(j) < data.columns.size() ? data.columns[static_cast<std::size_t>(j)]
                                                                   : "y" + std::to_string(j + 1));
    }
    out << "\n";
    for (int i = 0; i < data.n(); ++i) {
        out << format_double(data.times[static_cast<std::size_t>(i)]);
        for (int j = 0; j < data.p(); ++j) {
            out << "," << format_double(data.y(i, j));
        }
        out << "\n";
    }
}

void write_csv(const std::filesystem::path& path, const Dataset& data)
{
    std::ofstream out(path);
    if (!out) {
        throw SpecError("cannot write " + path.string());
    }
    write_csv(out, data);
}

}  // namespace lapode
