#ifndef LAPODE_DATASET_HPP
#define LAPODE_DATASET_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lapode/numeric.hpp"

namespace lapode {

// Observation times and n x p observations. Times are strictly increasing.
struct Dataset {
    std::vector<double> times;
    Matrix y;  // n x p
    std::vector<std::string> columns;  // observation column names, length p

    int n() const { return static_cast<int>(y.rows()); }
    int p() const { return static_cast<int>(y.cols()); }

    void validate() const;
    bool operator==(const Dataset& other) const;
};

// CSV with header "t,y1,...,yp" and one row per observation time.
Dataset parse_csv(std::istream& in, const std::string& source = "<stream>");
Dataset load_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace lapode

#endif  // LAPODE_DATASET_HPP
