#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppi::cli {

struct DatasetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Pooled estimation table read from a delimited text file. The header names
// the columns: r (score) and f (prediction) are required; y (label, may be
// blank), c (0/1 labeled flag), pi (labeling probability), and x1..xk
// (labeling features) are optional. Comma, semicolon, or tab delimiters are
// detected from the header. When c is absent, rows with a label count as
// labeled.
struct Dataset {
    std::vector<double> r;
    std::vector<double> f;
    std::vector<double> y;   // NaN where blank
    std::vector<int> c;      // empty when the file has neither c nor y
    std::vector<double> pi;  // empty when absent
    std::vector<std::vector<double>> x;  // x[j] holds column x{j+1}
    bool has_y = false;
    bool has_c = false;
    bool has_pi = false;
    std::vector<std::string> warnings;

    std::size_t rows() const { return r.size(); }
};

Dataset load_dataset(const std::string& path);

}  // namespace ppi::cli
