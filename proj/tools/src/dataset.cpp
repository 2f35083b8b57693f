#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace ppi::cli {
namespace {

std::string strip(const std::string& s) {
    const std::string junk = " \t\r\"'";
    std::size_t b = s.find_first_not_of(junk);
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(junk);
    return s.substr(b, e - b + 1);
}

char detect_delim(const std::string& header) {
    char best = ',';
    long best_count = -1;
    for (char d : {',', ';', '\t'}) {
        const long count = std::count(header.begin(), header.end(), d);
        if (count > best_count) {
            best = d;
            best_count = count;
        }
    }
    return best;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field(const std::string& raw, std::size_t row, const std::string& col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const DatasetError&) {
        throw;
    } catch (...) {
        throw DatasetError("row " + std::to_string(row) + ": bad numeric value '" +
                           raw + "' in column '" + col + "'");
    }
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw DatasetError(path + " is empty");
    const char delim = detect_delim(line);

    std::vector<std::string> names;
    for (const std::string& raw : split(line, delim)) names.push_back(strip(raw));

    long ir = -1, ifp = -1, iy = -1, ic = -1, ipi = -1;
    std::map<std::size_t, std::size_t> xcols;
    std::set<std::string> seen;
    std::vector<std::string> ignored;
    for (std::size_t j = 0; j < names.size(); ++j) {
        const std::string& nm = names[j];
        if (nm == "r" || nm == "f" || nm == "y" || nm == "c" || nm == "pi" ||
            (nm.size() > 1 && nm[0] == 'x')) {
            if (!seen.insert(nm).second)
                throw DatasetError("duplicate column '" + nm + "'");
        }
        if (nm == "r") {
            ir = static_cast<long>(j);
        } else if (nm == "f") {
            ifp = static_cast<long>(j);
        } else if (nm == "y") {
            iy = static_cast<long>(j);
        } else if (nm == "c") {
            ic = static_cast<long>(j);
        } else if (nm == "pi") {
            ipi = static_cast<long>(j);
        } else if (nm.size() > 1 && nm[0] == 'x' &&
                   nm.find_first_not_of("0123456789", 1) == std::string::npos) {
            xcols[std::stoul(nm.substr(1))] = j;
        } else {
            ignored.push_back(nm);
        }
    }
    if (ir < 0) throw DatasetError("missing required column 'r'");
    if (ifp < 0) throw DatasetError("missing required column 'f'");
    const std::size_t k = xcols.size();
    for (std::size_t t = 1; t <= k; ++t)
        if (!xcols.count(t))
            throw DatasetError("feature columns must run x1..x" + std::to_string(k) +
                               " without gaps");

    Dataset ds;
    ds.has_y = iy >= 0;
    ds.has_c = ic >= 0;
    ds.has_pi = ipi >= 0;
    ds.x.resize(k);
    if (!ignored.empty()) {
        std::string msg = "ignoring unrecognized columns:";
        for (const std::string& nm : ignored) msg += " '" + nm + "'";
        ds.warnings.push_back(msg);
    }

    std::vector<std::size_t> row_no;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        std::vector<std::string> fields = split(line, delim);
        if (fields.size() != names.size())
            throw DatasetError("row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(names.size()));
        for (std::string& fs : fields) fs = strip(fs);

        ds.r.push_back(parse_field(fields[ir], row, "r"));
        ds.f.push_back(parse_field(fields[ifp], row, "f"));
        if (ds.has_y) {
            const std::string& raw = fields[iy];
            ds.y.push_back(raw.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : parse_field(raw, row, "y"));
        }
        if (ds.has_c) {
            const double cv = parse_field(fields[ic], row, "c");
            if (cv != 0.0 && cv != 1.0)
                throw DatasetError("row " + std::to_string(row) + ": c must be 0 or 1");
            ds.c.push_back(static_cast<int>(cv));
        }
        if (ds.has_pi) ds.pi.push_back(parse_field(fields[ipi], row, "pi"));
        for (std::size_t t = 0; t < k; ++t) {
            const std::size_t j = xcols[t + 1];
            ds.x[t].push_back(parse_field(fields[j], row, names[j]));
        }
        row_no.push_back(row);
    }
    if (ds.rows() == 0) throw DatasetError(path + " has no data rows");

    if (ds.has_c && !ds.has_y)
        throw DatasetError("column 'c' requires a 'y' column for the labeled rows");
    if (ds.has_c && ds.has_y) {
        bool stray = false;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const bool have = !std::isnan(ds.y[i]);
            if (ds.c[i] == 1 && !have)
                throw DatasetError("row " + std::to_string(row_no[i]) +
                                   ": labeled row without a label");
            if (ds.c[i] == 0 && have) stray = true;
        }
        if (stray) ds.warnings.push_back("labels on rows with c=0 are ignored");
    } else if (ds.has_y) {
        ds.c.resize(ds.rows());
        for (std::size_t i = 0; i < ds.rows(); ++i)
            ds.c[i] = std::isnan(ds.y[i]) ? 0 : 1;
        ds.has_c = true;
        ds.warnings.push_back("no c column; rows with a label are treated as labeled");
    }
    return ds;
}

}  // namespace ppi::cli
