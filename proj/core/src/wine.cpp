#include "ppi/wine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ppi/sim.hpp"

namespace ppi {

namespace {

std::vector<std::string> split_semicolon(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ';')) out.push_back(field);
    if (!line.empty() && line.back() == ';') out.emplace_back();
    return out;
}

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    auto junk = [](char ch) {
        return ch == ' ' || ch == '"' || ch == '\r' || ch == '\t';
    };
    while (a < b && junk(s[a])) ++a;
    while (b > a && junk(s[b - 1])) --b;
    return s.substr(a, b - a);
}

std::size_t column_index(const WineTable& t, const std::string& name) {
    for (std::size_t j = 0; j < t.columns.size(); ++j)
        if (t.columns[j] == name) return j;
    throw MissingColumn("column '" + name + "' not found");
}

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

WineTable load_wine_csv(const std::string& path, int red_flag) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    WineTable t;
    std::string line;
    if (!std::getline(in, line)) throw SchemaMismatch(path + ": empty file");
    for (const std::string& f : split_semicolon(line)) t.columns.push_back(strip(f));
    if (t.columns.empty()) throw SchemaMismatch(path + ": no header columns");

    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        const std::string trimmed = strip(line);
        if (trimmed.empty()) continue;
        const std::vector<std::string> fields = split_semicolon(line);
        if (fields.size() != t.columns.size())
            throw SchemaMismatch(path + ": row " + std::to_string(row_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(t.columns.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const std::string& f : fields) {
            const std::string v = strip(f);
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(v, &used);
            } catch (const std::exception&) {
                throw SchemaMismatch(path + ": row " + std::to_string(row_no) +
                                     ": bad numeric field '" + v + "'");
            }
            if (used != v.size())
                throw SchemaMismatch(path + ": row " + std::to_string(row_no) +
                                     ": bad numeric field '" + v + "'");
            row.push_back(x);
        }
        t.rows.push_back(std::move(row));
        t.is_red.push_back(red_flag);
    }
    return t;
}

WineTable load_wine(const std::string& red_path, const std::string& white_path) {
    WineTable red = load_wine_csv(red_path, 1);
    const WineTable white = load_wine_csv(white_path, 0);
    if (red.columns != white.columns)
        throw SchemaMismatch("red and white files disagree on columns");
    red.rows.insert(red.rows.end(), white.rows.begin(), white.rows.end());
    red.is_red.insert(red.is_red.end(), white.is_red.begin(), white.is_red.end());
    return red;
}

WineAnalysis analyze_wine(const WineTable& table, std::uint64_t seed,
                          std::size_t train_rows) {
    const std::size_t total = table.rows.size();
    if (table.is_red.size() != total)
        throw LengthMismatch("origin flags must cover every row");
    if (train_rows < 10 || total < train_rows + 50)
        throw std::invalid_argument("not enough rows for the split");
    const std::size_t cols = table.columns.size();
    const std::size_t density_col = column_index(table, "density");
    const std::size_t quality_col = column_index(table, "quality");

    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    std::mt19937_64 rng = replication_rng(seed, 0);
    std::shuffle(idx.begin(), idx.end(), rng);

    // Standardize with training moments; this only conditions the solver.
    std::vector<double> mu(cols, 0.0), sd(cols, 0.0);
    for (std::size_t i = 0; i < train_rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) mu[j] += table.rows[idx[i]][j];
    for (double& v : mu) v /= static_cast<double>(train_rows);
    for (std::size_t i = 0; i < train_rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double e = table.rows[idx[i]][j] - mu[j];
            sd[j] += e * e;
        }
    for (double& v : sd) {
        v = std::sqrt(v / static_cast<double>(train_rows));
        if (v < 1e-12) v = 1.0;
    }

    std::vector<std::vector<double>> train_x(train_rows, std::vector<double>(cols));
    std::vector<int> train_y(train_rows);
    for (std::size_t i = 0; i < train_rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j)
            train_x[i][j] = (table.rows[idx[i]][j] - mu[j]) / sd[j];
        train_y[i] = table.is_red[idx[i]];
    }
    LogisticConfig cfg;
    cfg.ridge = 1e-6;
    const LogisticPiModel model = fit_logistic_pi(train_x, train_y, cfg);

    const std::size_t eval_rows = total - train_rows;
    ShiftSample s;
    s.scores.resize(eval_rows);
    s.predictions.resize(eval_rows);
    s.labels.resize(eval_rows);
    s.c.resize(eval_rows);
    s.pi.resize(eval_rows);
    s.features.assign(eval_rows, std::vector<double>(1));

    std::mt19937_64 label_rng = replication_rng(seed, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < eval_rows; ++i) {
        const std::vector<double>& row = table.rows[idx[train_rows + i]];
        s.scores[i] = row[density_col];
        double eta = model.coef[0];
        for (std::size_t j = 0; j < cols; ++j)
            eta += model.coef[j + 1] * (row[j] - mu[j]) / sd[j];
        s.predictions[i] = expit(eta);
        s.labels[i] = table.is_red[idx[train_rows + i]];
        const bool low_quality = row[quality_col] <= 6.0;
        s.pi[i] = low_quality ? 0.2 : 0.3;
        s.features[i][0] = low_quality ? 1.0 : 0.0;
        s.c[i] = unif(label_rng) < s.pi[i] ? 1 : 0;
        labeled += static_cast<std::size_t>(s.c[i]);
    }

    WineAnalysis out;
    out.train_rows = train_rows;
    out.eval_rows = eval_rows;
    out.labeled_rows = labeled;

    struct Spec {
        const char* name;
        Estimand e;
    };
    const Spec specs[] = {{"tpr", Estimand::tpr(0.998)},
                          {"fpr", Estimand::fpr(0.998)},
                          {"auc", Estimand::auc()}};
    for (const Spec& sp : specs) {
        const PpiResult known = ppi_shift(sp.e, s, ShiftTarget::Full, 0.95);
        const PpiResult fitted =
            ppi_shift_estimated_pi(sp.e, s, ShiftTarget::Full, 0.95);
        WineMetricResult r;
        r.metric = sp.name;
        r.classical = {known.baseline_point, known.baseline_se};
        r.known_pi = {known.point, known.se};
        r.fitted_pi = {fitted.point, fitted.se};
        r.ratio_known = known.se_ratio;
        r.ratio_fitted =
            known.baseline_se > 0.0 ? fitted.se / known.baseline_se : 1.0;
        out.metrics.push_back(std::move(r));
    }
    return out;
}

}  // namespace ppi
