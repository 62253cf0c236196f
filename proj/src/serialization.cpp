#include "fdgd/serialization.hpp"

#include "fdgd/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fdgd::io {

namespace {

double number_or_nan(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.at(key).get<double>();
}

json number(double v) {
    if (!std::isfinite(v)) {
        return nullptr;
    }
    return v;
}

std::vector<Eigen::Index> sizes_from_json(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw ConfigurationError(std::string("plant JSON is missing \"") + key + "\"");
    }
    std::vector<Eigen::Index> out;
    for (const auto& v : j.at(key)) {
        out.push_back(v.get<Eigen::Index>());
    }
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) {
        out.push_back(cur);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s) {
    if (s == "nan" || s == "-nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigurationError("CSV: cannot parse number '" + s + "'");
    }
    if (pos != s.size()) {
        throw ConfigurationError("CSV: trailing characters in '" + s + "'");
    }
    return v;
}

}  // namespace

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Matrix matrix_from_json(const json& j, const char* what) {
    if (!j.is_array()) {
        throw ConfigurationError(std::string(what) + ": expected an array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw DimensionError(std::string(what) + ": ragged matrix rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

Vector vector_from_json(const json& j, const char* what) {
    if (!j.is_array()) {
        throw ConfigurationError(std::string(what) + ": expected an array");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    }
    return v;
}

json plant_to_json(const NetworkedPlant& plant) {
    return json{{"A", to_json(plant.A())},
                {"B", to_json(plant.B())},
                {"C", to_json(plant.C())},
                {"D", to_json(plant.D())},
                {"E", to_json(plant.E())},
                {"n_i", plant.state_dims().sizes()},
                {"m_i", plant.input_dims().sizes()},
                {"r_i", plant.disturbance_dims().sizes()}};
}

NetworkedPlant plant_from_json(const json& j) {
    for (const char* key : {"A", "B", "C", "D", "E"}) {
        if (!j.contains(key)) {
            throw ConfigurationError(std::string("plant JSON is missing \"") + key + "\"");
        }
    }
    PlantMatrices pm{matrix_from_json(j.at("A"), "A"), matrix_from_json(j.at("B"), "B"),
                     matrix_from_json(j.at("C"), "C"), matrix_from_json(j.at("D"), "D"),
                     matrix_from_json(j.at("E"), "E")};
    Partition state(sizes_from_json(j, "n_i"));
    Partition input(sizes_from_json(j, "m_i"));
    Partition dist;
    if (j.contains("r_i")) {
        dist = Partition(sizes_from_json(j, "r_i"));
    } else if (pm.E.cols() == state.total()) {
        dist = state;
    } else if (state.agents() > 0 && pm.E.cols() % static_cast<Eigen::Index>(state.agents()) == 0) {
        dist = Partition::uniform(state.agents(), pm.E.cols() / static_cast<Eigen::Index>(state.agents()));
    } else {
        throw DimensionError("plant JSON: cannot infer r_i; give it explicitly");
    }
    return NetworkedPlant(std::move(pm), std::move(state), std::move(input), std::move(dist));
}

json graph_to_json(const ControlGraph& g) {
    json edges = json::array();
    for (const auto& [a, b] : g.edges()) {
        edges.push_back(json::array({a, b}));
    }
    return json{{"N", g.nodes()}, {"edges", std::move(edges)}};
}

ControlGraph graph_from_json(const json& j) {
    if (!j.contains("N") || !j.contains("edges")) {
        throw ConfigurationError("graph JSON needs \"N\" and \"edges\"");
    }
    std::vector<ControlGraph::Edge> edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) {
            throw ConfigurationError("graph JSON: each edge must be a pair");
        }
        edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    return ControlGraph(j.at("N").get<std::size_t>(), edges);
}

json cost_to_json(const QuadraticTrackingCost& c) {
    return json{{"alpha", to_json(c.alpha)}, {"y_ref", to_json(c.y_ref)}, {"Q_out", "identity"}, {"m", c.input_dim}};
}

QuadraticTrackingCost cost_from_json(const json& j, Eigen::Index input_dim) {
    if (!j.contains("alpha") || !j.contains("y_ref")) {
        throw ConfigurationError("cost JSON needs \"alpha\" and \"y_ref\"");
    }
    if (j.contains("Q_out") && j.at("Q_out") != "identity") {
        throw UnsupportedError("only Q_out = \"identity\" is supported");
    }
    QuadraticTrackingCost c;
    c.alpha = vector_from_json(j.at("alpha"), "alpha");
    c.y_ref = vector_from_json(j.at("y_ref"), "y_ref");
    c.input_dim = input_dim;
    c.validate();
    return c;
}

json report_to_json(const CertificateReport& r) {
    json j;
    j["N"] = r.N;
    j["L_h"] = number(r.L_h);
    j["L_Phi"] = number(r.L_Phi);
    j["norm_Pi"] = number(r.norm_Pi);
    j["lambda1_P"] = number(r.lambda1_P);
    j["lambdan_Q"] = number(r.lambdan_Q);
    j["norm_ATP"] = number(r.norm_ATP);
    j["lambda_N"] = number(r.lambda_N);
    j["beta"] = number(r.beta);
    j["mu"] = number(r.mu);
    j["mu_halvings"] = r.mu_halvings;
    j["eta_1"] = number(r.eta_1);
    j["eta_2"] = number(r.eta_2);
    j["eta_3"] = number(r.eta_3);
    j["eta_bar"] = number(r.eta_bar);
    j["d"] = number(r.d);
    j["eta"] = number(r.eta);
    j["sigma"] = number(r.sigma);
    j["nu_Phi"] = number(r.nu_Phi);
    j["nu"] = number(r.nu);
    j["theta"] = number(r.theta);
    j["mode"] = to_string(r.mode);
    j["c1"] = number(r.c1);
    j["c2"] = number(r.c2);
    j["c3"] = number(r.c3);
    j["c4"] = number(r.c4);
    j["one_minus_c3_sq"] = number(r.one_minus_c3_sq);
    j["delta"] = number(r.delta);
    j["error_floor"] = number(r.error_floor);
    j["eta_floor_bound"] = number(r.eta_floor_bound);
    j["consensus_bound"] = number(r.consensus_bound);
    j["P"] = to_json(r.P);
    j["Q_lyap"] = to_json(r.Q_lyap);
    j["notes"] = r.notes;
    return j;
}

CertificateReport report_from_json(const json& j) {
    CertificateReport r;
    r.N = j.value("N", std::size_t{0});
    r.L_h = number_or_nan(j, "L_h");
    r.L_Phi = number_or_nan(j, "L_Phi");
    r.norm_Pi = number_or_nan(j, "norm_Pi");
    r.lambda1_P = number_or_nan(j, "lambda1_P");
    r.lambdan_Q = number_or_nan(j, "lambdan_Q");
    r.norm_ATP = number_or_nan(j, "norm_ATP");
    r.lambda_N = number_or_nan(j, "lambda_N");
    r.beta = number_or_nan(j, "beta");
    r.mu = number_or_nan(j, "mu");
    r.mu_halvings = j.value("mu_halvings", 0);
    r.eta_1 = number_or_nan(j, "eta_1");
    r.eta_2 = number_or_nan(j, "eta_2");
    r.eta_3 = number_or_nan(j, "eta_3");
    r.eta_bar = number_or_nan(j, "eta_bar");
    r.d = number_or_nan(j, "d");
    r.eta = number_or_nan(j, "eta");
    r.sigma = number_or_nan(j, "sigma");
    r.nu_Phi = number_or_nan(j, "nu_Phi");
    r.nu = number_or_nan(j, "nu");
    r.theta = number_or_nan(j, "theta");
    r.mode = parse_bound_mode(j.value("mode", std::string("convergence-only")));
    r.c1 = number_or_nan(j, "c1");
    r.c2 = number_or_nan(j, "c2");
    r.c3 = number_or_nan(j, "c3");
    r.c4 = number_or_nan(j, "c4");
    r.one_minus_c3_sq = number_or_nan(j, "one_minus_c3_sq");
    r.delta = number_or_nan(j, "delta");
    r.error_floor = number_or_nan(j, "error_floor");
    r.eta_floor_bound = number_or_nan(j, "eta_floor_bound");
    r.consensus_bound = number_or_nan(j, "consensus_bound");
    if (j.contains("P")) {
        r.P = matrix_from_json(j.at("P"), "P");
    }
    if (j.contains("Q_lyap")) {
        r.Q_lyap = matrix_from_json(j.at("Q_lyap"), "Q_lyap");
    }
    if (j.contains("notes")) {
        r.notes = j.at("notes").get<std::vector<std::string>>();
    }
    return r;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trajectory_csv(std::ostream& os, const std::vector<StepRecord>& records, Eigen::Index p, Eigen::Index m) {
    os << "k";
    for (Eigen::Index i = 1; i <= p; ++i) {
        os << ",y_" << i;
    }
    for (Eigen::Index i = 1; i <= m; ++i) {
        os << ",input_" << i;
    }
    os << ",consensus_err,grad_norm,storage_U,err_to_opt\n";
    for (const auto& r : records) {
        if (r.y.size() != p || r.applied.size() != m) {
            throw DimensionError("trajectory CSV: record dimensions do not match the header");
        }
        os << r.k;
        for (Eigen::Index i = 0; i < p; ++i) {
            os << ',' << format_double(r.y(i));
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            os << ',' << format_double(r.applied(i));
        }
        os << ',' << format_double(r.consensus_error) << ',' << format_double(r.gamma_norm) << ','
           << format_double(r.storage) << ',' << format_double(r.err_to_opt) << '\n';
    }
}

std::vector<CsvRow> read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigurationError("CSV: missing header");
    }
    const auto header = split(line, ',');
    if (header.size() < 5 || header.front() != "k" || header[header.size() - 4] != "consensus_err" ||
        header[header.size() - 3] != "grad_norm" || header[header.size() - 2] != "storage_U" ||
        header.back() != "err_to_opt") {
        throw ConfigurationError("CSV: unexpected header");
    }
    Eigen::Index p = 0;
    Eigen::Index m = 0;
    for (std::size_t i = 1; i + 4 < header.size(); ++i) {
        if (header[i].rfind("y_", 0) == 0) {
            ++p;
        } else if (header[i].rfind("input_", 0) == 0) {
            ++m;
        } else {
            throw ConfigurationError("CSV: unexpected column '" + header[i] + "'");
        }
    }
    std::vector<CsvRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) {
            throw ConfigurationError("CSV: row has " + std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        }
        CsvRow row;
        row.k = static_cast<std::size_t>(std::stoull(cells[0]));
        row.y.resize(p);
        row.input.resize(m);
        for (Eigen::Index i = 0; i < p; ++i) {
            row.y(i) = parse_double(cells[static_cast<std::size_t>(1 + i)]);
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            row.input(i) = parse_double(cells[static_cast<std::size_t>(1 + p + i)]);
        }
        const std::size_t base = static_cast<std::size_t>(1 + p + m);
        row.consensus_err = parse_double(cells[base]);
        row.grad_norm = parse_double(cells[base + 1]);
        row.storage_U = parse_double(cells[base + 2]);
        row.err_to_opt = parse_double(cells[base + 3]);
        rows.push_back(std::move(row));
    }
    return rows;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigurationError("cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigurationError("cannot write " + path);
    }
    out << text;
    if (!out) {
        throw ConfigurationError("write failed for " + path);
    }
}

}  // namespace fdgd::io
