#pragma once

#include "fdgd/certify.hpp"
#include "fdgd/controller.hpp"
#include "fdgd/cost.hpp"
#include "fdgd/network.hpp"
#include "fdgd/plant.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fdgd::io {

using json = nlohmann::json;

// Matrices are arrays of rows, vectors plain arrays.
[[nodiscard]] json to_json(const Matrix& m);
[[nodiscard]] json to_json(const Vector& v);
[[nodiscard]] Matrix matrix_from_json(const json& j, const char* what);
[[nodiscard]] Vector vector_from_json(const json& j, const char* what);

// {"A", "B", "C", "D", "E", "n_i", "m_i", "r_i"}. Without "r_i", E's columns
// follow n_i when E is square, else they are split evenly across agents.
[[nodiscard]] json plant_to_json(const NetworkedPlant& plant);
[[nodiscard]] NetworkedPlant plant_from_json(const json& j);

// {"N": 15, "edges": [[0, 1], ...]}
[[nodiscard]] json graph_to_json(const ControlGraph& g);
[[nodiscard]] ControlGraph graph_from_json(const json& j);

// {"alpha": [...], "y_ref": [...], "Q_out": "identity", "m": m}
[[nodiscard]] json cost_to_json(const QuadraticTrackingCost& c);
[[nodiscard]] QuadraticTrackingCost cost_from_json(const json& j, Eigen::Index input_dim);

[[nodiscard]] json report_to_json(const CertificateReport& r);
// Reads back the scalar fields and P, Q_lyap.
[[nodiscard]] CertificateReport report_from_json(const json& j);

// %.17g; the C locale decimal point.
[[nodiscard]] std::string format_double(double v);

// Header: k, y_1..y_p, input_1..input_m, consensus_err, grad_norm, storage_U, err_to_opt.
void write_trajectory_csv(std::ostream& os, const std::vector<StepRecord>& records, Eigen::Index p,
                          Eigen::Index m);

struct CsvRow {
    std::size_t k = 0;
    Vector y;
    Vector input;
    double consensus_err = 0.0;
    double grad_norm = 0.0;
    double storage_U = 0.0;
    double err_to_opt = 0.0;
};

// Parses the format written above; throws ConfigurationError on malformed input.
[[nodiscard]] std::vector<CsvRow> read_trajectory_csv(std::istream& is);

[[nodiscard]] json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace fdgd::io
