#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mmrca {

// Per-entity time series for one modality. Row n-1 is the KPI.
struct ModalityPanel {
    Eigen::MatrixXd values;                 // n x T
    std::vector<std::string> entity_names;  // n-1 names
    std::string kpi_name = "kpi";

    Eigen::Index n_nodes() const { return values.rows(); }
    Eigen::Index n_entities() const { return values.rows() - 1; }
    Eigen::Index length() const { return values.cols(); }

    // Entity names followed by the KPI name.
    std::vector<std::string> node_names() const;
};

// Throws std::invalid_argument if names disagree with the row count or any
// value is non-finite. `min_length` is the smallest acceptable T.
void validate_panel(const ModalityPanel& panel, Eigen::Index min_length = 1);

// Row-wise z-score; zero-variance rows become all zeros.
ModalityPanel standardize_rows(const ModalityPanel& panel);

}  // namespace mmrca
