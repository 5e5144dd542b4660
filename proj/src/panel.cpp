#include "mmrca/panel.hpp"

#include <cmath>
#include <stdexcept>

namespace mmrca {

std::vector<std::string> ModalityPanel::node_names() const {
    auto names = entity_names;
    names.push_back(kpi_name);
    return names;
}

void validate_panel(const ModalityPanel& panel, Eigen::Index min_length) {
    if (panel.values.rows() < 2) throw std::invalid_argument("panel needs at least one entity row plus the KPI row");
    if (static_cast<Eigen::Index>(panel.entity_names.size()) != panel.values.rows() - 1) {
        throw std::invalid_argument("panel has " + std::to_string(panel.values.rows()) + " rows but " +
                                    std::to_string(panel.entity_names.size()) + " entity names (KPI row excluded)");
    }
    if (panel.values.cols() < min_length) {
        throw std::invalid_argument("panel length " + std::to_string(panel.values.cols()) + " is below the minimum " +
                                    std::to_string(min_length));
    }
    if (!panel.values.allFinite()) throw std::invalid_argument("panel contains NaN or Inf");
}

ModalityPanel standardize_rows(const ModalityPanel& panel) {
    ModalityPanel out = panel;
    const double t = static_cast<double>(panel.values.cols());
    for (Eigen::Index i = 0; i < panel.values.rows(); ++i) {
        auto row = out.values.row(i);
        const double mu = row.mean();
        row.array() -= mu;
        const double sd = std::sqrt(row.squaredNorm() / t);
        if (sd < 1e-12) {
            row.setZero();
        } else {
            row /= sd;
        }
    }
    return out;
}

}  // namespace mmrca
