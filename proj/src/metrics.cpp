#include "mmrca/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace mmrca::metrics {

namespace {

void require_cases(const std::vector<EvaluationCase>& cases) {
    if (cases.empty()) throw std::invalid_argument("evaluation needs at least one case");
    for (const auto& c : cases) validate(c);
}

double case_precision(const EvaluationCase& c, int k) {
    const auto limit = std::min<std::size_t>(c.predicted.size(), static_cast<std::size_t>(k));
    int hits = 0;
    for (std::size_t i = 0; i < limit; ++i) hits += c.truth.count(c.predicted[i]) > 0 ? 1 : 0;
    const auto denom = std::min<std::size_t>(static_cast<std::size_t>(k), c.truth.size());
    return static_cast<double>(hits) / static_cast<double>(denom);
}

}  // namespace

void validate(const EvaluationCase& c) {
    if (c.truth.empty()) throw std::invalid_argument("evaluation case has an empty truth set");
    std::unordered_set<std::string> seen;
    for (const auto& p : c.predicted) {
        if (!seen.insert(p).second) throw std::invalid_argument("duplicate prediction '" + p + "'");
    }
}

double precision_at_k(const std::vector<EvaluationCase>& cases, int k) {
    if (k < 1) throw std::invalid_argument("K must be at least 1");
    require_cases(cases);
    double total = 0.0;
    for (const auto& c : cases) total += case_precision(c, k);
    return total / static_cast<double>(cases.size());
}

double map_at_k(const std::vector<EvaluationCase>& cases, int k) {
    if (k < 1) throw std::invalid_argument("K must be at least 1");
    require_cases(cases);
    double total = 0.0;
    for (const auto& c : cases) {
        for (int j = 1; j <= k; ++j) total += case_precision(c, j);
    }
    return total / (static_cast<double>(k) * static_cast<double>(cases.size()));
}

int first_hit_rank(const EvaluationCase& c) {
    for (std::size_t i = 0; i < c.predicted.size(); ++i) {
        if (c.truth.count(c.predicted[i]) > 0) return static_cast<int>(i) + 1;
    }
    return 0;
}

double mrr(const std::vector<EvaluationCase>& cases) {
    require_cases(cases);
    double total = 0.0;
    for (const auto& c : cases) {
        const int r = first_hit_rank(c);
        if (r > 0) total += 1.0 / r;
    }
    return total / static_cast<double>(cases.size());
}

}  // namespace mmrca::metrics
