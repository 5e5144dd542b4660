#pragma once

// Ranking metrics for root cause analysis: PR@K, MAP@K and MRR.

#include <set>
#include <string>
#include <vector>

namespace mmrca::metrics {

struct EvaluationCase {
    std::vector<std::string> predicted;  // ranked, no duplicates
    std::set<std::string> truth;         // non-empty
};

// Throws std::invalid_argument on an empty truth set or duplicate predictions.
void validate(const EvaluationCase& c);

double precision_at_k(const std::vector<EvaluationCase>& cases, int k);
double map_at_k(const std::vector<EvaluationCase>& cases, int k);
// A case with no correct prediction contributes 0.
double mrr(const std::vector<EvaluationCase>& cases);

// 1-based rank of the first correct prediction, 0 if absent.
int first_hit_rank(const EvaluationCase& c);

}  // namespace mmrca::metrics
