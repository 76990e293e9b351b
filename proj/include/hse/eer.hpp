#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "hse/grf.hpp"

namespace hse {

// Outcome of one subquery: the expected 0/1 risk of querying `candidate`.
struct RiskReport {
    PointId candidate = -1;
    double expected_risk = 0.0;
    std::vector<double> per_class_risk;
    int subquery_cost = 0;  // lookaheads consumed, equal to C
};

// Expected 0/1 error of a posterior under its own MAP prediction:
// sum_i (1 - max_c F_ic). Rows must sum to one within 1e-6.
double expected_error(const Posterior& posterior);

RiskReport expected_risk(const HarmonicModel& model, PointId candidate);

struct MinRiskResult {
    PointId winner = -1;
    std::vector<RiskReport> reports;  // in candidate order
};

// Evaluates candidates in order; minimal risk wins, ties to the earliest.
MinRiskResult select_min_risk(const HarmonicModel& model, std::span<const PointId> candidates);

// Memoises RiskReports for one model version. Any add_label on the model
// makes the cache stale; `get` then drops everything and starts over.
class RiskCache {
public:
    const RiskReport& get(const HarmonicModel& model, PointId candidate);
    std::size_t size() const { return reports_.size(); }
    std::size_t misses() const { return misses_; }

private:
    std::uint64_t version_ = ~std::uint64_t{0};
    const HarmonicModel* model_ = nullptr;
    std::unordered_map<PointId, RiskReport> reports_;
    std::size_t misses_ = 0;
};

}  // namespace hse
