#include "hse/eer.hpp"

#include <cmath>

#include "hse/error.hpp"

namespace hse {

double expected_error(const Posterior& posterior) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < posterior.rows(); ++i) {
        const double sum = posterior.row(i).sum();
        if (!(std::abs(sum - 1.0) <= 1e-6))
            throw ValidationError("posterior row " + std::to_string(i) + " sums to " + std::to_string(sum));
        total += 1.0 - posterior.row(i).maxCoeff();
    }
    return total;
}

RiskReport expected_risk(const HarmonicModel& model, PointId candidate) {
    RiskReport report;
    report.candidate = candidate;
    report.per_class_risk = model.lookahead_errors(candidate);
    report.subquery_cost = model.class_count();
    const auto fq = model.posterior().row(candidate);
    for (int c = 0; c < model.class_count(); ++c)
        report.expected_risk += fq[c] * report.per_class_risk[static_cast<std::size_t>(c)];
    return report;
}

MinRiskResult select_min_risk(const HarmonicModel& model, std::span<const PointId> candidates) {
    if (candidates.empty()) throw UsageError("no candidates to evaluate");
    MinRiskResult out;
    out.reports.reserve(candidates.size());
    std::size_t best = 0;
    for (std::size_t m = 0; m < candidates.size(); ++m) {
        out.reports.push_back(expected_risk(model, candidates[m]));
        if (out.reports[m].expected_risk < out.reports[best].expected_risk) best = m;
    }
    out.winner = candidates[best];
    return out;
}

const RiskReport& RiskCache::get(const HarmonicModel& model, PointId candidate) {
    if (&model != model_ || model.version() != version_) {
        reports_.clear();
        model_ = &model;
        version_ = model.version();
    }
    auto it = reports_.find(candidate);
    if (it == reports_.end()) {
        ++misses_;
        it = reports_.emplace(candidate, expected_risk(model, candidate)).first;
    }
    return it->second;
}

}  // namespace hse
