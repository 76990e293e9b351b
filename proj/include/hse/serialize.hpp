#pragma once

#include <nlohmann/json.hpp>

#include "hse/session.hpp"

namespace hse {

using Json = nlohmann::json;

Json to_json(const SessionConfig& config);
// Applies the keys present in `overrides` on top of `base`; unknown keys and
// wrongly typed values raise ConfigError.
SessionConfig config_from_json(const Json& overrides, SessionConfig base = {});

Json to_json(const SelectionTrace& trace);

// {strategy, seed, accuracies, auc, per_query_seconds?}
Json curve_json(StrategyKind strategy, std::uint64_t seed, const SimulationResult& result, bool with_timings);

Json tree_json(const ClusterTree& tree);

}  // namespace hse
