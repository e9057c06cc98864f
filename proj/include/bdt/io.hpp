#pragma once

// JSON forms of specs and results.
//
//   tree    {"tau": [...], "N": [...], "c": 0.0, "x": 0.0, "T": 3.0}
//   forest  {"T": 3.0, "trees": [tree, ...]}   (trees may omit T)
//   random  {"tau": [...], "laws": [{"values": [2, 3], "probs": [0.5, 0.5]}], ...}

#include <string>

#include "json.hpp"

#include "bdt/analytics.hpp"
#include "bdt/forest.hpp"
#include "bdt/mc.hpp"
#include "bdt/pickands.hpp"
#include "bdt/tree.hpp"

namespace bdt {

using json = nlohmann::json;

void to_json(json& j, const RawTreeSpec& spec);
void from_json(const json& j, RawTreeSpec& spec);

void to_json(json& j, const RandomTreeSpec& spec);
void from_json(const json& j, RandomTreeSpec& spec);

void to_json(json& j, const AsymptoticsResult& r);

void to_json(json& j, const McEstimate& e);
void from_json(const json& j, McEstimate& e);

void to_json(json& j, const PickandsEstimate& e);
void from_json(const json& j, PickandsEstimate& e);

void to_json(json& j, const Eigenstructure& e);

ForestSpec forest_from_json(const json& j);

/// Parses a file; malformed content raises ErrorCode::ParseError.
json read_json_file(const std::string& path);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace bdt
