#include "bdt/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "bdt/error.hpp"

namespace bdt {

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

void require_object(const json& j, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, std::string(what) + " must be a JSON object");
}

}  // namespace

void to_json(json& j, const RawTreeSpec& spec) {
  j = json{{"tau", spec.tau}, {"N", spec.N}, {"c", spec.c}, {"x", spec.x}, {"T", spec.T}};
}

void from_json(const json& j, RawTreeSpec& spec) {
  require_object(j, "tree spec");
  spec.tau = field<std::vector<double>>(j, "tau");
  spec.N = field<std::vector<std::int64_t>>(j, "N");
  spec.c = field_or(j, "c", 0.0);
  spec.x = field_or(j, "x", 0.0);
  spec.T = field<double>(j, "T");
}

void to_json(json& j, const RandomTreeSpec& spec) {
  json laws = json::array();
  for (const auto& law : spec.laws) {
    json values = json::array();
    json probs = json::array();
    for (const auto& [n, p] : law.atoms) {
      values.push_back(n);
      probs.push_back(p);
    }
    laws.push_back(json{{"values", values}, {"probs", probs}});
  }
  j = json{{"tau", spec.tau}, {"laws", laws}, {"c", spec.c}, {"x", spec.x}, {"T", spec.T}};
}

void from_json(const json& j, RandomTreeSpec& spec) {
  require_object(j, "random tree spec");
  spec.tau = field<std::vector<double>>(j, "tau");
  spec.c = field_or(j, "c", 0.0);
  spec.x = field_or(j, "x", 0.0);
  spec.T = field<double>(j, "T");
  spec.laws.clear();
  for (const auto& law : field<json>(j, "laws")) {
    require_object(law, "offspring law");
    const auto values = field<std::vector<std::int64_t>>(law, "values");
    const auto probs = field<std::vector<double>>(law, "probs");
    if (values.size() != probs.size() || values.empty()) {
      throw Error(ErrorCode::ParseError, "offspring law needs matching nonempty values and probs");
    }
    OffspringLaw out;
    for (std::size_t i = 0; i < values.size(); ++i) out.atoms.emplace_back(values[i], probs[i]);
    spec.laws.push_back(std::move(out));
  }
}

void to_json(json& j, const AsymptoticsResult& r) {
  j = json{{"formula", std::string(to_string(r.formula))},
           {"u", r.u},
           {"value", r.value()},
           {"log_value", r.log_value}};
  if (!r.note.empty()) j["note"] = r.note;
}

void to_json(json& j, const McEstimate& e) {
  j = json{{"p", e.p},
           {"stderr", e.std_error},
           {"n", e.n},
           {"estimator", std::string(to_string(e.estimator))},
           {"seed", e.seed}};
}

void from_json(const json& j, McEstimate& e) {
  require_object(j, "estimate");
  e.p = field<double>(j, "p");
  e.std_error = field<double>(j, "stderr");
  e.n = field<std::uint64_t>(j, "n");
  const auto est = field<std::string>(j, "estimator");
  if (est != "crude" && est != "tilted") throw Error(ErrorCode::ParseError, "unknown estimator " + est);
  e.estimator = est == "crude" ? Estimator::Crude : Estimator::Tilted;
  e.seed = field<std::uint64_t>(j, "seed");
}

void to_json(json& j, const PickandsEstimate& e) {
  j = json{{"N", e.N}, {"lambda", e.lambda}, {"value", e.value}, {"stderr", e.std_error},
           {"n", e.n}};
  // infinite horizon estimates record the last truncation used
  j["L"] = e.L;
  j["infinite_horizon"] = e.infinite_horizon;
  if (!std::isnan(e.step_halving_delta)) j["step_halving_delta"] = e.step_halving_delta;
}

void from_json(const json& j, PickandsEstimate& e) {
  require_object(j, "Pickands estimate");
  e.N = field<std::int64_t>(j, "N");
  e.lambda = field<double>(j, "lambda");
  e.L = field<double>(j, "L");
  e.value = field<double>(j, "value");
  e.std_error = field<double>(j, "stderr");
  e.n = field_or<std::uint64_t>(j, "n", 0);
  e.infinite_horizon = field_or(j, "infinite_horizon", false);
  e.step_halving_delta = field_or(j, "step_halving_delta", std::numeric_limits<double>::quiet_NaN());
}

void to_json(json& j, const Eigenstructure& e) {
  json pairs = json::array();
  for (std::size_t v = 0; v < e.pairs.size(); ++v) {
    pairs.push_back(json{{"v", v}, {"mu", e.pairs[v].mu}, {"mult", e.pairs[v].multiplicity}});
  }
  j = json{{"t", e.t}, {"pairs", pairs}};
}

ForestSpec forest_from_json(const json& j) {
  require_object(j, "forest spec");
  const double T = field<double>(j, "T");
  const json trees = field<json>(j, "trees");
  if (!trees.is_array()) throw Error(ErrorCode::ParseError, "'trees' must be an array");
  std::vector<RawTreeSpec> raw;
  for (json tree : trees) {
    require_object(tree, "tree spec");
    if (!tree.contains("T")) tree["T"] = T;
    raw.push_back(tree.get<RawTreeSpec>());
  }
  return ForestSpec::validate(T, raw);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace bdt
