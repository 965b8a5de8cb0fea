#pragma once

// JSON encoding for finite spaces and correspondences, plus the field-path
// error used by every loader.

#include "wsel/finite_topology.hpp"

#include <json.hpp>

#include <string>

namespace wsel {

using json = nlohmann::ordered_json;

/// Malformed input; path is a JSON pointer to the offending field.
struct SchemaError : ParameterError {
  SchemaError(std::string p, const std::string& what) : ParameterError(p + ": " + what), path(std::move(p)) {}
  std::string path;
};

inline const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing required field");
  return *it;
}

inline double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline std::string string_at(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline const json& array_at(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

namespace finite {

inline json to_json(const FiniteTopoSpace& s) {
  json j;
  j["points"] = s.labels();
  json opens = json::array();
  for (Mask o : s.opens()) {
    json members = json::array();
    for (int i = 0; i < s.size(); ++i)
      if (has(o, i)) members.push_back(s.labels()[static_cast<std::size_t>(i)]);
    opens.push_back(members);
  }
  j["opens"] = opens;
  return j;
}

inline json to_json(const FiniteCorrespondence& c) {
  json j;
  j["domain"] = to_json(c.domain());
  j["codomain"] = to_json(c.codomain());
  json values = json::object();
  for (int e = 0; e < c.domain().size(); ++e) {
    json v = json::array();
    for (int x = 0; x < c.codomain().size(); ++x)
      if (has(c(e), x)) v.push_back(c.codomain().labels()[static_cast<std::size_t>(x)]);
    values[c.domain().labels()[static_cast<std::size_t>(e)]] = v;
  }
  j["values"] = values;
  return j;
}

inline Mask members_from_json(const std::vector<std::string>& labels, const json& j, const std::string& path) {
  array_at(j, path);
  Mask m = 0;
  for (std::size_t k = 0; k < j.size(); ++k) {
    std::string p = path + "/" + std::to_string(k);
    std::string l = string_at(j[k], p);
    auto it = std::find(labels.begin(), labels.end(), l);
    if (it == labels.end()) throw SchemaError(p, "unknown point '" + l + "'");
    m |= bit(static_cast<int>(it - labels.begin()));
  }
  return m;
}

inline FiniteTopoSpace space_from_json(const json& j, const std::string& path) {
  const json& pts = array_at(field(j, path, "points"), path + "/points");
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < pts.size(); ++k) labels.push_back(string_at(pts[k], path + "/points/" + std::to_string(k)));
  if (labels.empty() || labels.size() > kMaxPoints) throw SchemaError(path + "/points", "expected 1 to 32 points");
  const json& op = array_at(field(j, path, "opens"), path + "/opens");
  std::vector<Mask> opens;
  for (std::size_t k = 0; k < op.size(); ++k)
    opens.push_back(members_from_json(labels, op[k], path + "/opens/" + std::to_string(k)));
  try {
    return FiniteTopoSpace(labels, opens);
  } catch (const TopologyError& e) {
    throw SchemaError(path + "/opens", e.what());
  }
}

inline FiniteCorrespondence correspondence_from_json(const json& j, const std::string& path) {
  auto dom = share(space_from_json(field(j, path, "domain"), path + "/domain"));
  auto cod = share(space_from_json(field(j, path, "codomain"), path + "/codomain"));
  const json& vals = field(j, path, "values");
  if (!vals.is_object()) throw SchemaError(path + "/values", "expected an object keyed by domain point");
  std::vector<Mask> v(static_cast<std::size_t>(dom->size()), 0);
  for (auto it = vals.begin(); it != vals.end(); ++it) {
    std::string p = path + "/values/" + it.key();
    auto& dl = dom->labels();
    auto pos = std::find(dl.begin(), dl.end(), it.key());
    if (pos == dl.end()) throw SchemaError(p, "unknown domain point");
    v[static_cast<std::size_t>(pos - dl.begin())] = members_from_json(cod->labels(), it.value(), p);
  }
  return FiniteCorrespondence(dom, cod, v);
}

}  // namespace finite
}  // namespace wsel
