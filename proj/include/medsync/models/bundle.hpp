#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "medsync/automaton/model.hpp"
#include "medsync/models/embedded_models.hpp"

namespace medsync::models {

using automaton::AutomatonDef;
using automaton::DefPtr;

/// A rural/center pair plus the center -> rural projection. Organ automata
/// (sepsis) run beside the disease automaton in the same unit and are not
/// synchronized across sites.
struct ModelBundle {
  std::string name;
  DefPtr rural;
  DefPtr center;
  std::map<std::uint8_t, std::uint8_t> projection;
  std::vector<automaton::Measurement> scenario_measurements;
  std::vector<DefPtr> organs;
};

/// "stroke/rural" and "stroke_rural" both name models/stroke_rural.json.
inline std::string normalize(std::string_view ref) {
  std::string out(ref);
  for (char& c : out) {
    if (c == '/' || c == '.' || c == '-') c = '_';
  }
  if (out.size() > 5 && out.compare(out.size() - 5, 5, "_json") == 0) out.resize(out.size() - 5);
  return out;
}

inline std::vector<std::string> available() {
  std::vector<std::string> out;
  for (const auto& [name, _] : embedded::kDocuments) out.emplace_back(name);
  return out;
}

inline std::optional<std::string_view> document(std::string_view ref) {
  std::string key = normalize(ref);
  for (const auto& [name, text] : embedded::kDocuments) {
    if (name == key) return text;
  }
  return std::nullopt;
}

/// Parsed and validated once per process; definitions are immutable.
inline DefPtr load(std::string_view ref) {
  static std::mutex mu;
  static std::map<std::string, DefPtr> cache;
  std::string key = normalize(ref);
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto text = document(key);
  if (!text) throw std::invalid_argument("unknown model '" + std::string(ref) + "'");
  auto def = std::make_shared<const AutomatonDef>(automaton::load_model_text(*text));
  cache.emplace(key, def);
  return def;
}

/// Checks the pair relationship: rural states are a proper subset of the
/// center's (same UID, same name), the projection is total over the center
/// and identity on shared states, and every image is a rural state.
inline ModelBundle make_bundle(std::string name, DefPtr rural, DefPtr center) {
  using automaton::ViolationKind;
  std::vector<automaton::Violation> v;
  for (const auto& s : rural->states) {
    const auto* c = center->state(s.uid);
    if (!c || c->name != s.name) {
      v.push_back({ViolationKind::kMapping, "rural state '" + s.name + "' is not a center state"});
    }
  }
  if (center->states.size() <= rural->states.size()) {
    v.push_back({ViolationKind::kMapping, "center model must be strictly richer than the rural model"});
  }
  for (const auto& s : center->states) {
    auto it = center->projection.find(s.uid);
    if (it == center->projection.end()) {
      v.push_back({ViolationKind::kMapping, "center state '" + s.name + "' has no rural image"});
      continue;
    }
    if (!rural->state(it->second)) {
      v.push_back({ViolationKind::kMapping, "image of '" + s.name + "' is not a rural state"});
    }
    if (rural->state(s.uid) && it->second != s.uid) {
      v.push_back({ViolationKind::kMapping, "shared state '" + s.name + "' must project to itself"});
    }
  }
  if (!v.empty()) throw automaton::ModelError(std::move(v));
  ModelBundle b;
  b.name = std::move(name);
  b.projection = center->projection;
  b.scenario_measurements = center->measurements;
  b.rural = std::move(rural);
  b.center = std::move(center);
  return b;
}

inline ModelBundle stroke_bundle() { return make_bundle("stroke", load("stroke_rural"), load("stroke_center")); }

inline ModelBundle sepsis_bundle() {
  auto b = make_bundle("sepsis", load("sepsis_rural"), load("sepsis_center"));
  for (const char* organ : {"sepsis_cardiac", "sepsis_pulmonary", "sepsis_kidney"}) b.organs.push_back(load(organ));
  return b;
}

inline ModelBundle bundle(std::string_view name) {
  if (name == "stroke") return stroke_bundle();
  if (name == "sepsis") return sepsis_bundle();
  throw std::invalid_argument("unknown bundle '" + std::string(name) + "'");
}

}  // namespace medsync::models
