#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mflow/error.hpp"
#include "mflow/numcore/tensor.hpp"

namespace mflow::nn {

// Checkpoint format: an array of {"name", "shape", "values"} records, values
// row-major. Doubles are written with round-trip precision.

inline nlohmann::json params_to_json(const ParamList& ps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto* p : ps) arr.push_back({{"name", p->name}, {"shape", p->shape}, {"values", p->value}});
  return arr;
}

inline void params_from_json(const ParamList& ps, const nlohmann::json& arr) {
  if (!arr.is_array() || arr.size() != ps.size())
    throw SchemaError("checkpoint has " + std::to_string(arr.is_array() ? arr.size() : 0) +
                      " tensors, model expects " + std::to_string(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& rec = arr[i];
    auto shape = rec.at("shape").get<std::vector<std::size_t>>();
    if (rec.at("name").get<std::string>() != ps[i]->name || shape != ps[i]->shape)
      throw SchemaError("checkpoint tensor " + rec.at("name").get<std::string>() + " does not match " +
                        ps[i]->name + ps[i]->shape_string());
    auto values = rec.at("values").get<std::vector<double>>();
    if (values.size() != ps[i]->size()) throw SchemaError("checkpoint tensor " + ps[i]->name + " has wrong size");
    ps[i]->value = std::move(values);
  }
}

}  // namespace mflow::nn
