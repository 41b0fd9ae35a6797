#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "pagnn/diffkit/params.hpp"

namespace pagnn::diff {

inline constexpr int kParamFormatVersion = 1;

// Layout:
//   { "version": 1, "seed": <uint64>, "scalar_count": <n>,
//     "entries": [ { "name", "rows", "cols", "fan_in", "is_bias" }, ... ],
//     "values": [ flat values in ParamSet flat-index order ] }
inline nlohmann::json params_to_json(const ParamSet& p, std::uint64_t seed) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& s : p.specs())
    entries.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"fan_in", s.fan_in},
                       {"is_bias", s.is_bias}});
  return {{"version", kParamFormatVersion},
          {"seed", seed},
          {"scalar_count", p.scalar_count()},
          {"entries", entries},
          {"values", p.to_flat()}};
}

inline ParamSet params_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kParamFormatVersion)
    throw std::runtime_error("unsupported parameter format version " +
                             std::to_string(j.at("version").get<int>()));
  ParamSet p;
  for (const auto& e : j.at("entries"))
    p.add({e.at("name").get<std::string>(), e.at("rows").get<int>(), e.at("cols").get<int>(),
           e.at("fan_in").get<int>(), e.at("is_bias").get<bool>()});
  p.assign_flat(j.at("values").get<std::vector<double>>());
  return p;
}

}  // namespace pagnn::diff
