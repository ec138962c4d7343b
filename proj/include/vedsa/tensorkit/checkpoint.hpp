#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "vedsa/error.hpp"
#include "vedsa/tensorkit/tape.hpp"

namespace vedsa::tk {

inline constexpr int kCheckpointVersion = 1;

/// {"<name>": {"shape": [...], "values": [...]}, ...}. Doubles are written
/// in shortest round-trip form, so save/load is exact.
inline nlohmann::json params_to_json(const NamedParams& params) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, t] : params) out[name] = {{"shape", t->shape}, {"values", t->values}};
  return out;
}

inline void params_from_json(const nlohmann::json& j, const NamedParams& params) {
  for (const auto& [name, t] : params) {
    if (!j.contains(name)) throw StructuralError("checkpoint is missing parameter '" + name + "'");
    const auto& rec = j.at(name);
    auto shape = rec.at("shape").get<Shape>();
    if (shape != t->shape)
      throw StructuralError("checkpoint parameter '" + name + "' has shape " + shape_string(shape) +
                            ", model expects " + shape_string(t->shape));
    t->values = rec.at("values").get<std::vector<double>>();
    if (t->values.size() != shape_size(shape))
      throw StructuralError("checkpoint parameter '" + name + "' has the wrong number of values");
    t->grad.assign(t->values.size(), 0.0);
  }
}

/// Envelope: {"format": "vedsa-checkpoint", "version": 1, "kind": ..., "config": ..., "params": ...}
inline nlohmann::json make_checkpoint(const std::string& kind, nlohmann::json config, const NamedParams& params) {
  return {{"format", "vedsa-checkpoint"},
          {"version", kCheckpointVersion},
          {"kind", kind},
          {"config", std::move(config)},
          {"params", params_to_json(params)}};
}

inline const nlohmann::json& check_checkpoint(const nlohmann::json& j, const std::string& kind) {
  if (!j.is_object() || j.value("format", "") != "vedsa-checkpoint")
    throw StructuralError("not a vedsa checkpoint");
  if (j.value("version", -1) != kCheckpointVersion)
    throw StructuralError("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump());
  if (j.value("kind", "") != kind)
    throw StructuralError("checkpoint holds a '" + j.value("kind", "") + "' model, expected '" + kind + "'");
  return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
}

}  // namespace vedsa::tk
