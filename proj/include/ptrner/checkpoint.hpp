#pragma once
// Checkpoint file layout:
//   "PTRNER-CKPT-1\n"                 magic + format version
//   uint64 little-endian              header byte length
//   JSON header                       {"meta": ..., "tensors": [{name, shape, offset}]}
//   payload                           float64 little-endian, offsets relative to payload start

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ptrner/params.hpp"

namespace ptrner {

inline constexpr std::string_view kCheckpointMagic = "PTRNER-CKPT-1\n";

struct LoadedCheckpoint {
  nlohmann::ordered_json meta;
  std::map<std::string, Matrix> tensors;
};

void write_checkpoint(std::ostream& out, const nlohmann::ordered_json& meta, const ParameterSet& params);
void write_checkpoint(const std::string& path, const nlohmann::ordered_json& meta, const ParameterSet& params);

LoadedCheckpoint read_checkpoint(std::istream& in);
LoadedCheckpoint read_checkpoint(const std::string& path);

// Copies tensors into `params` by name; every parameter must be present with
// a matching shape. Throws ValidationError.
void load_parameters(ParameterSet& params, const LoadedCheckpoint& ckpt);

}  // namespace ptrner
