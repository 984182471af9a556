#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "kgap/tensor.hpp"

namespace kgap::ad {

// Checkpoint directory layout (version 1):
//   manifest.json  {"format":"kgap-checkpoint","version":1,"dtype":"float32"|"float64",
//                   "seed":N,"tensors":[{"name","shape":[r,c],"offset","count"}],
//                   "metadata":{string:string}}
//   params.bin     tensor payloads back to back, raw little-endian, offsets in elements
inline constexpr int kCheckpointVersion = 1;

using CheckpointMetadata = std::map<std::string, std::string>;

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet<T>& params,
                     const CheckpointMetadata& metadata = {});

// Reads either dtype and converts to T.
template <typename T>
ParameterSet<T> load_checkpoint(const std::filesystem::path& dir, CheckpointMetadata* metadata = nullptr);

}  // namespace kgap::ad
