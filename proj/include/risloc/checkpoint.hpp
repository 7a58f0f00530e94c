#pragma once

#include <string>

#include "json.hpp"
#include "risloc/params.hpp"

namespace risloc {

// Self-describing parameter container: versioned header, JSON metadata, then
// name -> (shape, raw float64 column-major little-endian) entries. Optimizer
// tensors are stored under a separate section so models can be reloaded with
// or without training state.
struct Checkpoint {
  nlohmann::json meta;
  NamedParams params;
  NamedParams opt;

  static constexpr char kMagic[9] = "RLCKPT01";
  static constexpr std::uint32_t kVersion = 1;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a of the file bytes, hex encoded; recorded in run manifests.
std::string file_hash_hex(const std::string& path);

}  // namespace risloc
