/**
 * @file checkpoint.hpp
 * @brief Persisted training state: a text manifest plus flat little-endian
 *        float32 tensor data. save(load(f)) reproduces f byte for byte.
 */
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fusiongan/pretrain.hpp"

namespace fusiongan {

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;  // held at double; stored as float32
};

struct CheckpointData {
  std::map<std::string, std::string> meta;  // keys/values without whitespace
  std::vector<NamedTensor> tensors;         // manifest order
};

// File layout (text header, then raw bytes):
//   #fusiongan-ckpt v1
//   meta <key>=<value>            (sorted by key)
//   tensor <name> <rows> <cols> <offset>
//   data <float_count>
//   <float_count * 4 bytes, little-endian float32, column-major>
void save_checkpoint(const CheckpointData& data, const std::filesystem::path& path);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Bundle <-> tensor list. The corpus itself is not stored; the vocabulary
// is (as an n x 2 pitch/duration_bin tensor), along with both optimizer
// states and the policy baseline. `prefix` namespaces the tensors so three
// bundles can share one trio checkpoint.
void pack_bundle(const DomainBundle& bundle, const std::string& prefix,
                 CheckpointData& out);
DomainBundle unpack_bundle(const CheckpointData& data, const std::string& prefix,
                           int T, double clip_bound);

void save_bundle(const DomainBundle& bundle, const TrainConfig& cfg,
                 const std::filesystem::path& path);
// Returns the bundle with an empty corpus (sequences must be attached by the
// caller); cfg_out, when non-null, receives T/clip/widths/sign from the file.
DomainBundle load_bundle(const std::filesystem::path& path, int* T_out = nullptr,
                         double* clip_out = nullptr);

struct TrioCheckpoint {
  DomainBundle a, b, f;
  int T = 0;
  double clip_bound = 0.0;
};

void save_trio(const DomainBundle& a, const DomainBundle& b, const DomainBundle& f,
               const TrainConfig& cfg, const std::filesystem::path& path);
TrioCheckpoint load_trio(const std::filesystem::path& path);

}  // namespace fusiongan
