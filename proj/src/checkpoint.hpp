#ifndef DODO_CHECKPOINT_HPP_
#define DODO_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "tensor.hpp"

namespace dodo {

// Versioned binary container, little-endian throughout:
//   magic[4], version u32,
//   config: layers,width,heads,vocab,max_pos,feature_layer u32, ratio f64,
//           tau u32, lambda f64, segment u32,
//   tensor count u32, then per tensor:
//   name length u32, name bytes, rank u32, extents u64[rank], payload f64[].
// Model checkpoints use magic "DODO"; nugget-state artifacts use "DODN".

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct Container {
  std::string magic;  // "DODO" or "DODN"
  ModelConfig config;
  std::vector<NamedTensor> tensors;

  const NamedTensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path, const std::string& expected_magic);

}  // namespace dodo

#endif  // DODO_CHECKPOINT_HPP_
