#ifndef DODO_CONFIG_HPP_
#define DODO_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"

namespace dodo {

// Architecture and compression hyperparameters. Desk-scale defaults; the
// checkpoint header carries every field.
struct ModelConfig {
  std::uint32_t layers = 4;        // L
  std::uint32_t width = 64;        // d
  std::uint32_t heads = 4;         // H
  std::uint32_t vocab = 0;         // V, set when a vocabulary is fitted
  std::uint32_t max_pos = 512;
  std::uint32_t feature_layer = 2;  // iota, scorer feature layer
  double ratio = 4.0;               // r, compression ratio
  std::uint32_t tau = 16;           // uncompressed recent window
  double lambda = 0.0;              // score threshold
  std::uint32_t segment = 32;       // chunked-training segment length

  std::uint32_t head_width() const { return width / heads; }

  void validate() const {
    if (layers < 2) fail(Errc::kConfig, "config: layers must be >= 2");
    if (width == 0 || heads == 0 || width % heads != 0)
      fail(Errc::kConfig, "config: width must be a positive multiple of heads");
    if (feature_layer < 1 || feature_layer >= layers)
      fail(Errc::kConfig, "config: feature_layer must satisfy 1 <= feature_layer < layers");
    if (ratio < 1.0) fail(Errc::kConfig, "config: ratio must be >= 1");
    if (segment < 1) fail(Errc::kConfig, "config: segment must be >= 1");
    if (max_pos == 0) fail(Errc::kConfig, "config: max_pos must be positive");
  }
};

// Flat key=value text; '#' starts a comment, later keys win.
std::map<std::string, std::string> parse_kv_text(const std::string& text);
void apply_config_text(ModelConfig& cfg, const std::string& text);
std::string config_to_text(const ModelConfig& cfg);

}  // namespace dodo

#endif  // DODO_CONFIG_HPP_
