#ifndef DODO_TESTS_TEST_UTIL_HPP_
#define DODO_TESTS_TEST_UTIL_HPP_

#include <string>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace dodo::testing {

// A small model over a char vocabulary of `symbols` letters.
inline DodoModel tiny_model(std::uint32_t layers = 2, std::uint32_t width = 16,
                            std::uint32_t heads = 2, std::size_t symbols = 12,
                            std::uint32_t max_pos = 160, std::uint32_t feature_layer = 1,
                            std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.layers = layers;
  cfg.width = width;
  cfg.heads = heads;
  cfg.max_pos = max_pos;
  cfg.feature_layer = feature_layer;
  Vocab vocab(TokenScheme::kChar);
  std::string alphabet;
  for (std::size_t i = 0; i < symbols; ++i) alphabet += static_cast<char>('a' + i);
  vocab.fit(alphabet);
  return init_model(cfg, vocab, seed);
}

inline std::vector<int> random_tokens(Rng& rng, const DodoModel& model, std::size_t len) {
  std::vector<int> out(len);
  for (auto& t : out)
    t = Vocab::kReserved +
        static_cast<int>(rng.below(model.config.vocab - Vocab::kReserved));
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace dodo::testing

#endif  // DODO_TESTS_TEST_UTIL_HPP_
