#ifndef DODO_VOCAB_HPP_
#define DODO_VOCAB_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"

namespace dodo {

enum class TokenScheme : std::uint32_t { kChar = 0, kWhitespace = 1 };

// Token table with reserved ids. Ids are assigned in first-seen order, so the
// mapping is deterministic for a given corpus and stable across save/load.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSoft = 2;  // trainable soft-prompt token
  static constexpr int kReserved = 3;

  explicit Vocab(TokenScheme scheme = TokenScheme::kChar);

  TokenScheme scheme() const { return scheme_; }
  std::size_t size() const { return id_to_token_.size(); }

  // Splits text per scheme and interns unseen tokens.
  std::vector<int> fit(const std::string& text);
  // Splits text; unseen tokens map to kUnk.
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;
  const std::string& token_text(int id) const;

  // Serialization into the checkpoint tensor container.
  std::vector<double> to_bytes() const;
  static Vocab from_bytes(TokenScheme scheme, const std::vector<double>& bytes);

 private:
  std::vector<std::string> split(const std::string& text) const;
  int intern(const std::string& tok);

  TokenScheme scheme_;
  std::map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Decodes UTF-8 into codepoint strings; malformed input raises a decode error
// naming the byte offset.
std::vector<std::string> utf8_chars(const std::string& text);

}  // namespace dodo

#endif  // DODO_VOCAB_HPP_
