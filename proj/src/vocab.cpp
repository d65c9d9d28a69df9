#include "vocab.hpp"

#include <cctype>

namespace dodo {

std::vector<std::string> utf8_chars(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto bad = [&](std::size_t at) {
    fail(Errc::kDecode, "invalid UTF-8 at byte offset " + std::to_string(at));
  };
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t len;
    if (c < 0x80) len = 1;
    else if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    else { bad(i); return out; }
    if (i + len > text.size()) bad(i);
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) bad(i + k);
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocab::Vocab(TokenScheme scheme) : scheme_(scheme) {
  id_to_token_ = {"<pad>", "<unk>", "<soft>"};
  for (int id = 0; id < kReserved; ++id) token_to_id_[id_to_token_[id]] = id;
}

std::vector<std::string> Vocab::split(const std::string& text) const {
  if (scheme_ == TokenScheme::kChar) return utf8_chars(text);
  // whitespace scheme: maximal non-blank runs
  std::vector<std::string> out;
  std::string cur;
  for (const std::string& ch : utf8_chars(text)) {
    const bool blank = ch.size() == 1 && std::isspace(static_cast<unsigned char>(ch[0]));
    if (blank) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

int Vocab::intern(const std::string& tok) {
  auto it = token_to_id_.find(tok);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(tok);
  token_to_id_.emplace(tok, id);
  return id;
}

std::vector<int> Vocab::fit(const std::string& text) {
  std::vector<int> ids;
  for (const std::string& tok : split(text)) ids.push_back(intern(tok));
  return ids;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& tok : split(text)) {
    auto it = token_to_id_.find(tok);
    ids.push_back(it == token_to_id_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  bool first = true;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
      fail(Errc::kIndex, "decode: id " + std::to_string(id) + " out of range");
    if (id < kReserved) continue;
    if (scheme_ == TokenScheme::kWhitespace && !first) out += ' ';
    out += id_to_token_[static_cast<std::size_t>(id)];
    first = false;
  }
  return out;
}

const std::string& Vocab::token_text(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    fail(Errc::kIndex, "token_text: id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<double> Vocab::to_bytes() const {
  // Tokens beyond the reserved block, each length-prefixed, one f64 per byte.
  std::vector<double> out;
  for (std::size_t id = kReserved; id < id_to_token_.size(); ++id) {
    const std::string& tok = id_to_token_[id];
    if (tok.size() > 255) fail(Errc::kVocab, "vocab: token longer than 255 bytes");
    out.push_back(static_cast<double>(tok.size()));
    for (char c : tok) out.push_back(static_cast<double>(static_cast<unsigned char>(c)));
  }
  return out;
}

Vocab Vocab::from_bytes(TokenScheme scheme, const std::vector<double>& bytes) {
  Vocab v(scheme);
  std::size_t i = 0;
  while (i < bytes.size()) {
    const std::size_t len = static_cast<std::size_t>(bytes[i++]);
    if (i + len > bytes.size()) fail(Errc::kFormat, "vocab: truncated token table");
    std::string tok(len, '\0');
    for (std::size_t k = 0; k < len; ++k)
      tok[k] = static_cast<char>(static_cast<unsigned char>(bytes[i + k]));
    i += len;
    v.intern(tok);
  }
  return v;
}

}  // namespace dodo
