#include "corpus.hpp"

#include <cstdio>
#include <memory>

#include "error.hpp"

namespace dodo {

std::string read_text_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) fail(Errc::kIo, "cannot open '" + path + "'");
  std::string out;
  char buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f.get())) > 0) out.append(buf, n);
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

Corpus corpus_from_lines(const std::vector<std::string>& lines, Vocab& vocab, bool fit) {
  Corpus c;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab != std::string::npos) {
      const std::string w = line.substr(0, tab);
      const std::string y = line.substr(tab + 1);
      auto wt = fit ? vocab.fit(w) : vocab.encode(w);
      auto yt = fit ? vocab.fit(y) : vocab.encode(y);
      if (wt.empty() || yt.empty()) continue;
      c.pairs.emplace_back(std::move(wt), std::move(yt));
    } else {
      auto ids = fit ? vocab.fit(line) : vocab.encode(line);
      if (!ids.empty()) c.docs.push_back(std::move(ids));
    }
  }
  if (c.docs.empty() && c.pairs.empty()) fail(Errc::kInvalidArg, "corpus: no usable documents");
  return c;
}

Corpus load_corpus(const std::string& path, Vocab& vocab, bool fit) {
  return corpus_from_lines(split_lines(read_text_file(path)), vocab, fit);
}

namespace {

// 26 lower + 26 upper + 10 digits + '.' + ',' = 64 symbols.
const std::string kAlphabet =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,";

char rand_symbol(Rng& rng) { return kAlphabet[rng.below(kAlphabet.size())]; }

}  // namespace

std::vector<std::string> synth_patterned(Rng& rng, std::size_t count, std::size_t min_len,
                                         std::size_t max_len) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    const std::size_t motif_len = 3 + rng.below(4);
    std::string motif;
    for (std::size_t j = 0; j < motif_len; ++j) motif += rand_symbol(rng);
    std::string seq;
    while (seq.size() < len) seq += motif;
    seq.resize(len);
    // sprinkle random symbols so sequences are not pure repeats
    const std::size_t noise = len / 8;
    for (std::size_t j = 0; j < noise; ++j) seq[rng.below(len)] = rand_symbol(rng);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::string> synth_planted(Rng& rng, std::size_t count, std::size_t filler_words) {
  // Key letters and filler letters are disjoint classes, so the queried fact
  // exists nowhere but in the planted prefix.
  const std::string key_chars = "abcdefghijklm";
  const std::string filler_chars = "nopqrstuvwxyz";
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const char key = key_chars[rng.below(key_chars.size())];
    std::string doc = "k ";
    doc += std::string(3, key);
    for (std::size_t w = 0; w < filler_words; ++w) {
      doc += ' ';
      const std::size_t wl = 2 + rng.below(4);
      for (std::size_t j = 0; j < wl; ++j) doc += filler_chars[rng.below(filler_chars.size())];
    }
    doc += " q ";
    doc += std::string(3, key);
    doc += '.';
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace dodo
