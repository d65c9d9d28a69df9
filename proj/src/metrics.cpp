#include "metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>

#include "error.hpp"

namespace dodo {

namespace {

constexpr double kBleuEps = 1e-9;

std::map<std::array<int, 4>, std::uint64_t> ngram_counts(std::span<const int> seq, std::size_t n) {
  std::map<std::array<int, 4>, std::uint64_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    std::array<int, 4> key = {0, 0, 0, 0};
    for (std::size_t j = 0; j < n; ++j) key[j] = seq[i + j];
    ++counts[key];
  }
  return counts;
}

}  // namespace

void BleuAccumulator::add(std::span<const int> candidate, std::span<const int> reference) {
  if (reference.empty()) fail(Errc::kInvalidArg, "bleu: empty reference");
  cand_len += candidate.size();
  ref_len += reference.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    if (candidate.size() < n) continue;
    auto cand_counts = ngram_counts(candidate, n);
    auto ref_counts = ngram_counts(reference, n);
    for (const auto& [key, c] : cand_counts) {
      total[n - 1] += c;
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matched[n - 1] += std::min(c, it->second);
    }
  }
}

double BleuAccumulator::score() const {
  if (cand_len == 0) return 0.0;
  double log_prec = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total[n] == 0) continue;  // orders longer than the candidate count as 1
    const double m = matched[n] > 0 ? static_cast<double>(matched[n]) : kBleuEps;
    log_prec += 0.25 * std::log(m / static_cast<double>(total[n]));
  }
  const double bp =
      cand_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_prec);
}

double bleu(std::span<const int> candidate, std::span<const int> reference) {
  BleuAccumulator acc;
  acc.add(candidate, reference);
  return acc.score();
}

double ppl_from_nll(std::span<const double> nll) {
  if (nll.empty()) fail(Errc::kInvalidArg, "ppl: no positions");
  double mean = 0.0;
  for (double v : nll) mean += v;
  mean /= static_cast<double>(nll.size());
  return std::exp(mean);
}

double word_ppl_from_logprobs(std::span<const double> logprob,
                              std::span<const std::pair<std::size_t, std::size_t>> word_spans,
                              const std::unordered_set<std::size_t>& excluded_words) {
  double total = 0.0;
  std::size_t words = 0;
  for (std::size_t w = 0; w < word_spans.size(); ++w) {
    const auto [begin, end] = word_spans[w];
    if (begin >= end || end > logprob.size())
      fail(Errc::kInvalidArg, "word_ppl: word span does not partition the positions");
    if (excluded_words.count(w)) continue;
    double lp = 0.0;
    for (std::size_t i = begin; i < end; ++i) lp += logprob[i];
    total += lp;
    ++words;
  }
  if (words == 0) fail(Errc::kInvalidArg, "word_ppl: no words to evaluate");
  return std::exp(-total / static_cast<double>(words));
}

namespace {

const std::map<std::string, std::string>& number_lexicon() {
  static const std::map<std::string, std::string> lex = {
      {"zero", "0"},     {"one", "1"},       {"two", "2"},      {"three", "3"},
      {"four", "4"},     {"five", "5"},      {"six", "6"},      {"seven", "7"},
      {"eight", "8"},    {"nine", "9"},      {"ten", "10"},     {"eleven", "11"},
      {"twelve", "12"},  {"thirteen", "13"}, {"fourteen", "14"},{"fifteen", "15"},
      {"sixteen", "16"}, {"seventeen", "17"},{"eighteen", "18"},{"nineteen", "19"},
      {"twenty", "20"},  {"thirty", "30"},   {"forty", "40"},   {"fifty", "50"},
      {"sixty", "60"},   {"seventy", "70"},  {"eighty", "80"},  {"ninety", "90"},
      {"hundred", "100"},{"thousand", "1000"}};
  return lex;
}

std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

NormalizedAnswer normalize_answer(const std::string& text) {
  // Pass 1: convert standalone number words. Words are maximal ASCII-letter
  // runs; adjacent number words form a compound phrase and are left as-is.
  struct Word {
    std::size_t begin, end;
    bool numeral;
  };
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isalpha(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i;
      while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
      const std::string w = lower_ascii(text.substr(i, j - i));
      words.push_back({i, j, number_lexicon().count(w) != 0});
      i = j;
    } else {
      ++i;
    }
  }

  // Adjacent = separated by blanks only.
  auto adjacent = [&](const Word& a, const Word& b) {
    for (std::size_t k = a.end; k < b.begin; ++k)
      if (!std::isspace(static_cast<unsigned char>(text[k]))) return false;
    return true;
  };

  NormalizedAnswer result;
  std::string converted;
  std::size_t cursor = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (!words[w].numeral) continue;
    const bool prev_num = w > 0 && words[w - 1].numeral && adjacent(words[w - 1], words[w]);
    const bool next_num = w + 1 < words.size() && words[w + 1].numeral && adjacent(words[w], words[w + 1]);
    if (prev_num || next_num) {
      if (!prev_num) ++result.compound_number_phrases;
      continue;
    }
    converted.append(text, cursor, words[w].begin - cursor);
    converted += number_lexicon().at(lower_ascii(text.substr(words[w].begin, words[w].end - words[w].begin)));
    cursor = words[w].end;
  }
  converted.append(text, cursor, std::string::npos);

  // Pass 2: punctuation -> spaces, collapse whitespace, trim, lowercase.
  std::string out;
  bool pending_space = false;
  for (char c : converted) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::ispunct(uc) || std::isspace(uc)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(uc));
  }
  result.text = std::move(out);
  return result;
}

bool answer_matches(const std::string& output, const std::string& gold) {
  const std::string o = normalize_answer(output).text;
  const std::string g = normalize_answer(gold).text;
  if (g.empty()) return false;
  return o.find(g) != std::string::npos;
}

SelectionStats selection_frequency_stats(std::span<const std::string> selected_tokens,
                                         std::span<const std::string> all_tokens) {
  SelectionStats stats;
  stats.selected_total = selected_tokens.size();
  stats.corpus_total = all_tokens.size();
  std::map<std::string, std::size_t> sel_counts, all_counts;
  for (const std::string& t : selected_tokens) ++sel_counts[t];
  for (const std::string& t : all_tokens) ++all_counts[t];
  for (const auto& [tok, c] : sel_counts) {
    TypeFrequency f;
    f.token = tok;
    f.selected_freq = stats.selected_total
                          ? static_cast<double>(c) / static_cast<double>(stats.selected_total)
                          : 0.0;
    auto it = all_counts.find(tok);
    f.corpus_freq = it != all_counts.end() && stats.corpus_total
                        ? static_cast<double>(it->second) / static_cast<double>(stats.corpus_total)
                        : 0.0;
    stats.types.push_back(std::move(f));
  }
  std::sort(stats.types.begin(), stats.types.end(), [](const TypeFrequency& a, const TypeFrequency& b) {
    if (a.selected_freq != b.selected_freq) return a.selected_freq > b.selected_freq;
    return a.token < b.token;
  });
  for (std::size_t i = 0; i < stats.types.size() && i < 10; ++i)
    stats.top10_coverage += stats.types[i].selected_freq;
  return stats;
}

}  // namespace dodo
