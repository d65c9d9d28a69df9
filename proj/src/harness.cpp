#include "harness.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace dodo {

namespace {

double row_nll(const Tensor& logits, std::size_t row, int target) {
  const std::size_t v = logits.dim(1);
  const double* r = logits.data().data() + row * v;
  double mx = r[0];
  for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, r[j]);
  double denom = 0.0;
  for (std::size_t j = 0; j < v; ++j) denom += std::exp(r[j] - mx);
  return std::log(denom) + mx - r[static_cast<std::size_t>(target)];
}

bool blank_token(const std::string& text) {
  if (text.empty()) return false;
  for (unsigned char c : text)
    if (!std::isspace(c)) return false;
  return true;
}

}  // namespace

double subword_ppl(const LogitsFn& logits_fn, std::span<const int> tokens) {
  if (tokens.size() < 2) fail(Errc::kInvalidArg, "subword_ppl: need at least 2 tokens");
  NoGradGuard ng;
  Tensor logits = logits_fn(tokens.subspan(0, tokens.size() - 1));
  std::vector<double> nll;
  nll.reserve(tokens.size() - 1);
  for (std::size_t t = 1; t < tokens.size(); ++t) nll.push_back(row_nll(logits, t - 1, tokens[t]));
  return ppl_from_nll(nll);
}

std::vector<std::pair<std::size_t, std::size_t>> word_spans_in_range(
    const Vocab& vocab, std::span<const int> tokens, std::size_t begin, std::size_t end) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  if (vocab.scheme() == TokenScheme::kWhitespace) {
    for (std::size_t t = begin; t < end; ++t) spans.emplace_back(t - begin, t - begin + 1);
    return spans;
  }
  std::size_t t = 0;
  while (t < tokens.size()) {
    if (blank_token(vocab.token_text(tokens[t]))) {
      ++t;
      continue;
    }
    std::size_t w = t;
    while (w < tokens.size() && !blank_token(vocab.token_text(tokens[w]))) ++w;
    if (t >= begin && w <= end) spans.emplace_back(t - begin, w - begin);
    t = w;
  }
  return spans;
}

AutoencodeEval eval_autoencode(const DodoModel& model,
                               std::span<const std::vector<int>> docs, double ratio) {
  NoGradGuard ng;
  AutoencodeEval out;
  BleuAccumulator acc;
  for (const std::vector<int>& doc : docs) {
    if (doc.size() < 2) continue;
    NuggetState nuggets = encode(model, doc, ratio);
    std::vector<int> recon = greedy_reconstruct(model, nuggets, doc.size(), doc.size());
    acc.add(recon, doc);
    if (recon == doc) ++out.exact;
    ++out.docs;
  }
  if (out.docs == 0) fail(Errc::kInvalidArg, "eval_autoencode: no documents with >= 2 tokens");
  out.bleu = acc.score();
  return out;
}

LmEvalRow eval_lm_budget(const DodoModel& model, std::span<const std::vector<int>> docs,
                         LmVariant variant, double ratio, std::uint32_t tau) {
  NoGradGuard ng;
  if (tau < 1) fail(Errc::kInvalidArg, "eval_lm_budget: tau must be >= 1");
  LmEvalRow row;
  row.name = variant == LmVariant::kDodo          ? "dodo"
             : variant == LmVariant::kCompressive ? "compressive"
                                                  : "full";
  const ModelConfig& cfg = model.config;
  ForwardOptions opt;
  opt.aug = StAugMode::kOff;
  double sum_states = 0.0, sum_compressed = 0.0;
  std::vector<double> all_nll;
  double word_logprob_total = 0.0;
  std::size_t word_total = 0;

  for (const std::vector<int>& doc : docs) {
    if (doc.size() < static_cast<std::size_t>(tau) + 2) continue;
    std::vector<double> doc_logprob;  // indexed by target position - (tau + 1)
    const std::size_t t0 = tau;       // first query position
    for (std::size_t t = t0; t + 1 < doc.size(); ++t) {
      const std::size_t distant = t + 1 - tau;  // [0, distant) compressed, tau raw states after
      const std::size_t k = topk_count(distant, ratio);
      Tensor logits;
      if (variant == LmVariant::kPlain) {
        const std::size_t budget = k + tau;
        const std::size_t start = t + 1 - budget;
        logits = transformer_forward(model.decoder, cfg,
                                     std::span<const int>(doc).subspan(start, budget), start, {},
                                     opt)
                     .logits;
      } else {
        std::vector<MemorySegment> memory;
        if (variant == LmVariant::kDodo) {
          NuggetState nug =
              dodo_compress(model.compressor, model.scorer, model.features, cfg,
                            std::span<const int>(doc).subspan(0, distant), 0,
                            SelectionMode::topk(ratio));
          memory.push_back(std::move(nug.memory));
        } else {
          ForwardOptions hopt;
          hopt.want_logits = false;
          hopt.aug = StAugMode::kOff;
          ForwardResult hist = transformer_forward(
              model.decoder, cfg, std::span<const int>(doc).subspan(0, distant), 0, {}, hopt);
          const std::size_t block = std::max<std::size_t>(
              1, static_cast<std::size_t>(std::llround(ratio)));
          MemorySegment pooled = pool_block_mean(hist.states, block);
          memory.push_back(std::move(pooled));
        }
        logits = transformer_forward(model.decoder, cfg,
                                     std::span<const int>(doc).subspan(distant, tau), distant,
                                     memory, opt)
                     .logits;
        sum_compressed += static_cast<double>(distant);
      }
      const double nll = row_nll(logits, logits.dim(0) - 1, doc[t + 1]);
      all_nll.push_back(nll);
      doc_logprob.push_back(-nll);
      sum_states += static_cast<double>(k + tau);
    }
    // words fully inside the evaluated target range [tau + 1, doc.size())
    auto spans = word_spans_in_range(model.vocab, doc, t0 + 1, doc.size());
    for (const auto& [b, e] : spans) {
      double lp = 0.0;
      for (std::size_t i = b; i < e; ++i) lp += doc_logprob[i];
      word_logprob_total += lp;
      ++word_total;
    }
  }
  if (all_nll.empty()) fail(Errc::kInvalidArg, "eval_lm_budget: no documents long enough");
  row.positions = all_nll.size();
  row.subword_ppl = ppl_from_nll(all_nll);
  row.total_states = sum_states / static_cast<double>(all_nll.size());
  row.compressed_tokens =
      variant == LmVariant::kPlain ? 0.0 : sum_compressed / static_cast<double>(all_nll.size());
  row.context_tokens = static_cast<double>(tau);
  row.words = word_total;
  row.word_ppl = word_total == 0
                     ? 0.0
                     : std::exp(-word_logprob_total / static_cast<double>(word_total));
  return row;
}

std::vector<double> document_scores(const DodoModel& model, std::span<const int> tokens) {
  NoGradGuard ng;
  Tensor feats = scorer_features(model.features, model.config, tokens, 0);
  Tensor s = model.scorer.forward(feats);
  return s.data();
}

InspectResult inspect_scores(const DodoModel& model, std::span<const std::vector<int>> docs,
                             SelectionMode mode) {
  InspectResult out;
  char buf[64];
  for (const std::vector<int>& doc : docs) {
    if (doc.empty()) continue;
    const std::vector<double> scores = document_scores(model, doc);
    Selection sel = mode.kind == SelectionMode::Kind::kTopK ? select_topk(scores, mode.ratio)
                                                            : select_threshold(scores, mode.lambda);
    std::vector<bool> chosen(doc.size(), false);
    for (std::size_t i : sel.indices) chosen[i] = true;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::string& text = model.vocab.token_text(doc[i]);
      std::snprintf(buf, sizeof(buf), "%.6f", scores[i]);
      out.tsv += text + "\t" + buf + "\t" + (chosen[i] ? "1" : "0") + "\n";
      out.all_tokens.push_back(text);
      if (chosen[i]) out.selected_tokens.push_back(text);
    }
  }
  return out;
}

CalibrationResult calibrate_over_corpus(const DodoModel& model,
                                        std::span<const std::vector<int>> docs, double ratio) {
  std::vector<double> pooled;
  for (const std::vector<int>& doc : docs) {
    if (doc.empty()) continue;
    const std::vector<double> scores = document_scores(model, doc);
    pooled.insert(pooled.end(), scores.begin(), scores.end());
  }
  CalibrationResult res;
  res.lambda = calibrate_threshold(pooled, ratio);
  res.sample_tokens = pooled.size();
  std::size_t above = 0;
  for (double s : pooled)
    if (s > res.lambda) ++above;
  res.selected_fraction = static_cast<double>(above) / static_cast<double>(pooled.size());
  return res;
}

}  // namespace dodo
