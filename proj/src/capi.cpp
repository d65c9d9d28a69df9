#include "dodo.h"

#include <cstdio>
#include <cstring>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "compressor.hpp"
#include "corpus.hpp"
#include "harness.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "stream.hpp"
#include "train.hpp"

struct dodo_model {
  dodo::DodoModel impl;
};

struct dodo_stream {
  const dodo_model* owner;
  dodo::StreamState impl;
};

struct dodo_report {
  std::vector<std::pair<std::string, std::string>> kv;

  void put(const std::string& key, const std::string& value) { kv.emplace_back(key, value); }
  void put(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    kv.emplace_back(key, buf);
  }
  void put(const std::string& key, std::uint64_t value) {
    kv.emplace_back(key, std::to_string(value));
  }
};

namespace {

thread_local std::string g_last_error;

dodo_status status_from(dodo::Errc code) {
  using dodo::Errc;
  switch (code) {
    case Errc::kInvalidArg:
    case Errc::kShape:
    case Errc::kPosition:
    case Errc::kMask:
    case Errc::kIndex: return DODO_ERR_INVALID_ARG;
    case Errc::kLength: return DODO_ERR_LENGTH;
    case Errc::kConfig: return DODO_ERR_CONFIG;
    case Errc::kVocab: return DODO_ERR_VOCAB;
    case Errc::kDecode: return DODO_ERR_DECODE;
    case Errc::kCalibration: return DODO_ERR_CALIBRATION;
    case Errc::kIo: return DODO_ERR_IO;
    case Errc::kFormat: return DODO_ERR_FORMAT;
    case Errc::kNanLoss: return DODO_ERR_NAN_LOSS;
    case Errc::kState: return DODO_ERR_STATE;
  }
  return DODO_ERR_STATE;
}

template <typename Fn>
dodo_status wrap(Fn&& fn) {
  try {
    fn();
    return DODO_OK;
  } catch (const dodo::Error& e) {
    g_last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DODO_ERR_STATE;
  }
}

dodo_status arg_error(const char* msg) {
  g_last_error = msg;
  return DODO_ERR_INVALID_ARG;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dodo::TokenScheme parse_scheme(const char* scheme) {
  const std::string s = scheme ? scheme : "char";
  if (s == "char") return dodo::TokenScheme::kChar;
  if (s == "whitespace") return dodo::TokenScheme::kWhitespace;
  dodo::fail(dodo::Errc::kConfig, "unknown tokenizer scheme '" + s + "'");
}

dodo::SelectionMode parse_mode(const char* mode, const dodo::ModelConfig& cfg) {
  const std::string s = mode ? mode : "topk";
  if (s == "topk") return dodo::SelectionMode::topk(cfg.ratio);
  if (s == "threshold") return dodo::SelectionMode::threshold(cfg.lambda);
  dodo::fail(dodo::Errc::kConfig, "unknown selection mode '" + s + "' (expected topk or threshold)");
}

dodo::LmVariant parse_variant(const char* variant) {
  const std::string s = variant ? variant : "dodo";
  if (s == "dodo") return dodo::LmVariant::kDodo;
  if (s == "plain" || s == "full") return dodo::LmVariant::kPlain;
  if (s == "compressive") return dodo::LmVariant::kCompressive;
  dodo::fail(dodo::Errc::kConfig, "unknown LM variant '" + s + "'");
}

dodo::Corpus load_with_vocab(const dodo::DodoModel& model, const char* path) {
  if (!path) dodo::fail(dodo::Errc::kInvalidArg, "corpus path is null");
  dodo::Vocab vocab = model.vocab;  // encode-only copy; unseen tokens map to <unk>
  return dodo::load_corpus(path, vocab, /*fit=*/false);
}

void fill_train_report(dodo_report* rep, const dodo::TrainStats& stats) {
  rep->put("steps", static_cast<std::uint64_t>(stats.steps_run));
  rep->put("epochs", static_cast<std::uint64_t>(stats.epochs));
  rep->put("final_loss", stats.final_loss);
  rep->put("mean_last_window", stats.mean_last_window);
  for (const auto& e : stats.log) {
    char key[48];
    std::snprintf(key, sizeof(key), "loss_step_%08llu", static_cast<unsigned long long>(e.step));
    rep->put(key, e.loss);
  }
}

dodo::TrainOptions convert_options(const dodo_train_options* options,
                                   const dodo::ModelConfig& cfg) {
  dodo::TrainOptions opt;
  opt.mode = dodo::SelectionMode::topk(cfg.ratio);
  if (!options) return opt;
  opt.steps = options->steps;
  opt.lr = options->lr;
  opt.warmup = options->warmup;
  opt.seed = options->seed;
  opt.log_every = options->log_every;
  if (options->checkpoint_dir) opt.checkpoint_dir = options->checkpoint_dir;
  if (options->task) opt.task = options->task;
  opt.variant = parse_variant(options->variant);
  opt.mode = parse_mode(options->mode, cfg);
  return opt;
}

}  // namespace

extern "C" {

const char* dodo_version(void) { return "1.0.0"; }

const char* dodo_status_name(dodo_status status) {
  switch (status) {
    case DODO_OK: return "ok";
    case DODO_ERR_INVALID_ARG: return "invalid-argument";
    case DODO_ERR_LENGTH: return "length";
    case DODO_ERR_CONFIG: return "config";
    case DODO_ERR_VOCAB: return "vocab";
    case DODO_ERR_DECODE: return "decode";
    case DODO_ERR_CALIBRATION: return "calibration";
    case DODO_ERR_IO: return "io";
    case DODO_ERR_FORMAT: return "format";
    case DODO_ERR_NAN_LOSS: return "nan-loss";
    case DODO_ERR_STATE: return "state";
  }
  return "unknown";
}

const char* dodo_last_error(void) { return g_last_error.c_str(); }

void dodo_string_free(char* s) { delete[] s; }

dodo_status dodo_model_create(const char* config_text, const char* scheme,
                              const char* corpus_path, uint64_t seed, dodo_model** out) {
  if (!out) return arg_error("out pointer is null");
  if (!corpus_path) return arg_error("corpus path is null");
  return wrap([&] {
    dodo::ModelConfig cfg;
    if (config_text) dodo::apply_config_text(cfg, config_text);
    dodo::Vocab vocab(parse_scheme(scheme));
    dodo::load_corpus(corpus_path, vocab, /*fit=*/true);
    *out = new dodo_model{dodo::init_model(cfg, std::move(vocab), seed)};
  });
}

dodo_status dodo_model_load(const char* path, dodo_model** out) {
  if (!out || !path) return arg_error("null argument");
  return wrap([&] { *out = new dodo_model{dodo::load_model(path)}; });
}

dodo_status dodo_model_save(const dodo_model* model, const char* path) {
  if (!model || !path) return arg_error("null argument");
  return wrap([&] { dodo::save_model(model->impl, path); });
}

void dodo_model_free(dodo_model* model) { delete model; }

dodo_status dodo_model_config_text(const dodo_model* model, char** out_text) {
  if (!model || !out_text) return arg_error("null argument");
  return wrap([&] { *out_text = dup_string(dodo::config_to_text(model->impl.config)); });
}

dodo_status dodo_model_apply_config(dodo_model* model, const char* config_text) {
  if (!model || !config_text) return arg_error("null argument");
  return wrap([&] {
    dodo::ModelConfig next = model->impl.config;
    dodo::apply_config_text(next, config_text);
    const dodo::ModelConfig& cur = model->impl.config;
    if (next.layers != cur.layers || next.width != cur.width || next.heads != cur.heads ||
        next.vocab != cur.vocab || next.max_pos != cur.max_pos ||
        next.feature_layer != cur.feature_layer)
      dodo::fail(dodo::Errc::kConfig, "structural fields of an initialized model cannot change");
    model->impl.config = next;
  });
}

dodo_status dodo_model_vocab_size(const dodo_model* model, uint32_t* out) {
  if (!model || !out) return arg_error("null argument");
  *out = static_cast<uint32_t>(model->impl.vocab.size());
  return DODO_OK;
}

size_t dodo_report_size(const dodo_report* report) { return report ? report->kv.size() : 0; }

const char* dodo_report_key(const dodo_report* report, size_t index) {
  if (!report || index >= report->kv.size()) return nullptr;
  return report->kv[index].first.c_str();
}

const char* dodo_report_value(const dodo_report* report, size_t index) {
  if (!report || index >= report->kv.size()) return nullptr;
  return report->kv[index].second.c_str();
}

const char* dodo_report_get(const dodo_report* report, const char* key) {
  if (!report || !key) return nullptr;
  for (const auto& [k, v] : report->kv)
    if (k == key) return v.c_str();
  return nullptr;
}

void dodo_report_free(dodo_report* report) { delete report; }

void dodo_train_options_init(dodo_train_options* options) {
  if (!options) return;
  options->steps = 2000;
  options->lr = 3e-4;
  options->warmup = 200;
  options->seed = 0;
  options->log_every = 100;
  options->checkpoint_dir = nullptr;
  options->task = "autoencode";
  options->variant = "dodo";
  options->mode = "topk";
}

dodo_status dodo_train_compressor(dodo_model* model, const char* corpus_path,
                                  const dodo_train_options* options, dodo_report** report) {
  if (!model || !corpus_path) return arg_error("null argument");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    dodo::TrainOptions opt = convert_options(options, model->impl.config);
    dodo::TrainStats stats = dodo::train_compressor(model->impl, corpus, opt);
    if (report) {
      auto* rep = new dodo_report;
      rep->put("command", std::string("train-compressor"));
      rep->put("task", opt.task);
      fill_train_report(rep, stats);
      *report = rep;
    }
  });
}

dodo_status dodo_train_lm(dodo_model* model, const char* corpus_path,
                          const dodo_train_options* options, dodo_report** report) {
  if (!model || !corpus_path) return arg_error("null argument");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    dodo::TrainOptions opt = convert_options(options, model->impl.config);
    dodo::TrainStats stats = dodo::train_lm(model->impl, corpus, opt);
    if (report) {
      auto* rep = new dodo_report;
      rep->put("command", std::string("train-lm"));
      rep->put("variant", options && options->variant ? options->variant : "dodo");
      fill_train_report(rep, stats);
      *report = rep;
    }
  });
}

dodo_status dodo_eval_autoencode(const dodo_model* model, const char* corpus_path,
                                 const double* ratios, size_t ratio_count,
                                 dodo_report** report) {
  if (!model || !corpus_path || !report) return arg_error("null argument");
  if (!ratios || ratio_count == 0) return arg_error("at least one ratio is required");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    auto* rep = new dodo_report;
    rep->put("command", std::string("eval-autoencode"));
    for (size_t i = 0; i < ratio_count; ++i) {
      dodo::AutoencodeEval ev = dodo::eval_autoencode(model->impl, corpus.docs, ratios[i]);
      char key[48];
      std::snprintf(key, sizeof(key), "bleu_r%g", ratios[i]);
      rep->put(key, ev.bleu);
      std::snprintf(key, sizeof(key), "exact_r%g", ratios[i]);
      rep->put(key, static_cast<std::uint64_t>(ev.exact));
      if (i == 0) rep->put("docs", static_cast<std::uint64_t>(ev.docs));
    }
    *report = rep;
  });
}

dodo_status dodo_eval_lm(const dodo_model* model, const char* corpus_path, const char* variant,
                         double ratio, uint32_t tau, dodo_report** report) {
  if (!model || !corpus_path || !report) return arg_error("null argument");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    dodo::LmEvalRow row =
        dodo::eval_lm_budget(model->impl, corpus.docs, parse_variant(variant), ratio, tau);
    auto* rep = new dodo_report;
    rep->put("command", std::string("eval-lm"));
    rep->put("model", row.name);
    rep->put("total_states", row.total_states);
    rep->put("compressed_tokens", row.compressed_tokens);
    rep->put("context_tokens", row.context_tokens);
    rep->put("subword_ppl", row.subword_ppl);
    rep->put("word_ppl", row.word_ppl);
    rep->put("positions", static_cast<std::uint64_t>(row.positions));
    rep->put("words", static_cast<std::uint64_t>(row.words));
    *report = rep;
  });
}

dodo_status dodo_compress_document(const dodo_model* model, const char* corpus_path,
                                   size_t line_index, const char* mode,
                                   const char* artifact_path, dodo_report** report) {
  if (!model || !corpus_path || !artifact_path) return arg_error("null argument");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    if (line_index >= corpus.docs.size())
      dodo::fail(dodo::Errc::kInvalidArg,
                 "line index " + std::to_string(line_index) + " out of range (corpus has " +
                     std::to_string(corpus.docs.size()) + " documents)");
    const std::vector<int>& doc = corpus.docs[line_index];
    dodo::SelectionMode smode = parse_mode(mode, model->impl.config);
    dodo::NuggetState nuggets =
        dodo::dodo_compress(model->impl.compressor, model->impl.scorer, model->impl.features,
                            model->impl.config, doc, 0, smode);
    dodo::save_nugget_state(nuggets, model->impl.config, artifact_path);
    if (report) {
      auto* rep = new dodo_report;
      rep->put("command", std::string("compress"));
      rep->put("tokens", static_cast<std::uint64_t>(doc.size()));
      rep->put("nuggets", static_cast<std::uint64_t>(nuggets.k()));
      rep->put("mode", std::string(mode ? mode : "topk"));
      rep->put("artifact", std::string(artifact_path));
      *report = rep;
    }
  });
}

dodo_status dodo_inspect_scores(const dodo_model* model, const char* corpus_path,
                                const char* mode, const char* dump_path, dodo_report** report) {
  if (!model || !corpus_path || !dump_path) return arg_error("null argument");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    dodo::SelectionMode smode = parse_mode(mode, model->impl.config);
    dodo::InspectResult res = dodo::inspect_scores(model->impl, corpus.docs, smode);
    std::FILE* f = std::fopen(dump_path, "wb");
    if (!f) dodo::fail(dodo::Errc::kIo, std::string("cannot open '") + dump_path + "' for writing");
    std::fwrite(res.tsv.data(), 1, res.tsv.size(), f);
    std::fclose(f);
    if (report) {
      dodo::SelectionStats stats =
          dodo::selection_frequency_stats(res.selected_tokens, res.all_tokens);
      auto* rep = new dodo_report;
      rep->put("command", std::string("inspect-scores"));
      rep->put("tokens", static_cast<std::uint64_t>(stats.corpus_total));
      rep->put("selected", static_cast<std::uint64_t>(stats.selected_total));
      rep->put("top10_coverage", stats.top10_coverage);
      const std::size_t top = std::min<std::size_t>(10, stats.types.size());
      for (std::size_t i = 0; i < top; ++i) {
        char key[32];
        std::snprintf(key, sizeof(key), "top%02zu", i);
        char val[96];
        std::snprintf(val, sizeof(val), "%s\t%.6f\t%.6f", stats.types[i].token.c_str(),
                      stats.types[i].selected_freq, stats.types[i].corpus_freq);
        rep->put(key, std::string(val));
      }
      *report = rep;
    }
  });
}

dodo_status dodo_calibrate_threshold(dodo_model* model, const char* corpus_path, double ratio,
                                     dodo_report** report) {
  if (!model || !corpus_path) return arg_error("null argument");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    dodo::CalibrationResult res = dodo::calibrate_over_corpus(model->impl, corpus.docs, ratio);
    model->impl.config.lambda = res.lambda;
    if (report) {
      auto* rep = new dodo_report;
      rep->put("command", std::string("calibrate-threshold"));
      rep->put("lambda", res.lambda);
      rep->put("sample_tokens", static_cast<std::uint64_t>(res.sample_tokens));
      rep->put("selected_fraction", res.selected_fraction);
      rep->put("target_fraction", 1.0 / ratio);
      *report = rep;
    }
  });
}

dodo_status dodo_oracle(const dodo_model* model, const char* corpus_path, size_t context_len,
                        size_t continuation_len, double ratio, size_t max_docs,
                        dodo_report** report) {
  if (!model || !corpus_path || !report) return arg_error("null argument");
  if (context_len == 0 || continuation_len == 0)
    return arg_error("context and continuation must be positive");
  return wrap([&] {
    dodo::Corpus corpus = load_with_vocab(model->impl, corpus_path);
    auto* rep = new dodo_report;
    rep->put("command", std::string("oracle"));
    double sum_replaced = 0.0, sum_initial = 0.0, sum_best = 0.0;
    std::size_t done = 0;
    for (const std::vector<int>& doc : corpus.docs) {
      if (max_docs && done >= max_docs) break;
      if (doc.size() < context_len + continuation_len) continue;
      std::vector<int> ctx(doc.begin(), doc.begin() + context_len);
      std::vector<int> cont(doc.begin() + context_len,
                            doc.begin() + context_len + continuation_len);
      dodo::NuggetState init =
          dodo::dodo_compress(model->impl.compressor, model->impl.scorer, model->impl.features,
                              model->impl.config, ctx, 0, dodo::SelectionMode::topk(ratio));
      dodo::SelectionEvalFn eval = dodo::make_oracle_eval_fn(model->impl, ctx, cont);
      dodo::OracleReport orep =
          dodo::greedy_optimal_selection(eval, ctx.size(), init.selection.indices);
      char key[48];
      std::snprintf(key, sizeof(key), "doc%03zu_initial_ppl", done);
      rep->put(key, orep.initial_ppl);
      std::snprintf(key, sizeof(key), "doc%03zu_best_ppl", done);
      rep->put(key, orep.best_ppl);
      std::snprintf(key, sizeof(key), "doc%03zu_replaced_fraction", done);
      rep->put(key, orep.replaced_fraction);
      sum_replaced += orep.replaced_fraction;
      sum_initial += orep.initial_ppl;
      sum_best += orep.best_ppl;
      ++done;
    }
    if (done == 0)
      dodo::fail(dodo::Errc::kInvalidArg,
                 "oracle: no document long enough for the requested split");
    rep->put("docs", static_cast<std::uint64_t>(done));
    rep->put("mean_initial_ppl", sum_initial / static_cast<double>(done));
    rep->put("mean_best_ppl", sum_best / static_cast<double>(done));
    rep->put("mean_replaced_fraction", sum_replaced / static_cast<double>(done));
    rep->put("mean_overlap", 1.0 - sum_replaced / static_cast<double>(done));
    *report = rep;
  });
}

dodo_status dodo_stream_new(const dodo_model* model, uint32_t seg, uint32_t tau, double lambda,
                            dodo_stream** out) {
  if (!model || !out) return arg_error("null argument");
  if (seg < 1) return arg_error("seg must be >= 1");
  return wrap([&] { *out = new dodo_stream{model, dodo::StreamState({seg, tau}, lambda)}; });
}

dodo_status dodo_stream_step(dodo_stream* stream, uint32_t token, double* logits) {
  if (!stream || !logits) return arg_error("null argument");
  return wrap([&] {
    dodo::Tensor row =
        dodo::stream_step(stream->owner->impl, stream->impl, static_cast<int>(token));
    std::memcpy(logits, row.data().data(), row.size() * sizeof(double));
  });
}

dodo_status dodo_stream_counts(const dodo_stream* stream, size_t* recent, size_t* nuggets) {
  if (!stream) return arg_error("null argument");
  if (recent) *recent = stream->impl.recent_count();
  if (nuggets) *nuggets = stream->impl.nugget_count();
  return DODO_OK;
}

void dodo_stream_free(dodo_stream* stream) { delete stream; }

dodo_status dodo_tokenize(const dodo_model* model, const char* text, uint32_t** ids,
                          size_t* count) {
  if (!model || !text || !ids || !count) return arg_error("null argument");
  return wrap([&] {
    std::vector<int> toks = model->impl.vocab.encode(text);
    auto* out = new uint32_t[toks.size()];
    for (std::size_t i = 0; i < toks.size(); ++i) out[i] = static_cast<uint32_t>(toks[i]);
    *ids = out;
    *count = toks.size();
  });
}

void dodo_ids_free(uint32_t* ids) { delete[] ids; }

dodo_status dodo_detokenize(const dodo_model* model, const uint32_t* ids, size_t count,
                            char** text) {
  if (!model || (!ids && count) || !text) return arg_error("null argument");
  return wrap([&] {
    std::vector<int> toks(count);
    for (std::size_t i = 0; i < count; ++i) toks[i] = static_cast<int>(ids[i]);
    *text = dup_string(model->impl.vocab.decode(toks));
  });
}

dodo_status dodo_normalize_answer(const char* text, char** out) {
  if (!text || !out) return arg_error("null argument");
  return wrap([&] { *out = dup_string(dodo::normalize_answer(text).text); });
}

int dodo_answer_matches(const char* output, const char* gold) {
  if (!output || !gold) return -1;
  try {
    return dodo::answer_matches(output, gold) ? 1 : 0;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -1;
  }
}

double dodo_bleu(const uint32_t* candidate, size_t candidate_len, const uint32_t* reference,
                 size_t reference_len) {
  try {
    std::vector<int> cand(candidate, candidate + candidate_len);
    std::vector<int> ref(reference, reference + reference_len);
    return dodo::bleu(cand, ref);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -1.0;
  }
}

}  // extern "C"
