// Command-line front end. Talks to the library exclusively through the C API
// in dodo.h; every command writes a key=value summary under --out.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dodo.h"

namespace {

namespace fs = std::filesystem;

struct ModelDeleter {
  void operator()(dodo_model* m) const { dodo_model_free(m); }
};
struct ReportDeleter {
  void operator()(dodo_report* r) const { dodo_report_free(r); }
};
using ModelPtr = std::unique_ptr<dodo_model, ModelDeleter>;
using ReportPtr = std::unique_ptr<dodo_report, ReportDeleter>;

// Spec'd exit codes: 2 missing checkpoint / unreadable file, 3 malformed
// config or checkpoint format, 4 NaN loss, 1 anything else.
int exit_code_for(dodo_status status) {
  switch (status) {
    case DODO_OK: return 0;
    case DODO_ERR_IO: return 2;
    case DODO_ERR_CONFIG:
    case DODO_ERR_FORMAT: return 3;
    case DODO_ERR_NAN_LOSS: return 4;
    default: return 1;
  }
}

[[noreturn]] void die(dodo_status status) {
  std::cerr << "error (" << dodo_status_name(status) << "): " << dodo_last_error() << "\n";
  std::exit(exit_code_for(status));
}

void check(dodo_status status) {
  if (status != DODO_OK) die(status);
}

struct CommonArgs {
  std::string config_path;
  std::string corpus;
  std::string checkpoint;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  double ratio = 0.0;       // 0 = keep config value
  double threshold = 0.0;
  bool threshold_set = false;
  std::int64_t tau = -1;
  std::int64_t segment = -1;
  std::uint64_t steps = 2000;
  std::string mode = "topk";
  std::string scheme = "char";
  double lr = 3e-4;
  std::uint64_t warmup = 200;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_corpus) {
  cmd->add_option("--config", a.config_path, "key=value config file");
  auto* corpus = cmd->add_option("--corpus", a.corpus, "corpus file (one document per line)");
  if (needs_corpus) corpus->required();
  cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint to load");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--seed", a.seed, "RNG seed");
  cmd->add_option("--ratio", a.ratio, "compression ratio r");
  cmd->add_option("--threshold", a.threshold, "score threshold lambda")
      ->each([&a](const std::string&) { a.threshold_set = true; });
  cmd->add_option("--tau", a.tau, "uncompressed recent window");
  cmd->add_option("--segment", a.segment, "segment length for chunked training");
  cmd->add_option("--steps", a.steps, "training steps");
  cmd->add_option("--mode", a.mode, "selection mode: topk | threshold");
  cmd->add_option("--scheme", a.scheme, "tokenizer scheme: char | whitespace");
  cmd->add_option("--lr", a.lr, "learning rate");
  cmd->add_option("--warmup", a.warmup, "warmup steps");
}

std::string read_file_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error (io): cannot open '" << path << "'\n";
    std::exit(2);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Config precedence: defaults < --config file < explicit flags.
std::string override_text(const CommonArgs& a) {
  std::string text;
  if (a.ratio > 0.0) text += "ratio=" + std::to_string(a.ratio) + "\n";
  if (a.threshold_set) text += "lambda=" + std::to_string(a.threshold) + "\n";
  if (a.tau >= 0) text += "tau=" + std::to_string(a.tau) + "\n";
  if (a.segment > 0) text += "segment=" + std::to_string(a.segment) + "\n";
  return text;
}

ModelPtr open_model(const CommonArgs& a) {
  dodo_model* raw = nullptr;
  if (!a.checkpoint.empty()) {
    check(dodo_model_load(a.checkpoint.c_str(), &raw));
  } else {
    std::string cfg;
    if (!a.config_path.empty()) cfg = read_file_or_die(a.config_path);
    cfg += override_text(a);
    check(dodo_model_create(cfg.c_str(), a.scheme.c_str(), a.corpus.c_str(), a.seed, &raw));
  }
  ModelPtr model(raw);
  const std::string overrides = override_text(a);
  if (!a.checkpoint.empty() && !overrides.empty())
    check(dodo_model_apply_config(model.get(), overrides.c_str()));
  return model;
}

double effective_ratio(const CommonArgs& a, const dodo_model* model) {
  if (a.ratio > 0.0) return a.ratio;
  char* text = nullptr;
  check(dodo_model_config_text(model, &text));
  std::string cfg(text);
  dodo_string_free(text);
  const auto pos = cfg.find("ratio=");
  return std::stod(cfg.substr(pos + 6));
}

std::uint32_t effective_tau(const CommonArgs& a, const dodo_model* model) {
  if (a.tau >= 0) return static_cast<std::uint32_t>(a.tau);
  char* text = nullptr;
  check(dodo_model_config_text(model, &text));
  std::string cfg(text);
  dodo_string_free(text);
  const auto pos = cfg.find("tau=");
  return static_cast<std::uint32_t>(std::stoul(cfg.substr(pos + 4)));
}

void write_summary(const std::string& out_dir, const dodo_report* report,
                   const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/summary.txt";
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error (io): cannot write '" << path << "'\n";
    std::exit(2);
  }
  for (const auto& [k, v] : extra) out << k << "=" << v << "\n";
  for (size_t i = 0; i < dodo_report_size(report); ++i)
    out << dodo_report_key(report, i) << "=" << dodo_report_value(report, i) << "\n";
  std::cout << "summary: " << path << "\n";
}

void save_model_to(const dodo_model* model, const std::string& out_dir, const std::string& name) {
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/" + name;
  check(dodo_model_save(model, path.c_str()));
  std::cout << "checkpoint: " << path << "\n";
}

dodo_train_options train_options(const CommonArgs& a, const char* task, const char* variant) {
  dodo_train_options opt;
  dodo_train_options_init(&opt);
  opt.steps = a.steps;
  opt.lr = a.lr;
  opt.warmup = a.warmup;
  opt.seed = a.seed;
  opt.task = task;
  opt.variant = variant;
  opt.mode = a.mode.c_str();
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dodo: dynamic contextual compression for decoder-only language models"};
  app.require_subcommand(1);

  CommonArgs a;
  std::string task = "autoencode";
  std::string variant = "dodo";
  std::vector<double> eval_ratios;
  std::string plain_ckpt, compressive_ckpt;
  std::size_t line_index = 0;
  std::size_t oracle_context = 8, oracle_continuation = 4, oracle_docs = 4;

  auto* train_c = app.add_subcommand("train-compressor", "train the fixed-context compressor");
  add_common(train_c, a, true);
  train_c->add_option("--task", task, "autoencode | continue");

  auto* train_l = app.add_subcommand("train-lm", "train the autoregressive LM");
  add_common(train_l, a, true);
  train_l->add_option("--variant", variant, "dodo | plain | compressive");

  auto* eval_a = app.add_subcommand("eval-autoencode", "reconstruction BLEU per ratio");
  add_common(eval_a, a, true);
  eval_a->add_option("--ratios", eval_ratios, "ratios to evaluate (default: config ratio)");

  auto* eval_l = app.add_subcommand("eval-lm", "matched-budget perplexity table");
  add_common(eval_l, a, true);
  eval_l->add_option("--plain-checkpoint", plain_ckpt, "checkpoint for the full baseline");
  eval_l->add_option("--compressive-checkpoint", compressive_ckpt,
                     "checkpoint for the compressive baseline");

  auto* compress = app.add_subcommand("compress", "compress one document to a nugget artifact");
  add_common(compress, a, true);
  compress->add_option("--line", line_index, "document line index");

  auto* inspect = app.add_subcommand("inspect-scores", "per-token score dump and statistics");
  add_common(inspect, a, true);

  auto* calibrate = app.add_subcommand("calibrate-threshold", "quantile-calibrate lambda");
  add_common(calibrate, a, true);

  auto* oracle = app.add_subcommand("oracle", "greedy optimal-selection search");
  add_common(oracle, a, true);
  oracle->add_option("--context", oracle_context, "context length");
  oracle->add_option("--continuation", oracle_continuation, "continuation length");
  oracle->add_option("--max-docs", oracle_docs, "documents to search");

  CLI11_PARSE(app, argc, argv);

  if (train_c->parsed()) {
    ModelPtr model = open_model(a);
    dodo_train_options opt = train_options(a, task.c_str(), "dodo");
    dodo_report* rep = nullptr;
    check(dodo_train_compressor(model.get(), a.corpus.c_str(), &opt, &rep));
    ReportPtr report(rep);
    save_model_to(model.get(), a.out_dir, "compressor.ckpt");
    write_summary(a.out_dir, report.get(), {{"seed", std::to_string(a.seed)}});
    return 0;
  }

  if (train_l->parsed()) {
    ModelPtr model = open_model(a);
    dodo_train_options opt = train_options(a, "autoencode", variant.c_str());
    dodo_report* rep = nullptr;
    check(dodo_train_lm(model.get(), a.corpus.c_str(), &opt, &rep));
    ReportPtr report(rep);
    save_model_to(model.get(), a.out_dir, "lm_" + variant + ".ckpt");
    write_summary(a.out_dir, report.get(), {{"seed", std::to_string(a.seed)}});
    return 0;
  }

  if (eval_a->parsed()) {
    if (a.checkpoint.empty()) {
      std::cerr << "error (io): eval-autoencode requires --checkpoint\n";
      return 2;
    }
    ModelPtr model = open_model(a);
    if (eval_ratios.empty()) eval_ratios.push_back(effective_ratio(a, model.get()));
    dodo_report* rep = nullptr;
    check(dodo_eval_autoencode(model.get(), a.corpus.c_str(), eval_ratios.data(),
                               eval_ratios.size(), &rep));
    ReportPtr report(rep);
    write_summary(a.out_dir, report.get());
    for (size_t i = 0; i < dodo_report_size(report.get()); ++i)
      std::cout << dodo_report_key(report.get(), i) << "\t" << dodo_report_value(report.get(), i)
                << "\n";
    return 0;
  }

  if (eval_l->parsed()) {
    if (a.checkpoint.empty()) {
      std::cerr << "error (io): eval-lm requires --checkpoint\n";
      return 2;
    }
    struct Row {
      std::string ckpt;
      const char* variant;
    };
    std::vector<Row> rows = {{a.checkpoint, "dodo"}};
    if (!compressive_ckpt.empty()) rows.push_back({compressive_ckpt, "compressive"});
    if (!plain_ckpt.empty()) rows.push_back({plain_ckpt, "full"});

    fs::create_directories(a.out_dir);
    std::ofstream table(a.out_dir + "/lm_table.tsv", std::ios::binary);
    const char* header =
        "model\ttotal_states\tcompressed_tokens\tcontext_tokens\tsubword_ppl\tword_ppl";
    table << header << "\n";
    std::cout << header << "\n";
    std::vector<std::pair<std::string, std::string>> merged;
    for (const Row& r : rows) {
      CommonArgs row_args = a;
      row_args.checkpoint = r.ckpt;
      ModelPtr model = open_model(row_args);
      dodo_report* rep = nullptr;
      check(dodo_eval_lm(model.get(), a.corpus.c_str(), r.variant,
                         effective_ratio(a, model.get()), effective_tau(a, model.get()), &rep));
      ReportPtr report(rep);
      auto get = [&](const char* key) {
        const char* v = dodo_report_get(report.get(), key);
        return std::string(v ? v : "");
      };
      std::ostringstream line;
      line << get("model") << "\t" << get("total_states") << "\t" << get("compressed_tokens")
           << "\t" << get("context_tokens") << "\t" << get("subword_ppl") << "\t"
           << get("word_ppl");
      table << line.str() << "\n";
      std::cout << line.str() << "\n";
      for (size_t i = 0; i < dodo_report_size(report.get()); ++i)
        merged.emplace_back(get("model") + "." + dodo_report_key(report.get(), i),
                            dodo_report_value(report.get(), i));
    }
    std::ofstream summary(a.out_dir + "/summary.txt", std::ios::binary);
    for (const auto& [k, v] : merged) summary << k << "=" << v << "\n";
    std::cout << "summary: " << a.out_dir << "/summary.txt\n";
    return 0;
  }

  if (compress->parsed()) {
    if (a.checkpoint.empty()) {
      std::cerr << "error (io): compress requires --checkpoint\n";
      return 2;
    }
    ModelPtr model = open_model(a);
    fs::create_directories(a.out_dir);
    const std::string artifact = a.out_dir + "/nuggets.dodn";
    dodo_report* rep = nullptr;
    check(dodo_compress_document(model.get(), a.corpus.c_str(), line_index, a.mode.c_str(),
                                 artifact.c_str(), &rep));
    ReportPtr report(rep);
    write_summary(a.out_dir, report.get());
    return 0;
  }

  if (inspect->parsed()) {
    if (a.checkpoint.empty()) {
      std::cerr << "error (io): inspect-scores requires --checkpoint\n";
      return 2;
    }
    ModelPtr model = open_model(a);
    fs::create_directories(a.out_dir);
    const std::string dump = a.out_dir + "/scores.tsv";
    dodo_report* rep = nullptr;
    check(dodo_inspect_scores(model.get(), a.corpus.c_str(), a.mode.c_str(), dump.c_str(), &rep));
    ReportPtr report(rep);
    write_summary(a.out_dir, report.get());
    std::cout << "dump: " << dump << "\n";
    return 0;
  }

  if (calibrate->parsed()) {
    if (a.checkpoint.empty()) {
      std::cerr << "error (io): calibrate-threshold requires --checkpoint\n";
      return 2;
    }
    ModelPtr model = open_model(a);
    dodo_report* rep = nullptr;
    check(dodo_calibrate_threshold(model.get(), a.corpus.c_str(),
                                   effective_ratio(a, model.get()), &rep));
    ReportPtr report(rep);
    save_model_to(model.get(), a.out_dir, "calibrated.ckpt");
    write_summary(a.out_dir, report.get());
    return 0;
  }

  if (oracle->parsed()) {
    if (a.checkpoint.empty()) {
      std::cerr << "error (io): oracle requires --checkpoint\n";
      return 2;
    }
    ModelPtr model = open_model(a);
    dodo_report* rep = nullptr;
    check(dodo_oracle(model.get(), a.corpus.c_str(), oracle_context, oracle_continuation,
                      effective_ratio(a, model.get()), oracle_docs, &rep));
    ReportPtr report(rep);
    write_summary(a.out_dir, report.get());
    return 0;
  }

  return 1;
}
