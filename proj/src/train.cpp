#include "train.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "compressor.hpp"

namespace dodo {

namespace {

void shuffle_order(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
}

std::string epoch_checkpoint_path(const std::string& dir, std::uint64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/epoch_%04llu.ckpt", static_cast<unsigned long long>(epoch));
  return dir + buf;
}

using LossFn = std::function<Tensor(std::size_t item)>;

TrainStats run_loop(DodoModel& model, std::size_t corpus_size, const TrainOptions& opt,
                    std::vector<Tensor> params, const LossFn& loss_fn) {
  if (corpus_size == 0) fail(Errc::kInvalidArg, "train: empty corpus");
  AdamConfig acfg;
  acfg.lr = opt.lr;
  acfg.warmup = opt.warmup;
  Adam adam(std::move(params), acfg);
  Rng order_rng(opt.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<std::size_t> order(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) order[i] = i;

  TrainStats stats;
  double window_sum = 0.0;
  std::size_t window_n = 0;
  for (std::uint64_t step = 0; step < opt.steps; ++step) {
    if (step % corpus_size == 0) {
      if (step > 0) {
        ++stats.epochs;
        if (!opt.checkpoint_dir.empty())
          save_model(model, epoch_checkpoint_path(opt.checkpoint_dir, stats.epochs));
      }
      shuffle_order(order, order_rng);
    }
    Tensor loss = loss_fn(order[step % corpus_size]);
    const double lv = loss.value();
    if (!std::isfinite(lv))
      fail(Errc::kNanLoss, "train: loss is not finite at step " + std::to_string(step) +
                               " (value " + std::to_string(lv) + ")");
    adam.zero_grad();
    loss.backward();
    adam.step(adam.lr_at(step, opt.steps));

    window_sum += lv;
    ++window_n;
    stats.final_loss = lv;
    if (opt.log_every > 0 && ((step + 1) % opt.log_every == 0 || step + 1 == opt.steps)) {
      stats.log.push_back({step + 1, window_sum / static_cast<double>(window_n),
                           adam.lr_at(step, opt.steps)});
      stats.mean_last_window = window_sum / static_cast<double>(window_n);
      window_sum = 0.0;
      window_n = 0;
    }
  }
  stats.steps_run = opt.steps;
  if (!opt.checkpoint_dir.empty())
    save_model(model, epoch_checkpoint_path(opt.checkpoint_dir, stats.epochs + 1));
  return stats;
}

}  // namespace

TrainStats train_compressor(DodoModel& model, const Corpus& corpus, const TrainOptions& opt) {
  // Materialize (input, target) pairs per task.
  std::vector<std::pair<std::vector<int>, std::vector<int>>> items;
  if (opt.task == "autoencode") {
    for (const auto& doc : corpus.docs)
      if (doc.size() >= 2) items.emplace_back(doc, std::vector<int>{});
    for (const auto& [w, y] : corpus.pairs)
      if (w.size() >= 2) items.emplace_back(w, std::vector<int>{});
  } else if (opt.task == "continue") {
    for (const auto& [w, y] : corpus.pairs) items.emplace_back(w, y);
    for (const auto& doc : corpus.docs) {
      if (doc.size() < 2) continue;
      // text-continuation split: leading context, trailing continuation
      std::size_t ctx = std::min(opt.continue_context, doc.size() - 1);
      if (doc.size() - ctx > opt.continue_target) ctx = doc.size() - opt.continue_target;
      std::vector<int> w(doc.begin(), doc.begin() + ctx);
      std::vector<int> y(doc.begin() + ctx, doc.end());
      items.emplace_back(std::move(w), std::move(y));
    }
  } else {
    fail(Errc::kInvalidArg, "train_compressor: unknown task '" + opt.task + "'");
  }
  if (items.empty()) fail(Errc::kInvalidArg, "train_compressor: no usable training items");

  const double ratio = opt.mode.kind == SelectionMode::Kind::kTopK ? opt.mode.ratio
                                                                   : model.config.ratio;
  return run_loop(model, items.size(), opt, model.trainable_params(), [&](std::size_t i) {
    const auto& [w, y] = items[i];
    return y.empty() ? autoencode_loss(model, w, ratio, opt.aug)
                     : continuation_loss(model, w, y, ratio, opt.aug);
  });
}

TrainStats train_lm(DodoModel& model, const Corpus& corpus, const TrainOptions& opt) {
  std::vector<const std::vector<int>*> docs;
  for (const auto& doc : corpus.docs)
    if (doc.size() >= 2) docs.push_back(&doc);
  if (docs.empty()) fail(Errc::kInvalidArg, "train_lm: no documents with at least 2 tokens");

  const SegmentPlan plan{model.config.segment, model.config.tau};
  const bool decoder_only = opt.variant != LmVariant::kDodo;
  return run_loop(model, docs.size(), opt, model.trainable_params(decoder_only),
                  [&](std::size_t i) {
                    if (opt.variant == LmVariant::kPlain) return plain_lm_loss(model, *docs[i]);
                    return chunked_lm_loss(model, *docs[i], plan, opt.mode, opt.variant, opt.aug);
                  });
}

}  // namespace dodo
