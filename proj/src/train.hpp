#ifndef DODO_TRAIN_HPP_
#define DODO_TRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "stream.hpp"

namespace dodo {

struct TrainOptions {
  std::uint64_t steps = 2000;
  double lr = 3e-4;
  std::uint64_t warmup = 200;
  std::uint64_t seed = 0;
  std::uint32_t log_every = 100;
  std::string checkpoint_dir;  // per-epoch checkpoints when set
  // compressor training
  std::string task = "autoencode";  // autoencode | continue
  std::size_t continue_context = 64;
  std::size_t continue_target = 16;
  // LM training
  LmVariant variant = LmVariant::kDodo;
  SelectionMode mode = SelectionMode::topk(4.0);
  StAugMode aug = StAugMode::kStopGrad;
};

struct TrainLogEntry {
  std::uint64_t step;
  double loss;
  double lr;
};

struct TrainStats {
  std::uint64_t steps_run = 0;
  std::uint64_t epochs = 0;
  double final_loss = 0.0;
  double mean_last_window = 0.0;  // mean loss over the trailing log window
  std::vector<TrainLogEntry> log;
};

TrainStats train_compressor(DodoModel& model, const Corpus& corpus, const TrainOptions& opt);
TrainStats train_lm(DodoModel& model, const Corpus& corpus, const TrainOptions& opt);

}  // namespace dodo

#endif  // DODO_TRAIN_HPP_
