#include "model.hpp"

#include <map>

namespace dodo {

namespace {

void append_named(std::vector<NamedTensor>& out,
                  const std::vector<std::pair<std::string, Tensor>>& named) {
  for (const auto& [name, t] : named) out.push_back({name, t.shape(), t.data()});
}

class TensorIndex {
 public:
  explicit TensorIndex(const Container& c) {
    for (const NamedTensor& t : c.tensors) by_name_[t.name] = &t;
  }

  Tensor take(const std::string& name, bool requires_grad) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) fail(Errc::kFormat, "checkpoint: missing tensor '" + name + "'");
    return Tensor::from_data(it->second->shape, it->second->data, requires_grad);
  }

  bool has(const std::string& name) const { return by_name_.count(name) != 0; }

 private:
  std::map<std::string, const NamedTensor*> by_name_;
};

TransformerStack stack_from_index(const TensorIndex& ix, const std::string& prefix, Role role,
                                  std::size_t depth, bool requires_grad) {
  TransformerStack s;
  s.role = role;
  s.tok_embed = ix.take(prefix + ".tok_embed", requires_grad);
  s.pos_embed = ix.take(prefix + ".pos_embed", requires_grad);
  s.blocks.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string p = prefix + ".block" + std::to_string(l) + ".";
    Block& b = s.blocks[l];
    b.ln1_g = ix.take(p + "ln1_g", requires_grad);
    b.ln1_b = ix.take(p + "ln1_b", requires_grad);
    b.wq = ix.take(p + "wq", requires_grad);
    b.wk = ix.take(p + "wk", requires_grad);
    b.wv = ix.take(p + "wv", requires_grad);
    b.wo = ix.take(p + "wo", requires_grad);
    b.ln2_g = ix.take(p + "ln2_g", requires_grad);
    b.ln2_b = ix.take(p + "ln2_b", requires_grad);
    b.ff1 = ix.take(p + "ff1", requires_grad);
    b.ff1_b = ix.take(p + "ff1_b", requires_grad);
    b.ff2 = ix.take(p + "ff2", requires_grad);
    b.ff2_b = ix.take(p + "ff2_b", requires_grad);
  }
  if (ix.has(prefix + ".lm_head")) {
    s.lnf_g = ix.take(prefix + ".lnf_g", requires_grad);
    s.lnf_b = ix.take(prefix + ".lnf_b", requires_grad);
    s.lm_head = ix.take(prefix + ".lm_head", requires_grad);
  }
  return s;
}

}  // namespace

std::vector<Tensor> DodoModel::trainable_params(bool decoder_only) const {
  std::vector<Tensor> params = decoder.trainable();
  if (!decoder_only) {
    for (const Tensor& t : compressor.trainable()) params.push_back(t);
    for (const Tensor& t : scorer.trainable()) params.push_back(t);
  }
  return params;
}

void DodoModel::zero_grads() const {
  for (const Tensor& t : trainable_params()) const_cast<Tensor&>(t).zero_grad();
}

DodoModel init_model(ModelConfig cfg, Vocab vocab, std::uint64_t seed) {
  cfg.vocab = static_cast<std::uint32_t>(vocab.size());
  cfg.validate();
  if (cfg.vocab <= Vocab::kReserved)
    fail(Errc::kVocab, "init_model: vocabulary has no non-reserved tokens");
  Rng rng(seed);
  DodoModel m;
  m.config = cfg;
  m.vocab = std::move(vocab);
  m.decoder = init_stack(cfg, rng, Role::kDecoder);
  // Compressor and decoder share their starting point; the frozen feature
  // stack keeps that starting point for the scorer.
  m.compressor = clone_stack(m.decoder, Role::kCompressor, true);
  m.features = clone_stack(m.decoder, Role::kFeature, false, cfg.feature_layer);
  m.scorer = init_scorer(cfg, rng);
  return m;
}

void save_model(const DodoModel& model, const std::string& path) {
  Container c;
  c.magic = "DODO";
  c.config = model.config;
  append_named(c.tensors, model.decoder.named_tensors("dec"));
  append_named(c.tensors, model.compressor.named_tensors("enc"));
  append_named(c.tensors, model.scorer.named_tensors("scorer"));
  append_named(c.tensors, model.features.named_tensors("feat"));
  std::vector<double> vocab_bytes = model.vocab.to_bytes();
  c.tensors.push_back({"vocab.bytes", {vocab_bytes.size()}, std::move(vocab_bytes)});
  c.tensors.push_back({"vocab.scheme", {1}, {static_cast<double>(model.vocab.scheme())}});
  write_container(path, c);
}

DodoModel load_model(const std::string& path) {
  Container c = read_container(path, "DODO");
  c.config.validate();
  TensorIndex ix(c);
  DodoModel m;
  m.config = c.config;
  const auto scheme = static_cast<TokenScheme>(
      static_cast<std::uint32_t>(c.find("vocab.scheme").data.at(0)));
  m.vocab = Vocab::from_bytes(scheme, c.find("vocab.bytes").data);
  if (m.vocab.size() != c.config.vocab)
    fail(Errc::kFormat, "checkpoint: vocab table size " + std::to_string(m.vocab.size()) +
                            " does not match config vocab " + std::to_string(c.config.vocab));
  m.decoder = stack_from_index(ix, "dec", Role::kDecoder, c.config.layers, true);
  m.compressor = stack_from_index(ix, "enc", Role::kCompressor, c.config.layers, true);
  m.features = stack_from_index(ix, "feat", Role::kFeature, c.config.feature_layer, false);
  ScorerHead s;
  s.w1 = ix.take("scorer.w1", true);
  s.b1 = ix.take("scorer.b1", true);
  s.w2 = ix.take("scorer.w2", true);
  s.b2 = ix.take("scorer.b2", true);
  m.scorer = s;
  return m;
}

void save_nugget_state(const NuggetState& nuggets, const ModelConfig& cfg,
                       const std::string& path) {
  Container c;
  c.magic = "DODN";
  c.config = cfg;
  const std::size_t k = nuggets.k();
  std::vector<double> idx(k), pos(k);
  for (std::size_t i = 0; i < k; ++i) {
    idx[i] = static_cast<double>(nuggets.selection.indices[i]);
    pos[i] = static_cast<double>(nuggets.memory.positions[i]);
  }
  c.tensors.push_back({"nugget.indices", {k}, idx});
  c.tensors.push_back({"nugget.positions", {k}, pos});
  c.tensors.push_back({"nugget.scores", {k}, nuggets.selection.scores});
  for (std::size_t l = 0; l < nuggets.memory.layers.size(); ++l) {
    const Tensor& t = nuggets.memory.layers[l];
    c.tensors.push_back({"nugget.layer" + std::to_string(l), t.shape(), t.data()});
  }
  write_container(path, c);
}

NuggetState load_nugget_state(const std::string& path) {
  Container c = read_container(path, "DODN");
  NuggetState n;
  const NamedTensor& idx = c.find("nugget.indices");
  const NamedTensor& pos = c.find("nugget.positions");
  const NamedTensor& sc = c.find("nugget.scores");
  for (double v : idx.data) n.selection.indices.push_back(static_cast<std::size_t>(v));
  n.selection.scores = sc.data;
  for (double v : pos.data) n.memory.positions.push_back(static_cast<std::size_t>(v));
  for (std::uint32_t l = 0; l < c.config.layers; ++l) {
    const NamedTensor& t = c.find("nugget.layer" + std::to_string(l));
    n.memory.layers.push_back(Tensor::from_data(t.shape, t.data));
  }
  n.memory.scores = Tensor::from_data({n.selection.scores.size()}, n.selection.scores);
  return n;
}

}  // namespace dodo
