#pragma once

// Informed layer selection: per-layer token embeddings scored by a shared
// MLP, softmax-normalized across layers at every frame, and fused into one
// vector per frame that feeds a linear classification head.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "semtok/fusion.hpp"

namespace semtok {

struct SelectorModel {
  LayerFusion fusion;
  std::uint32_t num_classes = 0;
  grad::Parameter head_w;  // E x C
  grad::Parameter head_b;  // C

  std::vector<grad::Parameter*> parameters();
};

SelectorModel make_selector(std::span<const std::uint32_t> layer_ids,
                            std::span<const std::uint32_t> codebook_sizes,
                            std::uint32_t num_classes, const FusionConfig& config,
                            std::span<const Codebook> codebooks = {});

// T x n_l x E in (t, l, e) order.
struct EmbeddedTokens {
  std::size_t frames = 0;
  std::size_t layers = 0;
  std::size_t dim = 0;
  std::vector<double> values;
};

// weights/scores are T x n_l, fused is T x E. Layers left out of a subset
// carry weight 0 and score 0.
struct AttentionMap {
  std::size_t frames = 0;
  std::size_t layers = 0;
  std::size_t embed_dim = 0;
  std::vector<double> weights;
  std::vector<double> scores;
  std::vector<double> fused;

  double weight(std::size_t t, std::size_t l) const { return weights[t * layers + l]; }
};

EmbeddedTokens embed_tokens(const TokenSequence& tokens, const SelectorModel& model);

AttentionMap fuse(const EmbeddedTokens& embedded, const SelectorModel& model);

// Per-layer mean attention weight over every frame of every map.
std::vector<double> mean_attention(std::span<const AttentionMap> maps);

struct LabeledSequence {
  TokenSequence tokens;
  std::vector<std::uint32_t> labels;  // one per frame
};

struct TrainOptions {
  std::uint32_t epochs = 10;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

// Loss graph of one sequence over the given layer positions.
grad::NodeId selector_loss(grad::Tape& tape, SelectorModel& model,
                           const LabeledSequence& example,
                           std::span<const std::uint32_t> positions);

// Joint SGD over embeddings, scorer and head, one step per sequence in a
// seeded shuffled order. Empty positions means every layer.
TrainReport train_selector(SelectorModel& model, std::span<const LabeledSequence> data,
                           const TrainOptions& options,
                           std::span<const std::uint32_t> positions = {});

struct Prediction {
  std::vector<std::uint32_t> labels;
  AttentionMap attention;
};

Prediction predict(const SelectorModel& model, const TokenSequence& tokens,
                   std::span<const std::uint32_t> positions = {});

double accuracy(const SelectorModel& model, std::span<const LabeledSequence> data,
                std::span<const std::uint32_t> positions = {});

// SEL1: magic, u32 version, fusion header, u32 C, then f32 tables, scorer
// (w1, b1, w2, b2 per scorer) and head (w, b).
void write_selector(const SelectorModel& model, std::ostream& out);
void write_selector(const SelectorModel& model, const std::filesystem::path& path);
SelectorModel read_selector(std::istream& in, const std::string& source = "<stream>");
SelectorModel read_selector(const std::filesystem::path& path);

// CSV with header `layer_id,mean_weight`.
void write_attention_csv(std::ostream& out, std::span<const std::uint32_t> layer_ids,
                         std::span<const double> mean_weights);

}  // namespace semtok
