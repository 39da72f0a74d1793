#pragma once

// Per-layer token embeddings plus a scorer MLP whose per-frame softmax over
// layers weights the embeddings into one fused vector. Shared by the
// selector (classification) and the decoder (reconstruction).

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semtok/grad.hpp"
#include "semtok/quantizer.hpp"
#include "semtok/tokenizer.hpp"

namespace semtok {

enum class EmbedMode : std::uint8_t {
  random = 0,
  pretrained_frozen = 1,
  pretrained_finetune = 2,
};

std::string_view to_string(EmbedMode mode);
// Accepts "random", "pretrained-frozen"/"pretrained_frozen" and
// "pretrained-finetune"/"pretrained_finetune".
EmbedMode parse_embed_mode(std::string_view text);

struct FusionConfig {
  std::size_t embed_dim = 128;
  std::size_t scorer_hidden = 128;
  bool shared_scorer = true;
  EmbedMode embed_mode = EmbedMode::random;
  std::uint64_t seed = 0;
};

struct LayerFusion {
  std::vector<std::uint32_t> layer_ids;
  std::vector<std::uint32_t> codebook_sizes;
  EmbedMode embed_mode = EmbedMode::random;
  std::size_t embed_dim = 0;
  std::size_t scorer_hidden = 0;
  bool shared_scorer = true;
  std::vector<grad::Parameter> tables;  // K_l x E each
  // One entry when shared, otherwise one per layer.
  std::vector<grad::Parameter> w1, b1, w2, b2;

  std::size_t layers() const { return layer_ids.size(); }
  std::vector<grad::Parameter*> parameters();
  // Throws unless the tokens carry this model's layer ids and codebook sizes.
  void check_tokens(const TokenSequence& tokens) const;
};

// Pretrained modes copy `codebooks[l].centroids` into table l and require
// embed_dim == D.
LayerFusion make_fusion(std::span<const std::uint32_t> layer_ids,
                        std::span<const std::uint32_t> codebook_sizes,
                        const FusionConfig& config,
                        std::span<const Codebook> codebooks,
                        std::mt19937_64& rng);

struct FusionGraph {
  grad::NodeId embedded;  // (T*k) x E
  grad::NodeId scores;    // (T*k) x 1
  grad::NodeId weights;   // (T*k) x 1
  grad::NodeId fused;     // T x E
};

// Builds the fusion over the given layer positions (strictly increasing).
FusionGraph build_fusion(grad::Tape& tape, LayerFusion& fusion,
                         const TokenSequence& tokens,
                         std::span<const std::uint32_t> positions);

// Scores and fuses an already-embedded (T*k) x E block through the scorer
// of the given positions.
FusionGraph build_fusion_from_embedded(grad::Tape& tape, LayerFusion& fusion,
                                       grad::NodeId embedded,
                                       std::span<const std::uint32_t> positions);

std::vector<std::uint32_t> all_positions(std::size_t layers);

// Uniform in [-bound, bound].
void fill_uniform(grad::Parameter& p, double bound, std::mt19937_64& rng);

}  // namespace semtok
