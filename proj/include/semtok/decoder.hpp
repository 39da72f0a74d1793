#pragma once

// Scalable decoder: reconstructs continuous target frames from any nonempty
// subset of token layers. Training draws a fresh layer subset per example
// (layer dropout); the fusion softmax runs over the included layers only, so
// the fused width is independent of the subset size.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semtok/fusion.hpp"
#include "semtok/matrix.hpp"
#include "semtok/selector.hpp"

namespace semtok {

class LayerSubset {
 public:
  // Sorts the positions; throws on an empty list, duplicates, or positions
  // outside [0, layers).
  static LayerSubset of(std::vector<std::uint32_t> positions, std::size_t layers);
  static LayerSubset full(std::size_t layers);

  const std::vector<std::uint32_t>& included() const { return included_; }
  std::size_t k() const { return included_.size(); }
  // Positions joined by '+', e.g. "0+2+4".
  std::string label() const;

  bool operator==(const LayerSubset&) const = default;

 private:
  std::vector<std::uint32_t> included_;
};

// k uniform on {1..layers}, then a uniform size-k subset.
LayerSubset sample_subset(std::size_t layers, std::mt19937_64& rng);

// All 2^n - 1 nonempty subsets, by size then lexicographically.
std::vector<LayerSubset> all_subsets(std::size_t layers);

struct DecoderConfig {
  FusionConfig fusion;
  // 0 selects a linear head.
  std::size_t head_hidden = 128;
  std::size_t target_dim = 0;
};

struct DecoderModel {
  LayerFusion fusion;
  std::size_t target_dim = 0;
  std::size_t head_hidden = 0;
  // {w, b} for a linear head, {w1, b1, w2, b2} otherwise.
  std::vector<grad::Parameter> head;

  std::vector<grad::Parameter*> parameters();
};

DecoderModel make_decoder(std::span<const std::uint32_t> layer_ids,
                          std::span<const std::uint32_t> codebook_sizes,
                          const DecoderConfig& config,
                          std::span<const Codebook> codebooks = {});

// T x D_target.
Matrix<double> decode(const TokenSequence& tokens, const LayerSubset& subset,
                      const DecoderModel& model);

struct ReconstructionPair {
  TokenSequence tokens;
  Matrix<float> target;  // T x D_target
};

struct DecoderTrainOptions : TrainOptions {
  // Unset trains the scalable model; set pins every step to one subset.
  std::optional<LayerSubset> fixed_subset;
};

grad::NodeId decoder_loss(grad::Tape& tape, DecoderModel& model,
                          const ReconstructionPair& example, const LayerSubset& subset);

TrainReport train_decoder(DecoderModel& model, std::span<const ReconstructionPair> data,
                          const DecoderTrainOptions& options);

// Mean squared error over all target elements.
double reconstruction_mse(const DecoderModel& model,
                          std::span<const ReconstructionPair> data,
                          const LayerSubset& subset);

// DEC1: magic, u32 version, fusion header (as SEL1), u32 D_target,
// u32 head hidden (0 = linear), then f32 tables, scorer and head parameters.
void write_decoder(const DecoderModel& model, std::ostream& out);
void write_decoder(const DecoderModel& model, const std::filesystem::path& path);
DecoderModel read_decoder(std::istream& in, const std::string& source = "<stream>");
DecoderModel read_decoder(const std::filesystem::path& path);

}  // namespace semtok
