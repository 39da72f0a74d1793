#pragma once

// Multi-layer feature streams, their token tensors, and the MLF1/TOK1 file
// formats. A batch is a collection of per-utterance sequences.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "semtok/matrix.hpp"
#include "semtok/quantizer.hpp"

namespace semtok {

// T frames x n_l layers x D dims, stored in (t, l, d) order.
struct FeatureSequence {
  std::uint32_t frames = 0;
  std::uint32_t layers = 0;
  std::uint32_t dim = 0;
  float frame_rate_hz = 0.0f;
  std::vector<std::uint32_t> layer_ids;
  std::vector<float> values;

  FeatureSequence() = default;
  FeatureSequence(std::uint32_t frames, std::vector<std::uint32_t> layer_ids,
                  std::uint32_t dim, float frame_rate_hz);

  std::span<float> frame(std::size_t t, std::size_t l) {
    return {values.data() + (t * layers + l) * dim, dim};
  }
  std::span<const float> frame(std::size_t t, std::size_t l) const {
    return {values.data() + (t * layers + l) * dim, dim};
  }

  // Throws unless the shape is consistent and every value is finite.
  void validate() const;

  bool operator==(const FeatureSequence&) const = default;
};

// T x n_l token indices in (t, l) order.
struct TokenSequence {
  std::uint32_t frames = 0;
  std::uint32_t layers = 0;
  std::vector<std::uint32_t> layer_ids;
  std::vector<std::uint32_t> codebook_sizes;
  std::vector<std::uint32_t> indices;

  std::uint32_t at(std::size_t t, std::size_t l) const {
    return indices[t * layers + l];
  }

  void validate() const;

  bool operator==(const TokenSequence&) const = default;
};

TokenSequence tokenize(const FeatureSequence& features,
                       std::span<const Codebook> codebooks);

FeatureSequence detokenize_centroids(const TokenSequence& tokens,
                                     std::span<const Codebook> codebooks,
                                     float frame_rate_hz = 0.0f);

// Rows of one layer (by position) gathered across sequences.
Matrix<float> gather_layer(std::span<const FeatureSequence> sequences,
                           std::size_t position);

void write_features(const FeatureSequence& seq, std::ostream& out);
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence read_features(std::istream& in, const std::string& source = "<stream>");
FeatureSequence read_features(const std::filesystem::path& path);

void write_tokens(const TokenSequence& seq, std::ostream& out);
void write_tokens(const TokenSequence& seq, const std::filesystem::path& path);
TokenSequence read_tokens(std::istream& in, const std::string& source = "<stream>");
TokenSequence read_tokens(const std::filesystem::path& path);

}  // namespace semtok
