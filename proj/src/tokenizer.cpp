#include "semtok/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binio.hpp"
#include "semtok/kernels.hpp"

namespace semtok {

namespace {

constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::uint32_t kTokenVersion = 1;

void check_codebooks(std::span<const std::uint32_t> layer_ids,
                     std::span<const Codebook> codebooks) {
  if (codebooks.size() != layer_ids.size()) {
    throw Error("layer count mismatch: sequence has " +
                std::to_string(layer_ids.size()) + " layers, " +
                std::to_string(codebooks.size()) + " codebooks given");
  }
  for (std::size_t l = 0; l < layer_ids.size(); ++l) {
    if (codebooks[l].layer_id != layer_ids[l]) {
      throw Error("codebook " + std::to_string(l) + " is for layer " +
                  std::to_string(codebooks[l].layer_id) +
                  " but sequence position " + std::to_string(l) +
                  " holds layer " + std::to_string(layer_ids[l]));
    }
  }
}

}  // namespace

FeatureSequence::FeatureSequence(std::uint32_t frames,
                                 std::vector<std::uint32_t> ids,
                                 std::uint32_t dim, float rate)
    : frames(frames),
      layers(static_cast<std::uint32_t>(ids.size())),
      dim(dim),
      frame_rate_hz(rate),
      layer_ids(std::move(ids)),
      values(static_cast<std::size_t>(frames) * layers * dim, 0.0f) {}

void FeatureSequence::validate() const {
  if (frames < 1 || layers < 1 || dim < 1) {
    throw Error("feature sequence needs T>=1, n_l>=1, D>=1");
  }
  if (layer_ids.size() != layers) throw Error("feature sequence layer id count mismatch");
  if (values.size() != static_cast<std::size_t>(frames) * layers * dim) {
    throw Error("feature sequence value count mismatch");
  }
  for (const float v : values) {
    if (!std::isfinite(v)) throw Error("feature sequence contains a non-finite value");
  }
}

void TokenSequence::validate() const {
  if (layer_ids.size() != layers || codebook_sizes.size() != layers) {
    throw Error("token sequence layer metadata mismatch");
  }
  if (indices.size() != static_cast<std::size_t>(frames) * layers) {
    throw Error("token sequence index count mismatch");
  }
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t l = 0; l < layers; ++l) {
      if (at(t, l) >= codebook_sizes[l]) {
        throw Error("token out of range at (t=" + std::to_string(t) + ", l=" +
                    std::to_string(l) + ", index=" + std::to_string(at(t, l)) + ")");
      }
    }
  }
}

TokenSequence tokenize(const FeatureSequence& features,
                       std::span<const Codebook> codebooks) {
  features.validate();
  check_codebooks(features.layer_ids, codebooks);
  for (const auto& cb : codebooks) {
    if (cb.dim() != features.dim) {
      throw Error("dimension mismatch: codebook for layer " +
                  std::to_string(cb.layer_id) + " has D=" + std::to_string(cb.dim()) +
                  ", features have D=" + std::to_string(features.dim));
    }
  }
  const auto& kern = kernels::active();
  TokenSequence out;
  out.frames = features.frames;
  out.layers = features.layers;
  out.layer_ids = features.layer_ids;
  for (const auto& cb : codebooks) {
    out.codebook_sizes.push_back(static_cast<std::uint32_t>(cb.size()));
  }
  out.indices.resize(static_cast<std::size_t>(features.frames) * features.layers);
  for (std::size_t t = 0; t < features.frames; ++t) {
    for (std::size_t l = 0; l < features.layers; ++l) {
      const auto& cb = codebooks[l];
      out.indices[t * out.layers + l] =
          kern.nearest(features.frame(t, l).data(), cb.centroids.data(), cb.size(),
                       cb.dim())
              .index;
    }
  }
  return out;
}

FeatureSequence detokenize_centroids(const TokenSequence& tokens,
                                     std::span<const Codebook> codebooks,
                                     float frame_rate_hz) {
  check_codebooks(tokens.layer_ids, codebooks);
  const std::uint32_t dim = static_cast<std::uint32_t>(codebooks[0].dim());
  for (const auto& cb : codebooks) {
    if (cb.dim() != dim) throw Error("detokenize: codebooks disagree on D");
  }
  FeatureSequence out(tokens.frames, tokens.layer_ids, dim, frame_rate_hz);
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    for (std::size_t l = 0; l < tokens.layers; ++l) {
      const std::uint32_t idx = tokens.at(t, l);
      if (idx >= codebooks[l].size()) {
        throw Error("token out of range at (t=" + std::to_string(t) + ", l=" +
                    std::to_string(l) + ", index=" + std::to_string(idx) + ")");
      }
      const auto c = codebooks[l].centroids.row(idx);
      std::copy(c.begin(), c.end(), out.frame(t, l).begin());
    }
  }
  return out;
}

Matrix<float> gather_layer(std::span<const FeatureSequence> sequences,
                           std::size_t position) {
  if (sequences.empty()) return {};
  const std::uint32_t dim = sequences[0].dim;
  std::size_t rows = 0;
  for (const auto& s : sequences) {
    if (position >= s.layers) throw Error("gather_layer: layer position out of range");
    if (s.dim != dim) throw Error("gather_layer: sequences disagree on D");
    rows += s.frames;
  }
  Matrix<float> out(rows, dim);
  std::size_t r = 0;
  for (const auto& s : sequences) {
    for (std::size_t t = 0; t < s.frames; ++t, ++r) {
      const auto f = s.frame(t, position);
      std::copy(f.begin(), f.end(), out.row(r).begin());
    }
  }
  return out;
}

void write_features(const FeatureSequence& seq, std::ostream& out) {
  binio::Writer w(out);
  w.magic("MLF1");
  w.u32(kFeatureVersion);
  w.u32(seq.frames);
  w.u32(seq.layers);
  w.u32(seq.dim);
  w.f32(seq.frame_rate_hz);
  for (const auto id : seq.layer_ids) w.u32(id);
  for (const float v : seq.values) w.f32(v);
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_features(seq, out);
}

FeatureSequence read_features(std::istream& in, const std::string& source) {
  binio::Reader r(in, source);
  r.expect_magic("MLF1");
  r.expect_version(kFeatureVersion);
  FeatureSequence seq;
  seq.frames = r.u32();
  seq.layers = r.u32();
  seq.dim = r.u32();
  seq.frame_rate_hz = r.f32();
  seq.layer_ids.resize(seq.layers);
  for (auto& id : seq.layer_ids) id = r.u32();
  seq.values.resize(static_cast<std::size_t>(seq.frames) * seq.layers * seq.dim);
  for (auto& v : seq.values) v = r.f32();
  r.expect_end();
  try {
    seq.validate();
  } catch (const Error& e) {
    throw FormatError(source + ": " + e.what());
  }
  return seq;
}

FeatureSequence read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_features(in, path.string());
}

void write_tokens(const TokenSequence& seq, std::ostream& out) {
  binio::Writer w(out);
  w.magic("TOK1");
  w.u32(kTokenVersion);
  w.u32(seq.frames);
  w.u32(seq.layers);
  for (const auto id : seq.layer_ids) w.u32(id);
  for (const auto k : seq.codebook_sizes) w.u32(k);
  for (const auto idx : seq.indices) w.u32(idx);
}

void write_tokens(const TokenSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_tokens(seq, out);
}

TokenSequence read_tokens(std::istream& in, const std::string& source) {
  binio::Reader r(in, source);
  r.expect_magic("TOK1");
  r.expect_version(kTokenVersion);
  TokenSequence seq;
  seq.frames = r.u32();
  seq.layers = r.u32();
  seq.layer_ids.resize(seq.layers);
  for (auto& id : seq.layer_ids) id = r.u32();
  seq.codebook_sizes.resize(seq.layers);
  for (auto& k : seq.codebook_sizes) k = r.u32();
  seq.indices.resize(static_cast<std::size_t>(seq.frames) * seq.layers);
  for (auto& idx : seq.indices) idx = r.u32();
  r.expect_end();
  try {
    seq.validate();
  } catch (const Error& e) {
    throw FormatError(source + ": " + e.what());
  }
  return seq;
}

TokenSequence read_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_tokens(in, path.string());
}

}  // namespace semtok
