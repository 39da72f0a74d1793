#include "semtok/fusion.hpp"

#include <cmath>

#include "fusion_io.hpp"
#include "semtok/error.hpp"

namespace semtok {

std::string_view to_string(EmbedMode mode) {
  switch (mode) {
    case EmbedMode::random:
      return "random";
    case EmbedMode::pretrained_frozen:
      return "pretrained-frozen";
    case EmbedMode::pretrained_finetune:
      return "pretrained-finetune";
  }
  return "unknown";
}

EmbedMode parse_embed_mode(std::string_view text) {
  if (text == "random") return EmbedMode::random;
  if (text == "pretrained-frozen" || text == "pretrained_frozen") {
    return EmbedMode::pretrained_frozen;
  }
  if (text == "pretrained-finetune" || text == "pretrained_finetune") {
    return EmbedMode::pretrained_finetune;
  }
  throw Error("unknown embed mode \"" + std::string(text) + "\"");
}

std::vector<grad::Parameter*> LayerFusion::parameters() {
  std::vector<grad::Parameter*> out;
  for (auto& t : tables) out.push_back(&t);
  for (std::size_t i = 0; i < w1.size(); ++i) {
    out.push_back(&w1[i]);
    out.push_back(&b1[i]);
    out.push_back(&w2[i]);
    out.push_back(&b2[i]);
  }
  return out;
}

void LayerFusion::check_tokens(const TokenSequence& tokens) const {
  if (tokens.layer_ids != layer_ids) {
    throw Error("token layers do not match the model's layer ids");
  }
  if (tokens.codebook_sizes != codebook_sizes) {
    throw Error("token codebook sizes do not match the model's embedding tables");
  }
}

void fill_uniform(grad::Parameter& p, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.values) v = dist(rng);
}

std::vector<std::uint32_t> all_positions(std::size_t layers) {
  std::vector<std::uint32_t> out(layers);
  for (std::size_t l = 0; l < layers; ++l) out[l] = static_cast<std::uint32_t>(l);
  return out;
}

LayerFusion make_fusion(std::span<const std::uint32_t> layer_ids,
                        std::span<const std::uint32_t> codebook_sizes,
                        const FusionConfig& config,
                        std::span<const Codebook> codebooks,
                        std::mt19937_64& rng) {
  if (layer_ids.empty() || layer_ids.size() != codebook_sizes.size()) {
    throw Error("fusion: need one codebook size per layer");
  }
  if (config.embed_dim == 0 || config.scorer_hidden == 0) {
    throw Error("fusion: embedding and scorer widths must be positive");
  }
  const bool pretrained = config.embed_mode != EmbedMode::random;
  if (pretrained) {
    if (codebooks.size() != layer_ids.size()) {
      throw Error("fusion: pretrained embeddings need one codebook per layer");
    }
    for (std::size_t l = 0; l < layer_ids.size(); ++l) {
      if (codebooks[l].dim() != config.embed_dim) {
        throw Error("fusion: pretrained embeddings require E = codebook D (" +
                    std::to_string(codebooks[l].dim()) + ")");
      }
      if (codebooks[l].size() != codebook_sizes[l] ||
          codebooks[l].layer_id != layer_ids[l]) {
        throw Error("fusion: codebook " + std::to_string(l) +
                    " does not match the token layout");
      }
    }
  }

  LayerFusion f;
  f.layer_ids.assign(layer_ids.begin(), layer_ids.end());
  f.codebook_sizes.assign(codebook_sizes.begin(), codebook_sizes.end());
  f.embed_mode = config.embed_mode;
  f.embed_dim = config.embed_dim;
  f.scorer_hidden = config.scorer_hidden;
  f.shared_scorer = config.shared_scorer;

  const std::size_t e = config.embed_dim;
  const std::size_t h = config.scorer_hidden;
  const double embed_bound = 1.0 / std::sqrt(static_cast<double>(e));
  for (std::size_t l = 0; l < layer_ids.size(); ++l) {
    grad::Parameter table("emb." + std::to_string(layer_ids[l]),
                          {codebook_sizes[l], e},
                          config.embed_mode != EmbedMode::pretrained_frozen);
    if (pretrained) {
      const auto& c = codebooks[l].centroids.values();
      std::copy(c.begin(), c.end(), table.values.begin());
    } else {
      fill_uniform(table, embed_bound, rng);
    }
    f.tables.push_back(std::move(table));
  }

  const std::size_t scorers = config.shared_scorer ? 1 : layer_ids.size();
  for (std::size_t s = 0; s < scorers; ++s) {
    const std::string tag = config.shared_scorer ? "" : "." + std::to_string(layer_ids[s]);
    grad::Parameter w1("scorer.w1" + tag, {e, h});
    grad::Parameter b1("scorer.b1" + tag, {h});
    grad::Parameter w2("scorer.w2" + tag, {h, 1});
    grad::Parameter b2("scorer.b2" + tag, {1});
    fill_uniform(w1, embed_bound, rng);
    fill_uniform(w2, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    f.w1.push_back(std::move(w1));
    f.b1.push_back(std::move(b1));
    f.w2.push_back(std::move(w2));
    f.b2.push_back(std::move(b2));
  }
  return f;
}

FusionGraph build_fusion_from_embedded(grad::Tape& tape, LayerFusion& fusion,
                                       grad::NodeId embedded,
                                       std::span<const std::uint32_t> positions) {
  const std::size_t k = positions.size();
  std::vector<grad::Parameter*> w1, b1, w2, b2;
  for (std::size_t j = 0; j < (fusion.shared_scorer ? 1 : k); ++j) {
    const std::size_t s = fusion.shared_scorer ? 0 : positions[j];
    w1.push_back(&fusion.w1[s]);
    b1.push_back(&fusion.b1[s]);
    w2.push_back(&fusion.w2[s]);
    b2.push_back(&fusion.b2[s]);
  }
  const auto hidden = tape.relu(tape.affine(embedded, w1, b1));
  const auto scores = tape.affine(hidden, w2, b2);
  const auto weights = tape.group_softmax(scores, k);
  const auto fused = tape.weighted_sum(weights, embedded, k);
  return {embedded, scores, weights, fused};
}

FusionGraph build_fusion(grad::Tape& tape, LayerFusion& fusion,
                         const TokenSequence& tokens,
                         std::span<const std::uint32_t> positions) {
  fusion.check_tokens(tokens);
  if (positions.empty()) throw Error("fusion: empty layer subset");
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (positions[j] >= fusion.layers() || (j > 0 && positions[j] <= positions[j - 1])) {
      throw Error("fusion: layer positions must be strictly increasing and in range");
    }
  }
  const std::size_t k = positions.size();
  std::vector<grad::Parameter*> tables;
  for (const auto p : positions) tables.push_back(&fusion.tables[p]);
  std::vector<std::uint32_t> indices(static_cast<std::size_t>(tokens.frames) * k);
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    for (std::size_t j = 0; j < k; ++j) indices[t * k + j] = tokens.at(t, positions[j]);
  }
  const auto embedded = tape.embedding(std::move(tables), std::move(indices));
  return build_fusion_from_embedded(tape, fusion, embedded, positions);
}

namespace detail {

void write_values(binio::Writer& w, const grad::Parameter& p) {
  for (const double v : p.values) w.f32(static_cast<float>(v));
}

void read_values(binio::Reader& r, grad::Parameter& p) {
  for (auto& v : p.values) {
    const float f = r.f32();
    if (!std::isfinite(f)) throw FormatError(r.source() + ": non-finite parameter in " + p.id);
    v = f;
  }
}

void write_fusion_header(binio::Writer& w, const LayerFusion& f) {
  w.u32(static_cast<std::uint32_t>(f.layers()));
  w.u32(static_cast<std::uint32_t>(f.embed_dim));
  w.u8(static_cast<std::uint8_t>(f.embed_mode));
  for (const auto k : f.codebook_sizes) w.u32(k);
  for (const auto id : f.layer_ids) w.u32(id);
  w.u32(static_cast<std::uint32_t>(f.scorer_hidden));
  w.u8(f.shared_scorer ? 1 : 0);
}

void write_fusion_values(binio::Writer& w, const LayerFusion& f) {
  for (const auto& t : f.tables) write_values(w, t);
  for (std::size_t s = 0; s < f.w1.size(); ++s) {
    write_values(w, f.w1[s]);
    write_values(w, f.b1[s]);
    write_values(w, f.w2[s]);
    write_values(w, f.b2[s]);
  }
}

LayerFusion read_fusion_header(binio::Reader& r) {
  const std::uint32_t layers = r.u32();
  const std::uint32_t e = r.u32();
  const std::uint8_t mode = r.u8();
  if (layers == 0 || e == 0) throw FormatError(r.source() + ": n_l and E must be positive");
  if (mode > 2) throw FormatError(r.source() + ": unknown embed mode " + std::to_string(mode));
  std::vector<std::uint32_t> sizes(layers), ids(layers);
  for (auto& k : sizes) {
    k = r.u32();
    if (k == 0) throw FormatError(r.source() + ": empty embedding table");
  }
  for (auto& id : ids) id = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint8_t shared = r.u8();
  if (h == 0 || shared > 1) throw FormatError(r.source() + ": bad scorer header");

  FusionConfig config;
  config.embed_dim = e;
  config.scorer_hidden = h;
  config.shared_scorer = shared == 1;
  // Allocate shapes without pretrained data, then restore the mode.
  std::mt19937_64 rng(0);
  LayerFusion f = make_fusion(ids, sizes, config, {}, rng);
  f.embed_mode = static_cast<EmbedMode>(mode);
  for (auto& t : f.tables) t.trainable = f.embed_mode != EmbedMode::pretrained_frozen;
  return f;
}

void read_fusion_values(binio::Reader& r, LayerFusion& f) {
  for (auto& t : f.tables) read_values(r, t);
  for (std::size_t s = 0; s < f.w1.size(); ++s) {
    read_values(r, f.w1[s]);
    read_values(r, f.b1[s]);
    read_values(r, f.w2[s]);
    read_values(r, f.b2[s]);
  }
}

}  // namespace detail

}  // namespace semtok
