#include "semtok/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "fusion_io.hpp"
#include "semtok/error.hpp"

namespace semtok {

namespace {

constexpr std::uint32_t kSelectorVersion = 1;

std::vector<std::uint32_t> resolve(std::span<const std::uint32_t> positions,
                                   std::size_t layers) {
  if (positions.empty()) return all_positions(layers);
  return {positions.begin(), positions.end()};
}

// The tape keeps mutable parameter pointers for backward(); inference never
// calls backward(), so the model is not modified.
SelectorModel& unconst(const SelectorModel& model) {
  return const_cast<SelectorModel&>(model);
}

AttentionMap collect(const grad::Tape& tape, const FusionGraph& g,
                     std::size_t frames, std::size_t layers, std::size_t dim,
                     std::span<const std::uint32_t> positions) {
  AttentionMap map;
  map.frames = frames;
  map.layers = layers;
  map.embed_dim = dim;
  map.weights.assign(frames * layers, 0.0);
  map.scores.assign(frames * layers, 0.0);
  const auto w = tape.value(g.weights);
  const auto s = tape.value(g.scores);
  const std::size_t k = positions.size();
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      map.weights[t * layers + positions[j]] = w[t * k + j];
      map.scores[t * layers + positions[j]] = s[t * k + j];
    }
  }
  const auto fused = tape.value(g.fused);
  map.fused.assign(fused.begin(), fused.end());
  return map;
}

}  // namespace

std::vector<grad::Parameter*> SelectorModel::parameters() {
  auto out = fusion.parameters();
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

SelectorModel make_selector(std::span<const std::uint32_t> layer_ids,
                            std::span<const std::uint32_t> codebook_sizes,
                            std::uint32_t num_classes, const FusionConfig& config,
                            std::span<const Codebook> codebooks) {
  if (num_classes == 0) throw Error("selector: need at least one class");
  std::mt19937_64 rng(config.seed);
  SelectorModel m;
  m.fusion = make_fusion(layer_ids, codebook_sizes, config, codebooks, rng);
  m.num_classes = num_classes;
  m.head_w = grad::Parameter("head.w", {config.embed_dim, num_classes});
  m.head_b = grad::Parameter("head.b", {num_classes});
  fill_uniform(m.head_w, 1.0 / std::sqrt(static_cast<double>(config.embed_dim)), rng);
  return m;
}

EmbeddedTokens embed_tokens(const TokenSequence& tokens, const SelectorModel& model) {
  const auto& f = model.fusion;
  f.check_tokens(tokens);
  EmbeddedTokens out;
  out.frames = tokens.frames;
  out.layers = tokens.layers;
  out.dim = f.embed_dim;
  out.values.resize(out.frames * out.layers * out.dim);
  for (std::size_t t = 0; t < out.frames; ++t) {
    for (std::size_t l = 0; l < out.layers; ++l) {
      const std::uint32_t idx = tokens.at(t, l);
      if (idx >= f.codebook_sizes[l]) {
        throw Error("token out of range at (t=" + std::to_string(t) + ", l=" +
                    std::to_string(l) + ", index=" + std::to_string(idx) + ")");
      }
      const double* row = f.tables[l].values.data() + idx * out.dim;
      std::copy_n(row, out.dim, out.values.data() + (t * out.layers + l) * out.dim);
    }
  }
  return out;
}

AttentionMap fuse(const EmbeddedTokens& embedded, const SelectorModel& model) {
  if (embedded.layers != model.fusion.layers() || embedded.dim != model.fusion.embed_dim) {
    throw Error("fuse: embedded tensor does not match the model");
  }
  grad::Tape tape;
  const auto input = tape.constant(embedded.frames * embedded.layers, embedded.dim,
                                   embedded.values);
  const auto positions = all_positions(embedded.layers);
  const auto g = build_fusion_from_embedded(tape, unconst(model).fusion, input, positions);
  return collect(tape, g, embedded.frames, embedded.layers, embedded.dim, positions);
}

std::vector<double> mean_attention(std::span<const AttentionMap> maps) {
  if (maps.empty()) throw Error("mean_attention: empty collection");
  const std::size_t layers = maps[0].layers;
  std::vector<double> sums(layers, 0.0);
  std::size_t frames = 0;
  for (const auto& m : maps) {
    if (m.layers != layers) throw Error("mean_attention: inconsistent layer counts");
    for (std::size_t t = 0; t < m.frames; ++t) {
      for (std::size_t l = 0; l < layers; ++l) sums[l] += m.weight(t, l);
    }
    frames += m.frames;
  }
  if (frames == 0) throw Error("mean_attention: no frames");
  for (auto& s : sums) s /= static_cast<double>(frames);
  return sums;
}

grad::NodeId selector_loss(grad::Tape& tape, SelectorModel& model,
                           const LabeledSequence& example,
                           std::span<const std::uint32_t> positions) {
  if (example.labels.size() != example.tokens.frames) {
    throw Error("selector: one label per frame required");
  }
  const auto g = build_fusion(tape, model.fusion, example.tokens, positions);
  const auto logits = tape.affine(g.fused, {&model.head_w}, {&model.head_b});
  return tape.cross_entropy(logits, example.labels);
}

TrainReport train_selector(SelectorModel& model, std::span<const LabeledSequence> data,
                           const TrainOptions& options,
                           std::span<const std::uint32_t> positions) {
  const auto used = resolve(positions, model.fusion.layers());
  auto params = model.parameters();
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;
  for (std::uint32_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const std::size_t i : order) {
      total += grad::forward_backward(
          [&](grad::Tape& tape) { return selector_loss(tape, model, data[i], used); },
          params);
      grad::sgd_step(params, options.learning_rate, options.momentum);
    }
    report.epoch_loss.push_back(data.empty() ? 0.0 : total / static_cast<double>(data.size()));
  }
  return report;
}

Prediction predict(const SelectorModel& model, const TokenSequence& tokens,
                   std::span<const std::uint32_t> positions) {
  const auto used = resolve(positions, model.fusion.layers());
  auto& m = unconst(model);
  grad::Tape tape;
  const auto g = build_fusion(tape, m.fusion, tokens, used);
  const auto logits = tape.affine(g.fused, {&m.head_w}, {&m.head_b});
  Prediction out;
  out.attention = collect(tape, g, tokens.frames, model.fusion.layers(),
                          model.fusion.embed_dim, used);
  const auto z = tape.value(logits);
  const std::size_t c = model.num_classes;
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    const auto row = z.subspan(t * c, c);
    out.labels.push_back(static_cast<std::uint32_t>(
        std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

double accuracy(const SelectorModel& model, std::span<const LabeledSequence> data,
                std::span<const std::uint32_t> positions) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& ex : data) {
    const auto pred = predict(model, ex.tokens, positions);
    for (std::size_t t = 0; t < ex.labels.size(); ++t) {
      correct += pred.labels[t] == ex.labels[t] ? 1 : 0;
    }
    total += ex.labels.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void write_selector(const SelectorModel& model, std::ostream& out) {
  binio::Writer w(out);
  w.magic("SEL1");
  w.u32(kSelectorVersion);
  detail::write_fusion_header(w, model.fusion);
  w.u32(model.num_classes);
  detail::write_fusion_values(w, model.fusion);
  detail::write_values(w, model.head_w);
  detail::write_values(w, model.head_b);
}

void write_selector(const SelectorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_selector(model, out);
}

SelectorModel read_selector(std::istream& in, const std::string& source) {
  binio::Reader r(in, source);
  r.expect_magic("SEL1");
  r.expect_version(kSelectorVersion);
  SelectorModel m;
  m.fusion = detail::read_fusion_header(r);
  m.num_classes = r.u32();
  if (m.num_classes == 0) throw FormatError(source + ": selector has no classes");
  m.head_w = grad::Parameter("head.w", {m.fusion.embed_dim, m.num_classes});
  m.head_b = grad::Parameter("head.b", {m.num_classes});
  detail::read_fusion_values(r, m.fusion);
  detail::read_values(r, m.head_w);
  detail::read_values(r, m.head_b);
  r.expect_end();
  return m;
}

SelectorModel read_selector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_selector(in, path.string());
}

void write_attention_csv(std::ostream& out, std::span<const std::uint32_t> layer_ids,
                         std::span<const double> mean_weights) {
  if (layer_ids.size() != mean_weights.size()) {
    throw Error("attention csv: one weight per layer required");
  }
  out << "layer_id,mean_weight\n";
  out << std::setprecision(17);
  for (std::size_t l = 0; l < layer_ids.size(); ++l) {
    out << layer_ids[l] << ',' << mean_weights[l] << '\n';
  }
}

}  // namespace semtok
