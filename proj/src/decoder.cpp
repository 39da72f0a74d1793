#include "semtok/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fusion_io.hpp"
#include "semtok/error.hpp"

namespace semtok {

namespace {

constexpr std::uint32_t kDecoderVersion = 1;

grad::NodeId apply_head(grad::Tape& tape, DecoderModel& model, grad::NodeId fused) {
  auto& h = model.head;
  if (model.head_hidden == 0) return tape.affine(fused, {&h[0]}, {&h[1]});
  const auto hidden = tape.relu(tape.affine(fused, {&h[0]}, {&h[1]}));
  return tape.affine(hidden, {&h[2]}, {&h[3]});
}

std::vector<grad::Parameter> make_head(std::size_t e, std::size_t hidden,
                                       std::size_t target_dim) {
  std::vector<grad::Parameter> head;
  if (hidden == 0) {
    head.emplace_back("head.w", std::vector<std::size_t>{e, target_dim});
    head.emplace_back("head.b", std::vector<std::size_t>{target_dim});
  } else {
    head.emplace_back("head.w1", std::vector<std::size_t>{e, hidden});
    head.emplace_back("head.b1", std::vector<std::size_t>{hidden});
    head.emplace_back("head.w2", std::vector<std::size_t>{hidden, target_dim});
    head.emplace_back("head.b2", std::vector<std::size_t>{target_dim});
  }
  return head;
}

}  // namespace

LayerSubset LayerSubset::of(std::vector<std::uint32_t> positions, std::size_t layers) {
  if (positions.empty()) throw Error("layer subset is empty");
  std::sort(positions.begin(), positions.end());
  if (std::adjacent_find(positions.begin(), positions.end()) != positions.end()) {
    throw Error("layer subset has duplicate positions");
  }
  if (positions.back() >= layers) {
    throw Error("layer position " + std::to_string(positions.back()) +
                " out of range for " + std::to_string(layers) + " layers");
  }
  LayerSubset s;
  s.included_ = std::move(positions);
  return s;
}

LayerSubset LayerSubset::full(std::size_t layers) {
  return of(all_positions(layers), layers);
}

std::string LayerSubset::label() const {
  std::string out;
  for (std::size_t j = 0; j < included_.size(); ++j) {
    if (j) out += '+';
    out += std::to_string(included_[j]);
  }
  return out;
}

LayerSubset sample_subset(std::size_t layers, std::mt19937_64& rng) {
  if (layers == 0) throw Error("sample_subset: need at least one layer");
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, layers)(rng);
  std::vector<std::uint32_t> pool = all_positions(layers);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, layers - 1)(rng);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return LayerSubset::of(std::move(pool), layers);
}

std::vector<LayerSubset> all_subsets(std::size_t layers) {
  std::vector<LayerSubset> out;
  for (std::size_t k = 1; k <= layers; ++k) {
    std::vector<bool> pick(layers, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      std::vector<std::uint32_t> positions;
      for (std::size_t l = 0; l < layers; ++l) {
        if (pick[l]) positions.push_back(static_cast<std::uint32_t>(l));
      }
      out.push_back(LayerSubset::of(std::move(positions), layers));
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return out;
}

std::vector<grad::Parameter*> DecoderModel::parameters() {
  auto out = fusion.parameters();
  for (auto& p : head) out.push_back(&p);
  return out;
}

DecoderModel make_decoder(std::span<const std::uint32_t> layer_ids,
                          std::span<const std::uint32_t> codebook_sizes,
                          const DecoderConfig& config,
                          std::span<const Codebook> codebooks) {
  if (config.target_dim == 0) throw Error("decoder: target dimension must be positive");
  std::mt19937_64 rng(config.fusion.seed);
  DecoderModel m;
  m.fusion = make_fusion(layer_ids, codebook_sizes, config.fusion, codebooks, rng);
  m.target_dim = config.target_dim;
  m.head_hidden = config.head_hidden;
  m.head = make_head(config.fusion.embed_dim, config.head_hidden, config.target_dim);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(config.fusion.embed_dim));
  fill_uniform(m.head[0], in_bound, rng);
  if (config.head_hidden != 0) {
    fill_uniform(m.head[2], 1.0 / std::sqrt(static_cast<double>(config.head_hidden)), rng);
  }
  return m;
}

grad::NodeId decoder_loss(grad::Tape& tape, DecoderModel& model,
                          const ReconstructionPair& example, const LayerSubset& subset) {
  if (example.target.rows() != example.tokens.frames) {
    throw Error("decoder: target has " + std::to_string(example.target.rows()) +
                " frames, tokens have " + std::to_string(example.tokens.frames));
  }
  if (example.target.cols() != model.target_dim) {
    throw Error("decoder: target dimension mismatch");
  }
  const auto g = build_fusion(tape, model.fusion, example.tokens, subset.included());
  const auto out = apply_head(tape, model, g.fused);
  const auto& t = example.target.values();
  return tape.mse(out, std::vector<double>(t.begin(), t.end()));
}

Matrix<double> decode(const TokenSequence& tokens, const LayerSubset& subset,
                      const DecoderModel& model) {
  if (!subset.included().empty() && subset.included().back() >= model.fusion.layers()) {
    throw Error("decode: subset position out of range");
  }
  // Inference only: backward() is never called on this tape.
  auto& m = const_cast<DecoderModel&>(model);
  grad::Tape tape;
  const auto g = build_fusion(tape, m.fusion, tokens, subset.included());
  const auto out = apply_head(tape, m, g.fused);
  const auto v = tape.value(out);
  return Matrix<double>(tokens.frames, model.target_dim,
                        std::vector<double>(v.begin(), v.end()));
}

TrainReport train_decoder(DecoderModel& model, std::span<const ReconstructionPair> data,
                          const DecoderTrainOptions& options) {
  for (const auto& ex : data) {
    if (ex.target.rows() != ex.tokens.frames) {
      throw Error("decoder: target and tokens are misaligned in time");
    }
  }
  const std::size_t layers = model.fusion.layers();
  if (options.fixed_subset && options.fixed_subset->included().back() >= layers) {
    throw Error("decoder: fixed subset out of range");
  }
  auto params = model.parameters();
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;
  for (std::uint32_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const std::size_t i : order) {
      const LayerSubset subset =
          options.fixed_subset ? *options.fixed_subset : sample_subset(layers, rng);
      total += grad::forward_backward(
          [&](grad::Tape& tape) { return decoder_loss(tape, model, data[i], subset); },
          params);
      grad::sgd_step(params, options.learning_rate, options.momentum);
    }
    report.epoch_loss.push_back(data.empty() ? 0.0 : total / static_cast<double>(data.size()));
  }
  return report;
}

double reconstruction_mse(const DecoderModel& model,
                          std::span<const ReconstructionPair> data,
                          const LayerSubset& subset) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& ex : data) {
    const auto out = decode(ex.tokens, subset, model);
    if (out.rows() != ex.target.rows() || out.cols() != ex.target.cols()) {
      throw Error("reconstruction_mse: target shape mismatch");
    }
    for (std::size_t i = 0; i < out.values().size(); ++i) {
      const double diff = out.values()[i] - static_cast<double>(ex.target.values()[i]);
      sum += diff * diff;
    }
    count += out.values().size();
  }
  if (count == 0) throw Error("reconstruction_mse: no data");
  return sum / static_cast<double>(count);
}

void write_decoder(const DecoderModel& model, std::ostream& out) {
  binio::Writer w(out);
  w.magic("DEC1");
  w.u32(kDecoderVersion);
  detail::write_fusion_header(w, model.fusion);
  w.u32(static_cast<std::uint32_t>(model.target_dim));
  w.u32(static_cast<std::uint32_t>(model.head_hidden));
  detail::write_fusion_values(w, model.fusion);
  for (const auto& p : model.head) detail::write_values(w, p);
}

void write_decoder(const DecoderModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_decoder(model, out);
}

DecoderModel read_decoder(std::istream& in, const std::string& source) {
  binio::Reader r(in, source);
  r.expect_magic("DEC1");
  r.expect_version(kDecoderVersion);
  DecoderModel m;
  m.fusion = detail::read_fusion_header(r);
  m.target_dim = r.u32();
  m.head_hidden = r.u32();
  if (m.target_dim == 0) throw FormatError(source + ": decoder has D_target=0");
  m.head = make_head(m.fusion.embed_dim, m.head_hidden, m.target_dim);
  detail::read_fusion_values(r, m.fusion);
  for (auto& p : m.head) detail::read_values(r, p);
  r.expect_end();
  return m;
}

DecoderModel read_decoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_decoder(in, path.string());
}

}  // namespace semtok
