#pragma once

// Synthetic multi-layer feature streams with known structure: every layer
// draws each frame from one of C_l well-separated Gaussian components, frame
// labels follow a configurable rule over the component ids, and the
// reconstruction target is a weighted sum of the layers' frames.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "semtok/matrix.hpp"
#include "semtok/tokenizer.hpp"

namespace semtok {

// Label = component id of the layer at this position.
struct FromLayer {
  std::uint32_t position = 0;
};

// Label = component id of a layer drawn per frame with these weights.
struct FromMixture {
  std::vector<double> weights;
};

using LabelRule = std::variant<FromLayer, FromMixture>;

struct GeneratorSpec {
  std::uint32_t dim = 16;
  std::uint32_t frames = 50;
  std::uint32_t num_sequences = 200;
  std::vector<std::uint32_t> layer_ids{3, 7, 12, 18, 23};
  // Per-layer overrides; empty means the scalar default for every layer.
  std::vector<std::uint32_t> clusters;
  std::vector<double> sigma;
  std::uint32_t default_clusters = 8;
  double default_sigma = 0.1;
  LabelRule label_rule = FromLayer{2};
  // Per-layer D-dimensional center offsets; empty means none.
  std::vector<std::vector<double>> shift;
  // Per-layer weights of the reconstruction target; empty means uniform.
  std::vector<double> target_weights;
  float frame_rate_hz = 50.0f;
  std::uint64_t seed = 0;
  std::uint32_t max_center_attempts = 10000;

  std::size_t layers() const { return layer_ids.size(); }
  std::uint32_t clusters_at(std::size_t l) const;
  double sigma_at(std::size_t l) const;
  std::vector<double> target_weights_or_uniform() const;
  std::uint32_t num_classes() const;
  void validate() const;
};

struct Dataset {
  std::vector<FeatureSequence> features;
  std::vector<FeatureSequence> targets;  // one layer (id 0), D_target dims
  std::vector<std::vector<std::uint32_t>> labels;
  std::uint32_t num_classes = 0;

  std::size_t size() const { return features.size(); }
};

struct SyntheticCorpus {
  GeneratorSpec spec;
  std::vector<Matrix<double>> centers;  // per layer, C_l x D, shift applied
  Dataset data;
  // Per sequence, T x n_l component ids in (t, l) order.
  std::vector<std::vector<std::uint32_t>> cluster_ids;
};

SyntheticCorpus generate(const GeneratorSpec& spec);

// Same draws as generate(spec) with every layer's centers translated by
// shift[l].
SyntheticCorpus generate_shifted(GeneratorSpec spec,
                                 std::vector<std::vector<double>> shift);

// sum_l weights[l] * frame(t, l), as a single-layer sequence with layer id 0.
FeatureSequence reconstruction_target(const FeatureSequence& features,
                                      std::span<const double> weights);

// Files in a dataset directory.
std::filesystem::path feature_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path target_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path labels_path(const std::filesystem::path& dir);
std::filesystem::path truth_path(const std::filesystem::path& dir);

// Writes MLF1 features and targets, labels.csv (`sequence,frame,label`) and
// truth.txt (key=value: seeds, sigmas, centers).
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

// Reads a dataset directory; throws listing every missing file.
Dataset load_dataset(const std::filesystem::path& dir, bool require_targets = true);

// `sequence,frame,label` rows; labels[s][t].
std::vector<std::vector<std::uint32_t>> read_labels_csv(const std::filesystem::path& path);

}  // namespace semtok
