#pragma once

// Desk-scale experiment runner: trains per-layer codebooks on a training
// split, tokenizes, trains a selector+classifier or a decoder, and reports
// held-out metrics. A sweep runs many configurations and writes one CSV.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semtok/decoder.hpp"
#include "semtok/fusion.hpp"
#include "semtok/selector.hpp"
#include "semtok/synthgen.hpp"

namespace semtok {

enum class Task { frame_classification, sequence_reconstruction };

std::string_view to_string(Task task);

struct ExperimentConfig {
  Task task = Task::frame_classification;
  std::uint32_t k = 8;
  EmbedMode embed_mode = EmbedMode::random;
  // Unset: attention over every layer.
  std::optional<std::uint32_t> single_layer;
  // Unset: scalable (layer dropout) decoder.
  std::optional<std::vector<std::uint32_t>> fixed_subset;
  bool shifted_tokenizer = false;
  std::uint32_t epochs = 10;
  std::uint64_t seed = 0;

  // Random-init width; pretrained modes use the feature dimension.
  std::size_t embed_dim = 32;
  std::size_t scorer_hidden = 32;
  std::size_t head_hidden = 0;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint32_t kmeans_iterations = 100;

  std::string layer_mode() const;
  std::string decoder_mode() const;
  std::string domain() const;
  // Stable text form of every field; the fingerprint hashes it.
  std::string canonical() const;
  std::string fingerprint() const;
};

struct SubsetMetric {
  std::string subset;
  std::size_t k = 0;
  double mse = 0.0;
};

struct MetricsRow {
  std::string fingerprint;
  ExperimentConfig config;
  std::string metric_name;  // "accuracy" or "mse"
  double metric_value = 0.0;
  std::vector<double> mean_attention;
  double seconds = 0.0;
  // Embedding tables bitwise equal to their initial values after training.
  bool tables_unchanged = false;
  std::vector<SubsetMetric> per_subset;
  std::vector<double> training_loss;
  std::vector<std::uint32_t> layer_ids;
};

struct ExperimentData {
  Dataset in_domain;
  // Source for codebooks when a config asks for a shifted tokenizer.
  std::optional<Dataset> shifted;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// 80/20 split by sequence, seeded.
Split split_sequences(std::size_t count, std::uint64_t seed);

MetricsRow run_discriminative(const ExperimentData& data, const ExperimentConfig& config);
MetricsRow run_generative(const ExperimentData& data, const ExperimentConfig& config);
MetricsRow run_experiment(const ExperimentData& data, const ExperimentConfig& config);

struct SweepFailure {
  std::string fingerprint;
  std::string message;
};

struct SweepResult {
  std::vector<MetricsRow> rows;  // sorted by fingerprint
  std::vector<SweepFailure> failures;
};

// Runs every config on up to `jobs` worker threads. A failing config is
// listed in `failures`; the others still complete.
SweepResult sweep(const ExperimentData& data, const std::vector<ExperimentConfig>& configs,
                  std::size_t jobs = 1);

// Header: fingerprint,task,K,embed_mode,layer_mode,decoder_mode,domain,
// metric_name,metric_value,seconds
void write_results_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

// Header: subset,k,mse
void write_subset_csv(std::ostream& out, const std::vector<SubsetMetric>& rows);

}  // namespace semtok
