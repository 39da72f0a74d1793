#pragma once

// Per-layer k-means codebooks: k-means++ seeding, full-batch Lloyd
// iterations with farthest-point repair of empty clusters, an optional
// minibatch mode, and the CBK1 file format.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semtok/matrix.hpp"

namespace semtok {

struct Codebook {
  std::uint32_t layer_id = 0;
  std::uint64_t seed = 0;
  double final_inertia = 0.0;
  std::uint32_t iterations_run = 0;
  Matrix<float> centroids;  // K x D

  std::size_t size() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }

  bool operator==(const Codebook&) const = default;
};

struct KMeansConfig {
  std::uint32_t k = 1;
  std::uint32_t max_iterations = 300;
  double rel_tolerance = 1e-6;
  std::uint64_t seed = 0;
  // Rows sampled per iteration; unset means full batch.
  std::optional<std::size_t> minibatch_size;
  // Recorded on the trained codebook.
  std::uint32_t layer_id = 0;

  void validate() const;
};

struct Assignment {
  std::uint32_t index;
  double sq_distance;
};

struct Seeding {
  Matrix<float> centroids;
  // Picks made after every remaining point already coincided with a chosen
  // centroid (fewer distinct rows than K).
  std::size_t duplicate_picks = 0;
};

struct LloydResult {
  Codebook codebook;
  // Inertia under the incoming codebook, before the update.
  double inertia = 0.0;
  std::size_t repaired_clusters = 0;
};

// Optional diagnostics from train_codebook.
struct KMeansTrace {
  std::vector<double> inertia;  // one entry per Lloyd step
  std::size_t duplicate_picks = 0;
  std::size_t repaired_clusters = 0;
  bool fewer_rows_than_k = false;
};

Seeding init_kmeanspp(const Matrix<float>& data, std::size_t k,
                      std::uint64_t seed);

Assignment assign(const Codebook& codebook, std::span<const float> vector);

LloydResult lloyd_step(const Codebook& codebook, const Matrix<float>& data);

Codebook train_codebook(const Matrix<float>& data, const KMeansConfig& config,
                        KMeansTrace* trace = nullptr);

// Sum of squared distances to the nearest centroid; 0 for empty data.
double inertia(const Codebook& codebook, const Matrix<float>& data);

void write_codebook(const Codebook& codebook, std::ostream& out);
void write_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook read_codebook(std::istream& in, const std::string& source = "<stream>");
Codebook read_codebook(const std::filesystem::path& path);

}  // namespace semtok
