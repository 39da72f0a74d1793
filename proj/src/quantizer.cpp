#include "semtok/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "binio.hpp"
#include "semtok/kernels.hpp"

namespace semtok {

namespace {

constexpr std::uint32_t kCodebookVersion = 1;

void require_finite_rows(const Matrix<float>& data) {
  for (const float v : data.values()) {
    if (!std::isfinite(v)) throw Error("k-means input contains a non-finite value");
  }
}

void require_dim(const Codebook& codebook, std::size_t dim) {
  if (dim != codebook.dim()) {
    throw Error("dimension mismatch: codebook has D=" +
                std::to_string(codebook.dim()) + ", input has D=" +
                std::to_string(dim));
  }
}

Codebook with_centroids(const Codebook& like, Matrix<float> centroids) {
  Codebook out;
  out.layer_id = like.layer_id;
  out.seed = like.seed;
  out.iterations_run = like.iterations_run;
  out.final_inertia = like.final_inertia;
  out.centroids = std::move(centroids);
  return out;
}

Codebook train_minibatch(const Matrix<float>& data, const KMeansConfig& config,
                         Codebook codebook, KMeansTrace* trace) {
  const auto& kern = kernels::active();
  const std::size_t k = codebook.size();
  const std::size_t d = codebook.dim();
  const std::size_t batch = std::max<std::size_t>(1, *config.minibatch_size);
  Matrix<double> centers(k, d);
  for (std::size_t i = 0; i < k * d; ++i) {
    centers.values()[i] = codebook.centroids.values()[i];
  }
  std::vector<std::size_t> seen(k, 0);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
  std::vector<std::size_t> rows(batch);
  std::vector<std::uint32_t> owner(batch);
  for (std::uint32_t it = 0; it < config.max_iterations; ++it) {
    double batch_inertia = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      rows[b] = pick(rng);
      const auto near = kern.nearest(data.row(rows[b]).data(),
                                     codebook.centroids.data(), k, d);
      owner[b] = near.index;
      batch_inertia += near.sq_distance;
    }
    for (std::size_t b = 0; b < batch; ++b) {
      const std::uint32_t c = owner[b];
      const double eta = 1.0 / static_cast<double>(++seen[c]);
      const auto x = data.row(rows[b]);
      auto center = centers.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        center[j] = (1.0 - eta) * center[j] + eta * static_cast<double>(x[j]);
      }
    }
    for (std::size_t i = 0; i < k * d; ++i) {
      codebook.centroids.values()[i] = static_cast<float>(centers.values()[i]);
    }
    codebook.iterations_run = it + 1;
    if (trace) trace->inertia.push_back(batch_inertia);
  }
  return codebook;
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 1) throw Error("k-means: K must be at least 1");
  if (max_iterations < 1) throw Error("k-means: max_iterations must be at least 1");
  if (!(rel_tolerance > 0.0)) throw Error("k-means: rel_tolerance must be positive");
  if (minibatch_size && *minibatch_size == 0) {
    throw Error("k-means: minibatch size must be positive");
  }
}

Seeding init_kmeanspp(const Matrix<float>& data, std::size_t k,
                      std::uint64_t seed) {
  if (data.rows() == 0) throw Error("k-means++: empty data");
  if (k == 0) throw Error("k-means++: K must be at least 1");
  require_finite_rows(data);

  const auto& kern = kernels::active();
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  std::mt19937_64 rng(seed);
  Seeding out{Matrix<float>(k, d), 0};

  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::copy_n(data.row(first).data(), d, out.centroids.row(0).data());

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) {
    nearest[i] = kern.sq_distance(data.row(i).data(), out.centroids.data(), d);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (const double w : nearest) total += w;
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double cumulative = 0.0;
      std::size_t last_positive = 0;
      bool found = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] <= 0.0) continue;
        last_positive = i;
        cumulative += nearest[i];
        if (cumulative > target) {
          chosen = i;
          found = true;
          break;
        }
      }
      if (!found) chosen = last_positive;
    } else {
      chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      ++out.duplicate_picks;
    }
    const float* row = data.row(chosen).data();
    std::copy_n(row, d, out.centroids.row(c).data());
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], kern.sq_distance(data.row(i).data(), row, d));
    }
  }
  return out;
}

Assignment assign(const Codebook& codebook, std::span<const float> vector) {
  require_dim(codebook, vector.size());
  for (const float v : vector) {
    if (!std::isfinite(v)) throw Error("assign: non-finite input vector");
  }
  const auto near = kernels::active().nearest(
      vector.data(), codebook.centroids.data(), codebook.size(), codebook.dim());
  return {near.index, near.sq_distance};
}

LloydResult lloyd_step(const Codebook& codebook, const Matrix<float>& data) {
  if (data.rows() == 0) throw Error("lloyd_step: empty data");
  require_dim(codebook, data.cols());

  const auto& kern = kernels::active();
  const std::size_t n = data.rows();
  const std::size_t k = codebook.size();
  const std::size_t d = codebook.dim();

  std::vector<kernels::Nearest> owner(n);
  for (std::size_t i = 0; i < n; ++i) {
    owner[i] = kern.nearest(data.row(i).data(), codebook.centroids.data(), k, d);
  }

  // Fixed row order per cluster keeps the reduction reproducible.
  Matrix<double> sums(k, d);
  std::vector<std::size_t> counts(k, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = owner[i].index;
    total += owner[i].sq_distance;
    ++counts[c];
    auto acc = sums.row(c);
    const auto x = data.row(i);
    for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(x[j]);
  }

  Matrix<float> next(k, d);
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
      continue;
    }
    const double inv = static_cast<double>(counts[c]);
    for (std::size_t j = 0; j < d; ++j) {
      next(c, j) = static_cast<float>(sums(c, j) / inv);
    }
  }

  if (!empty.empty()) {
    // Farthest points first, lowest row index on ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return owner[a].sq_distance > owner[b].sq_distance;
    });
    for (std::size_t e = 0; e < empty.size(); ++e) {
      const std::size_t row = order[std::min(e, n - 1)];
      std::copy_n(data.row(row).data(), d, next.row(empty[e]).data());
    }
  }

  return {with_centroids(codebook, std::move(next)), total, empty.size()};
}

Codebook train_codebook(const Matrix<float>& data, const KMeansConfig& config,
                        KMeansTrace* trace) {
  config.validate();
  if (data.rows() == 0) throw Error("train_codebook: empty data");
  if (trace) {
    *trace = KMeansTrace{};
    trace->fewer_rows_than_k = data.rows() < config.k;
  }

  auto seeding = init_kmeanspp(data, config.k, config.seed);
  if (trace) trace->duplicate_picks = seeding.duplicate_picks;

  Codebook codebook;
  codebook.layer_id = config.layer_id;
  codebook.seed = config.seed;
  codebook.centroids = std::move(seeding.centroids);

  if (config.minibatch_size) {
    codebook = train_minibatch(data, config, std::move(codebook), trace);
  } else {
    double previous = std::numeric_limits<double>::infinity();
    for (std::uint32_t it = 0; it < config.max_iterations; ++it) {
      auto step = lloyd_step(codebook, data);
      codebook = std::move(step.codebook);
      codebook.iterations_run = it + 1;
      if (trace) {
        trace->inertia.push_back(step.inertia);
        trace->repaired_clusters += step.repaired_clusters;
      }
      const bool converged =
          step.inertia == 0.0 ||
          (std::isfinite(previous) &&
           previous - step.inertia <= config.rel_tolerance * previous);
      if (converged) break;
      previous = step.inertia;
    }
  }
  codebook.final_inertia = inertia(codebook, data);
  return codebook;
}

double inertia(const Codebook& codebook, const Matrix<float>& data) {
  if (data.rows() == 0) return 0.0;
  require_dim(codebook, data.cols());
  const auto& kern = kernels::active();
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    total += kern.nearest(data.row(i).data(), codebook.centroids.data(),
                          codebook.size(), codebook.dim())
                 .sq_distance;
  }
  return total;
}

void write_codebook(const Codebook& codebook, std::ostream& out) {
  binio::Writer w(out);
  w.magic("CBK1");
  w.u32(kCodebookVersion);
  w.u32(codebook.layer_id);
  w.u32(static_cast<std::uint32_t>(codebook.size()));
  w.u32(static_cast<std::uint32_t>(codebook.dim()));
  w.u64(codebook.seed);
  w.f64(codebook.final_inertia);
  w.u32(codebook.iterations_run);
  for (const float v : codebook.centroids.values()) w.f32(v);
}

void write_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_codebook(codebook, out);
}

Codebook read_codebook(std::istream& in, const std::string& source) {
  binio::Reader r(in, source);
  r.expect_magic("CBK1");
  r.expect_version(kCodebookVersion);
  Codebook cb;
  cb.layer_id = r.u32();
  const std::uint32_t k = r.u32();
  const std::uint32_t d = r.u32();
  if (k == 0 || d == 0) throw FormatError(source + ": codebook has K=0 or D=0");
  cb.seed = r.u64();
  cb.final_inertia = r.f64();
  if (!(cb.final_inertia >= 0.0)) throw FormatError(source + ": negative inertia");
  cb.iterations_run = r.u32();
  std::vector<float> values(static_cast<std::size_t>(k) * d);
  for (auto& v : values) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError(source + ": non-finite centroid");
  }
  r.expect_end();
  cb.centroids = Matrix<float>(k, d, std::move(values));
  return cb;
}

Codebook read_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_codebook(in, path.string());
}

}  // namespace semtok
