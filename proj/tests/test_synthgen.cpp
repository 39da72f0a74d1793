#include <doctest.h>

#include <cmath>
#include <fstream>

#include "semtok/error.hpp"
#include "semtok/quantizer.hpp"
#include "semtok/synthgen.hpp"
#include "support/oracles.hpp"

using namespace semtok;

namespace {

GeneratorSpec small_spec(std::uint64_t seed = 1) {
  GeneratorSpec spec;
  spec.seed = seed;
  spec.num_sequences = 20;
  spec.frames = 30;
  spec.dim = 8;
  spec.layer_ids = {3, 7, 12};
  spec.default_clusters = 4;
  spec.label_rule = FromLayer{1};
  return spec;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate(small_spec(5)), b = generate(small_spec(5)), c = generate(small_spec(6));
  CHECK(a.data.features == b.data.features);
  CHECK(a.data.labels == b.data.labels);
  CHECK_FALSE(a.data.features == c.data.features);
}

TEST_CASE("centers respect the 6 sigma separation") {
  const auto corpus = generate(GeneratorSpec{});
  for (const auto& m : corpus.centers) {
    CHECK(m.rows() == 8);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        double sq = 0.0;
        for (std::size_t d = 0; d < m.cols(); ++d) sq += (m(i, d) - m(j, d)) * (m(i, d) - m(j, d));
        CHECK(std::sqrt(sq) >= 0.6);
      }
    }
  }
}

TEST_CASE("near-zero noise: k-means with K = C recovers component ids") {
  auto spec = small_spec(2);
  spec.default_sigma = 1e-6;
  const auto corpus = generate(spec);
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    KMeansConfig c;
    c.k = spec.clusters_at(l);
    c.seed = 3;
    const auto cb = train_codebook(gather_layer(corpus.data.features, l), c);
    std::vector<std::uint32_t> truth, found;
    for (std::size_t s = 0; s < corpus.data.size(); ++s) {
      for (std::size_t t = 0; t < spec.frames; ++t) {
        truth.push_back(corpus.cluster_ids[s][t * spec.layers() + l]);
        found.push_back(assign(cb, corpus.data.features[s].frame(t, l)).index);
      }
    }
    CHECK(oracle::adjusted_rand_index(truth, found) == doctest::Approx(1.0));
  }
}

TEST_CASE("from_layer labels are the component ids of that layer") {
  const auto corpus = generate(small_spec(3));
  for (std::size_t s = 0; s < corpus.data.size(); ++s) {
    for (std::size_t t = 0; t < 30; ++t) CHECK(corpus.data.labels[s][t] == corpus.cluster_ids[s][t * 3 + 1]);
  }
  CHECK(corpus.data.num_classes == 4);
}

TEST_CASE("from_mixture labels come from some layer's component") {
  auto spec = small_spec(4);
  spec.label_rule = FromMixture{{0.0, 0.5, 0.5}};
  const auto corpus = generate(spec);
  std::size_t from_1 = 0, total = 0;
  for (std::size_t s = 0; s < corpus.data.size(); ++s) {
    for (std::size_t t = 0; t < 30; ++t, ++total) {
      const auto label = corpus.data.labels[s][t];
      const auto* ids = &corpus.cluster_ids[s][t * 3];
      CHECK((label == ids[1] || label == ids[2]));
      if (label == ids[1]) ++from_1;
    }
  }
  CHECK(static_cast<double>(from_1) / total > 0.4);
}

TEST_CASE("component means match the centers") {
  const GeneratorSpec spec;  // n_l=5, D=16, C=8, sigma=0.1, 200 x 50
  const auto corpus = generate(spec);
  std::size_t checked = 0, beyond_3se = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    Matrix<double> sum(8, spec.dim);
    std::vector<double> count(8, 0.0);
    for (std::size_t s = 0; s < corpus.data.size(); ++s) {
      for (std::size_t t = 0; t < spec.frames; ++t) {
        const auto c = corpus.cluster_ids[s][t * spec.layers() + l];
        count[c] += 1;
        const auto f = corpus.data.features[s].frame(t, l);
        for (std::size_t d = 0; d < spec.dim; ++d) sum(c, d) += f[d];
      }
    }
    for (std::size_t c = 0; c < 8; ++c) {
      const double se = spec.default_sigma / std::sqrt(count[c]);
      for (std::size_t d = 0; d < spec.dim; ++d) {
        // Slack of 1e-6 for the float storage of each frame.
        const double dev = std::abs(sum(c, d) / count[c] - corpus.centers[l](c, d));
        CHECK(dev <= 5 * se + 1e-6);
        ++checked;
        if (dev > 3 * se + 1e-6) ++beyond_3se;
      }
    }
  }
  // 640 coordinates: about 0.27% should fall outside 3 standard errors.
  CHECK(static_cast<double>(beyond_3se) / checked < 0.01);
}

TEST_CASE("shifted generation") {
  const auto spec = small_spec(7);
  const auto base = generate(spec);
  SUBCASE("zero shift is identical") {
    const auto zero = generate_shifted(spec, std::vector<std::vector<double>>(3, std::vector<double>(8, 0.0)));
    CHECK(zero.data.features == base.data.features);
    CHECK(zero.data.labels == base.data.labels);
  }
  SUBCASE("shifting layer 0 leaves other layers bitwise equal") {
    std::vector<std::vector<double>> shift(3, std::vector<double>(8, 0.0));
    shift[0].assign(8, 10.0);
    const auto moved = generate_shifted(spec, shift);
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t d = 0; d < 8; ++d) CHECK(moved.centers[0](c, d) == doctest::Approx(base.centers[0](c, d) + 10.0));
    }
    CHECK(moved.centers[1] == base.centers[1]);
    CHECK(moved.centers[2] == base.centers[2]);
    for (std::size_t s = 0; s < base.data.size(); ++s) {
      for (std::size_t t = 0; t < 30; ++t) {
        for (std::size_t l = 1; l < 3; ++l) {
          const auto a = moved.data.features[s].frame(t, l), b = base.data.features[s].frame(t, l);
          CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
      }
    }
  }
  SUBCASE("a codebook from unshifted data fits shifted data worse") {
    std::vector<std::vector<double>> shift(3, std::vector<double>(8, 0.5));
    const auto moved = generate_shifted(spec, shift);
    KMeansConfig c;
    c.k = 4;
    const auto cb = train_codebook(gather_layer(base.data.features, 0), c);
    CHECK(inertia(cb, gather_layer(moved.data.features, 0)) > inertia(cb, gather_layer(base.data.features, 0)));
  }
}

TEST_CASE("reconstruction targets are weighted layer sums") {
  auto spec = small_spec(8);
  spec.target_weights = {0.5, 0.25, 0.25};
  const auto corpus = generate(spec);
  const auto& f = corpus.data.features[0];
  const auto& y = corpus.data.targets[0];
  CHECK(y.layers == 1);
  CHECK(y.dim == 8);
  for (std::size_t d = 0; d < 8; ++d) {
    const double expect = 0.5 * f.frame(2, 0)[d] + 0.25 * f.frame(2, 1)[d] + 0.25 * f.frame(2, 2)[d];
    CHECK(y.frame(2, 0)[d] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("spec validation and placement failure") {
  auto spec = small_spec();
  spec.clusters = {4, 1, 4};
  CHECK_THROWS_AS(generate(spec), Error);
  spec = small_spec();
  spec.sigma = {0.1, 0.0, 0.1};
  CHECK_THROWS_AS(generate(spec), Error);
  spec = small_spec();
  spec.label_rule = FromMixture{{0.5, 0.6, 0.0}};
  CHECK_THROWS_AS(generate(spec), Error);
  spec = small_spec();
  spec.dim = 1;
  spec.default_clusters = 50;
  spec.default_sigma = 0.2;
  spec.max_center_attempts = 100;
  try {
    generate(spec);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("larger D") != std::string::npos);
  }
}

TEST_CASE("corpus files round trip and missing files are listed") {
  oracle::TempDir dir("synthgen");
  const auto corpus = generate(small_spec(9));
  write_corpus(corpus, dir.path());
  const auto loaded = load_dataset(dir.path());
  CHECK(loaded.features == corpus.data.features);
  CHECK(loaded.targets == corpus.data.targets);
  CHECK(loaded.labels == corpus.data.labels);
  std::ifstream truth(truth_path(dir.path()));
  std::string first;
  std::getline(truth, first);
  CHECK(first == "seed=9");

  std::filesystem::remove(target_path(dir.path(), 3));
  std::filesystem::remove(labels_path(dir.path()));
  try {
    load_dataset(dir.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("targets_00003.mlf") != std::string::npos);
    CHECK(msg.find("labels.csv") != std::string::npos);
  }
}
