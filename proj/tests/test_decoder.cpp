#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "semtok/decoder.hpp"
#include "semtok/error.hpp"
#include "support/oracles.hpp"

using namespace semtok;

namespace {

const std::vector<std::uint32_t> kIds{3, 7, 12, 18, 23};

TokenSequence random_tokens(std::size_t frames, const std::vector<std::uint32_t>& ids,
                            const std::vector<std::uint32_t>& sizes, std::mt19937_64& rng) {
  TokenSequence t;
  t.frames = static_cast<std::uint32_t>(frames);
  t.layers = static_cast<std::uint32_t>(ids.size());
  t.layer_ids = ids;
  t.codebook_sizes = sizes;
  for (std::size_t f = 0; f < frames * ids.size(); ++f) {
    t.indices.push_back(std::uniform_int_distribution<std::uint32_t>(0, sizes[f % ids.size()] - 1)(rng));
  }
  return t;
}

DecoderConfig small(std::size_t head_hidden = 0) {
  DecoderConfig c;
  c.fusion.embed_dim = 4;
  c.fusion.scorer_hidden = 3;
  c.fusion.seed = 3;
  c.head_hidden = head_hidden;
  c.target_dim = 2;
  return c;
}

}  // namespace

TEST_CASE("LayerSubset canonicalizes and validates") {
  const auto s = LayerSubset::of({4, 0, 2}, 5);
  CHECK(s.included() == std::vector<std::uint32_t>{0, 2, 4});
  CHECK(s.k() == 3);
  CHECK(s.label() == "0+2+4");
  CHECK(LayerSubset::full(3).included() == std::vector<std::uint32_t>{0, 1, 2});
  CHECK_THROWS_AS(LayerSubset::of({}, 5), Error);
  CHECK_THROWS_AS(LayerSubset::of({1, 1}, 5), Error);
  CHECK_THROWS_AS(LayerSubset::of({5}, 5), Error);
}

TEST_CASE("sample_subset examples") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_subset(1, rng) == LayerSubset::of({0}, 1));
  bool saw_full = false;
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_subset(5, rng);
    if (s.k() == 5) {
      CHECK(s == LayerSubset::full(5));
      saw_full = true;
    }
  }
  CHECK(saw_full);
  CHECK_THROWS_AS(sample_subset(0, rng), Error);
}

TEST_CASE("sample_subset follows the two-stage uniform law") {
  std::mt19937_64 rng(2);
  constexpr int kDraws = 100000;
  std::map<std::size_t, double> by_k;
  std::map<std::size_t, std::map<std::string, double>> by_subset;
  for (int i = 0; i < kDraws; ++i) {
    const auto s = sample_subset(5, rng);
    by_k[s.k()] += 1;
    by_subset[s.k()][s.label()] += 1;
  }
  const std::map<std::size_t, std::size_t> combos{{1, 5}, {2, 10}, {3, 10}, {4, 5}, {5, 1}};
  for (const auto& [k, n] : combos) {
    CHECK(by_k[k] / kDraws == doctest::Approx(0.2).epsilon(0.05));
    CHECK(by_subset[k].size() == n);
    // Each subset within 3 sigma of its conditional multinomial expectation.
    const double p = 1.0 / static_cast<double>(n);
    const double expected = by_k[k] * p;
    const double sd = std::sqrt(by_k[k] * p * (1 - p));
    for (const auto& [label, count] : by_subset[k]) CHECK(std::abs(count - expected) <= 3 * sd + 1e-9);
  }
}

TEST_CASE("all_subsets enumerates 2^n - 1 subsets by size") {
  const auto all = all_subsets(5);
  CHECK(all.size() == 31);
  CHECK(all.front().label() == "0");
  CHECK(all[5].label() == "0+1");
  CHECK(all.back().label() == "0+1+2+3+4");
}

TEST_CASE("decode with one layer puts weight 1 on it") {
  std::mt19937_64 rng(3);
  const std::vector<std::uint32_t> sizes(5, 4);
  auto model = make_decoder(kIds, sizes, small());
  const auto t = random_tokens(6, kIds, sizes, rng);
  const auto subset = LayerSubset::of({3}, 5);
  const auto out = decode(t, subset, model);
  // head(embed_3): fused row = table row, out = row . W + b.
  const auto& table = model.fusion.tables[3].values;
  const auto& w = model.head[0].values;
  const auto& b = model.head[1].values;
  for (std::size_t f = 0; f < 6; ++f) {
    for (std::size_t j = 0; j < 2; ++j) {
      double expect = b[j];
      for (std::size_t e = 0; e < 4; ++e) expect += table[t.at(f, 3) * 4 + e] * w[e * 2 + j];
      CHECK(out(f, j) == doctest::Approx(expect).epsilon(1e-14));
    }
  }
  grad::Tape tape;
  const std::vector<std::uint32_t> one{3};
  const auto g = build_fusion(tape, model.fusion, t, one);
  for (const double a : tape.value(g.weights)) CHECK(a == 1.0);
}

TEST_CASE("decode output is invariant to subset listing order") {
  std::mt19937_64 rng(4);
  const std::vector<std::uint32_t> sizes(5, 4);
  const auto model = make_decoder(kIds, sizes, small(5));
  const auto t = random_tokens(5, kIds, sizes, rng);
  const auto a = decode(t, LayerSubset::of({4, 1, 2}, 5), model);
  const auto b = decode(t, LayerSubset::of({1, 2, 4}, 5), model);
  CHECK(a == b);
  CHECK(a.rows() == 5);
  CHECK(a.cols() == 2);
  CHECK_FALSE(decode(t, LayerSubset::of({0}, 5), model) == decode(t, LayerSubset::of({1}, 5), model));
}

TEST_CASE("a linear head on pretrained tables learns the identity") {
  std::mt19937_64 rng(5);
  Codebook cb;
  cb.layer_id = 12;
  cb.centroids = oracle::uniform_matrix(6, 3, -1, 1, rng);
  const std::vector<Codebook> books{cb};
  const std::vector<std::uint32_t> ids{12}, sizes{6};
  DecoderConfig cfg;
  cfg.fusion.embed_dim = 3;
  cfg.fusion.scorer_hidden = 2;
  cfg.fusion.embed_mode = EmbedMode::pretrained_frozen;
  cfg.head_hidden = 0;
  cfg.target_dim = 3;
  auto model = make_decoder(ids, sizes, cfg, books);
  std::vector<ReconstructionPair> data;
  for (int s = 0; s < 10; ++s) {
    const auto t = random_tokens(12, ids, sizes, rng);
    const auto f = detokenize_centroids(t, books);
    data.push_back({t, Matrix<float>(12, 3, f.values)});
  }
  DecoderTrainOptions opts;
  opts.epochs = 300;
  opts.learning_rate = 0.1;
  opts.fixed_subset = LayerSubset::full(1);
  const auto report = train_decoder(model, data, opts);
  CHECK(report.epoch_loss.back() < 1e-6);
  CHECK(reconstruction_mse(model, data, LayerSubset::full(1)) < 1e-6);
}

TEST_CASE("targets of zeros are fit by the bias") {
  std::mt19937_64 rng(6);
  const std::vector<std::uint32_t> sizes(5, 4);
  auto model = make_decoder(kIds, sizes, small());
  std::vector<ReconstructionPair> data;
  for (int s = 0; s < 5; ++s) data.push_back({random_tokens(10, kIds, sizes, rng), Matrix<float>(10, 2)});
  DecoderTrainOptions opts;
  opts.epochs = 1000;
  train_decoder(model, data, opts);
  for (const auto& s : all_subsets(5)) CHECK(reconstruction_mse(model, data, s) < 1e-8);
}

TEST_CASE("zero epochs leave the model at initialization") {
  std::mt19937_64 rng(7);
  const std::vector<std::uint32_t> sizes(5, 4);
  auto model = make_decoder(kIds, sizes, small(3));
  const auto initial = model;
  std::vector<ReconstructionPair> data{{random_tokens(4, kIds, sizes, rng), Matrix<float>(4, 2, 1.0f)}};
  DecoderTrainOptions opts;
  opts.epochs = 0;
  CHECK(train_decoder(model, data, opts).epoch_loss.empty());
  std::stringstream a, b;
  write_decoder(model, a);
  write_decoder(initial, b);
  CHECK(a.str() == b.str());
}

TEST_CASE("scalable training is reproducible and total over subsets") {
  std::mt19937_64 rng(8);
  const std::vector<std::uint32_t> sizes(5, 4);
  std::vector<ReconstructionPair> data;
  for (int s = 0; s < 6; ++s) {
    data.push_back({random_tokens(8, kIds, sizes, rng), oracle::uniform_matrix(8, 2, -1, 1, rng)});
  }
  auto run = [&] {
    auto model = make_decoder(kIds, sizes, small(4));
    DecoderTrainOptions opts;
    opts.epochs = 5;
    opts.seed = 21;
    const auto report = train_decoder(model, data, opts);
    return std::make_pair(report.epoch_loss, model);
  };
  const auto [loss_a, model] = run();
  const auto [loss_b, unused] = run();
  CHECK(loss_a == loss_b);
  for (const auto& s : all_subsets(5)) {
    const auto out = decode(data[0].tokens, s, model);
    for (const double v : out.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("misaligned targets are rejected") {
  std::mt19937_64 rng(9);
  const std::vector<std::uint32_t> sizes(5, 4);
  auto model = make_decoder(kIds, sizes, small());
  std::vector<ReconstructionPair> data{{random_tokens(4, kIds, sizes, rng), Matrix<float>(5, 2)}};
  CHECK_THROWS_AS(train_decoder(model, data, DecoderTrainOptions{}), Error);
}

TEST_CASE("DEC1 round trip") {
  const std::vector<std::uint32_t> sizes{3, 4, 5, 6, 7};
  for (const std::size_t hidden : {0u, 6u}) {
    const auto model = make_decoder(kIds, sizes, small(hidden));
    std::stringstream s;
    write_decoder(model, s);
    const std::string bytes = s.str();
    CHECK(bytes.substr(0, 4) == "DEC1");
    const auto back = read_decoder(s);
    CHECK(back.head_hidden == hidden);
    CHECK(back.target_dim == 2);
    std::stringstream again;
    write_decoder(back, again);
    CHECK(again.str() == bytes);
  }
}
