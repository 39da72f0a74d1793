// Acceptance run: one PASS/FAIL line per criterion, each with its runtime
// budget. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "semtok/cli.hpp"
#include "semtok/decoder.hpp"
#include "semtok/harness.hpp"
#include "semtok/kernels.hpp"
#include "semtok/quantizer.hpp"
#include "semtok/selector.hpp"
#include "semtok/synthgen.hpp"
#include "semtok/tokenizer.hpp"
#include "support/oracles.hpp"

using namespace semtok;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// 1. Best-of-10 k-means inertia against exhaustive 2-partition search.
Outcome kmeans_global_optimum() {
  double worst_gap = 0.0;
  std::size_t matched = 0;
  for (std::uint64_t instance = 0; instance < 20; ++instance) {
    std::mt19937_64 rng(1000 + instance);
    const std::size_t n = 4 + instance % 9;  // 4..12 points
    const auto data = oracle::uniform_matrix(n, 2, -1.0, 1.0, rng);
    const double optimum = oracle::best_two_partition(oracle::to_points(data));
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t restart = 0; restart < 10; ++restart) {
      KMeansConfig config;
      config.k = 2;
      config.seed = instance * 100 + restart;
      best = std::min(best, train_codebook(data, config).final_inertia);
    }
    const double gap = std::abs(best - optimum);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 1e-9) ++matched;
  }
  return {matched == 20, fmt(matched) + "/20 instances at optimum, worst gap " + fmt(worst_gap)};
}

// 2. Reported inertia never increases over 50 full-batch Lloyd steps.
Outcome lloyd_monotonicity() {
  const oracle::Points corners{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::size_t violations = 0, steps = 0;
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    for (const std::size_t k : {4u, 7u}) {
      const auto data = oracle::blobs(corners, 100, 0.3, seed, nullptr);
      Codebook cb;
      cb.centroids = init_kmeanspp(data, k, seed).centroids;
      double previous = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 50; ++i) {
        const auto step = lloyd_step(cb, data);
        if (step.inertia > previous) ++violations;
        previous = step.inertia;
        cb = step.codebook;
        ++steps;
      }
    }
  }
  return {violations == 0, fmt(steps) + " steps, " + fmt(violations) + " increases"};
}

// 3. Tokenizer against a linear-scan oracle on 10^4 frames x 3 layers.
Outcome tokenize_oracle() {
  std::mt19937_64 rng(33);
  const std::vector<std::uint32_t> ids{3, 12, 23};
  const std::uint32_t dim = 12;
  std::vector<Codebook> books;
  std::vector<oracle::Points> centroid_points;
  for (std::size_t l = 0; l < ids.size(); ++l) {
    Codebook cb;
    cb.layer_id = ids[l];
    cb.centroids = oracle::uniform_matrix(16 + 8 * l, dim, -1.0, 1.0, rng);
    centroid_points.push_back(oracle::to_points(cb.centroids));
    books.push_back(cb);
  }
  FeatureSequence seq(10000, ids, dim, 50.0f);
  std::normal_distribution<double> g(0.0, 0.8);
  for (auto& v : seq.values) v = static_cast<float>(g(rng));
  std::size_t mismatches = 0, total = 0;
  for (const auto isa : {kernels::Isa::scalar, kernels::Isa::avx2}) {
    if (!kernels::supported(isa)) continue;
    kernels::select(isa);
    const auto tokens = tokenize(seq, books);
    for (std::size_t t = 0; t < seq.frames; ++t) {
      for (std::size_t l = 0; l < ids.size(); ++l) {
        const auto f = seq.frame(t, l);
        const auto expected = oracle::nearest({f.begin(), f.end()}, centroid_points[l]).first;
        if (tokens.at(t, l) != expected) ++mismatches;
        ++total;
      }
    }
  }
  kernels::select(kernels::supported(kernels::Isa::avx2) ? kernels::Isa::avx2 : kernels::Isa::scalar);
  return {mismatches == 0, fmt(total) + " assignments, " + fmt(mismatches) + " mismatches"};
}

TokenSequence random_tokens(std::size_t frames, const std::vector<std::uint32_t>& ids,
                            const std::vector<std::uint32_t>& sizes, std::mt19937_64& rng) {
  TokenSequence t;
  t.frames = static_cast<std::uint32_t>(frames);
  t.layers = static_cast<std::uint32_t>(ids.size());
  t.layer_ids = ids;
  t.codebook_sizes = sizes;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t l = 0; l < ids.size(); ++l) {
      t.indices.push_back(std::uniform_int_distribution<std::uint32_t>(0, sizes[l] - 1)(rng));
    }
  }
  return t;
}

// 4. Finite-difference checks of the selector and decoder graphs plus a
// corrupted-gradient negative control.
Outcome gradient_checks() {
  std::mt19937_64 rng(44);
  const std::vector<std::uint32_t> ids{3, 7, 12, 18, 23};
  const std::vector<std::uint32_t> sizes{6, 5, 7, 4, 6};
  double worst = 0.0;
  std::size_t checked = 0, failed = 0;
  auto tally = [&](const std::vector<grad::GradCheckReport>& reports) {
    for (const auto& r : reports) {
      worst = std::max(worst, r.max_relative_error);
      ++checked;
      if (!r.passed) ++failed;
    }
  };

  for (const bool shared : {true, false}) {
    FusionConfig fc;
    fc.embed_dim = 6;
    fc.scorer_hidden = 5;
    fc.shared_scorer = shared;
    fc.seed = 4;
    auto model = make_selector(ids, sizes, 3, fc);
    LabeledSequence ex{random_tokens(5, ids, sizes, rng), {0, 1, 2, 1, 0}};
    const auto positions = all_positions(ids.size());
    const auto params = model.parameters();
    tally(grad::grad_check(
        [&](grad::Tape& tape) { return selector_loss(tape, model, ex, positions); }, params));
  }

  for (const std::size_t hidden : {0u, 4u}) {
    DecoderConfig dc;
    dc.fusion.embed_dim = 6;
    dc.fusion.scorer_hidden = 5;
    dc.fusion.seed = 5;
    dc.head_hidden = hidden;
    dc.target_dim = 3;
    auto model = make_decoder(ids, sizes, dc);
    ReconstructionPair ex{random_tokens(5, ids, sizes, rng), oracle::uniform_matrix(5, 3, -1, 1, rng)};
    const auto params = model.parameters();
    for (const auto& subset : {LayerSubset::full(5), LayerSubset::of({1, 3}, 5)}) {
      tally(grad::grad_check(
          [&](grad::Tape& tape) { return decoder_loss(tape, model, ex, subset); }, params));
    }
  }

  // Negative control: the analytic gradient doubled.
  FusionConfig fc;
  fc.embed_dim = 4;
  fc.scorer_hidden = 3;
  auto model = make_selector(ids, sizes, 3, fc);
  LabeledSequence ex{random_tokens(4, ids, sizes, rng), {0, 1, 2, 0}};
  const auto positions = all_positions(ids.size());
  const auto params = model.parameters();
  const grad::GraphFn graph = [&](grad::Tape& tape) {
    return selector_loss(tape, model, ex, positions);
  };
  const auto corrupted = grad::grad_check(
      graph,
      [&](std::span<grad::Parameter* const> ps) {
        grad::forward_backward(graph, ps);
        for (auto* p : ps) {
          for (auto& g : p->gradient) g *= 2.0;
        }
      },
      params);
  const bool caught = std::any_of(corrupted.begin(), corrupted.end(),
                                  [](const auto& r) { return !r.passed; });
  return {failed == 0 && checked > 0 && caught,
          fmt(checked) + " parameter checks, worst rel. error " + fmt(worst) +
              (caught ? ", corrupted gradient caught" : ", corrupted gradient NOT caught")};
}

// 5. Softmax and fusion invariants over 10^5 frames.
Outcome fusion_invariants() {
  std::mt19937_64 rng(55);
  const std::vector<std::uint32_t> ids{3, 7, 12, 18, 23};
  const std::vector<std::uint32_t> sizes{8, 8, 8, 8, 8};
  FusionConfig fc;
  fc.embed_dim = 8;
  fc.scorer_hidden = 8;
  fc.shared_scorer = false;
  fc.seed = 5;
  auto model = make_selector(ids, sizes, 2, fc);
  // Scale scorer outputs up so the softmax sees a wide range of inputs.
  for (auto& w : model.fusion.w2) {
    for (auto& v : w.values) v *= 20.0;
  }
  double worst_sum = 0.0, worst_shift = 0.0, worst_onehot = 0.0;
  std::size_t negatives = 0, frames = 0;
  std::uniform_real_distribution<double> shift_dist(-50.0, 50.0);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  for (int s = 0; s < 1000; ++s) {
    const auto tokens = random_tokens(100, ids, sizes, rng);
    const auto embedded = embed_tokens(tokens, model);
    const auto base = fuse(embedded, model);

    auto shifted_model = model;
    const double c = shift_dist(rng);
    for (auto& b : shifted_model.fusion.b2) b.values[0] += c;
    const auto shifted = fuse(embedded, shifted_model);

    auto onehot_model = model;
    const std::size_t j = pick(rng);
    for (std::size_t l = 0; l < ids.size(); ++l) {
      for (auto& v : onehot_model.fusion.w2[l].values) v = 0.0;
      onehot_model.fusion.b2[l].values[0] = l == j ? 50.0 : -50.0;
    }
    const auto onehot = fuse(embedded, onehot_model);

    for (std::size_t t = 0; t < base.frames; ++t, ++frames) {
      double sum = 0.0;
      for (std::size_t l = 0; l < base.layers; ++l) {
        const double w = base.weight(t, l);
        if (w < 0.0) ++negatives;
        sum += w;
        worst_shift = std::max(worst_shift, std::abs(w - shifted.weight(t, l)));
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      for (std::size_t e = 0; e < embedded.dim; ++e) {
        const double expect = embedded.values[(t * embedded.layers + j) * embedded.dim + e];
        worst_onehot = std::max(worst_onehot, std::abs(onehot.fused[t * embedded.dim + e] - expect));
      }
    }
  }
  const bool ok = negatives == 0 && worst_sum <= 1e-9 && worst_shift <= 1e-9 && worst_onehot <= 1e-6;
  return {ok, fmt(frames) + " frames, max |sum-1| " + fmt(worst_sum) + ", max shift delta " +
                  fmt(worst_shift) + ", max one-hot error " + fmt(worst_onehot)};
}

// 6. Two-stage subset sampler law at n_l = 5.
Outcome sampler_law() {
  constexpr std::size_t draws = 100000;
  std::mt19937_64 rng(66);
  std::vector<std::size_t> by_k(6, 0);
  std::vector<std::map<std::string, double>> by_subset(6);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto s = sample_subset(5, rng);
    ++by_k[s.k()];
    by_subset[s.k()][s.label()] += 1;
  }
  bool ok = true;
  double worst_freq = 0.0;
  std::string chi;
  const std::size_t combos[] = {0, 5, 10, 10, 5, 1};
  for (std::size_t k = 1; k <= 5; ++k) {
    const double freq = static_cast<double>(by_k[k]) / draws;
    worst_freq = std::max(worst_freq, std::abs(freq - 0.2));
    if (std::abs(freq - 0.2) > 0.01) ok = false;
    if (by_subset[k].size() != combos[k]) ok = false;
    if (combos[k] < 2) continue;
    std::vector<double> observed;
    for (const auto& [label, count] : by_subset[k]) observed.push_back(count);
    const double stat = oracle::chi_square(observed, static_cast<double>(by_k[k]) / combos[k]);
    const double crit = oracle::chi_square_critical_01(combos[k] - 1);
    if (stat > crit) ok = false;
    chi += " k=" + fmt(k) + ":" + fmt(stat) + "<" + fmt(crit);
  }
  return {ok, "max |freq-0.2| " + fmt(worst_freq) + ", chi2" + chi};
}

GeneratorSpec desk_spec(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.seed = seed;
  spec.label_rule = FromLayer{2};
  return spec;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct DiscriminativeRuns {
  std::vector<MetricsRow> fused;
  std::vector<MetricsRow> single;
};

const DiscriminativeRuns& discriminative_runs() {
  static const DiscriminativeRuns runs = [] {
    DiscriminativeRuns r;
    for (const auto seed : kSeeds) {
      ExperimentData data{generate(desk_spec(seed)).data, std::nullopt};
      ExperimentConfig config;
      config.k = 8;
      config.seed = seed;
      r.fused.push_back(run_discriminative(data, config));
      config.single_layer = 4;
      r.single.push_back(run_discriminative(data, config));
    }
    return r;
  }();
  return runs;
}

// 7. Mean attention concentrates on the label-bearing layer.
Outcome attention_concentration() {
  bool ok = true;
  std::string detail;
  for (const auto& row : discriminative_runs().fused) {
    const auto& a = row.mean_attention;
    bool strict_max = true;
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (l != 2 && a[l] >= a[2]) strict_max = false;
    }
    if (!(strict_max && a[2] > 0.5)) ok = false;
    detail += " seed " + fmt(row.config.seed) + ": a2=" + fmt(a[2]);
  }
  return {ok, "layer-2 mean attention" + detail};
}

// 8. Fused accuracy is at least the accuracy of a non-informative layer.
Outcome fused_vs_wrong_layer() {
  const auto& runs = discriminative_runs();
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.fused.size(); ++i) {
    const double f = runs.fused[i].metric_value, s = runs.single[i].metric_value;
    if (!(f >= s)) ok = false;
    detail += " seed " + fmt(runs.fused[i].config.seed) + ": " + fmt(f) + " vs " + fmt(s);
  }
  return {ok, "fused vs single(4) accuracy" + detail};
}

// 9. Scalable decoder on all layers against the best single-layer decoder.
Outcome scalable_decoder() {
  bool ok = true;
  std::string detail;
  for (const auto seed : kSeeds) {
    ExperimentData data{generate(desk_spec(seed)).data, std::nullopt};
    ExperimentConfig config;
    config.task = Task::sequence_reconstruction;
    config.k = 8;
    config.seed = seed;
    const auto scalable = run_generative(data, config);
    double best_single = std::numeric_limits<double>::infinity();
    for (std::uint32_t l = 0; l < 5; ++l) {
      config.fixed_subset = std::vector<std::uint32_t>{l};
      best_single = std::min(best_single, run_generative(data, config).metric_value);
    }
    const bool total = scalable.per_subset.size() == 31 &&
                       std::all_of(scalable.per_subset.begin(), scalable.per_subset.end(),
                                   [](const SubsetMetric& m) { return std::isfinite(m.mse); });
    if (!(total && scalable.metric_value <= best_single * 1.05)) ok = false;
    detail += " seed " + fmt(seed) + ": " + fmt(scalable.metric_value) + " vs " + fmt(best_single) +
              (total ? " (31 subsets finite)" : " (subset failure)");
  }
  return {ok, "full-subset MSE vs best single" + detail};
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::dispatch(args, out, err);
}

std::vector<std::string> csv_values(const fs::path& path) {
  // Every column except the wall-clock seconds.
  std::ifstream in(path);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(line.substr(0, line.rfind(',')));
  return rows;
}

// 10. The K x embed-mode sweep end to end through the command line.
Outcome sweep_grid() {
  oracle::TempDir dir("acceptance_sweep");
  const auto data = dir / "data";
  if (run_cli({"gen", "--seed", "10", "--out", data.string()}) != 0) return {false, "gen failed"};
  const std::vector<std::string> base{"sweep", "--data", data.string(), "--k", "16,64",
                                      "--embed-mode", "random,pretrained-frozen,pretrained-finetune",
                                      "--seed", "10"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  if (run_cli(with({"--out", (dir / "a.csv").string()})) != 0) return {false, "first sweep failed"};
  if (run_cli(with({"--jobs", "2", "--out", (dir / "b.csv").string()})) != 0) {
    return {false, "second sweep failed"};
  }
  const auto a = csv_values(dir / "a.csv"), b = csv_values(dir / "b.csv");
  const bool six_rows = a.size() == 7;
  const bool reproducible = a == b;

  ExperimentData ed{load_dataset(data), std::nullopt};
  std::vector<ExperimentConfig> frozen;
  for (const std::uint32_t k : {16u, 64u}) {
    ExperimentConfig c;
    c.k = k;
    c.seed = 10;
    c.embed_mode = EmbedMode::pretrained_frozen;
    frozen.push_back(c);
  }
  const auto result = sweep(ed, frozen, 1);
  const bool unchanged = result.failures.empty() && result.rows.size() == 2 &&
                         std::all_of(result.rows.begin(), result.rows.end(),
                                     [](const MetricsRow& r) { return r.tables_unchanged; });
  bool matches_csv = true;
  for (const auto& r : result.rows) {
    std::ostringstream line;
    line.precision(17);
    line << r.fingerprint << ",frame_classification," << r.config.k << ',' << to_string(r.config.embed_mode) << ','
         << r.config.layer_mode() << ',' << r.config.decoder_mode() << ',' << r.config.domain()
         << ",accuracy," << r.metric_value;
    if (std::find(a.begin(), a.end(), line.str()) == a.end()) matches_csv = false;
  }
  return {six_rows && reproducible && unchanged && matches_csv,
          fmt(a.empty() ? 0 : a.size() - 1) + " rows, " +
              (reproducible ? "reproducible" : "NOT reproducible") + ", frozen tables " +
              (unchanged ? "unchanged" : "CHANGED") +
              (matches_csv ? "" : ", library rerun disagrees with CSV")};
}

void ok_or(std::size_t& failures, bool ok) {
  if (!ok) ++failures;
}

template <class T, class W, class R>
bool round_trips(const T& value, W write, R read) {
  std::stringstream first;
  write(value, first);
  const std::string bytes = first.str();
  std::stringstream in(bytes);
  const T back = read(in);
  std::stringstream second;
  write(back, second);
  return second.str() == bytes;
}

// 11. Bitwise round trips of all five formats; corrupt magic exits 2.
Outcome format_round_trips() {
  std::mt19937_64 rng(111);
  std::size_t trials = 0, failures = 0;
  const std::vector<std::uint32_t> ids{3, 7, 12};
  for (int i = 0; i < 20; ++i) {
    const std::uint32_t dim = 2 + i % 5;
    Codebook cb;
    cb.layer_id = static_cast<std::uint32_t>(rng() % 30);
    cb.seed = rng();
    cb.final_inertia = std::uniform_real_distribution<double>(0, 100)(rng);
    cb.iterations_run = static_cast<std::uint32_t>(rng() % 300);
    cb.centroids = oracle::uniform_matrix(3 + i, dim, -5, 5, rng);
    ok_or(failures, round_trips(cb, [](const Codebook& c, std::ostream& o) { write_codebook(c, o); },
                                [](std::istream& in) { return read_codebook(in); }));
    const bool cb_equal = [&] {
      std::stringstream s;
      write_codebook(cb, s);
      return read_codebook(s) == cb;
    }();
    ok_or(failures, cb_equal);

    FeatureSequence fs_(5 + i, ids, dim, 50.0f);
    for (auto& v : fs_.values) v = std::uniform_real_distribution<float>(-3, 3)(rng);
    ok_or(failures, round_trips(fs_, [](const FeatureSequence& f, std::ostream& o) { write_features(f, o); },
                                [](std::istream& in) { return read_features(in); }));

    const std::vector<std::uint32_t> sizes{4, 5, 6};
    const auto tokens = random_tokens(5 + i, ids, sizes, rng);
    ok_or(failures, round_trips(tokens, [](const TokenSequence& t, std::ostream& o) { write_tokens(t, o); },
                                [](std::istream& in) { return read_tokens(in); }));

    FusionConfig fc;
    fc.embed_dim = 3 + i % 4;
    fc.scorer_hidden = 2 + i % 3;
    fc.shared_scorer = i % 2 == 0;
    fc.seed = rng();
    const auto sel = make_selector(ids, sizes, 2 + i % 4, fc);
    ok_or(failures, round_trips(sel, [](const SelectorModel& m, std::ostream& o) { write_selector(m, o); },
                                [](std::istream& in) { return read_selector(in); }));

    DecoderConfig dc;
    dc.fusion = fc;
    dc.head_hidden = i % 3 == 0 ? 0 : 4;
    dc.target_dim = dim;
    const auto dec = make_decoder(ids, sizes, dc);
    ok_or(failures, round_trips(dec, [](const DecoderModel& m, std::ostream& o) { write_decoder(m, o); },
                                [](std::istream& in) { return read_decoder(in); }));
    trials += 6;
  }

  oracle::TempDir dir("acceptance_magic");
  const auto data = dir / "data";
  run_cli({"gen", "--seed", "1", "--sequences", "3", "--frames", "4", "--out", data.string()});
  run_cli({"codebook", "train", "--data", data.string(), "--layer", "3", "--k", "2", "--out",
           (dir / "cb.cbk").string()});
  auto corrupt = [&](const fs::path& src, const fs::path& dst) {
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
    std::fstream f(dst, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  };
  const auto bad = dir / "bad";
  fs::create_directories(bad);
  corrupt(dir / "cb.cbk", bad / "cb.cbk");
  corrupt(feature_path(data, 0), bad / "features.mlf");
  std::vector<std::pair<std::string, int>> codes;
  codes.emplace_back("CBK1", run_cli({"tokenize", "--data", data.string(), "--codebooks",
                                      (bad / "cb.cbk").string(), "--out", (dir / "t").string()}));
  codes.emplace_back("MLF1", run_cli({"codebook", "train", "--data", (bad / "features.mlf").string(),
                                      "--layer", "3", "--k", "2", "--out", (dir / "x.cbk").string()}));
  const auto tok_dir = bad / "tok";
  fs::create_directories(tok_dir);
  {
    std::ofstream f(tok_dir / "tokens_00000.tok", std::ios::binary);
    f << "XXXXjunk";
  }
  codes.emplace_back("TOK1", run_cli({"selector", "train", "--tokens", tok_dir.string(), "--labels",
                                      labels_path(data).string(), "--out", (dir / "m.sel").string()}));
  {
    std::ofstream f(bad / "model.sel", std::ios::binary);
    f << "XXXXjunk";
  }
  codes.emplace_back("SEL1", run_cli({"report", "attention", "--model", (bad / "model.sel").string(),
                                      "--tokens", tok_dir.string(), "--out", (dir / "a.csv").string()}));
  codes.emplace_back("DEC1", run_cli({"eval", "--model", (bad / "model.sel").string(), "--tokens",
                                      tok_dir.string(), "--targets", data.string(), "--out",
                                      (dir / "e.csv").string()}));
  std::string code_detail;
  bool codes_ok = true;
  for (const auto& [name, code] : codes) {
    code_detail += " " + name + "->" + fmt(code);
    if (code != 2) codes_ok = false;
  }
  return {failures == 0 && codes_ok,
          fmt(trials - failures) + "/" + fmt(trials) + " round trips, corrupt magic exit codes" + code_detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "k-means matches brute-force optimum", 10, kmeans_global_optimum},
      {2, "Lloyd inertia monotone", 5, lloyd_monotonicity},
      {3, "tokenize matches linear-scan oracle", 5, tokenize_oracle},
      {4, "gradient checks with negative control", 60, gradient_checks},
      {5, "softmax and fusion invariants", 10, fusion_invariants},
      {6, "subset sampler law", 5, sampler_law},
      {7, "attention concentrates on informative layer", 300, attention_concentration},
      {8, "fused accuracy >= non-informative single layer", 300, fused_vs_wrong_layer},
      {9, "scalable decoder vs best single-layer decoder", 600, scalable_decoder},
      {10, "sweep grid reproducible, frozen tables unchanged", 900, sweep_grid},
      {11, "format round trips and corrupt-magic exit code", 5, format_round_trips},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_seconds;
    const bool pass = o.passed && in_budget;
    if (!pass) ++failed;
    std::printf("%s [%d] %s: %s (%.2f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_seconds, in_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
