#include "semtok/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "semtok/digest.hpp"
#include "semtok/error.hpp"

namespace semtok {

namespace {

std::string join(const std::vector<std::uint32_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

struct Prepared {
  std::vector<Codebook> codebooks;
  std::vector<TokenSequence> tokens;
  Split split;
};

Prepared prepare(const ExperimentData& data, const ExperimentConfig& config) {
  const Dataset& ds = data.in_domain;
  if (ds.size() < 2) throw Error("harness: need at least two sequences");
  if (config.shifted_tokenizer && !data.shifted) {
    throw Error("harness: missing artifact: shifted dataset for the out-of-domain tokenizer");
  }
  Prepared p;
  p.split = split_sequences(ds.size(), config.seed);
  const Dataset& source = config.shifted_tokenizer ? *data.shifted : ds;
  std::vector<FeatureSequence> train_features;
  for (const auto i : p.split.train) {
    if (i >= source.size()) throw Error("harness: shifted dataset has fewer sequences");
    train_features.push_back(source.features[i]);
  }
  const std::size_t layers = ds.features[0].layers;
  for (std::size_t l = 0; l < layers; ++l) {
    KMeansConfig kc;
    kc.k = config.k;
    kc.max_iterations = config.kmeans_iterations;
    kc.seed = config.seed * 1000003ULL + l;
    kc.layer_id = ds.features[0].layer_ids[l];
    p.codebooks.push_back(train_codebook(gather_layer(train_features, l), kc));
  }
  for (const auto& f : ds.features) p.tokens.push_back(tokenize(f, p.codebooks));
  return p;
}

FusionConfig fusion_config(const ExperimentConfig& config, std::size_t feature_dim) {
  FusionConfig fc;
  fc.embed_mode = config.embed_mode;
  fc.embed_dim = config.embed_mode == EmbedMode::random ? config.embed_dim : feature_dim;
  fc.scorer_hidden = config.scorer_hidden;
  fc.seed = config.seed;
  return fc;
}

bool tables_equal(const LayerFusion& a, const LayerFusion& b) {
  for (std::size_t l = 0; l < a.tables.size(); ++l) {
    if (a.tables[l].values != b.tables[l].values) return false;
  }
  return true;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string_view to_string(Task task) {
  return task == Task::frame_classification ? "frame_classification"
                                            : "sequence_reconstruction";
}

std::string ExperimentConfig::layer_mode() const {
  return single_layer ? "single(" + std::to_string(*single_layer) + ")" : "attention_fused";
}

std::string ExperimentConfig::decoder_mode() const {
  return fixed_subset ? "fixed(" + join(*fixed_subset, '+') + ")" : "scalable";
}

std::string ExperimentConfig::domain() const {
  return shifted_tokenizer ? "shifted" : "in_domain";
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << std::setprecision(17) << "task=" << to_string(task) << ";k=" << k
      << ";embed_mode=" << to_string(embed_mode) << ";layer_mode=" << layer_mode()
      << ";decoder_mode=" << decoder_mode() << ";domain=" << domain()
      << ";epochs=" << epochs << ";seed=" << seed << ";embed_dim=" << embed_dim
      << ";scorer_hidden=" << scorer_hidden << ";head_hidden=" << head_hidden
      << ";lr=" << learning_rate << ";momentum=" << momentum
      << ";kmeans_iterations=" << kmeans_iterations;
  return out.str();
}

std::string ExperimentConfig::fingerprint() const {
  return sha256_hex(canonical()).substr(0, 16);
}

Split split_sequences(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x51u);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = std::max<std::size_t>(1, (count * 4) / 5);
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

MetricsRow run_discriminative(const ExperimentData& data, const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset& ds = data.in_domain;
  auto prep = prepare(data, config);
  const auto& first = ds.features[0];
  if (config.single_layer && *config.single_layer >= first.layers) {
    throw Error("harness: single layer position out of range");
  }

  std::vector<LabeledSequence> train, test;
  for (const auto i : prep.split.train) train.push_back({prep.tokens[i], ds.labels[i]});
  for (const auto i : prep.split.test) test.push_back({prep.tokens[i], ds.labels[i]});

  std::vector<std::uint32_t> positions;
  if (config.single_layer) positions = {*config.single_layer};

  const auto& t0 = prep.tokens[0];
  SelectorModel model = make_selector(t0.layer_ids, t0.codebook_sizes, ds.num_classes,
                                      fusion_config(config, first.dim), prep.codebooks);
  const LayerFusion initial = model.fusion;
  TrainOptions opts;
  opts.epochs = config.epochs;
  opts.learning_rate = config.learning_rate;
  opts.momentum = config.momentum;
  opts.seed = config.seed;
  const auto report = train_selector(model, train, opts, positions);

  MetricsRow row;
  row.config = config;
  row.fingerprint = config.fingerprint();
  row.metric_name = "accuracy";
  row.metric_value = accuracy(model, test, positions);
  std::vector<AttentionMap> maps;
  for (const auto& ex : test) maps.push_back(predict(model, ex.tokens, positions).attention);
  row.mean_attention = mean_attention(maps);
  row.tables_unchanged = tables_equal(initial, model.fusion);
  row.training_loss = report.epoch_loss;
  row.layer_ids = first.layer_ids;
  row.seconds = seconds_since(start);
  return row;
}

MetricsRow run_generative(const ExperimentData& data, const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset& ds = data.in_domain;
  if (ds.targets.size() != ds.size()) {
    throw Error("harness: missing artifact: reconstruction targets");
  }
  auto prep = prepare(data, config);
  const auto& first = ds.features[0];
  const std::size_t layers = first.layers;

  auto to_pair = [&](std::size_t i) {
    const auto& target = ds.targets[i];
    return ReconstructionPair{prep.tokens[i],
                              Matrix<float>(target.frames, target.dim, target.values)};
  };
  std::vector<ReconstructionPair> train, test;
  for (const auto i : prep.split.train) train.push_back(to_pair(i));
  for (const auto i : prep.split.test) test.push_back(to_pair(i));

  DecoderConfig dc;
  dc.fusion = fusion_config(config, first.dim);
  dc.head_hidden = config.head_hidden;
  dc.target_dim = ds.targets[0].dim;
  const auto& t0 = prep.tokens[0];
  DecoderModel model = make_decoder(t0.layer_ids, t0.codebook_sizes, dc, prep.codebooks);
  const LayerFusion initial = model.fusion;

  DecoderTrainOptions opts;
  opts.epochs = config.epochs;
  opts.learning_rate = config.learning_rate;
  opts.momentum = config.momentum;
  opts.seed = config.seed;
  if (config.fixed_subset) opts.fixed_subset = LayerSubset::of(*config.fixed_subset, layers);
  const auto report = train_decoder(model, train, opts);

  MetricsRow row;
  row.config = config;
  row.fingerprint = config.fingerprint();
  row.metric_name = "mse";
  const std::vector<LayerSubset> evaluated =
      opts.fixed_subset ? std::vector<LayerSubset>{*opts.fixed_subset} : all_subsets(layers);
  for (const auto& s : evaluated) {
    row.per_subset.push_back({s.label(), s.k(), reconstruction_mse(model, test, s)});
  }
  const LayerSubset headline = opts.fixed_subset ? *opts.fixed_subset : LayerSubset::full(layers);
  row.metric_value = reconstruction_mse(model, test, headline);

  std::vector<AttentionMap> maps;
  for (const auto& ex : test) {
    // Attention of the headline subset, reported per layer.
    grad::Tape tape;
    const auto g = build_fusion(tape, model.fusion, ex.tokens, headline.included());
    AttentionMap m;
    m.frames = ex.tokens.frames;
    m.layers = layers;
    m.embed_dim = model.fusion.embed_dim;
    m.weights.assign(m.frames * layers, 0.0);
    const auto w = tape.value(g.weights);
    for (std::size_t t = 0; t < m.frames; ++t) {
      for (std::size_t j = 0; j < headline.k(); ++j) {
        m.weights[t * layers + headline.included()[j]] = w[t * headline.k() + j];
      }
    }
    maps.push_back(std::move(m));
  }
  row.mean_attention = mean_attention(maps);
  row.tables_unchanged = tables_equal(initial, model.fusion);
  row.training_loss = report.epoch_loss;
  row.layer_ids = first.layer_ids;
  row.seconds = seconds_since(start);
  return row;
}

MetricsRow run_experiment(const ExperimentData& data, const ExperimentConfig& config) {
  return config.task == Task::frame_classification ? run_discriminative(data, config)
                                                   : run_generative(data, config);
}

SweepResult sweep(const ExperimentData& data, const std::vector<ExperimentConfig>& configs,
                  std::size_t jobs) {
  std::vector<std::optional<MetricsRow>> slots(configs.size());
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        slots[i] = run_experiment(data, configs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, configs.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SweepResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (slots[i]) {
      result.rows.push_back(std::move(*slots[i]));
    } else {
      result.failures.push_back({configs[i].fingerprint(), errors[i]});
    }
  }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const MetricsRow& a, const MetricsRow& b) {
                     return a.fingerprint < b.fingerprint;
                   });
  return result;
}

void write_results_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "fingerprint,task,K,embed_mode,layer_mode,decoder_mode,domain,metric_name,"
         "metric_value,seconds\n";
  for (const auto& r : rows) {
    const auto& c = r.config;
    out << r.fingerprint << ',' << to_string(c.task) << ',' << c.k << ','
        << to_string(c.embed_mode) << ',' << c.layer_mode() << ',' << c.decoder_mode()
        << ',' << c.domain() << ',' << r.metric_name << ',' << std::setprecision(17)
        << r.metric_value << ',' << std::setprecision(6) << r.seconds << '\n';
  }
}

void write_subset_csv(std::ostream& out, const std::vector<SubsetMetric>& rows) {
  out << "subset,k,mse\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.subset << ',' << r.k << ',' << r.mse << '\n';
}

}  // namespace semtok
