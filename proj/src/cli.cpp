#include "semtok/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "semtok/decoder.hpp"
#include "semtok/digest.hpp"
#include "semtok/error.hpp"
#include "semtok/harness.hpp"
#include "semtok/quantizer.hpp"
#include "semtok/selector.hpp"
#include "semtok/synthgen.hpp"
#include "semtok/tokenizer.hpp"

namespace semtok::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;

fs::path token_path(const fs::path& dir, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "tokens_%05zu.tok", index);
  return dir / buf;
}

std::vector<TokenSequence> load_tokens(const fs::path& dir, std::vector<fs::path>* files) {
  if (!fs::is_directory(dir)) throw Error("token directory " + dir.string() + " not found");
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; fs::exists(token_path(dir, i)); ++i) {
    out.push_back(read_tokens(token_path(dir, i)));
    if (files) files->push_back(token_path(dir, i));
  }
  if (out.empty()) throw Error("missing token file " + token_path(dir, 0).string());
  return out;
}

std::vector<Codebook> load_codebooks(const std::vector<std::string>& paths) {
  std::vector<Codebook> out;
  for (const auto& p : paths) out.push_back(read_codebook(fs::path(p)));
  return out;
}

// Reorders codebooks to match the layer ids; every layer needs exactly one.
std::vector<Codebook> match_codebooks(std::vector<Codebook> codebooks,
                                      const std::vector<std::uint32_t>& layer_ids) {
  std::vector<Codebook> ordered;
  for (const auto id : layer_ids) {
    auto it = std::find_if(codebooks.begin(), codebooks.end(),
                           [&](const Codebook& c) { return c.layer_id == id; });
    if (it == codebooks.end()) {
      throw Error("no codebook for feature layer " + std::to_string(id) + " (layer mismatch)");
    }
    ordered.push_back(*it);
  }
  for (const auto& c : codebooks) {
    if (std::find(layer_ids.begin(), layer_ids.end(), c.layer_id) == layer_ids.end()) {
      throw Error("codebook layer " + std::to_string(c.layer_id) +
                  " is not present in the feature file (layer mismatch)");
    }
  }
  return ordered;
}

std::size_t position_of(const std::vector<std::uint32_t>& layer_ids, std::uint32_t id) {
  const auto it = std::find(layer_ids.begin(), layer_ids.end(), id);
  if (it == layer_ids.end()) {
    throw Error("layer " + std::to_string(id) + " is not present in the data");
  }
  return static_cast<std::size_t>(it - layer_ids.begin());
}

std::string file_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic(4, '\0');
  in.read(magic.data(), 4);
  return magic;
}

std::vector<fs::path> dataset_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (std::size_t i = 0; fs::exists(feature_path(dir, i)); ++i) {
    files.push_back(feature_path(dir, i));
    if (fs::exists(target_path(dir, i))) files.push_back(target_path(dir, i));
  }
  if (fs::exists(labels_path(dir))) files.push_back(labels_path(dir));
  return files;
}

class Manifest {
 public:
  Manifest(std::string command, const CLI::App& app) : command_(std::move(command)) {
    for (const CLI::Option* opt : app.get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = opt->get_default_str();
      }
      config_.emplace(name, value);
    }
  }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void inputs(const std::vector<fs::path>& ps) {
    inputs_.insert(inputs_.end(), ps.begin(), ps.end());
  }
  void output(const fs::path& p) { outputs_.push_back(p); }

  // Next to a file output, or inside a directory output.
  void write(const fs::path& out) const {
    const fs::path where = fs::is_directory(out) ? out / "manifest.txt"
                                                 : fs::path(out.string() + ".manifest.txt");
    std::ofstream f(where);
    if (!f) throw Error("cannot write " + where.string());
    f << "command=" << command_ << '\n';
    f << "tool_version=" << kToolVersion << '\n';
    f << "seed=" << (config_.count("seed") ? config_.at("seed") : "") << '\n';
    for (const auto& [k, v] : config_) f << "config." << k << '=' << v << '\n';
    for (const auto& p : inputs_) f << "input." << p.string() << '=' << file_sha256(p) << '\n';
    for (const auto& p : outputs_) f << "output." << p.string() << '=' << file_sha256(p) << '\n';
  }

 private:
  std::string command_;
  std::map<std::string, std::string> config_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

const std::map<std::string, EmbedMode> kEmbedModes{
    {"random", EmbedMode::random},
    {"pretrained-frozen", EmbedMode::pretrained_frozen},
    {"pretrained-finetune", EmbedMode::pretrained_finetune}};

struct GenArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::uint32_t sequences = 200;
  std::uint32_t frames = 50;
  std::uint32_t dim = 16;
  std::vector<std::uint32_t> layers{3, 7, 12, 18, 23};
  std::uint32_t clusters = 8;
  double sigma = 0.1;
  std::uint32_t label_layer = 2;
  double shift = 0.0;
};

struct CodebookArgs {
  std::string data;
  std::uint32_t layer = 0;
  std::uint32_t k = 0;
  std::uint64_t seed = 0;
  std::uint32_t max_iter = 300;
  double tolerance = 1e-6;
  std::size_t minibatch = 0;
  std::string out;
};

struct TokenizeArgs {
  std::string data;
  std::vector<std::string> codebooks;
  std::string out;
};

struct ModelArgs {
  std::string tokens;
  std::string labels;
  std::string targets;
  std::string embed_mode = "random";
  std::vector<std::string> codebooks;
  std::uint32_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 128;
  std::size_t hidden = 128;
  std::size_t head_hidden = 128;
  double lr = 0.05;
  double momentum = 0.9;
  std::optional<std::uint32_t> layer;
  std::string decoder_mode = "scalable";
  std::vector<std::uint32_t> subset;
  std::string out;
};

struct EvalArgs {
  std::string model;
  std::string tokens;
  std::string labels;
  std::string targets;
  std::vector<std::uint32_t> subset;
  std::string out;
};

struct SweepArgs {
  std::string data;
  std::string shifted_data;
  std::vector<std::uint32_t> k{16, 64};
  std::vector<std::string> embed_modes{"random", "pretrained-frozen", "pretrained-finetune"};
  std::string task = "frame_classification";
  std::uint32_t epochs = 10;
  std::uint64_t seed = 0;
  std::uint32_t jobs = 1;
  std::size_t embed_dim = 32;
  std::string out;
};

struct ReportArgs {
  std::string model;
  std::string tokens;
  std::string out;
};

int run_gen(const GenArgs& a, const CLI::App& app, std::ostream& out) {
  GeneratorSpec spec;
  spec.seed = a.seed;
  spec.num_sequences = a.sequences;
  spec.frames = a.frames;
  spec.dim = a.dim;
  spec.layer_ids = a.layers;
  spec.default_clusters = a.clusters;
  spec.default_sigma = a.sigma;
  spec.label_rule = FromLayer{a.label_layer};
  if (a.shift != 0.0) {
    spec.shift.assign(spec.layers(), std::vector<double>(a.dim, a.shift));
  }
  const auto corpus = generate(spec);
  const fs::path dir(a.out);
  write_corpus(corpus, dir);
  Manifest m("gen", app);
  for (const auto& f : dataset_files(dir)) m.output(f);
  m.output(truth_path(dir));
  m.write(dir);
  out << "wrote " << corpus.data.size() << " sequences to " << dir.string() << '\n';
  return 0;
}

int run_codebook(const CodebookArgs& a, const CLI::App& app, std::ostream& out,
                 std::ostream& err) {
  const fs::path data(a.data);
  std::vector<FeatureSequence> seqs;
  std::vector<fs::path> inputs;
  if (fs::is_directory(data)) {
    for (std::size_t i = 0; fs::exists(feature_path(data, i)); ++i) {
      seqs.push_back(read_features(feature_path(data, i)));
      inputs.push_back(feature_path(data, i));
    }
    if (seqs.empty()) throw Error("missing feature file " + feature_path(data, 0).string());
  } else {
    seqs.push_back(read_features(data));
    inputs.push_back(data);
  }
  const std::size_t position = position_of(seqs[0].layer_ids, a.layer);
  for (const auto& s : seqs) {
    if (s.layer_ids != seqs[0].layer_ids) throw Error("feature files disagree on layer ids");
  }
  KMeansConfig config;
  config.k = a.k;
  config.max_iterations = a.max_iter;
  config.rel_tolerance = a.tolerance;
  config.seed = a.seed;
  config.layer_id = a.layer;
  if (a.minibatch > 0) config.minibatch_size = a.minibatch;
  KMeansTrace trace;
  const auto codebook = train_codebook(gather_layer(seqs, position), config, &trace);
  if (trace.fewer_rows_than_k) err << "warning: fewer training rows than K\n";
  if (trace.duplicate_picks > 0) {
    err << "warning: " << trace.duplicate_picks << " duplicate centroid picks\n";
  }
  const fs::path path(a.out);
  write_codebook(codebook, path);
  Manifest m("codebook train", app);
  m.inputs(inputs);
  m.output(path);
  m.write(path);
  out << "layer " << a.layer << ": K=" << codebook.size() << " inertia="
      << codebook.final_inertia << " iterations=" << codebook.iterations_run << '\n';
  return 0;
}

int run_tokenize(const TokenizeArgs& a, const CLI::App& app, std::ostream& out) {
  const fs::path data(a.data);
  std::vector<fs::path> inputs;
  std::vector<FeatureSequence> seqs;
  if (fs::is_directory(data)) {
    for (std::size_t i = 0; fs::exists(feature_path(data, i)); ++i) {
      seqs.push_back(read_features(feature_path(data, i)));
      inputs.push_back(feature_path(data, i));
    }
    if (seqs.empty()) throw Error("missing feature file " + feature_path(data, 0).string());
  } else {
    seqs.push_back(read_features(data));
    inputs.push_back(data);
  }
  const auto codebooks = match_codebooks(load_codebooks(a.codebooks), seqs[0].layer_ids);
  for (const auto& c : a.codebooks) inputs.emplace_back(c);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m("tokenize", app);
  m.inputs(inputs);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    write_tokens(tokenize(seqs[i], codebooks), token_path(dir, i));
    m.output(token_path(dir, i));
  }
  m.write(dir);
  out << "tokenized " << seqs.size() << " sequences\n";
  return 0;
}

FusionConfig model_fusion(const ModelArgs& a, const std::vector<Codebook>& codebooks) {
  FusionConfig fc;
  fc.embed_mode = kEmbedModes.at(a.embed_mode);
  fc.embed_dim = a.embed_dim;
  fc.scorer_hidden = a.hidden;
  fc.seed = a.seed;
  if (fc.embed_mode != EmbedMode::random) {
    if (codebooks.empty()) throw Error("pretrained embed modes need --codebooks");
    fc.embed_dim = codebooks[0].dim();
  }
  return fc;
}

int run_selector_train(const ModelArgs& a, const CLI::App& app, std::ostream& out) {
  std::vector<fs::path> inputs;
  const auto tokens = load_tokens(a.tokens, &inputs);
  const auto labels = read_labels_csv(a.labels);
  inputs.emplace_back(a.labels);
  if (labels.size() != tokens.size()) {
    throw Error("labels cover " + std::to_string(labels.size()) + " sequences, tokens " +
                std::to_string(tokens.size()));
  }
  std::vector<LabeledSequence> data;
  std::uint32_t classes = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (labels[i].size() != tokens[i].frames) {
      throw Error("sequence " + std::to_string(i) + ": label count does not match frames");
    }
    for (const auto l : labels[i]) classes = std::max(classes, l + 1);
    data.push_back({tokens[i], labels[i]});
  }
  std::vector<Codebook> codebooks;
  if (!a.codebooks.empty()) {
    codebooks = match_codebooks(load_codebooks(a.codebooks), tokens[0].layer_ids);
    for (const auto& c : a.codebooks) inputs.emplace_back(c);
  }
  auto model = make_selector(tokens[0].layer_ids, tokens[0].codebook_sizes, classes,
                             model_fusion(a, codebooks), codebooks);
  std::vector<std::uint32_t> positions;
  if (a.layer) {
    positions = {static_cast<std::uint32_t>(position_of(tokens[0].layer_ids, *a.layer))};
  }
  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.learning_rate = a.lr;
  opts.momentum = a.momentum;
  opts.seed = a.seed;
  const auto report = train_selector(model, data, opts, positions);
  const fs::path path(a.out);
  write_selector(model, path);
  Manifest m("selector train", app);
  m.inputs(inputs);
  m.output(path);
  m.write(path);
  out << "selector trained: final loss "
      << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()) << '\n';
  return 0;
}

std::vector<ReconstructionPair> load_pairs(const std::vector<TokenSequence>& tokens,
                                           const fs::path& targets_dir,
                                           std::vector<fs::path>& inputs) {
  std::vector<ReconstructionPair> pairs;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto path = target_path(targets_dir, i);
    if (!fs::exists(path)) throw Error("missing target file " + path.string());
    const auto target = read_features(path);
    if (target.frames != tokens[i].frames) {
      throw Error(path.string() + ": target frames do not match the tokens");
    }
    pairs.push_back({tokens[i], Matrix<float>(target.frames,
                                              static_cast<std::size_t>(target.layers) * target.dim,
                                              target.values)});
    inputs.push_back(path);
  }
  return pairs;
}

int run_decoder_train(const ModelArgs& a, const CLI::App& app, std::ostream& out) {
  std::vector<fs::path> inputs;
  const auto tokens = load_tokens(a.tokens, &inputs);
  const auto pairs = load_pairs(tokens, a.targets, inputs);
  std::vector<Codebook> codebooks;
  if (!a.codebooks.empty()) {
    codebooks = match_codebooks(load_codebooks(a.codebooks), tokens[0].layer_ids);
    for (const auto& c : a.codebooks) inputs.emplace_back(c);
  }
  DecoderConfig dc;
  dc.fusion = model_fusion(a, codebooks);
  dc.head_hidden = a.head_hidden;
  dc.target_dim = pairs[0].target.cols();
  auto model = make_decoder(tokens[0].layer_ids, tokens[0].codebook_sizes, dc, codebooks);
  DecoderTrainOptions opts;
  opts.epochs = a.epochs;
  opts.learning_rate = a.lr;
  opts.momentum = a.momentum;
  opts.seed = a.seed;
  if (a.decoder_mode == "fixed") {
    if (a.subset.empty()) throw CLI::ValidationError("--subset", "fixed mode needs --subset");
    opts.fixed_subset = LayerSubset::of(a.subset, tokens[0].layers);
  }
  const auto report = train_decoder(model, pairs, opts);
  const fs::path path(a.out);
  write_decoder(model, path);
  Manifest m("decoder train", app);
  m.inputs(inputs);
  m.output(path);
  m.write(path);
  out << "decoder trained: final loss "
      << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()) << '\n';
  return 0;
}

int run_eval(const EvalArgs& a, const CLI::App& app, std::ostream& out) {
  std::vector<fs::path> inputs{fs::path(a.model)};
  const auto tokens = load_tokens(a.tokens, &inputs);
  const fs::path path(a.out);
  const std::string magic = file_magic(a.model);
  if (magic == "SEL1") {
    const auto model = read_selector(fs::path(a.model));
    if (a.labels.empty()) throw CLI::ValidationError("--labels", "selector eval needs --labels");
    const auto labels = read_labels_csv(a.labels);
    inputs.emplace_back(a.labels);
    if (labels.size() != tokens.size()) throw Error("labels do not cover every token file");
    std::vector<LabeledSequence> data;
    for (std::size_t i = 0; i < tokens.size(); ++i) data.push_back({tokens[i], labels[i]});
    const double acc = accuracy(model, data);
    std::ofstream csv(path);
    if (!csv) throw Error("cannot write " + path.string());
    csv << "metric_name,metric_value\naccuracy," << std::setprecision(17) << acc << '\n';
    out << "accuracy " << acc << '\n';
  } else {
    const auto model = read_decoder(fs::path(a.model));
    if (a.targets.empty()) throw CLI::ValidationError("--targets", "decoder eval needs --targets");
    const auto pairs = load_pairs(tokens, a.targets, inputs);
    const auto subsets = a.subset.empty()
                             ? all_subsets(model.fusion.layers())
                             : std::vector<LayerSubset>{LayerSubset::of(a.subset, model.fusion.layers())};
    std::vector<SubsetMetric> rows;
    for (const auto& s : subsets) rows.push_back({s.label(), s.k(), reconstruction_mse(model, pairs, s)});
    std::ofstream csv(path);
    if (!csv) throw Error("cannot write " + path.string());
    write_subset_csv(csv, rows);
    out << "evaluated " << rows.size() << " subsets\n";
  }
  Manifest m("eval", app);
  m.inputs(inputs);
  m.output(path);
  m.write(path);
  return 0;
}

int run_sweep(const SweepArgs& a, const CLI::App& app, std::ostream& out, std::ostream& err) {
  ExperimentData data;
  data.in_domain = load_dataset(a.data, a.task == "sequence_reconstruction");
  std::vector<fs::path> inputs = dataset_files(a.data);
  if (!a.shifted_data.empty()) {
    data.shifted = load_dataset(a.shifted_data, false);
    const auto more = dataset_files(a.shifted_data);
    inputs.insert(inputs.end(), more.begin(), more.end());
  }
  std::vector<ExperimentConfig> configs;
  for (const auto k : a.k) {
    for (const auto& mode : a.embed_modes) {
      ExperimentConfig c;
      c.task = a.task == "frame_classification" ? Task::frame_classification
                                                : Task::sequence_reconstruction;
      c.k = k;
      c.embed_mode = kEmbedModes.at(mode);
      c.epochs = a.epochs;
      c.seed = a.seed;
      c.embed_dim = a.embed_dim;
      configs.push_back(c);
    }
  }
  const auto result = sweep(data, configs, a.jobs);
  const fs::path path(a.out);
  {
    std::ofstream csv(path);
    if (!csv) throw Error("cannot write " + path.string());
    write_results_csv(csv, result.rows);
  }
  Manifest m("sweep", app);
  m.inputs(inputs);
  m.output(path);
  for (const auto& row : result.rows) {
    const fs::path att = path.parent_path() / ("attention_" + row.fingerprint + ".csv");
    std::ofstream csv(att);
    if (!csv) throw Error("cannot write " + att.string());
    write_attention_csv(csv, row.layer_ids, row.mean_attention);
    csv.close();
    m.output(att);
  }
  m.write(path);
  out << "sweep: " << result.rows.size() << " rows, " << result.failures.size()
      << " failures\n";
  for (const auto& f : result.failures) err << "failed " << f.fingerprint << ": " << f.message << '\n';
  return result.failures.empty() ? 0 : kData;
}

int run_report(const ReportArgs& a, const CLI::App& app, std::ostream& out) {
  std::vector<fs::path> inputs{fs::path(a.model)};
  const auto model = read_selector(fs::path(a.model));
  const auto tokens = load_tokens(a.tokens, &inputs);
  std::vector<AttentionMap> maps;
  for (const auto& t : tokens) maps.push_back(predict(model, t).attention);
  const auto weights = mean_attention(maps);
  const fs::path path(a.out);
  {
    std::ofstream csv(path);
    if (!csv) throw Error("cannot write " + path.string());
    write_attention_csv(csv, model.fusion.layer_ids, weights);
  }
  Manifest m("report attention", app);
  m.inputs(inputs);
  m.output(path);
  m.write(path);
  out << "wrote attention report " << path.string() << '\n';
  return 0;
}

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--tokens", a.tokens, "Token directory")->required();
  cmd->add_option("--embed-mode", a.embed_mode, "Embedding initialization")
      ->check(CLI::IsMember({"random", "pretrained-frozen", "pretrained-finetune"}));
  cmd->add_option("--codebooks", a.codebooks, "Codebooks for pretrained embeddings")
      ->delimiter(',');
  cmd->add_option("--epochs", a.epochs, "Training epochs");
  cmd->add_option("--seed", a.seed, "Random seed");
  cmd->add_option("--embed-dim", a.embed_dim, "Embedding width for random init");
  cmd->add_option("--hidden", a.hidden, "Scorer hidden width");
  cmd->add_option("--lr", a.lr, "Learning rate");
  cmd->add_option("--momentum", a.momentum, "SGD momentum");
  cmd->add_option("--out", a.out, "Output model path")->required();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-layer semantic token pipeline", "semtok"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Key-value config file (flags take precedence)");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic multi-layer corpus");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--sequences", gen.sequences, "Number of sequences");
  gen_cmd->add_option("--frames", gen.frames, "Frames per sequence");
  gen_cmd->add_option("--dim", gen.dim, "Feature dimension");
  gen_cmd->add_option("--layers", gen.layers, "Layer ids")->delimiter(',');
  gen_cmd->add_option("--clusters", gen.clusters, "Components per layer");
  gen_cmd->add_option("--sigma", gen.sigma, "Component standard deviation");
  gen_cmd->add_option("--label-layer", gen.label_layer, "Layer position that sets labels");
  gen_cmd->add_option("--shift", gen.shift, "Offset added to every center coordinate");

  auto* codebook_cmd = app.add_subcommand("codebook", "Codebook operations");
  codebook_cmd->require_subcommand(1);
  CodebookArgs cb;
  auto* cb_train = codebook_cmd->add_subcommand("train", "Train one layer's k-means codebook");
  cb_train->add_option("--data", cb.data, "Dataset directory or MLF1 file")->required();
  cb_train->add_option("--layer", cb.layer, "Layer id")->required();
  cb_train->add_option("--k", cb.k, "Centroid count")->required()->check(CLI::PositiveNumber);
  cb_train->add_option("--seed", cb.seed, "Random seed");
  cb_train->add_option("--max-iter", cb.max_iter, "Lloyd iteration budget");
  cb_train->add_option("--tol", cb.tolerance, "Relative inertia tolerance");
  cb_train->add_option("--minibatch", cb.minibatch, "Minibatch size (0 = full batch)");
  cb_train->add_option("--out", cb.out, "Output CBK1 path")->required();

  TokenizeArgs tok;
  auto* tok_cmd = app.add_subcommand("tokenize", "Tokenize features with per-layer codebooks");
  tok_cmd->add_option("--data", tok.data, "Dataset directory or MLF1 file")->required();
  tok_cmd->add_option("--codebooks", tok.codebooks, "CBK1 files")->required()->delimiter(',');
  tok_cmd->add_option("--out", tok.out, "Output token directory")->required();

  auto* selector_cmd = app.add_subcommand("selector", "Layer selector operations");
  selector_cmd->require_subcommand(1);
  ModelArgs sel;
  auto* sel_train = selector_cmd->add_subcommand("train", "Train selector and classifier");
  add_model_options(sel_train, sel);
  sel_train->add_option("--labels", sel.labels, "labels.csv")->required();
  sel_train->add_option("--layer", sel.layer, "Train on this single layer id");

  auto* decoder_cmd = app.add_subcommand("decoder", "Scalable decoder operations");
  decoder_cmd->require_subcommand(1);
  ModelArgs dec;
  auto* dec_train = decoder_cmd->add_subcommand("train", "Train a reconstruction decoder");
  add_model_options(dec_train, dec);
  dec_train->add_option("--targets", dec.targets, "Directory with targets_*.mlf")->required();
  dec_train->add_option("--decoder-mode", dec.decoder_mode, "Layer dropout mode")
      ->check(CLI::IsMember({"scalable", "fixed"}));
  dec_train->add_option("--subset", dec.subset, "Layer positions for fixed mode")
      ->delimiter(',');
  dec_train->add_option("--head-hidden", dec.head_hidden, "Head hidden width (0 = linear)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a selector or decoder");
  eval_cmd->add_option("--model", ev.model, "SEL1 or DEC1 model")->required();
  eval_cmd->add_option("--tokens", ev.tokens, "Token directory")->required();
  eval_cmd->add_option("--labels", ev.labels, "labels.csv (selector)");
  eval_cmd->add_option("--targets", ev.targets, "Target directory (decoder)");
  eval_cmd->add_option("--subset", ev.subset, "Evaluate one subset")->delimiter(',');
  eval_cmd->add_option("--out", ev.out, "Output CSV")->required();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the cluster-count x embedding-mode grid");
  sweep_cmd->add_option("--data", sw.data, "Dataset directory")->required();
  sweep_cmd->add_option("--shifted-data", sw.shifted_data, "Out-of-domain dataset directory");
  sweep_cmd->add_option("--k", sw.k, "Centroid counts")->delimiter(',');
  sweep_cmd->add_option("--embed-mode", sw.embed_modes, "Embedding modes")
      ->delimiter(',')
      ->check(CLI::IsMember({"random", "pretrained-frozen", "pretrained-finetune"}));
  sweep_cmd->add_option("--task", sw.task, "Proxy task")
      ->check(CLI::IsMember({"frame_classification", "sequence_reconstruction"}));
  sweep_cmd->add_option("--epochs", sw.epochs, "Training epochs");
  sweep_cmd->add_option("--seed", sw.seed, "Random seed");
  sweep_cmd->add_option("--jobs", sw.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--embed-dim", sw.embed_dim, "Embedding width for random init");
  sweep_cmd->add_option("--out", sw.out, "Results CSV")->required();

  auto* report_cmd = app.add_subcommand("report", "Reports");
  report_cmd->require_subcommand(1);
  ReportArgs rep;
  auto* rep_att = report_cmd->add_subcommand("attention", "Mean attention per layer");
  rep_att->add_option("--model", rep.model, "SEL1 model")->required();
  rep_att->add_option("--tokens", rep.tokens, "Token directory")->required();
  rep_att->add_option("--out", rep.out, "Output CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    // --help or --version
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, *gen_cmd, out);
    if (cb_train->parsed()) return run_codebook(cb, *cb_train, out, err);
    if (tok_cmd->parsed()) return run_tokenize(tok, *tok_cmd, out);
    if (sel_train->parsed()) return run_selector_train(sel, *sel_train, out);
    if (dec_train->parsed()) return run_decoder_train(dec, *dec_train, out);
    if (eval_cmd->parsed()) return run_eval(ev, *eval_cmd, out);
    if (sweep_cmd->parsed()) return run_sweep(sw, *sweep_cmd, out, err);
    if (rep_att->parsed()) return run_report(rep, *rep_att, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  err << app.help();
  return kUsage;
}

}  // namespace semtok::cli
