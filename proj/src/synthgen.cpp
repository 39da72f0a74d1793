#include "semtok/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "semtok/error.hpp"

namespace semtok {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t sequence_seed(std::uint64_t seed, std::size_t index) {
  return splitmix64(splitmix64(seed) ^ (0xa0761d6478bd642fULL * (index + 1)));
}

std::string numbered(const char* prefix, std::size_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.%s", prefix, index, ext);
  return buf;
}

std::vector<Matrix<double>> sample_centers(const GeneratorSpec& spec) {
  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x5eedc0deULL));
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<Matrix<double>> centers;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t c = spec.clusters_at(l);
    const double min_sq = std::pow(6.0 * spec.sigma_at(l), 2);
    Matrix<double> m(c, spec.dim);
    for (std::size_t i = 0; i < c; ++i) {
      bool placed = false;
      for (std::uint32_t attempt = 0; attempt < spec.max_center_attempts && !placed;
           ++attempt) {
        for (auto& v : m.row(i)) v = coord(rng);
        placed = true;
        for (std::size_t j = 0; j < i && placed; ++j) {
          double sq = 0.0;
          for (std::size_t d = 0; d < spec.dim; ++d) {
            const double diff = m(i, d) - m(j, d);
            sq += diff * diff;
          }
          placed = sq >= min_sq;
        }
      }
      if (!placed) {
        throw Error("synthgen: could not place " + std::to_string(c) +
                    " centers at separation 6*sigma on layer " + std::to_string(l) +
                    "; use a larger D or fewer clusters");
      }
    }
    centers.push_back(std::move(m));
  }
  return centers;
}

}  // namespace

std::uint32_t GeneratorSpec::clusters_at(std::size_t l) const {
  return clusters.empty() ? default_clusters : clusters[l];
}

double GeneratorSpec::sigma_at(std::size_t l) const {
  return sigma.empty() ? default_sigma : sigma[l];
}

std::vector<double> GeneratorSpec::target_weights_or_uniform() const {
  if (!target_weights.empty()) return target_weights;
  return std::vector<double>(layers(), 1.0 / static_cast<double>(layers()));
}

std::uint32_t GeneratorSpec::num_classes() const {
  if (const auto* rule = std::get_if<FromLayer>(&label_rule)) {
    return clusters_at(rule->position);
  }
  std::uint32_t most = 0;
  for (std::size_t l = 0; l < layers(); ++l) most = std::max(most, clusters_at(l));
  return most;
}

void GeneratorSpec::validate() const {
  if (layer_ids.empty() || dim == 0 || frames == 0) {
    throw Error("synthgen: need at least one layer, D >= 1 and T >= 1");
  }
  if (!clusters.empty() && clusters.size() != layers()) {
    throw Error("synthgen: one cluster count per layer required");
  }
  if (!sigma.empty() && sigma.size() != layers()) {
    throw Error("synthgen: one sigma per layer required");
  }
  for (std::size_t l = 0; l < layers(); ++l) {
    if (clusters_at(l) < 2) throw Error("synthgen: every layer needs C_l >= 2");
    if (!(sigma_at(l) > 0.0)) throw Error("synthgen: every layer needs sigma > 0");
  }
  if (const auto* rule = std::get_if<FromLayer>(&label_rule)) {
    if (rule->position >= layers()) throw Error("synthgen: label layer out of range");
  } else {
    const auto& w = std::get<FromMixture>(label_rule).weights;
    if (w.size() != layers()) throw Error("synthgen: one mixture weight per layer required");
    double total = 0.0;
    for (const double v : w) {
      if (v < 0.0) throw Error("synthgen: mixture weights must be nonnegative");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("synthgen: mixture weights must sum to 1");
  }
  if (!shift.empty()) {
    if (shift.size() != layers()) throw Error("synthgen: one shift vector per layer required");
    for (const auto& s : shift) {
      if (s.size() != dim) throw Error("synthgen: shift vectors must have D entries");
    }
  }
  if (!target_weights.empty() && target_weights.size() != layers()) {
    throw Error("synthgen: one target weight per layer required");
  }
}

SyntheticCorpus generate(const GeneratorSpec& spec) {
  spec.validate();
  SyntheticCorpus corpus;
  corpus.spec = spec;
  corpus.centers = sample_centers(spec);
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    for (std::size_t c = 0; c < corpus.centers[l].rows(); ++c) {
      for (std::size_t d = 0; d < spec.dim; ++d) {
        corpus.centers[l](c, d) += spec.shift.empty() ? 0.0 : spec.shift[l][d];
      }
    }
  }

  const std::size_t layers = spec.layers();
  const auto target_weights = spec.target_weights_or_uniform();
  corpus.data.num_classes = spec.num_classes();
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t s = 0; s < spec.num_sequences; ++s) {
    std::mt19937_64 rng(sequence_seed(spec.seed, s));
    FeatureSequence seq(spec.frames, spec.layer_ids, spec.dim, spec.frame_rate_hz);
    std::vector<std::uint32_t> ids(static_cast<std::size_t>(spec.frames) * layers);
    std::vector<std::uint32_t> labels(spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t l = 0; l < layers; ++l) {
        const auto comp = static_cast<std::uint32_t>(
            std::uniform_int_distribution<std::uint32_t>(0, spec.clusters_at(l) - 1)(rng));
        ids[t * layers + l] = comp;
        const auto center = corpus.centers[l].row(comp);
        auto frame = seq.frame(t, l);
        const double sigma = spec.sigma_at(l);
        for (std::size_t d = 0; d < spec.dim; ++d) {
          frame[d] = static_cast<float>(center[d] + sigma * noise(rng));
        }
      }
      if (const auto* rule = std::get_if<FromLayer>(&spec.label_rule)) {
        labels[t] = ids[t * layers + rule->position];
      } else {
        const auto& w = std::get<FromMixture>(spec.label_rule).weights;
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        labels[t] = ids[t * layers + pick(rng)];
      }
    }
    corpus.data.targets.push_back(reconstruction_target(seq, target_weights));
    corpus.data.features.push_back(std::move(seq));
    corpus.data.labels.push_back(std::move(labels));
    corpus.cluster_ids.push_back(std::move(ids));
  }
  return corpus;
}

SyntheticCorpus generate_shifted(GeneratorSpec spec, std::vector<std::vector<double>> shift) {
  spec.shift = std::move(shift);
  return generate(spec);
}

FeatureSequence reconstruction_target(const FeatureSequence& features,
                                      std::span<const double> weights) {
  if (weights.size() != features.layers) {
    throw Error("reconstruction_target: one weight per layer required");
  }
  FeatureSequence out(features.frames, {0}, features.dim, features.frame_rate_hz);
  std::vector<double> acc(features.dim);
  for (std::size_t t = 0; t < features.frames; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t l = 0; l < features.layers; ++l) {
      const auto f = features.frame(t, l);
      for (std::size_t d = 0; d < features.dim; ++d) acc[d] += weights[l] * f[d];
    }
    auto dst = out.frame(t, 0);
    for (std::size_t d = 0; d < features.dim; ++d) dst[d] = static_cast<float>(acc[d]);
  }
  return out;
}

fs::path feature_path(const fs::path& dir, std::size_t index) {
  return dir / numbered("features", index, "mlf");
}

fs::path target_path(const fs::path& dir, std::size_t index) {
  return dir / numbered("targets", index, "mlf");
}

fs::path labels_path(const fs::path& dir) { return dir / "labels.csv"; }
fs::path truth_path(const fs::path& dir) { return dir / "truth.txt"; }

void write_corpus(const SyntheticCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& data = corpus.data;
  for (std::size_t s = 0; s < data.size(); ++s) {
    write_features(data.features[s], feature_path(dir, s));
    write_features(data.targets[s], target_path(dir, s));
  }
  {
    std::ofstream out(labels_path(dir));
    if (!out) throw Error("cannot write " + labels_path(dir).string());
    out << "sequence,frame,label\n";
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (std::size_t t = 0; t < data.labels[s].size(); ++t) {
        out << s << ',' << t << ',' << data.labels[s][t] << '\n';
      }
    }
  }
  std::ofstream out(truth_path(dir));
  if (!out) throw Error("cannot write " + truth_path(dir).string());
  const auto& spec = corpus.spec;
  out << std::setprecision(17);
  out << "seed=" << spec.seed << '\n';
  out << "num_sequences=" << spec.num_sequences << '\n';
  out << "frames=" << spec.frames << '\n';
  out << "dim=" << spec.dim << '\n';
  out << "num_classes=" << data.num_classes << '\n';
  if (const auto* rule = std::get_if<FromLayer>(&spec.label_rule)) {
    out << "label_rule=from_layer:" << rule->position << '\n';
  } else {
    out << "label_rule=from_mixture:";
    const auto& w = std::get<FromMixture>(spec.label_rule).weights;
    for (std::size_t l = 0; l < w.size(); ++l) out << (l ? "," : "") << w[l];
    out << '\n';
  }
  const auto tw = spec.target_weights_or_uniform();
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::string key = "layer." + std::to_string(l);
    out << key << ".id=" << spec.layer_ids[l] << '\n';
    out << key << ".clusters=" << spec.clusters_at(l) << '\n';
    out << key << ".sigma=" << spec.sigma_at(l) << '\n';
    out << key << ".target_weight=" << tw[l] << '\n';
    for (std::size_t c = 0; c < corpus.centers[l].rows(); ++c) {
      out << key << ".center." << c << '=';
      const auto row = corpus.centers[l].row(c);
      for (std::size_t d = 0; d < row.size(); ++d) out << (d ? "," : "") << row[d];
      out << '\n';
    }
  }
}

std::vector<std::vector<std::uint32_t>> read_labels_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sequence,frame,label") {
    throw Error(path.string() + ": expected header sequence,frame,label");
  }
  std::vector<std::vector<std::uint32_t>> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    unsigned long s = 0, t = 0, label = 0;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> s >> c1 >> t >> c2 >> label) || c1 != ',' || c2 != ',') {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (s >= labels.size()) labels.resize(s + 1);
    if (t != labels[s].size()) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": frames out of order");
    }
    labels[s].push_back(static_cast<std::uint32_t>(label));
  }
  return labels;
}

Dataset load_dataset(const fs::path& dir, bool require_targets) {
  std::vector<std::string> missing;
  if (!fs::is_directory(dir)) throw Error("dataset directory " + dir.string() + " not found");
  if (!fs::exists(labels_path(dir))) missing.push_back(labels_path(dir).string());
  std::size_t count = 0;
  while (fs::exists(feature_path(dir, count))) ++count;
  if (count == 0) missing.push_back(feature_path(dir, 0).string());
  if (require_targets) {
    for (std::size_t s = 0; s < count; ++s) {
      if (!fs::exists(target_path(dir, s))) missing.push_back(target_path(dir, s).string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing dataset files:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(msg);
  }
  Dataset data;
  for (std::size_t s = 0; s < count; ++s) {
    data.features.push_back(read_features(feature_path(dir, s)));
    if (require_targets) data.targets.push_back(read_features(target_path(dir, s)));
  }
  data.labels = read_labels_csv(labels_path(dir));
  if (data.labels.size() != count) {
    throw Error(labels_path(dir).string() + ": labels cover " +
                std::to_string(data.labels.size()) + " sequences, found " +
                std::to_string(count) + " feature files");
  }
  for (std::size_t s = 0; s < count; ++s) {
    if (data.labels[s].size() != data.features[s].frames) {
      throw Error(labels_path(dir).string() + ": sequence " + std::to_string(s) +
                  " label count does not match its frames");
    }
    for (const auto l : data.labels[s]) data.num_classes = std::max(data.num_classes, l + 1);
  }
  return data;
}

}  // namespace semtok
