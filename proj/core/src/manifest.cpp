#include "athpo/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "athpo/errors.hpp"

namespace athpo {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : value) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  for (const std::string& item : out)
    if (item.empty()) throw ParseError("empty list element in manifest value");
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("manifest key '" + key + "': malformed number '" + s +
                     "'");
  return v;
}

std::int64_t to_int(const std::string& s, const std::string& key) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("manifest key '" + key + "': malformed integer '" + s +
                     "'");
  return v;
}

}  // namespace

Manifest Manifest::parse(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ParseError("manifest line " + std::to_string(lineno) +
                       ": expected 'key = value'");
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty())
      throw ParseError("manifest line " + std::to_string(lineno) +
                       ": empty key");
    if (m.entries_.count(key))
      throw ParseError("manifest line " + std::to_string(lineno) +
                       ": duplicate key '" + key + "'");
    m.entries_[key] = value;
  }
  return m;
}

Manifest Manifest::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest: " + path);
  return parse(in);
}

Manifest Manifest::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

bool Manifest::has(const std::string& key) const {
  return entries_.count(key) > 0;
}

std::string Manifest::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end())
    throw ParseError("manifest is missing required key '" + key + "'");
  return it->second;
}

std::string Manifest::get_string_or(const std::string& key,
                                    const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double Manifest::get_double(const std::string& key) const {
  return to_double(get_string(key), key);
}

double Manifest::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t Manifest::get_int(const std::string& key) const {
  return to_int(get_string(key), key);
}

std::int64_t Manifest::get_int_or(const std::string& key,
                                  std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool Manifest::get_bool_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("manifest key '" + key + "': expected a boolean, got '" +
                   v + "'");
}

double Manifest::parse_epsilon(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return to_double(text, "epsilon");
  const double num = to_double(trim(text.substr(0, slash)), "epsilon");
  const double den = to_double(trim(text.substr(slash + 1)), "epsilon");
  if (den <= 0.0) throw ParseError("epsilon: denominator must be positive");
  return num / den;
}

double Manifest::get_epsilon(const std::string& key) const {
  return parse_epsilon(get_string(key));
}

std::vector<double> Manifest::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& s : split_list(get_string(key)))
    out.push_back(to_double(s, key));
  return out;
}

std::vector<int> Manifest::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& s : split_list(get_string(key)))
    out.push_back(static_cast<int>(to_int(s, key)));
  return out;
}

std::vector<std::int64_t> Manifest::get_int64_list(
    const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const std::string& s : split_list(get_string(key)))
    out.push_back(to_int(s, key));
  return out;
}

std::vector<double> Manifest::get_epsilon_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& s : split_list(get_string(key)))
    out.push_back(parse_epsilon(s));
  return out;
}

std::vector<std::string> Manifest::get_string_list(
    const std::string& key) const {
  return split_list(get_string(key));
}

void Manifest::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

namespace {

constexpr ManifestKeyDoc kSpaceKeys[] = {
    {"space.st_lr", "candidate learning rates for the standard phase"},
    {"space.st_momentum", "candidate momenta for the standard phase"},
    {"space.st_batch", "candidate batch sizes for the standard phase"},
    {"space.at_lr", "candidate learning rates for the adversarial phase"},
    {"space.at_momentum", "candidate momenta for the adversarial phase"},
    {"space.at_batch", "candidate batch sizes for the adversarial phase"},
    {"space.pgd_alpha", "candidate PGD step sizes"},
    {"space.rat_pct", "candidate adversarial-resource percentages"},
    {"space.ae_pct", "candidate adversarial-example percentages"},
    {"space.epochs", "epochs fidelity grid"},
    {"space.attack_iters", "attack-iterations fidelity grid"},
    {"space.epsilon", "perturbation bounds (accepts k/255)"},
    {"space.tie_phases", "force the two phases to share lr/momentum/batch"},
};

constexpr ManifestKeyDoc kDataKeys[] = {
    {"data.kind", "toy data generator: blobs or rings"},
    {"data.dim", "input dimensionality"},
    {"data.classes", "number of classes"},
    {"data.train_size", "training split size"},
    {"data.test_size", "test split size"},
    {"data.noise", "generator noise level"},
    {"data.seed", "generator seed"},
};

constexpr ManifestKeyDoc kModelKeys[] = {
    {"model.hidden", "hidden-layer width of the toy classifier"},
    {"model.activation", "hidden nonlinearity: tanh or relu"},
};

constexpr ManifestKeyDoc kSweepKeys[] = {
    {"sweep.seeds", "training seeds, one full sweep per seed"},
    {"sweep.eval_iters", "PGD iterations used for every evaluation"},
    {"sweep.out", "output dataset CSV path"},
    {"sweep.jobs", "worker threads"},
    {"sweep.resume", "reuse records already present in sweep.out"},
};

constexpr ManifestKeyDoc kAnalyzeKeys[] = {
    {"analyze.dataset", "input dataset CSV path"},
    {"analyze.epsilon", "bound to analyze (accepts k/255)"},
    {"analyze.baseline_iters", "full-strength attack iteration count"},
    {"analyze.out", "output directory for report CSVs and SVGs"},
    {"analyze.plots", "emit SVG plots alongside the CSVs"},
};

constexpr ManifestKeyDoc kReplayKeys[] = {
    {"replay.dataset", "input dataset CSV path"},
    {"replay.epsilon", "bound replayed against (accepts k/255)"},
    {"replay.optimizers",
     "optimizer list: mf_epochs_iters, mf_epochs, mf_iters, hyperband, "
     "bo_ei, random"},
    {"replay.budget_s", "simulated seconds per optimizer run"},
    {"replay.seeds", "replay seeds (the study uses 20)"},
    {"replay.alpha", "objective weight between standard and adversarial "
                     "error"},
    {"replay.mode", "reporting: observed_incumbent or recommendation"},
    {"replay.hb_R", "HyperBand maximum resource"},
    {"replay.hb_eta", "HyperBand reduction factor"},
    {"replay.init_design", "random design size for the model-based tuners"},
    {"replay.out", "output directory for traces and the summary"},
    {"replay.jobs", "worker threads across seeds"},
    {"replay.plots", "emit the trace SVG"},
};

constexpr ManifestKeyDoc kTuneKeys[] = {
    {"tune.optimizer", "optimizer driven live against the toy trainer"},
    {"tune.budget_s", "wall-clock training budget in seconds"},
    {"tune.seed", "tuner seed"},
    {"tune.epsilon", "bound used for training and evaluation"},
    {"tune.eval_iters", "PGD iterations for evaluation"},
    {"tune.alpha", "objective weight"},
    {"tune.out", "output directory for the tuning report"},
};

std::vector<ManifestKeyDoc> concat(
    std::initializer_list<std::span<const ManifestKeyDoc>> parts) {
  std::vector<ManifestKeyDoc> out;
  for (const auto& part : parts)
    out.insert(out.end(), part.begin(), part.end());
  return out;
}

const std::vector<ManifestKeyDoc>& keys_sweep() {
  static const std::vector<ManifestKeyDoc> keys =
      concat({kSpaceKeys, kDataKeys, kModelKeys, kSweepKeys});
  return keys;
}
const std::vector<ManifestKeyDoc>& keys_analyze() {
  static const std::vector<ManifestKeyDoc> keys = concat({kAnalyzeKeys});
  return keys;
}
const std::vector<ManifestKeyDoc>& keys_replay() {
  static const std::vector<ManifestKeyDoc> keys =
      concat({kSpaceKeys, kReplayKeys});
  return keys;
}
const std::vector<ManifestKeyDoc>& keys_tune() {
  static const std::vector<ManifestKeyDoc> keys =
      concat({kSpaceKeys, kDataKeys, kModelKeys, kTuneKeys});
  return keys;
}

}  // namespace

std::span<const ManifestKeyDoc> manifest_keys(std::string_view subcommand) {
  if (subcommand == "sweep") return keys_sweep();
  if (subcommand == "analyze") return keys_analyze();
  if (subcommand == "replay") return keys_replay();
  if (subcommand == "tune") return keys_tune();
  throw ConfigError("unknown subcommand: " + std::string(subcommand));
}

void validate_manifest_keys(const Manifest& m, std::string_view subcommand) {
  const auto keys = manifest_keys(subcommand);
  for (const auto& [key, value] : m.entries()) {
    const bool known =
        std::any_of(keys.begin(), keys.end(),
                    [&](const ManifestKeyDoc& d) { return key == d.key; });
    if (!known)
      throw ParseError("unknown manifest key for '" + std::string(subcommand) +
                       "': '" + key + "'");
  }
}

}  // namespace athpo
