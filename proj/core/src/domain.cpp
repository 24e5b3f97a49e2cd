#include "athpo/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "athpo/errors.hpp"

namespace athpo {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void validate(const HPConfig& c) {
  require(finite_positive(c.st_lr), "st_lr must be positive");
  require(std::isfinite(c.st_momentum) && c.st_momentum >= 0.0 &&
              c.st_momentum < 1.0,
          "st_momentum must be in [0,1)");
  require(c.st_batch >= 1, "st_batch must be >= 1");
  require(finite_positive(c.at_lr), "at_lr must be positive");
  require(std::isfinite(c.at_momentum) && c.at_momentum >= 0.0 &&
              c.at_momentum < 1.0,
          "at_momentum must be in [0,1)");
  require(c.at_batch >= 1, "at_batch must be >= 1");
  require(finite_positive(c.pgd_alpha), "pgd_alpha must be positive");
  require(c.rat_pct >= 0 && c.rat_pct <= 100, "rat_pct must be in [0,100]");
  require(c.ae_pct >= 0 && c.ae_pct <= 100, "ae_pct must be in [0,100]");
}

void validate(const FidelityPoint& f) {
  require(f.epochs >= 1, "epochs must be >= 1");
  require(f.attack_iters >= 1, "attack_iters must be >= 1");
}

void validate(const AttackSpec& a) {
  require(std::isfinite(a.epsilon) && a.epsilon >= 0.0,
          "epsilon must be >= 0");
  require(a.iters >= 1, "attack iters must be >= 1");
  require(finite_positive(a.alpha), "attack alpha must be positive");
}

void validate(const EvalRecord& r) {
  validate(r.config);
  validate(r.fidelity);
  require(std::isfinite(r.epsilon) && r.epsilon >= 0.0,
          "record epsilon must be >= 0");
  require(std::isfinite(r.std_error) && r.std_error >= 0.0 &&
              r.std_error <= 1.0,
          "std_error must be in [0,1]");
  require(std::isfinite(r.adv_error) && r.adv_error >= 0.0 &&
              r.adv_error <= 1.0,
          "adv_error must be in [0,1]");
  require(std::isfinite(r.train_time_s) && r.train_time_s >= 0.0,
          "train_time_s must be >= 0");
}

int SearchSpace::max_epochs() const {
  return *std::max_element(epochs.begin(), epochs.end());
}

int SearchSpace::max_attack_iters() const {
  return *std::max_element(attack_iters.begin(), attack_iters.end());
}

FidelityPoint SearchSpace::full_fidelity() const {
  return FidelityPoint{max_epochs(), max_attack_iters()};
}

std::vector<FidelityPoint> SearchSpace::fidelity_grid() const {
  std::vector<FidelityPoint> grid;
  grid.reserve(epochs.size() * attack_iters.size());
  for (int e : epochs)
    for (int k : attack_iters) grid.push_back(FidelityPoint{e, k});
  return grid;
}

std::size_t SearchSpace::config_count() const {
  std::size_t n = st_lr.size() * st_momentum.size() * st_batch.size();
  if (!tie_phases) n *= at_lr.size() * at_momentum.size() * at_batch.size();
  return n * pgd_alpha.size() * rat_pct.size() * ae_pct.size();
}

void validate(const SearchSpace& s) {
  require(!s.st_lr.empty(), "empty candidate set: st_lr");
  require(!s.st_momentum.empty(), "empty candidate set: st_momentum");
  require(!s.st_batch.empty(), "empty candidate set: st_batch");
  require(!s.pgd_alpha.empty(), "empty candidate set: pgd_alpha");
  require(!s.rat_pct.empty(), "empty candidate set: rat_pct");
  require(!s.ae_pct.empty(), "empty candidate set: ae_pct");
  require(!s.epochs.empty(), "empty fidelity grid: epochs");
  require(!s.attack_iters.empty(), "empty fidelity grid: attack_iters");
  if (s.tie_phases) {
    // at_* sets must either mirror the st_* sets or be omitted.
    require(s.at_lr.empty() || s.at_lr == s.st_lr,
            "tie_phases: at_lr must equal st_lr or be empty");
    require(s.at_momentum.empty() || s.at_momentum == s.st_momentum,
            "tie_phases: at_momentum must equal st_momentum or be empty");
    require(s.at_batch.empty() || s.at_batch == s.st_batch,
            "tie_phases: at_batch must equal st_batch or be empty");
  } else {
    require(!s.at_lr.empty(), "empty candidate set: at_lr");
    require(!s.at_momentum.empty(), "empty candidate set: at_momentum");
    require(!s.at_batch.empty(), "empty candidate set: at_batch");
  }
}

std::vector<HPConfig> enumerate_space(const SearchSpace& s) {
  validate(s);
  std::vector<HPConfig> out;
  out.reserve(s.config_count());
  const auto& at_lr = s.tie_phases ? s.st_lr : s.at_lr;
  const auto& at_m = s.tie_phases ? s.st_momentum : s.at_momentum;
  const auto& at_b = s.tie_phases ? s.st_batch : s.at_batch;
  for (double slr : s.st_lr)
    for (double sm : s.st_momentum)
      for (int sb : s.st_batch) {
        // Tied phases share one index walk over the common dimensions.
        const std::size_t n_at =
            s.tie_phases ? 1 : at_lr.size() * at_m.size() * at_b.size();
        for (std::size_t ai = 0; ai < n_at; ++ai) {
          double alr, am;
          int ab;
          if (s.tie_phases) {
            alr = slr;
            am = sm;
            ab = sb;
          } else {
            std::size_t idx = ai;
            const std::size_t nb = at_b.size(), nm = at_m.size();
            ab = at_b[idx % nb];
            idx /= nb;
            am = at_m[idx % nm];
            idx /= nm;
            alr = at_lr[idx];
          }
          for (double alpha : s.pgd_alpha)
            for (int rat : s.rat_pct)
              for (int ae : s.ae_pct) {
                HPConfig c{slr, sm, sb, alr, am, ab, alpha, rat, ae};
                validate(c);
                out.push_back(c);
              }
        }
      }
  return out;
}

HPConfig canonicalize(const HPConfig& c, const SearchSpace& s) {
  HPConfig out = c;
  if (c.rat_pct == 0) {
    out.at_lr = s.tie_phases ? c.st_lr : s.at_lr.front();
    out.at_momentum = s.tie_phases ? c.st_momentum : s.at_momentum.front();
    out.at_batch = s.tie_phases ? c.st_batch : s.at_batch.front();
    out.pgd_alpha = s.pgd_alpha.front();
    out.ae_pct = s.ae_pct.front();
  } else if (c.rat_pct == 100) {
    if (s.tie_phases) {
      // Shared dims still drive the AT phase; nothing is inert.
      return out;
    }
    out.st_lr = s.st_lr.front();
    out.st_momentum = s.st_momentum.front();
    out.st_batch = s.st_batch.front();
  }
  return out;
}

std::vector<HPConfig> enumerate_space_canonical(const SearchSpace& s) {
  std::vector<HPConfig> all = enumerate_space(s);
  std::vector<HPConfig> out;
  out.reserve(all.size());
  for (const HPConfig& c : all) {
    HPConfig canon = canonicalize(c, s);
    if (std::find(out.begin(), out.end(), canon) == out.end())
      out.push_back(canon);
  }
  return out;
}

TabularDataset::TabularDataset(std::vector<EvalRecord> records)
    : records_(std::move(records)) {
  for (const EvalRecord& r : records_) validate(r);
  std::sort(records_.begin(), records_.end(),
            [](const EvalRecord& a, const EvalRecord& b) {
              return key_of(a) < key_of(b);
            });
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (key_of(records_[i]) == key_of(records_[i - 1]))
      throw ParseError("duplicate dataset key at sorted row " +
                       std::to_string(i));
  }
}

std::span<const EvalRecord> TabularDataset::find(const HPConfig& c,
                                                 const FidelityPoint& f,
                                                 double epsilon) const {
  const auto probe = std::make_tuple(c, f, epsilon);
  auto cell_key = [](const EvalRecord& r) {
    return std::make_tuple(r.config, r.fidelity, r.epsilon);
  };
  auto lo = std::lower_bound(
      records_.begin(), records_.end(), probe,
      [&](const EvalRecord& r, const auto& k) { return cell_key(r) < k; });
  auto hi = lo;
  while (hi != records_.end() && cell_key(*hi) == probe) ++hi;
  if (lo == hi) return {};
  return {&*lo, static_cast<std::size_t>(hi - lo)};
}

bool TabularDataset::contains(const RecordKey& k) const {
  auto lo = std::lower_bound(
      records_.begin(), records_.end(), k,
      [](const EvalRecord& r, const RecordKey& key) { return key_of(r) < key; });
  return lo != records_.end() && key_of(*lo) == k;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double_field(const std::string& field, std::size_t row,
                          std::size_t col) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw ParseError("malformed numeric field at row " + std::to_string(row) +
                     ", column " + std::to_string(col) + ": '" + field + "'");
  return v;
}

long long parse_int_field(const std::string& field, std::size_t row,
                          std::size_t col) {
  long long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw ParseError("malformed integer field at row " + std::to_string(row) +
                     ", column " + std::to_string(col) + ": '" + field + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

TabularDataset load_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetCsvHeader)
    throw ParseError("dataset header mismatch; expected '" +
                     std::string(kDatasetCsvHeader) + "'");

  std::vector<EvalRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 16)
      throw ParseError("row " + std::to_string(row) + " has " +
                       std::to_string(f.size()) + " fields, expected 16");
    EvalRecord r;
    r.config.st_lr = parse_double_field(f[0], row, 1);
    r.config.st_momentum = parse_double_field(f[1], row, 2);
    r.config.st_batch = static_cast<int>(parse_int_field(f[2], row, 3));
    r.config.at_lr = parse_double_field(f[3], row, 4);
    r.config.at_momentum = parse_double_field(f[4], row, 5);
    r.config.at_batch = static_cast<int>(parse_int_field(f[5], row, 6));
    r.config.pgd_alpha = parse_double_field(f[6], row, 7);
    r.config.rat_pct = static_cast<int>(parse_int_field(f[7], row, 8));
    r.config.ae_pct = static_cast<int>(parse_int_field(f[8], row, 9));
    r.epsilon = parse_double_field(f[9], row, 10);
    r.fidelity.epochs = static_cast<int>(parse_int_field(f[10], row, 11));
    r.fidelity.attack_iters = static_cast<int>(parse_int_field(f[11], row, 12));
    r.std_error = parse_double_field(f[12], row, 13);
    r.adv_error = parse_double_field(f[13], row, 14);
    r.train_time_s = parse_double_field(f[14], row, 15);
    r.seed = parse_int_field(f[15], row, 16);
    try {
      validate(r);
    } catch (const ConfigError& e) {
      throw ParseError("row " + std::to_string(row) + ": " + e.what());
    }
    records.push_back(r);
  }

  // Duplicate detection keeps the original row index in the message.
  std::vector<std::pair<RecordKey, std::size_t>> keys;
  keys.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    keys.emplace_back(key_of(records[i]), i + 2);
  std::sort(keys.begin(), keys.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < keys.size(); ++i)
    if (keys[i].first == keys[i - 1].first)
      throw ParseError("duplicate key at row " +
                       std::to_string(std::max(keys[i].second,
                                               keys[i - 1].second)));

  return TabularDataset(std::move(records));
}

TabularDataset load_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);
  return load_dataset(in);
}

void save_dataset(const TabularDataset& ds, std::ostream& out) {
  if (ds.empty()) throw ConfigError("refusing to save an empty dataset");
  out << kDatasetCsvHeader << '\n';
  for (const EvalRecord& r : ds.records()) {
    out << format_double(r.config.st_lr) << ','
        << format_double(r.config.st_momentum) << ',' << r.config.st_batch
        << ',' << format_double(r.config.at_lr) << ','
        << format_double(r.config.at_momentum) << ',' << r.config.at_batch
        << ',' << format_double(r.config.pgd_alpha) << ',' << r.config.rat_pct
        << ',' << r.config.ae_pct << ',' << format_double(r.epsilon) << ','
        << r.fidelity.epochs << ',' << r.fidelity.attack_iters << ','
        << format_double(r.std_error) << ',' << format_double(r.adv_error)
        << ',' << format_double(r.train_time_s) << ',' << r.seed << '\n';
  }
  if (!out) throw ParseError("I/O failure while writing dataset");
}

void save_dataset_file(const TabularDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open output file: " + path);
  save_dataset(ds, out);
}

}  // namespace athpo
