#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace athpo {

// One point of the 9-dimensional hyper-parameter space. The st_* fields
// drive the clean-training phase, the at_* fields the adversarial phase;
// rat_pct splits the epoch budget between them and ae_pct sets the
// adversarial fraction of each batch during the second phase.
struct HPConfig {
  double st_lr = 0.1;
  double st_momentum = 0.0;
  int st_batch = 128;
  double at_lr = 0.1;
  double at_momentum = 0.0;
  int at_batch = 128;
  double pgd_alpha = 1e-2;
  int rat_pct = 0;
  int ae_pct = 100;

  friend bool operator==(const HPConfig&, const HPConfig&) = default;
  friend auto operator<=>(const HPConfig&, const HPConfig&) = default;
};

void validate(const HPConfig& c);

// Fidelity knobs of one evaluation: training epochs and attack iterations
// (attack_iters == 1 is FGSM, k > 1 is PGD-k).
struct FidelityPoint {
  int epochs = 1;
  int attack_iters = 1;

  friend bool operator==(const FidelityPoint&, const FidelityPoint&) = default;
  friend auto operator<=>(const FidelityPoint&, const FidelityPoint&) = default;
};

void validate(const FidelityPoint& f);

// L-inf attack parameters. epsilon is an absolute bound on inputs scaled
// to [0,1]; alpha is the per-iteration step and is unused when iters == 1.
struct AttackSpec {
  double epsilon = 0.0;
  int iters = 1;
  double alpha = 1e-2;
};

void validate(const AttackSpec& a);

// One measured outcome of training a config at a fidelity and bound.
struct EvalRecord {
  HPConfig config;
  FidelityPoint fidelity;
  double epsilon = 0.0;
  double std_error = 0.0;
  double adv_error = 0.0;
  double train_time_s = 0.0;
  std::int64_t seed = 0;
};

void validate(const EvalRecord& r);

// Full dataset key (config, fidelity, epsilon, seed) as a comparable tuple.
struct RecordKey {
  HPConfig config;
  FidelityPoint fidelity;
  double epsilon = 0.0;
  std::int64_t seed = 0;

  friend bool operator==(const RecordKey&, const RecordKey&) = default;
  friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

inline RecordKey key_of(const EvalRecord& r) {
  return RecordKey{r.config, r.fidelity, r.epsilon, r.seed};
}

// Discrete candidate sets per HP dimension plus the fidelity grids and
// epsilon set. With tie_phases the at_* dimensions mirror the st_* sets
// (supply them equal or leave them empty).
struct SearchSpace {
  std::vector<double> st_lr;
  std::vector<double> st_momentum;
  std::vector<int> st_batch;
  std::vector<double> at_lr;
  std::vector<double> at_momentum;
  std::vector<int> at_batch;
  std::vector<double> pgd_alpha;
  std::vector<int> rat_pct;
  std::vector<int> ae_pct;
  std::vector<int> epochs;
  std::vector<int> attack_iters;
  std::vector<double> epsilon;
  bool tie_phases = false;

  int max_epochs() const;
  int max_attack_iters() const;
  FidelityPoint full_fidelity() const;
  std::vector<FidelityPoint> fidelity_grid() const;  // epochs-major order
  std::size_t config_count() const;                  // closed-form product
};

void validate(const SearchSpace& s);

// Full Cartesian product in lexicographic field order (st_lr outermost).
// Output length equals config_count(); no two entries compare equal.
std::vector<HPConfig> enumerate_space(const SearchSpace& s);

// Pins fields that cannot influence training at this rat_pct to the first
// candidate of their dimension: at rat_pct == 0 the at_* fields, pgd_alpha
// and ae_pct; at rat_pct == 100 the st_* fields.
HPConfig canonicalize(const HPConfig& c, const SearchSpace& s);

// enumerate_space followed by canonicalize + order-preserving dedupe.
std::vector<HPConfig> enumerate_space_canonical(const SearchSpace& s);

// Immutable keyed collection of EvalRecords; the replay oracle's backing
// store. Records are held sorted by key.
class TabularDataset {
 public:
  TabularDataset() = default;
  // Sorts by key; throws ParseError on duplicate (config, fidelity,
  // epsilon, seed) keys and ConfigError on invariant violations.
  explicit TabularDataset(std::vector<EvalRecord> records);

  const std::vector<EvalRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // All records (any seed) for one (config, fidelity, epsilon) cell.
  std::span<const EvalRecord> find(const HPConfig& c, const FidelityPoint& f,
                                   double epsilon) const;
  bool contains(const RecordKey& k) const;

 private:
  std::vector<EvalRecord> records_;
};

inline constexpr const char* kDatasetCsvHeader =
    "st_lr,st_momentum,st_batch,at_lr,at_momentum,at_batch,pgd_alpha,"
    "rat_pct,ae_pct,epsilon,epochs,attack_iters,std_error,adv_error,"
    "train_time_s,seed";

TabularDataset load_dataset(std::istream& in);
TabularDataset load_dataset_file(const std::string& path);

// Byte-deterministic CSV: rows sorted by key, doubles printed shortest
// round-trip. Throws ConfigError on an empty dataset.
void save_dataset(const TabularDataset& ds, std::ostream& out);
void save_dataset_file(const TabularDataset& ds, const std::string& path);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace athpo
