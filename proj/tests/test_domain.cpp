#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "athpo/domain.hpp"
#include "athpo/errors.hpp"
#include "athpo/rng.hpp"

using namespace athpo;

namespace {

// Table 1 grids for the non-ResNet50 models; the at_* sets mirror the
// st_* ones when the phases are untied.
SearchSpace table1_space(bool tie_phases) {
  SearchSpace s;
  s.st_lr = {0.1, 0.01};
  s.st_momentum = {0.0, 0.9};
  s.st_batch = {128, 256};
  if (!tie_phases) {
    s.at_lr = s.st_lr;
    s.at_momentum = s.st_momentum;
    s.at_batch = s.st_batch;
  }
  s.pgd_alpha = {1e-2, 1e-3};
  s.rat_pct = {0, 30, 50, 70, 100};
  s.ae_pct = {30, 50, 70, 100};
  s.epochs = {1, 2, 4, 8, 16};
  s.attack_iters = {1, 5, 10, 20};
  s.epsilon = {8.0 / 255.0};
  s.tie_phases = tie_phases;
  return s;
}

EvalRecord sample_record(Rng& rng) {
  EvalRecord r;
  r.config.st_lr = rng.uniform(1e-4, 1.0);
  r.config.st_momentum = rng.uniform(0.0, 0.99);
  r.config.st_batch = 1 + static_cast<int>(rng.below(512));
  r.config.at_lr = rng.uniform(1e-4, 1.0);
  r.config.at_momentum = rng.uniform(0.0, 0.99);
  r.config.at_batch = 1 + static_cast<int>(rng.below(512));
  r.config.pgd_alpha = rng.uniform(1e-4, 0.1);
  r.config.rat_pct = static_cast<int>(rng.below(101));
  r.config.ae_pct = static_cast<int>(rng.below(101));
  r.fidelity.epochs = 1 + static_cast<int>(rng.below(16));
  r.fidelity.attack_iters = 1 + static_cast<int>(rng.below(20));
  r.epsilon = rng.uniform(0.0, 0.2);
  r.std_error = rng.uniform();
  r.adv_error = rng.uniform();
  r.train_time_s = rng.uniform(0.0, 1e4);
  r.seed = static_cast<std::int64_t>(rng.below(1000));
  return r;
}

}  // namespace

TEST_CASE("space counting reproduces the 320 and 2560 grid cardinalities") {
  CHECK(enumerate_space(table1_space(false)).size() == 2560);
  CHECK(enumerate_space(table1_space(true)).size() == 320);
}

TEST_CASE("degenerate single-valued space yields exactly one config") {
  SearchSpace s = table1_space(false);
  s.st_lr = {0.1};
  s.st_momentum = {0.9};
  s.st_batch = {128};
  s.at_lr = {0.1};
  s.at_momentum = {0.9};
  s.at_batch = {128};
  s.pgd_alpha = {1e-2};
  s.rat_pct = {50};
  s.ae_pct = {100};
  CHECK(enumerate_space(s).size() == 1);
}

TEST_CASE("enumeration length equals the closed-form product") {
  // brute-force oracle: independent nested loops over the candidate sets
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    SearchSpace s;
    auto take_d = [&](std::initializer_list<double> pool) {
      std::vector<double> v(pool);
      v.resize(1 + rng.below(v.size()));
      return v;
    };
    auto take_i = [&](std::initializer_list<int> pool) {
      std::vector<int> v(pool);
      v.resize(1 + rng.below(v.size()));
      return v;
    };
    s.st_lr = take_d({0.1, 0.01, 0.001});
    s.st_momentum = take_d({0.0, 0.9});
    s.st_batch = take_i({32, 64, 128});
    s.at_lr = take_d({0.2, 0.02});
    s.at_momentum = take_d({0.0, 0.5, 0.9});
    s.at_batch = take_i({32, 64});
    s.pgd_alpha = take_d({1e-2, 1e-3});
    s.rat_pct = take_i({0, 30, 50});
    s.ae_pct = take_i({50, 100});
    s.epochs = {1};
    s.attack_iters = {1};
    s.epsilon = {0.1};

    std::size_t expected = 0;
    for (std::size_t a = 0; a < s.st_lr.size(); ++a)
      for (std::size_t b = 0; b < s.st_momentum.size(); ++b)
        for (std::size_t c = 0; c < s.st_batch.size(); ++c)
          for (std::size_t d = 0; d < s.at_lr.size(); ++d)
            for (std::size_t e = 0; e < s.at_momentum.size(); ++e)
              for (std::size_t f = 0; f < s.at_batch.size(); ++f)
                for (std::size_t g = 0; g < s.pgd_alpha.size(); ++g)
                  for (std::size_t h = 0; h < s.rat_pct.size(); ++h)
                    for (std::size_t i = 0; i < s.ae_pct.size(); ++i)
                      ++expected;
    const auto configs = enumerate_space(s);
    CHECK(configs.size() == expected);
    CHECK(configs.size() == s.config_count());
  }
}

TEST_CASE("enumeration is injective") {
  const auto configs = enumerate_space(table1_space(false));
  std::set<HPConfig> unique(configs.begin(), configs.end());
  CHECK(unique.size() == configs.size());
}

TEST_CASE("canonical enumeration reproduces the inert-dimension accounting") {
  // 1536 (rat in {30,50,70}) + 8 (rat=0) + 64 (rat=100) distinct trainings
  const auto canon = enumerate_space_canonical(table1_space(false));
  CHECK(canon.size() == 1608);

  std::set<HPConfig> unique(canon.begin(), canon.end());
  CHECK(unique.size() == canon.size());
}

TEST_CASE("canonicalize pins inert fields to the first candidates") {
  const SearchSpace s = table1_space(false);
  HPConfig c{0.01, 0.9, 256, 0.01, 0.9, 256, 1e-3, 0, 70};
  const HPConfig canon = canonicalize(c, s);
  CHECK(canon.at_lr == s.at_lr.front());
  CHECK(canon.at_momentum == s.at_momentum.front());
  CHECK(canon.at_batch == s.at_batch.front());
  CHECK(canon.pgd_alpha == s.pgd_alpha.front());
  CHECK(canon.ae_pct == s.ae_pct.front());
  CHECK(canon.st_lr == c.st_lr);

  c.rat_pct = 100;
  const HPConfig canon100 = canonicalize(c, s);
  CHECK(canon100.st_lr == s.st_lr.front());
  CHECK(canon100.st_momentum == s.st_momentum.front());
  CHECK(canon100.st_batch == s.st_batch.front());
  CHECK(canon100.at_lr == c.at_lr);

  c.rat_pct = 50;
  CHECK(canonicalize(c, s) == c);
}

TEST_CASE("empty candidate set is a configuration error") {
  SearchSpace s = table1_space(false);
  s.pgd_alpha.clear();
  CHECK_THROWS_AS(enumerate_space(s), ConfigError);
}

TEST_CASE("save/load round-trip preserves every field exactly") {
  Rng rng(11);
  std::vector<EvalRecord> records;
  std::set<RecordKey> seen;
  while (records.size() < 200) {
    EvalRecord r = sample_record(rng);
    if (seen.insert(key_of(r)).second) records.push_back(r);
  }
  const TabularDataset ds(std::move(records));

  std::ostringstream out;
  save_dataset(ds, out);
  std::istringstream in(out.str());
  const TabularDataset loaded = load_dataset(in);

  REQUIRE(loaded.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const EvalRecord& a = ds.records()[i];
    const EvalRecord& b = loaded.records()[i];
    // field-by-field oracle, bit-exact doubles
    CHECK(a.config == b.config);
    CHECK(a.fidelity == b.fidelity);
    CHECK(a.epsilon == b.epsilon);
    CHECK(a.std_error == b.std_error);
    CHECK(a.adv_error == b.adv_error);
    CHECK(a.train_time_s == b.train_time_s);
    CHECK(a.seed == b.seed);
  }
}

TEST_CASE("two saves of the same dataset are byte-identical") {
  Rng rng(13);
  std::vector<EvalRecord> records;
  std::set<RecordKey> seen;
  while (records.size() < 50) {
    EvalRecord r = sample_record(rng);
    if (seen.insert(key_of(r)).second) records.push_back(r);
  }
  const TabularDataset ds(std::move(records));
  std::ostringstream a, b;
  save_dataset(ds, a);
  save_dataset(ds, b);
  CHECK(a.str() == b.str());
}

TEST_CASE("saving an empty dataset is an error") {
  const TabularDataset empty;
  std::ostringstream out;
  CHECK_THROWS_AS(save_dataset(empty, out), ConfigError);
}

TEST_CASE("a well-formed three-row file loads three records") {
  std::string csv = std::string(kDatasetCsvHeader) + "\n";
  csv += "0.1,0.9,128,0.1,0.9,128,0.01,50,100,0.1,16,20,0.25,0.5,12.5,1\n";
  csv += "0.1,0.9,128,0.1,0.9,128,0.01,50,100,0.1,16,20,0.26,0.51,12.6,2\n";
  csv += "0.01,0.9,128,0.1,0.9,128,0.01,50,100,0.1,16,20,0.3,0.6,11.0,1\n";
  std::istringstream in(csv);
  const TabularDataset ds = load_dataset(in);
  CHECK(ds.size() == 3);

  const HPConfig c{0.1, 0.9, 128, 0.1, 0.9, 128, 0.01, 50, 100};
  const auto cell = ds.find(c, FidelityPoint{16, 20}, 0.1);
  CHECK(cell.size() == 2);  // both seeds
}

TEST_CASE("duplicate keys are rejected with the row index") {
  std::string csv = std::string(kDatasetCsvHeader) + "\n";
  csv += "0.1,0.9,128,0.1,0.9,128,0.01,50,100,0.1,16,20,0.25,0.5,12.5,1\n";
  csv += "0.1,0.9,128,0.1,0.9,128,0.01,50,100,0.1,16,20,0.30,0.6,13.0,1\n";
  std::istringstream in(csv);
  try {
    load_dataset(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("malformed numeric fields name row and column") {
  std::string csv = std::string(kDatasetCsvHeader) + "\n";
  csv += "0.1,oops,128,0.1,0.9,128,0.01,50,100,0.1,16,20,0.25,0.5,12.5,1\n";
  std::istringstream in(csv);
  try {
    load_dataset(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
}

TEST_CASE("header mismatch is rejected") {
  std::istringstream in("st_lr,foo\n0.1,2\n");
  CHECK_THROWS_AS(load_dataset(in), ParseError);
}

TEST_CASE("out-of-range error fields are rejected") {
  std::string csv = std::string(kDatasetCsvHeader) + "\n";
  csv += "0.1,0.9,128,0.1,0.9,128,0.01,50,100,0.1,16,20,1.25,0.5,12.5,1\n";
  std::istringstream in(csv);
  CHECK_THROWS_AS(load_dataset(in), ParseError);
}
