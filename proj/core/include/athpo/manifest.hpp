#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace athpo {

// Flat key-value run configuration: one `key = value` per line, `#`
// comments, lists comma-separated, section prefixes in the key
// ("space.st_lr"). Epsilon values accept the "k/255" notation.
class Manifest {
 public:
  static Manifest parse(std::istream& in);
  static Manifest parse_file(const std::string& path);
  static Manifest parse_string(const std::string& text);

  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key,
                            const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  double get_epsilon(const std::string& key) const;

  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::int64_t> get_int64_list(const std::string& key) const;
  std::vector<double> get_epsilon_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  static double parse_epsilon(const std::string& text);

 private:
  std::map<std::string, std::string> entries_;
};

struct ManifestKeyDoc {
  const char* key;
  const char* doc;
};

// Every key a subcommand accepts ("sweep", "analyze", "replay", "tune");
// the CLI help text is generated from this same table.
std::span<const ManifestKeyDoc> manifest_keys(std::string_view subcommand);

// Rejects entries whose keys are not in the subcommand's registry.
void validate_manifest_keys(const Manifest& m, std::string_view subcommand);

}  // namespace athpo
