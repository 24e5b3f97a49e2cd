#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "athpo/cli.hpp"
#include "athpo/errors.hpp"
#include "athpo/manifest.hpp"

int main(int argc, char** argv) {
  // -h/--help anywhere prints the full text, manifest keys included.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "-h" || arg == "--help") {
      std::cout << athpo::help_text();
      return athpo::kExitOk;
    }
  }

  CLI::App app{"hyper-parameter tuning workbench for adversarially trained "
               "toy models"};
  app.set_help_flag();  // replaced by the text above
  app.require_subcommand(1);

  std::string manifest_path;
  std::string out_dir;
  int jobs = 0;
  std::string seed_list;
  std::string epsilon;

  std::vector<CLI::App*> subs;
  for (const char* name : {"sweep", "analyze", "replay", "tune"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--manifest", manifest_path)->required();
    sub->add_option("--out", out_dir);
    sub->add_option("--jobs", jobs);
    sub->add_option("--seed-list", seed_list);
    sub->add_option("--epsilon", epsilon);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << athpo::help_text();
    return athpo::kExitInput;
  }

  try {
    const athpo::Manifest manifest =
        athpo::Manifest::parse_file(manifest_path);
    athpo::CliOverrides overrides;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    if (jobs > 0) overrides.jobs = jobs;
    if (!seed_list.empty()) {
      std::vector<std::int64_t> seeds;
      std::string cur;
      for (char ch : seed_list + ",") {
        if (ch == ',') {
          if (!cur.empty()) seeds.push_back(std::stoll(cur));
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      overrides.seed_list = seeds;
    }
    if (!epsilon.empty())
      overrides.epsilon = athpo::Manifest::parse_epsilon(epsilon);

    const std::string sub = app.get_subcommands().front()->get_name();
    return athpo::run_cli_command(sub, manifest, overrides, std::cout);
  } catch (const athpo::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return athpo::kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return athpo::kExitInternal;
  }
}
