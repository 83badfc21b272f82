#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "topicdiv/synthetic.hpp"
#include "topicdiv/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"topicdiv-synth: generate the synthetic corpus + panel fixture"};
  app.set_version_flag("--version", std::string(topicdiv::kVersion));

  std::string out_dir;
  topicdiv::synth::FixtureOptions opt;
  app.add_option("--out", out_dir, "fixture output directory")->required();
  app.add_option("--firms", opt.n_firms, "number of firms");
  app.add_option("--years", opt.n_financial_years, "financial panel years");
  app.add_option("--tokens", opt.tokens_per_doc, "topic tokens per document");
  app.add_option("--seed", opt.seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    topicdiv::synth::write_fixture(out_dir, opt);
    std::printf("fixture written to %s (planted loss effect %.4f)\n", out_dir.c_str(),
                opt.average_loss_effect());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
