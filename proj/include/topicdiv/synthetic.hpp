#pragma once

#include <cstdint>
#include <filesystem>

namespace topicdiv::synth {

// Synthetic corpus + financial panel with a known treatment effect on topic
// diversity. Documents for year t+1 are drawn from a two-topic mixture whose
// Dirichlet mean encodes firm, year and treatment effects; treated firm-years
// get a more concentrated (less diverse) theta. The loss coefficient that a
// correctly specified fixed-effects regression should recover is
// loss_effect + interaction_effect * certification_rate.
struct FixtureOptions {
  int n_firms = 30;
  int first_financial_year = 2006;
  int n_financial_years = 11;
  int tokens_per_doc = 400;
  double base_gini = 0.30;
  double loss_effect = -0.08;
  double interaction_effect = 0.06;
  double certification_rate = 0.5;
  double loss_rate = 0.30;
  double theta_concentration = 150.0;
  double noise_sd = 0.02;
  std::uint64_t seed = 20240601;

  double average_loss_effect() const {
    return loss_effect + interaction_effect * certification_rate;
  }
};

// Writes manifest.csv, texts/, lexicon.txt, stopwords.txt, financials.csv,
// competition.csv and a ready-to-run config.ini under dir.
void write_fixture(const std::filesystem::path& dir, const FixtureOptions& options);

}  // namespace topicdiv::synth
