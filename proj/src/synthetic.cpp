#include "topicdiv/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "topicdiv/csv.hpp"
#include "topicdiv/hashing.hpp"
#include "topicdiv/rng.hpp"

namespace topicdiv::synth {
namespace {

const char* const kTopicWords[20] = {
    "alpha", "bravo",  "charlie", "delta",  "echo",   "foxtrot", "golf",
    "hotel", "india",  "juliett", "kilo",   "lima",   "mike",    "november",
    "oscar", "papa",   "quebec",  "romeo",  "sierra", "tango"};

const char* const kStopwords[3] = {"the", "and", "of"};

std::string firm_id(int i) {
  std::string s = std::to_string(i + 1);
  while (s.size() < 2) s.insert(s.begin(), '0');
  return "f" + s;
}

std::string doc_id(int firm, int year) {
  return firm_id(firm) + "_" + std::to_string(year);
}

// Minor-topic share that yields Gini-Simpson diversity g for the mean of a
// two-topic mixture: 2p(1-p) = g.
double minor_share(double g) { return (1.0 - std::sqrt(1.0 - 2.0 * g)) / 2.0; }

std::string capitalized(std::string w) {
  w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

struct FirmTraits {
  double effect = 0.0;
  bool topic_a_oriented = true;
  bool financial_industry = false;
  bool high_competition = false;
};

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void write_fixture(const std::filesystem::path& dir, const FixtureOptions& opt) {
  if (opt.n_firms < 2 || opt.n_financial_years < 3) {
    throw std::runtime_error("fixture needs at least 2 firms and 3 financial years");
  }
  std::filesystem::create_directories(dir / "texts");

  const int first_fin_year = opt.first_financial_year;
  const int last_fin_year = first_fin_year + opt.n_financial_years - 1;
  // Documents lead the financial panel by one year; the extra trailing year
  // feeds the t+2 instrument for the final financial year.
  const int first_doc_year = first_fin_year + 1;
  const int last_doc_year = last_fin_year + 2;

  Rng structure(opt.seed ^ fnv1a64("structure"));
  std::vector<FirmTraits> firms(static_cast<std::size_t>(opt.n_firms));
  for (auto& f : firms) {
    f.effect = structure.uniform(-0.06, 0.06);
    f.topic_a_oriented = structure.uniform01() < 0.5;
    f.financial_industry = structure.uniform01() < 0.10;
    f.high_competition = structure.uniform01() < 0.5;
  }
  std::vector<double> year_effect;
  for (int y = first_doc_year; y <= last_doc_year; ++y) {
    year_effect.push_back(structure.uniform(-0.04, 0.04));
  }

  // Treatment and moderator for every year that drives a document year.
  const int n_treat_years = last_doc_year - first_fin_year;  // fin years + 1
  std::vector<std::vector<int>> loss(firms.size()), cert(firms.size());
  for (std::size_t i = 0; i < firms.size(); ++i) {
    loss[i].resize(static_cast<std::size_t>(n_treat_years));
    cert[i].resize(static_cast<std::size_t>(n_treat_years));
    for (int t = 0; t < n_treat_years; ++t) {
      loss[i][static_cast<std::size_t>(t)] = structure.uniform01() < opt.loss_rate ? 1 : 0;
      cert[i][static_cast<std::size_t>(t)] =
          structure.uniform01() < opt.certification_rate ? 1 : 0;
    }
  }

  // Documents. Target the expected Gini of the Dirichlet draw, not of its
  // mean: E[gini(theta)] = gini(mean) * c / (c + 1).
  const double dirichlet_correction =
      (opt.theta_concentration + 1.0) / opt.theta_concentration;
  csv::Writer manifest(dir / "manifest.csv");
  manifest.field("doc_id").field("firm_id").field("year").field("filename");
  manifest.end_row();
  for (std::size_t i = 0; i < firms.size(); ++i) {
    for (int year = first_doc_year; year <= last_doc_year; ++year) {
      const int t = year - 1 - first_fin_year;
      const int is_loss = loss[i][static_cast<std::size_t>(t)];
      const int is_cert = cert[i][static_cast<std::size_t>(t)];
      const std::string id = doc_id(static_cast<int>(i), year);
      Rng rng(opt.seed ^ fnv1a64(id));
      double g = opt.base_gini + firms[i].effect +
                 year_effect[static_cast<std::size_t>(year - first_doc_year)] +
                 opt.loss_effect * is_loss + opt.interaction_effect * is_loss * is_cert +
                 rng.normal(0.0, opt.noise_sd);
      g = std::clamp(g * dirichlet_correction, 0.02, 0.49);
      const double p = minor_share(g);
      const double major = firms[i].topic_a_oriented ? 1.0 - p : p;
      const std::vector<double> theta =
          rng.dirichlet({opt.theta_concentration * major,
                         opt.theta_concentration * (1.0 - major)});

      std::string text = "Annual Report " + std::to_string(year) + ".\n";
      bool cap_next = true;
      int line_len = 0;
      for (int w = 0; w < opt.tokens_per_doc; ++w) {
        const int topic = rng.uniform01() < theta[0] ? 0 : 1;
        std::string word = kTopicWords[10 * topic + static_cast<int>(rng.below(10))];
        if (cap_next) word = capitalized(word);
        cap_next = false;
        if (line_len > 0) text += ' ';
        text += word;
        ++line_len;
        if (w % 5 == 4) {
          text += ' ';
          text += kStopwords[(w / 5) % 3];
          ++line_len;
        }
        if (w % 11 == 10) {
          text += '.';
          cap_next = true;
        } else if (w % 7 == 6) {
          text += ',';
        }
        if (line_len >= 12) {
          text += '\n';
          line_len = 0;
        }
      }
      text += '\n';
      const std::string filename = id + ".txt";
      write_text_file(dir / "texts" / filename, text);
      manifest.field(id)
          .field(firm_id(static_cast<int>(i)))
          .field(static_cast<long long>(year))
          .field(filename);
      manifest.end_row();
    }
  }

  write_text_file(dir / "lexicon.txt",
                  "# multiword entries kept as single tokens\n"
                  "annual report\n");
  write_text_file(dir / "stopwords.txt", "# function words\nthe\nand\nof\n");

  // Financial panel.
  Rng fin(opt.seed ^ fnv1a64("financials"));
  csv::Writer f(dir / "financials.csv");
  f.field("firm_id").field("year").field("net_profit").field("total_assets");
  f.field("total_liabilities").field("op_cashflow").field("fixed_assets_net");
  f.field("top1_share").field("board_count").field("market_value_equity");
  f.field("book_debt").field("roa").field("mt_positive").field("mt_neutral");
  f.field("mt_negative").field("salary_top3_raw").field("salary_sum_raw");
  f.field("sshrrat").field("gri").field("certification").field("worksafety");
  f.field("st_flag").field("financial_industry");
  f.end_row();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  int row_index = 0;
  for (std::size_t i = 0; i < firms.size(); ++i) {
    for (int year = first_fin_year; year <= last_fin_year; ++year) {
      const int t = year - first_fin_year;
      const int is_loss = loss[i][static_cast<std::size_t>(t)];
      const double assets = std::exp(fin.normal(23.0, 0.8));
      const double margin = is_loss ? -fin.uniform(0.01, 0.06) : fin.uniform(0.01, 0.08);
      const double net_profit = assets * margin;
      const double liabilities = assets * fin.uniform(0.25, 0.65);
      const double cashflow = assets * fin.normal(0.05, 0.04);
      const double fixed_assets = assets * fin.uniform(0.08, 0.5);
      const double top1 = fin.uniform(0.15, 0.6);
      const double board = 5.0 + static_cast<double>(fin.below(8));
      const double mve = assets * fin.uniform(0.7, 2.2);

      double mt_pos = std::round(std::exp(fin.normal(3.5, 0.8)));
      double mt_neu = std::round(std::exp(fin.normal(3.0, 0.8)));
      double mt_neg = std::round(std::exp(fin.normal(2.2, 0.8)));
      if (fin.uniform01() < 0.02) mt_pos = nan;
      if (fin.uniform01() < 0.02) mt_neu = nan;
      if (fin.uniform01() < 0.02) mt_neg = nan;

      double salary_top3 = std::exp(fin.normal(14.9, 0.6));
      double salary_sum = salary_top3 * fin.uniform(1.8, 3.2);
      if (row_index == 37 || row_index == 191) {
        salary_top3 = 0.0;
        salary_sum = 0.0;
      } else if (fin.uniform01() < 0.02) {
        salary_top3 = nan;
        salary_sum = nan;
      }
      double sshrrat = fin.uniform01() < 0.7 ? 0.0 : fin.uniform(0.0, 0.05);
      if (fin.uniform01() < 0.01) sshrrat = nan;

      const double gri = fin.uniform01() < 0.30 ? 1.0 : 0.0;
      const double worksafety = fin.uniform01() < 0.40 ? 1.0 : 0.0;
      const double st = fin.uniform01() < 0.03 ? 1.0 : 0.0;

      f.field(firm_id(static_cast<int>(i))).field(static_cast<long long>(year));
      f.field(net_profit).field(assets).field(liabilities).field(cashflow);
      f.field(fixed_assets).field(top1).field(board).field(mve).field(liabilities);
      f.field(net_profit / assets).field(mt_pos).field(mt_neu).field(mt_neg);
      f.field(salary_top3).field(salary_sum).field(sshrrat).field(gri);
      f.field(static_cast<double>(cert[i][static_cast<std::size_t>(t)]));
      f.field(worksafety).field(st).field(firms[i].financial_industry ? 1.0 : 0.0);
      f.end_row();
      ++row_index;
    }
  }

  csv::Writer comp(dir / "competition.csv");
  comp.field("firm_id").field("high_competition");
  comp.end_row();
  for (std::size_t i = 0; i < firms.size(); ++i) {
    comp.field(firm_id(static_cast<int>(i))).field(firms[i].high_competition ? 1.0 : 0.0);
    comp.end_row();
  }

  write_text_file(dir / "config.ini",
                  "[paths]\n"
                  "manifest = manifest.csv\n"
                  "text_dir = texts\n"
                  "lexicon = lexicon.txt\n"
                  "stopwords = stopwords.txt\n"
                  "financials = financials.csv\n"
                  "competition = competition.csv\n"
                  "output_dir = out\n"
                  "\n"
                  "[corpus]\n"
                  "min_doc_freq = 2\n"
                  "validation_fraction = 0.1\n"
                  "seed = 42\n"
                  "\n"
                  "[hpo]\n"
                  "enabled = true\n"
                  "n_trials = 8\n"
                  "gamma = 0.25\n"
                  "n_startup = 4\n"
                  "n_candidates = 24\n"
                  "burn_in = 20\n"
                  "samples = 20\n"
                  "topics_min = 2\n"
                  "topics_max = 4\n"
                  "passes_min = 30\n"
                  "passes_max = 120\n"
                  "alpha_min = 0.05\n"
                  "alpha_max = 1.0\n"
                  "beta_min = 0.01\n"
                  "beta_max = 0.5\n"
                  "seed = 7\n"
                  "\n"
                  "[lda]\n"
                  "topics = 2\n"
                  "alpha = 0.5\n"
                  "beta = 0.1\n"
                  "passes = 150\n"
                  "burn_in = 50\n"
                  "samples = 50\n"
                  "seed = 11\n"
                  "\n"
                  "[panel]\n"
                  "winsorize = false\n"
                  "winsor_tail = 0.01\n"
                  "sample_mode = baseline\n"
                  "\n"
                  "[estimate]\n"
                  "specs = baseline,moderation,heterogeneity,robustness,iv,psm,placebo\n"
                  "placebo_reps = 200\n"
                  "placebo_seed = 99\n"
                  "caliper = 0.05\n"
                  "\n"
                  "[run]\n"
                  "jobs = 1\n");
}

}  // namespace topicdiv::synth
