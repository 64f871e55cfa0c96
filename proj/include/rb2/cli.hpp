#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rb2/bandit.hpp"

namespace rb2 {

inline constexpr const char* kVersion = "rb2 0.1.0";

struct RunOptions {
  std::string dataset_dir;
  std::string algo = "rb2-informed";
  std::vector<uint64_t> seeds = {1};
  PolicyConfig policy;
  std::optional<std::string> sampler_override;
  double alpha = 0.1;    // linucb exploration width
  int linucb_dim = 4096;
  double coldstart_frac = 0.05;
  std::optional<std::string> delta_schedule;
  bool deceptive_coldstart = false;
  std::string out_dir = "out";
  bool save_checkpoints = false;
};

int cmd_run(const RunOptions& options);
int cmd_distill(const std::string& model_path, const std::string& dataset_dir, double delta,
                const TreeParams& params);
int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_svg);

struct GenOptions {
  std::string out_dir = "dataset";
  int users = 1000;
  int movies = 120;
  int arms = 8;
  long facts = 20000;
  double noise = 0.0;
  uint64_t seed = 7;
  bool linear_control = false;
};
int cmd_gen(const GenOptions& options);

/// One regret curve extracted from a round-log CSV.
struct CsvSeries {
  std::string label;
  std::vector<long> t;
  std::vector<long> regret_cum;
};
CsvSeries parse_round_csv(const std::string& path);
std::string render_regret_svg(const std::vector<CsvSeries>& series);

int run_cli(int argc, const char* const* argv);

}  // namespace rb2
