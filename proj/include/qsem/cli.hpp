#pragma once
// Command-line front end. The cmd_* functions run the full pipelines and
// write their artifacts into out_dir; run() wires them to argv and maps
// failures onto the documented exit codes (0 ok, 1 config/parse error,
// 2 numerical non-convergence, 3 I/O error).

#include <optional>
#include <string>

#include "qsem/config.hpp"

namespace qsem::cli {

struct SweepSpec {
  std::string key;  // pump_power | fano | rho_t | g0
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 1;
};

SweepSpec parse_sweep(const std::string& text);

int cmd_predict(const ExperimentConfig& cfg,
                const std::optional<SweepSpec>& sweep,
                const std::string& out_dir, bool quiet);
int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                 bool quiet);
int cmd_fit(const ExperimentConfig& cfg, const std::string& dataset_path,
            const std::string& mode, const std::string& out_dir, bool quiet);

int run(int argc, char** argv);

}  // namespace qsem::cli
