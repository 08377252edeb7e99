#pragma once

#include <string>

// Exit codes are a stable contract: 0 success, 2 validation failure,
// 3 non-convergence, 4 inconsistent measurement set.

namespace spinid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitInconsistent = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = 0;
    bool seed_given = false;
    double grid_deg = 0.0; // 0 means: use the config / default
    bool dump_grid = false;
    std::string data_dir; // defect db / isotope table location
};

int cmd_simulate(const CommonArgs& args);
int cmd_fit(const CommonArgs& args);
int cmd_identify(const CommonArgs& args);
int cmd_scan_residual(const CommonArgs& args);
int cmd_defect_db_list(const CommonArgs& args);

/// Resolves, in order: --data-dir, $SPINID_DATA_DIR, the built-in location.
std::string resolve_data_dir(const std::string& flag_value);

} // namespace spinid::cli
