#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spinid: electron-nuclear spin defect simulation, fitting, and "
                 "identification"};
    app.require_subcommand(1);

    spinid::cli::CommonArgs args;

    const auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) {
            sub->add_option("--config", args.config_path, "JSON config file")->required();
        }
        sub->add_option("--out", args.out_dir, "output directory")->default_val(".");
        sub->add_option("--data-dir", args.data_dir,
                        "data directory (defect db, isotopes); default $SPINID_DATA_DIR");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run a pulse-sequence simulation");
    add_common(simulate, true);
    simulate->add_option("--seed", args.seed, "seed for synthetic noise")
        ->each([&](const std::string&) { args.seed_given = true; });

    CLI::App* fit = app.add_subcommand("fit", "fit a trace CSV to a signal model");
    add_common(fit, true);

    CLI::App* identify =
        app.add_subcommand("identify", "hyperfine extraction, species and defect ranking");
    add_common(identify, true);
    identify->add_option("--grid-deg", args.grid_deg, "residual map grid resolution");
    identify->add_flag("--dump-grid", args.dump_grid, "also write the residual-map grid CSV");

    CLI::App* scan = app.add_subcommand("scan-residual", "write the residual map grid");
    add_common(scan, true);
    scan->add_option("--grid-deg", args.grid_deg, "residual map grid resolution");

    CLI::App* db = app.add_subcommand("defect-db", "defect database utilities");
    CLI::App* db_list = db->add_subcommand("list", "print the defect database");
    add_common(db_list, false);

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed()) return spinid::cli::cmd_simulate(args);
    if (fit->parsed()) return spinid::cli::cmd_fit(args);
    if (identify->parsed()) return spinid::cli::cmd_identify(args);
    if (scan->parsed()) return spinid::cli::cmd_scan_residual(args);
    if (db->parsed() && db_list->parsed()) return spinid::cli::cmd_defect_db_list(args);
    return spinid::cli::kExitValidation;
}
