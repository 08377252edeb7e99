#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spinid/errors.hpp"
#include "spinid/estimation.hpp"
#include "spinid/fit.hpp"
#include "spinid/propagator.hpp"
#include "spinid/sequences.hpp"
#include "spinid/signal_trace.hpp"

namespace spinid::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ValidationError("cannot open config: " + path);
    }
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
}

void require_schema(const json& j, const std::string& name, const std::string& path) {
    if (j.value("schema", "") != name) {
        throw ValidationError("config " + path + ": expected schema '" + name + "'");
    }
    if (j.value("version", -1) != 1) {
        throw ValidationError("config " + path + ": unsupported schema version");
    }
}

SpinSystem parse_system(const json& j) {
    SpinSystem sys;
    sys.gamma_e = j.value("gamma_e", kGammaE);
    sys.gamma_n = j.value("gamma_n", kGammaH1);
    const json& h = j.at("hyperfine");
    if (h.contains("a_perp")) {
        sys.hyperfine = HyperfineTensor::uniaxial_tensor(
            h.at("a_par").get<double>(), h.at("a_perp").get<double>(),
            h.value("theta_x", 0.0), h.value("phi_x", 0.0));
    } else {
        sys.hyperfine = HyperfineTensor{h.at("a_xx").get<double>(), h.at("a_yy").get<double>(),
                                        h.at("a_par").get<double>(), h.value("theta_x", 0.0),
                                        h.value("phi_x", 0.0)};
    }
    sys.d_zz = j.value("d_zz_khz", 0.0);
    sys.d_zx = j.value("d_zx_khz", 0.0);
    sys.d_zy = j.value("d_zy_khz", 0.0);
    if (j.contains("probe_axis")) {
        const auto& ax = j.at("probe_axis");
        sys.probe_theta = ax.at(0).get<double>();
        sys.probe_phi = ax.at(1).get<double>();
    }
    sys.validate();
    return sys;
}

json resolve_subdocument(const json& j, const std::string& base_dir) {
    if (j.is_object() && j.contains("file")) {
        const fs::path p = fs::path(base_dir) / j.at("file").get<std::string>();
        return load_json(p.string());
    }
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) {
        throw ValidationError("cannot open for writing: " + path.string());
    }
    f << text;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const json& resolved_config, long long seed, bool seed_given,
                    const std::vector<std::string>& outputs) {
    json m;
    m["schema"] = "spinid/manifest";
    m["version"] = 1;
    m["tool_version"] = kToolVersion;
    m["command"] = command;
    m["config"] = resolved_config;
    if (seed_given) m["seed"] = seed;
    m["outputs"] = outputs;
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << " (best residual " << e.best_residual() << ")\n";
        return kExitNonConvergence;
    } catch (const InconsistencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInconsistent;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

MeasurementSet parse_measurement(const json& j) {
    MeasurementSet m;
    const auto pair = [&](const char* key) {
        const auto& v = j.at(key);
        return ValueWithSigma{v.at(0).get<double>(), v.at(1).get<double>()};
    };
    m.splitting = pair("splitting_mhz");
    m.omega_n_minus = pair("omega_n_minus_mhz");
    m.omega_n_plus = pair("omega_n_plus_mhz");
    m.b0 = j.at("b0_gauss").get<double>();
    if (j.contains("zf_lines")) {
        for (const auto& line : j.at("zf_lines")) {
            MeasurementSet::ZfObservation obs;
            obs.frequency = line.at("frequency_mhz").get<double>();
            obs.d_zz = line.at("d_zz_khz").get<double>();
            obs.sigma_f = line.value("sigma_f_mhz", 0.0);
            obs.sigma_d = line.value("sigma_d_khz", 0.0);
            m.zf_lines.push_back(obs);
        }
    }
    m.validate();
    return m;
}

json fit_report(const FitResult& fit) {
    json out;
    out["schema"] = "spinid/fit-report";
    out["version"] = 1;
    out["model"] = fit.model;
    out["residual_norm"] = fit.residual_norm;
    out["iterations"] = fit.iterations;
    out["warnings"] = fit.warnings;
    json params = json::object();
    for (const FitParam& p : fit.params) {
        params[p.name] = {{"value", p.value}, {"sigma", p.sigma}};
    }
    out["params"] = params;
    return out;
}

} // namespace

std::string resolve_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SPINID_DATA_DIR"); env && *env) return env;
    // Installed layout: <prefix>/bin/spinid with data in <prefix>/share/spinid.
    std::error_code ec;
    const fs::path self = fs::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        const fs::path shared = self.parent_path().parent_path() / "share" / "spinid";
        if (fs::exists(shared / "defect_db.csv", ec)) {
            return shared.string();
        }
    }
#ifdef SPINID_DEFAULT_DATA_DIR
    return SPINID_DEFAULT_DATA_DIR;
#else
    return ".";
#endif
}

int cmd_simulate(const CommonArgs& args) {
    return run_guarded([&]() {
        json config = load_json(args.config_path);
        require_schema(config, "spinid/run", args.config_path);
        const std::string base_dir = fs::path(args.config_path).parent_path().string();

        config["system"] = resolve_subdocument(config.at("system"), base_dir);
        config["sequence"] = resolve_subdocument(config.at("sequence"), base_dir);

        const SpinSystem sys = parse_system(config.at("system"));
        PulseSequence seq = parse_sequence(config.at("sequence").dump());
        if (config.contains("sweep_override")) {
            seq.sweep.grid = config.at("sweep_override").get<std::vector<double>>();
        }

        DecoherenceParams dec;
        if (config.contains("decoherence")) {
            const auto& d = config.at("decoherence");
            dec.t1e = d.value("t1e_us", dec.t1e);
            dec.t2_star_bath = d.value("t2_star_us", dec.t2_star_bath);
            dec.t2_bath = d.value("t2_us", dec.t2_bath);
        }
        RunOptions opts;
        opts.eta = config.value("eta", 1.0);

        const double b0 = config.value("b0_gauss", 0.0);
        SignalTrace trace = run_sequence(seq, sys, b0, dec, opts);

        if (config.contains("noise")) {
            const double sigma = config.at("noise").value("sigma", 0.0);
            if (sigma > 0.0) {
                if (!args.seed_given) {
                    throw ValidationError("simulate: noise requested but no --seed given");
                }
                std::mt19937_64 rng(static_cast<uint64_t>(args.seed));
                std::normal_distribution<double> gauss(0.0, sigma);
                for (size_t i = 0; i < trace.size(); ++i) {
                    trace.y[i] += gauss(rng);
                    trace.sigma[i] = sigma;
                }
            }
        }

        fs::create_directories(args.out_dir);
        const fs::path out_dir(args.out_dir);
        write_trace_csv_file(trace, (out_dir / "trace.csv").string());
        write_manifest(out_dir, "simulate", config, args.seed, args.seed_given, {"trace.csv"});
        std::cout << (out_dir / "trace.csv").string() << "\n";
        return kExitOk;
    });
}

int cmd_fit(const CommonArgs& args) {
    return run_guarded([&]() {
        json config = load_json(args.config_path);
        require_schema(config, "spinid/fit", args.config_path);
        const std::string base_dir = fs::path(args.config_path).parent_path().string();

        const fs::path trace_path =
            fs::path(base_dir) / config.at("trace").get<std::string>();
        const SignalTrace trace = read_trace_csv_file(trace_path.string());

        const std::string model = config.at("model").get<std::string>();
        std::optional<std::vector<double>> init;
        if (config.contains("init")) {
            init = config.at("init").get<std::vector<double>>();
        }

        FitResult fit;
        if (model == "lorentzian" || model == "multi-lorentzian") {
            fit = fit_lorentzian(trace, config.value("n_peaks", 1), init);
        } else if (model == "decaying-cosine") {
            const std::string decay_s = config.value("decay", "free");
            CosineDecay decay = CosineDecay::free_decay;
            double t1e = std::numeric_limits<double>::infinity();
            if (decay_s == "fixed-t1e") {
                decay = CosineDecay::fixed_t1e;
                if (config.contains("t1e_file")) {
                    const json t1e_doc = load_json(
                        (fs::path(base_dir) / config.at("t1e_file").get<std::string>())
                            .string());
                    t1e = t1e_doc.at("params").at("T").at("value").get<double>();
                } else {
                    t1e = config.at("t1e_us").get<double>();
                }
            } else if (decay_s == "stretched") {
                decay = CosineDecay::stretched;
            } else if (decay_s != "free") {
                throw ValidationError("fit: unknown decay variant '" + decay_s + "'");
            }
            const BaselineKind baseline = config.value("baseline", "none") == std::string("linear")
                                              ? BaselineKind::linear
                                              : BaselineKind::none;
            fit = fit_decaying_cosine(trace, decay, baseline, t1e, init);
        } else if (model == "exponential") {
            fit = fit_exponential(trace);
        } else {
            throw ValidationError("fit: unknown model '" + model + "'");
        }

        fs::create_directories(args.out_dir);
        const fs::path out_dir(args.out_dir);
        write_text(out_dir / "fit.json", fit_report(fit).dump(2) + "\n");
        write_manifest(out_dir, "fit", config, 0, false, {"fit.json"});
        std::cout << (out_dir / "fit.json").string() << "\n";
        return kExitOk;
    });
}

namespace {

json identification_report(const MeasurementSet& meas, const HyperfineEstimate& est,
                           const ResidualMapResult& map,
                           const std::vector<SpeciesMatch>& species,
                           const std::vector<DefectMatch>& defects) {
    json out;
    out["schema"] = "spinid/identification";
    out["version"] = 1;
    out["hyperfine"] = {{"a_par_mhz", est.a_par},
                        {"a_perp_mhz", est.a_perp},
                        {"sigma_a_par_mhz", est.sigma_a_par},
                        {"sigma_a_perp_mhz", est.sigma_a_perp}};
    out["residual"] = {{"eps_min", map.eps_min},
                       {"theta_min_deg", map.theta_min},
                       {"phi_min_deg", map.phi_min},
                       {"absolute_residual_mhz", map.absolute_residual},
                       {"argmin_count", map.argmin_set.size()}};
    out["species"] = json::array();
    for (const SpeciesMatch& s : species) {
        out["species"].push_back({{"isotope", s.isotope.name},
                                  {"gamma_mhz_per_t", s.isotope.gamma},
                                  {"gamma_estimate_mhz_per_t", s.gamma_estimate},
                                  {"relative_deviation", s.relative_deviation},
                                  {"within_companion_band", s.within_companion_band}});
    }
    out["defects"] = json::array();
    for (const DefectMatch& d : defects) {
        out["defects"].push_back({{"label", d.record.label},
                                  {"structure", d.record.structure},
                                  {"a_mhz", {d.record.a[0], d.record.a[1], d.record.a[2]}},
                                  {"d_a_mhz", d.d_a},
                                  {"outside_dft_band", d.outside_dft_band}});
    }
    return out;
}

std::string residual_grid_csv(const ResidualMapResult& map) {
    std::ostringstream os;
    os << "theta_deg,phi_deg,eps\n";
    char buf[96];
    for (size_t i = 0; i < map.theta.size(); ++i) {
        for (size_t j = 0; j < map.phi.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.9g\n", map.theta[i], map.phi[j],
                          map.eps[i][j]);
            os << buf;
        }
    }
    return os.str();
}

struct IdentifyPipeline {
    MeasurementSet meas;
    HyperfineEstimate est;
    ResidualMapResult map;
    std::vector<SpeciesMatch> species;
    std::vector<DefectMatch> defects;
};

IdentifyPipeline run_identify_pipeline(const json& config, const CommonArgs& args) {
    IdentifyPipeline out;
    out.meas = parse_measurement(config);

    const double b_e = config.value("b_e_gauss", 0.5);
    if (out.meas.zf_lines.size() < 2) {
        throw ValidationError("identify: at least one zero-field line pair is required");
    }
    const LineGrouping grouping = group_lines_by_coupling(out.meas.zf_lines);
    if (grouping.pairs.empty()) {
        throw ValidationError("identify: no zero-field line pair with matching coupling");
    }
    out.est = extract_hyperfine_from_zf(grouping.pairs[0].high, grouping.pairs[0].low, b_e);

    const std::string data_dir = resolve_data_dir(args.data_dir);
    const std::vector<Isotope> isotopes =
        load_isotopes((fs::path(data_dir) / "isotopes.csv").string());
    const double delta = out.meas.omega_n_plus.value - out.meas.omega_n_minus.value;
    out.species = identify_species(delta, out.meas.b0, isotopes);
    if (out.species.empty()) {
        throw ValidationError("identify: zero nuclear splitting; no species match");
    }
    const double gamma_n = out.species.front().isotope.gamma;

    ResidualMapOptions opts;
    opts.grid_deg = args.grid_deg > 0.0 ? args.grid_deg
                                        : config.value("grid_deg", 1.0);
    opts.weighted = config.value("weighted_residual", false);
    out.map = residual_map(out.meas, out.est.a_par, out.est.a_perp, gamma_n, opts);

    const std::vector<DefectRecord> db =
        load_defect_db((fs::path(data_dir) / "defect_db.csv").string());
    out.defects = match_defect(out.est, db);
    return out;
}

} // namespace

int cmd_identify(const CommonArgs& args) {
    return run_guarded([&]() {
        const json config = load_json(args.config_path);
        require_schema(config, "spinid/measurement", args.config_path);

        const IdentifyPipeline pipe = run_identify_pipeline(config, args);

        fs::create_directories(args.out_dir);
        const fs::path out_dir(args.out_dir);
        std::vector<std::string> outputs = {"identification.json"};
        write_text(out_dir / "identification.json",
                   identification_report(pipe.meas, pipe.est, pipe.map, pipe.species,
                                          pipe.defects)
                           .dump(2) +
                       "\n");
        if (args.dump_grid) {
            write_text(out_dir / "residual_grid.csv", residual_grid_csv(pipe.map));
            outputs.push_back("residual_grid.csv");
        }
        write_manifest(out_dir, "identify", config, 0, false, outputs);
        std::cout << (out_dir / "identification.json").string() << "\n";

        const double threshold = config.value("consistency_threshold", 0.5);
        if (pipe.map.eps_min > threshold) {
            throw InconsistencyError("measurement set is inconsistent: eps_min = " +
                                         std::to_string(pipe.map.eps_min) +
                                         " exceeds threshold " + std::to_string(threshold),
                                     pipe.map.eps_min);
        }
        return kExitOk;
    });
}

int cmd_scan_residual(const CommonArgs& args) {
    return run_guarded([&]() {
        const json config = load_json(args.config_path);
        require_schema(config, "spinid/measurement", args.config_path);

        const IdentifyPipeline pipe = run_identify_pipeline(config, args);

        fs::create_directories(args.out_dir);
        const fs::path out_dir(args.out_dir);
        write_text(out_dir / "residual_grid.csv", residual_grid_csv(pipe.map));
        json summary = {{"schema", "spinid/residual-summary"},
                        {"version", 1},
                        {"eps_min", pipe.map.eps_min},
                        {"theta_min_deg", pipe.map.theta_min},
                        {"phi_min_deg", pipe.map.phi_min},
                        {"absolute_residual_mhz", pipe.map.absolute_residual}};
        write_text(out_dir / "residual_summary.json", summary.dump(2) + "\n");
        write_manifest(out_dir, "scan-residual", config, 0, false,
                       {"residual_grid.csv", "residual_summary.json"});
        std::cout << (out_dir / "residual_grid.csv").string() << "\n";
        return kExitOk;
    });
}

int cmd_defect_db_list(const CommonArgs& args) {
    return run_guarded([&]() {
        const std::string data_dir = resolve_data_dir(args.data_dir);
        const std::vector<DefectRecord> db =
            load_defect_db((fs::path(data_dir) / "defect_db.csv").string());
        std::cout << "label,structure,type,n_vacancy,a1_mhz,a2_mhz,a3_mhz,functional\n";
        for (const DefectRecord& r : db) {
            std::cout << r.label << ',' << r.structure << ',' << r.type << ',' << r.n_vacancy
                      << ',' << r.a[0] << ',' << r.a[1] << ',' << r.a[2] << ','
                      << r.functional << "\n";
        }
        return kExitOk;
    });
}

} // namespace spinid::cli
