// crackscan command line: phantom generation, binarization, feature
// extraction, null calibration, detection and evaluation.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 calibration mismatch.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crackscan/geometry.hpp"
#include "crackscan/hessian.hpp"
#include "crackscan/metrics.hpp"
#include "crackscan/multitest.hpp"
#include "crackscan/parallel.hpp"
#include "crackscan/percolation.hpp"
#include "crackscan/phantom.hpp"
#include "crackscan/volume.hpp"
#include "crackscan/volume_io.hpp"

namespace cs = crackscan;
using nlohmann::json;

namespace {

struct StageTimer {
    using clock = std::chrono::steady_clock;
    json timings = json::object();
    clock::time_point mark = clock::now();

    void lap(const std::string& stage) {
        const auto now = clock::now();
        timings[stage] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - mark).count();
        mark = now;
    }
};

void write_manifest(const std::string& path, const std::string& command,
                    const json& params, const StageTimer& timer) {
    json m = {{"tool", "crackscan"},
              {"version", "0.1.0"},
              {"command", command},
              {"params", params},
              {"config_hash", cs::fnv1a_hex(params.dump())},
              {"timings_ms", timer.timings}};
    std::ofstream out(path);
    out << m.dump(2) << "\n";
    std::cerr << "timings: " << timer.timings.dump() << "\n";
}

// Injects config values as extra argv tokens for options the user did not pass.
void inject_config(const CLI::App* cmd, const json& cfg, std::vector<std::string>& args) {
    for (const auto* opt : cmd->get_options()) {
        const std::string name = opt->get_name();
        if (name.size() < 3 || name.rfind("--", 0) != 0) continue;
        auto it = cfg.find(name.substr(2));
        if (it == cfg.end()) continue;
        if (std::find(args.begin(), args.end(), name) != args.end()) continue;
        if (it->is_boolean()) {
            if (it->get<bool>()) args.push_back(name);
        } else if (it->is_array()) {
            args.push_back(name);
            for (const auto& v : *it)
                args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        } else {
            args.push_back(name);
            args.push_back(it->is_string() ? it->get<std::string>() : it->dump());
        }
    }
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in)
        throw cs::ParamError("cannot open config file '" + path + "'");
    json cfg;
    in >> cfg;
    return cfg;
}

struct FilterOptions {
    std::string filter = "mhe";
    std::vector<double> scales = {1.0, 3.0, 5.0};
    double frangi_a = 0.3, frangi_b = 0.3, frangi_c = 0.0;
    double sheet_delta = 1.0, sheet_rho = 1.0;
    double perc_epsilon = 0.01, perc_r = 0.6;
    int perc_m = 3, perc_tau = 4, perc_conn = 26;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--filter", filter, "mhe, frangi, sheet or percolation");
        cmd->add_option("--scales", scales, "scale set (sigmas, ascending)");
        cmd->add_option("--frangi-a", frangi_a, "Frangi plate sensitivity");
        cmd->add_option("--frangi-b", frangi_b, "Frangi blob sensitivity");
        cmd->add_option("--frangi-c", frangi_c,
                        "Frangi structure sensitivity; <=0 picks 0.5*max K per scale");
        cmd->add_option("--sheet-delta", sheet_delta, "Sheet exponent delta");
        cmd->add_option("--sheet-rho", sheet_rho, "Sheet rho in (0,1]");
        cmd->add_option("--perc-epsilon", perc_epsilon, "percolation threshold increment");
        cmd->add_option("--perc-r", perc_r, "percolation acceptance ratio");
        cmd->add_option("--perc-m", perc_m, "percolation window half-width");
        cmd->add_option("--perc-tau", perc_tau, "percolation visit-count cutoff");
        cmd->add_option("--perc-conn", perc_conn, "percolation connectivity (6 or 26)");
    }

    json to_json() const {
        return {{"filter", filter},       {"scales", scales},
                {"frangi_a", frangi_a},   {"frangi_b", frangi_b},
                {"frangi_c", frangi_c},   {"sheet_delta", sheet_delta},
                {"sheet_rho", sheet_rho}, {"perc_epsilon", perc_epsilon},
                {"perc_r", perc_r},       {"perc_m", perc_m},
                {"perc_tau", perc_tau},   {"perc_conn", perc_conn}};
    }

    cs::BinaryVolume run(const cs::ScalarVolume& vol) const {
        cs::ScaleSet ss(scales);
        if (filter == "mhe")
            return cs::multiscale_mhe(vol, ss);
        if (filter == "frangi") {
            cs::FrangiParams prm{frangi_a, frangi_b, frangi_c};
            return cs::three_sigma_binarize(cs::multiscale_frangi(vol, ss, prm));
        }
        if (filter == "sheet") {
            cs::SheetParams prm{sheet_delta, sheet_rho};
            cs::ScalarVolume best(vol.nx(), vol.ny(), vol.nz());
            for (double sigma : ss.sigmas) {
                cs::ScalarVolume resp = cs::sheet_response(cs::gaussian_hessian(vol, sigma), prm);
                for (std::size_t i = 0; i < best.size(); ++i)
                    best[i] = std::max(best[i], resp[i]);
            }
            return cs::three_sigma_binarize(best);
        }
        if (filter == "percolation") {
            cs::BinaryVolume seeds = cs::multiscale_mhe(vol, ss);
            cs::PercolationParams prm;
            prm.epsilon = perc_epsilon;
            prm.r = perc_r;
            prm.M = perc_m;
            prm.tau_max = perc_tau;
            prm.connectivity = perc_conn;
            return cs::hessian_percolation(vol, seeds, prm);
        }
        throw cs::ParamError("unknown filter '" + filter + "'");
    }
};

std::string feature_config_hash(const FilterOptions& filt, int g) {
    json j = filt.to_json();
    j["g"] = g;
    return cs::fnv1a_hex(j.dump());
}

cs::BinaryVolume upsample_cubes(const cs::BinaryVolume& cubes, const cs::CubePartition& p) {
    cs::BinaryVolume out(p.g * p.cx, p.g * p.cy, p.g * p.cz);
    for (int z = 0; z < out.nz(); ++z)
        for (int y = 0; y < out.ny(); ++y)
            for (int x = 0; x < out.nx(); ++x)
                out(x, y, z) = cubes(x / p.cx, y / p.cy, z / p.cz);
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"crack pre-localization in 3D CT volumes"};
    app.require_subcommand(1);
    std::string config_path;
    int threads = 0;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_option("--threads", threads, "max worker threads (0 = all cores)");

    // phantom
    auto* cmd_phantom = app.add_subcommand("phantom", "generate a synthetic volume with ground truth");
    cs::PhantomSpec spec;
    std::vector<int> dims = {128, 128, 128};
    std::vector<double> normal = {0, 0, 1};
    std::uint64_t seed = 1;
    bool with_crack = false;
    std::string out_dir = ".";
    cmd_phantom->add_option("--dims", dims, "volume dims nx ny nz")->expected(3);
    cmd_phantom->add_option("--seed", seed, "RNG seed");
    cmd_phantom->add_option("--bg-mean", spec.bg_mean, "background gray mean");
    cmd_phantom->add_option("--bg-sd", spec.bg_sd, "background gray sd");
    cmd_phantom->add_flag("--crack", with_crack, "add a planar crack");
    cmd_phantom->add_option("--normal", normal, "crack plane normal")->expected(3);
    cmd_phantom->add_option("--offset", spec.offset, "plane offset along the unit normal");
    cmd_phantom->add_option("--width", spec.width, "crack width in voxels");
    cmd_phantom->add_option("--crack-mean", spec.crack_mean, "crack gray mean");
    cmd_phantom->add_option("--crack-sd", spec.crack_sd, "crack gray sd");
    cmd_phantom->add_option("--pores", spec.pore_count, "number of spherical pores");
    cmd_phantom->add_option("--pore-rmin", spec.pore_rmin, "min pore radius");
    cmd_phantom->add_option("--pore-rmax", spec.pore_rmax, "max pore radius");
    cmd_phantom->add_option("--pore-mean", spec.pore_mean, "pore gray mean");
    cmd_phantom->add_option("--pore-sd", spec.pore_sd, "pore gray sd");
    cmd_phantom->add_option("--out", out_dir, "output directory");

    // binarize
    auto* cmd_binarize = app.add_subcommand("binarize", "segment crack candidate voxels");
    std::string input_path, mask_out = "mask.raw";
    FilterOptions filt;
    cmd_binarize->add_option("--input", input_path, "raw volume (with .json descriptor)")->required();
    filt.add_options(cmd_binarize);
    cmd_binarize->add_option("--out", mask_out, "output mask path");

    // features
    auto* cmd_features = app.add_subcommand("features", "per-cube geometry statistics");
    std::string feat_mask, feat_out = "features.csv";
    int g = 16;
    cmd_features->add_option("--mask", feat_mask, "binary mask volume")->required();
    cmd_features->add_option("--g", g, "cubes per axis");
    cmd_features->add_option("--out", feat_out, "output CSV");

    // calibrate
    auto* cmd_calibrate = app.add_subcommand("calibrate", "empirical null from a crack-free volume");
    std::string cal_input, cal_features, cal_out = "null.csv", cal_hist, cal_norm = "inf";
    int cal_g = 16, cal_u = 3;
    cmd_calibrate->add_option("--input", cal_input, "crack-free raw volume");
    cmd_calibrate->add_option("--features", cal_features, "precomputed feature grid CSV");
    filt.add_options(cmd_calibrate);
    cmd_calibrate->add_option("--g", cal_g, "cubes per axis");
    cmd_calibrate->add_option("--u", cal_u, "scanning window side");
    cmd_calibrate->add_option("--norm", cal_norm, "CUSUM norm: inf or p >= 1");
    cmd_calibrate->add_option("--out", cal_out, "output null CSV");
    cmd_calibrate->add_option("--hist", cal_hist, "optional histogram CSV");

    // detect
    auto* cmd_detect = app.add_subcommand("detect", "CUSUM + BH detection over scanning windows");
    std::string det_input, det_mask, det_features, det_null, det_out = ".", det_norm = "inf";
    int det_g = 16, det_u = 3;
    double alpha = 0.5;
    bool raw_pvalues = false;
    cmd_detect->add_option("--input", det_input, "raw gray volume (binarized first)");
    cmd_detect->add_option("--mask", det_mask, "precomputed binary mask volume");
    cmd_detect->add_option("--features", det_features, "precomputed feature grid CSV");
    filt.add_options(cmd_detect);
    cmd_detect->add_option("--null", det_null, "empirical null CSV")->required();
    cmd_detect->add_option("--g", det_g, "cubes per axis");
    cmd_detect->add_option("--u", det_u, "scanning window side");
    cmd_detect->add_option("--alpha", alpha, "FDR level in (0,1)");
    cmd_detect->add_option("--norm", det_norm, "CUSUM norm: inf or p >= 1");
    cmd_detect->add_flag("--raw-pvalues", raw_pvalues,
                         "use the plain ECDF p-value instead of add-one smoothing");
    cmd_detect->add_option("--out", det_out, "output directory");

    // evaluate
    auto* cmd_evaluate = app.add_subcommand("evaluate", "precision/recall/F1 against ground truth");
    std::string ev_pred, ev_truth, ev_out, ev_stage = "eval";
    int ev_g = 0;
    std::size_t ev_min_voxels = 1;
    cmd_evaluate->add_option("--pred", ev_pred, "predicted mask (voxel or cube grid)")->required();
    cmd_evaluate->add_option("--truth", ev_truth, "ground truth voxel mask")->required();
    cmd_evaluate->add_option("--g", ev_g, "cube grid size for cube-level metrics");
    cmd_evaluate->add_option("--min-truth-voxels", ev_min_voxels,
                             "truth voxels needed to call a cube crack");
    cmd_evaluate->add_option("--stage", ev_stage, "stage label for the CSV rows");
    cmd_evaluate->add_option("--out", ev_out, "metrics CSV (default stdout)");

    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") config_path = args[i + 1];
    const json cfg = load_config(config_path);
    if (!cfg.empty())
        for (const auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
            if (std::find(args.begin(), args.end(), sub->get_name()) != args.end())
                inject_config(sub, cfg, args);

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    cs::thread_cap() = threads;

    StageTimer timer;

    if (cmd_phantom->parsed()) {
        spec.nx = dims[0]; spec.ny = dims[1]; spec.nz = dims[2];
        spec.seed = seed;
        spec.crack = with_crack;
        std::copy(normal.begin(), normal.end(), spec.normal);
        std::filesystem::create_directories(out_dir);
        auto [vol, truth] = cs::generate_phantom(spec);
        timer.lap("generate");
        cs::save_raw(vol, out_dir + "/vol.raw");
        cs::save_mask(truth, out_dir + "/truth.raw");
        cs::export_slice(vol, cs::Axis::Z, spec.nz / 2, out_dir + "/vol_z.pgm");
        timer.lap("write");
        json params = {{"dims", dims}, {"seed", seed}, {"crack", with_crack},
                       {"bg_mean", spec.bg_mean}, {"bg_sd", spec.bg_sd},
                       {"width", spec.width}, {"offset", spec.offset},
                       {"normal", normal}, {"pores", spec.pore_count}};
        write_manifest(out_dir + "/manifest.json", "phantom", params, timer);
        return 0;
    }

    if (cmd_binarize->parsed()) {
        cs::ScalarVolume vol = cs::load_described(input_path);
        timer.lap("load");
        cs::BinaryVolume mask = filt.run(vol);
        timer.lap("binarize");
        cs::save_mask(mask, mask_out);
        cs::export_slice(mask, cs::Axis::Z, mask.nz() / 2, mask_out + "_z.pgm");
        timer.lap("write");
        json params = filt.to_json();
        params["input"] = input_path;
        write_manifest(mask_out + ".manifest.json", "binarize", params, timer);
        return 0;
    }

    if (cmd_features->parsed()) {
        cs::BinaryVolume mask = cs::load_described_mask(feat_mask);
        timer.lap("load");
        cs::FeatureGrid f = cs::feature_grid(mask, g);
        timer.lap("features");
        cs::save_feature_grid(f, feat_out);
        timer.lap("write");
        json params = {{"mask", feat_mask}, {"g", g}};
        write_manifest(feat_out + ".manifest.json", "features", params, timer);
        return 0;
    }

    if (cmd_calibrate->parsed()) {
        cs::FeatureGrid field;
        if (!cal_features.empty()) {
            field = cs::load_feature_grid(cal_features);
            cal_g = field.g;
        } else if (!cal_input.empty()) {
            cs::ScalarVolume vol = cs::load_described(cal_input);
            timer.lap("load");
            cs::BinaryVolume mask = filt.run(vol);
            timer.lap("binarize");
            field = cs::feature_grid(mask, cal_g);
            timer.lap("features");
        } else {
            throw cs::ParamError("calibrate: provide --input or --features");
        }
        const cs::CusumNorm norm = cs::CusumNorm::parse(cal_norm);
        cs::EmpiricalNull null =
            cs::build_null(field, cal_u, norm, feature_config_hash(filt, cal_g));
        timer.lap("null");
        cs::save_null(null, cal_out);
        if (!cal_hist.empty()) {
            std::ofstream hist(cal_hist);
            hist << "T\n";
            for (double v : null.values) hist << v << "\n";
        }
        json params = filt.to_json();
        params["g"] = cal_g; params["u"] = cal_u; params["norm"] = norm.name();
        write_manifest(cal_out + ".manifest.json", "calibrate", params, timer);
        return 0;
    }

    if (cmd_detect->parsed()) {
        std::optional<cs::CubePartition> part;
        cs::FeatureGrid field;
        if (!det_features.empty()) {
            field = cs::load_feature_grid(det_features);
            det_g = field.g;
        } else {
            cs::BinaryVolume mask;
            if (!det_mask.empty()) {
                mask = cs::load_described_mask(det_mask);
            } else if (!det_input.empty()) {
                cs::ScalarVolume vol = cs::load_described(det_input);
                timer.lap("load");
                mask = filt.run(vol);
                timer.lap("binarize");
            } else {
                throw cs::ParamError("detect: provide --features, --mask or --input");
            }
            part = cs::make_partition(mask, det_g);
            field = cs::feature_grid(mask, det_g);
            timer.lap("features");
        }
        const cs::CusumNorm norm = cs::CusumNorm::parse(det_norm);
        cs::EmpiricalNull null = cs::load_null(det_null);
        // config hash is only enforced when the null carries one and we know ours
        const std::string hash = det_features.empty() ? feature_config_hash(filt, det_g) : "";
        cs::TestReport rep = cs::detect(field, null, det_u, alpha, norm, !raw_pvalues, hash);
        timer.lap("detect");

        std::filesystem::create_directories(det_out);
        cs::save_report(rep, det_out + "/report.csv");
        cs::save_mask(rep.cube_mask, det_out + "/cube_mask.raw");
        cs::export_slice(rep.cube_mask, cs::Axis::Z, det_g / 2, det_out + "/cube_mask_z.pgm");
        if (part) {
            cs::BinaryVolume overlay = upsample_cubes(rep.cube_mask, *part);
            cs::save_mask(overlay, det_out + "/overlay.raw");
            cs::export_slice(overlay, cs::Axis::Z, overlay.nz() / 2, det_out + "/overlay_z.pgm");
        }
        timer.lap("write");
        json params = filt.to_json();
        params["g"] = det_g; params["u"] = det_u; params["alpha"] = alpha;
        params["norm"] = norm.name(); params["null"] = det_null;
        params["smoothing"] = !raw_pvalues;
        write_manifest(det_out + "/manifest.json", "detect", params, timer);
        const std::size_t flagged =
            static_cast<std::size_t>(std::count(rep.cube_mask.data().begin(),
                                                rep.cube_mask.data().end(), 1));
        std::cout << "windows=" << rep.windows.size() << " rejected="
                  << std::count(rep.decision.begin(), rep.decision.end(), 1)
                  << " flagged_cubes=" << flagged << "\n";
        return 0;
    }

    if (cmd_evaluate->parsed()) {
        cs::BinaryVolume pred = cs::load_described_mask(ev_pred);
        cs::BinaryVolume truth = cs::load_described_mask(ev_truth);
        std::ostringstream rows;
        rows << "stage,level,precision,recall,f1\n";
        if (pred.nx() == truth.nx() && pred.ny() == truth.ny() && pred.nz() == truth.nz()) {
            rows << cs::metrics_csv_row(ev_stage, "voxel", cs::confusion(pred, truth)) << "\n";
            if (ev_g > 1) {
                const cs::BinaryVolume pc = cs::cube_truth(pred, ev_g, ev_min_voxels);
                const cs::BinaryVolume tc = cs::cube_truth(truth, ev_g, ev_min_voxels);
                rows << cs::metrics_csv_row(ev_stage, "cube", cs::confusion(pc, tc)) << "\n";
            }
        } else if (ev_g > 1 && pred.nx() == ev_g && pred.ny() == ev_g && pred.nz() == ev_g) {
            const cs::BinaryVolume tc = cs::cube_truth(truth, ev_g, ev_min_voxels);
            rows << cs::metrics_csv_row(ev_stage, "cube", cs::confusion(pred, tc)) << "\n";
        } else {
            throw cs::DataError("evaluate: prediction dims " + pred.dims_str() +
                                " match neither the truth dims nor the cube grid");
        }
        if (ev_out.empty()) {
            std::cout << rows.str();
        } else {
            std::ofstream out(ev_out);
            out << rows.str();
        }
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cs::CalibError& e) {
        std::cerr << "calibration error: " << e.what() << "\n";
        return 4;
    } catch (const cs::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const cs::ParamError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
