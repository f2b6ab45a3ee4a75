// palentir: batch front end. Exit codes: 0 ok, 1 usage, 2 config, 3 numeric, 4 io.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "palentir/experiment.hpp"

namespace fs = std::filesystem;
using namespace palentir;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::numeric: return 3;
    case ErrorCategory::io: return 4;
    }
    return 1;
}

// Relative output paths hang off $PALENTIR_OUT when it is set.
std::string resolve_output(const std::string& out) {
    if (out.empty() || fs::path(out).is_absolute()) return out;
    if (const char* root = std::getenv("PALENTIR_OUT"); root && *root) return (fs::path(root) / out).string();
    return out;
}

void print_summary(const RunSummary& s) {
    for (const auto& m : s.metrics)
        std::printf("%s vs %s: PSNR %.2f dB  SNR %.2f dB  SSIM %.4f  MSE %.4g\n", m.reference.c_str(),
                    m.subject.c_str(), m.psnr_db, m.snr_db, m.ssim, m.mse);
    std::printf("wrote %s (%.1f s)\n", s.output.c_str(), s.seconds);
}

int run_json(json j, const std::string& out_override, bool quiet) {
    if (!out_override.empty()) j["output"] = out_override;
    RunConfig c = load_config(j);
    c.output = resolve_output(c.output);
    auto log = [quiet](const std::string& s) {
        if (!quiet) std::fprintf(stderr, "%s\n", s.c_str());
    };
    print_summary(run(c, log));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parametric level-set reconstruction with anisotropic bases and automatic contrast bounds"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool quiet = false;

    auto* run_cmd = app.add_subcommand("run", "Run an experiment described by a JSON config");
    run_cmd->add_option("config", config_path, "config file")->required();
    run_cmd->add_option("--out", out_dir, "override the output directory");
    run_cmd->add_flag("-q,--quiet", quiet, "no progress on stderr");

    auto* val_cmd = app.add_subcommand("validate", "Check a config without running it");
    val_cmd->add_option("config", config_path, "config file")->required();

    std::string preset_name;
    bool emit = false, list = false;
    auto* pre_cmd = app.add_subcommand("preset", "Run (or print) a built-in experiment");
    pre_cmd->add_option("name", preset_name, "preset name");
    pre_cmd->add_option("--out", out_dir, "output directory");
    pre_cmd->add_flag("--emit", emit, "print the preset config instead of running it");
    pre_cmd->add_flag("--list", list, "list presets");
    pre_cmd->add_flag("-q,--quiet", quiet, "no progress on stderr");

    std::vector<double> radii{0.1, 0.16, 0.2};
    double alpha_min = 0.1, alpha_max = 240.0;
    int samples = 200;
    Index grid_n = 82;
    auto* cond_cmd = app.add_subcommand("condbench", "Single-basis Jacobian conditioning sweep");
    cond_cmd->add_option("--radius", radii, "circle radii on the unit grid")->expected(1, -1);
    cond_cmd->add_option("--alpha-min", alpha_min, "smallest RBF weight");
    cond_cmd->add_option("--alpha-max", alpha_max, "largest RBF weight");
    cond_cmd->add_option("--samples", samples, "number of RBF weights");
    cond_cmd->add_option("--n", grid_n, "grid points per axis");
    cond_cmd->add_option("--out", out_dir, "output directory")->default_str("condbench");

    std::string ref_path, sub_path, csv_path;
    auto* met_cmd = app.add_subcommand("metrics", "Compare two .palf fields");
    met_cmd->add_option("reference", ref_path, "reference field")->required()->check(CLI::ExistingFile);
    met_cmd->add_option("subject", sub_path, "subject field")->required()->check(CLI::ExistingFile);
    met_cmd->add_option("--csv", csv_path, "also write a metrics CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return run_json(read_json(config_path), out_dir, quiet);

        if (*val_cmd) {
            const auto diags = validate(read_json(config_path));
            for (const auto& d : diags) std::printf("%s\n", d.c_str());
            if (diags.empty()) std::printf("ok\n");
            return diags.empty() ? 0 : 2;
        }

        if (*pre_cmd) {
            if (list) {
                for (const auto& n : preset_names()) std::printf("%s\n", n.c_str());
                return 0;
            }
            if (preset_name.empty()) throw ConfigError("preset: name required (see --list)");
            json j = preset(preset_name);
            if (emit) {
                std::printf("%s\n", j.dump(2).c_str());
                return 0;
            }
            return run_json(std::move(j), out_dir, quiet);
        }

        if (*cond_cmd) {
            json j = preset("condbench");
            j["output"] = out_dir.empty() ? "condbench" : out_dir;
            j["condbench"] = {{"radii", radii}, {"alpha_min", alpha_min}, {"alpha_max", alpha_max},
                              {"samples", samples}, {"n", grid_n}};
            return run_json(std::move(j), "", quiet);
        }

        if (*met_cmd) {
            const ScalarField ref = read_field(ref_path), sub = read_field(sub_path);
            const MetricReport m = compare(ref, sub, ref_path, sub_path);
            std::printf("psnr_db=%.6f snr_db=%.6f ssim=%.6f mse=%.6g\n", m.psnr_db, m.snr_db, m.ssim, m.mse);
            if (!csv_path.empty()) write_metrics_csv({m}, csv_path);
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error[%s]: %s\n", std::string(to_string(e.category())).c_str(), e.what());
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error[io]: %s\n", e.what());
        return 4;
    }
    return 1;
}
