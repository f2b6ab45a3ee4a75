#pragma once

// Run configuration (JSON), validation, presets and the batch pipeline
// phantom -> noise -> data -> reconstruction -> metrics -> files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "palentir/forward.hpp"
#include "palentir/metrics.hpp"
#include "palentir/noise.hpp"
#include "palentir/phantoms.hpp"
#include "palentir/reconstruct.hpp"

namespace palentir {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k = {"denoise", "deconvolve", "radon-sparse", "radon-limited", "ct3d",
                                               "dot",     "condbench",  "phantom",      "metrics"};
    return k;
}

inline bool is_reconstruction(const std::string& kind) {
    return kind == "denoise" || kind == "deconvolve" || kind == "radon-sparse" || kind == "radon-limited" ||
           kind == "ct3d" || kind == "dot";
}

struct PhantomConfig {
    std::string recipe;  // phantom_recipe name
    std::string file;    // or a .palf field
    Index n = 0;         // grid size override, 0 = recipe default
    double peak = 1.0;   // fig2 only
};

struct ForwardConfig {
    Index kernel_size = 7;
    double kernel_variance = 1.0;
    int views = 15;
    Index detectors = 0; // 0 = automatic
    DotOptions dot;
};

struct PalsConfig {
    Index basis_n = 12;
    PalsConstants constants = PalsConstants::defaults_2d();
    std::uint64_t seed = 1;
};

struct SolverConfig {
    double tol_decrease = 1e-3;
    int max_iter = 10000;
    double lambda_init = 1e-3;
    double lambda_search = 4.0;
    bool noise_floor = true;
};

struct OuterConfig {
    std::optional<double> c_min, c_max; // default to the truth's min / max
    double rho = 1e-3;
    std::optional<double> varphi;
    int k_max = 10;
    double eta = 0.05;
    Index delta = 29;
    std::string change = "vector";
    bool warm_start = true;
    bool literal_while = false;
    bool stop_on_increase = true;
};

struct CondbenchConfig {
    std::vector<double> radii = {0.1, 0.16, 0.2};
    double alpha_min = 0.1;
    double alpha_max = 240.0;
    int samples = 200;
    Index n = 82;
    double epsilon = 0.05;
};

struct RunConfig {
    std::string experiment;
    PhantomConfig phantom;
    NoiseSpec noise;
    ForwardConfig forward;
    PalsConfig pals;
    SolverConfig solver;
    OuterConfig outer;
    CondbenchConfig condbench;
    std::string reference, subject; // metrics
    std::string output;
};

// ---------------------------------------------------------------------------
// JSON <-> RunConfig
// ---------------------------------------------------------------------------

namespace detail {

struct Reader {
    std::vector<std::string>& diags;

    // Reports keys of `obj` outside `known`.
    void known(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
        std::set<std::string> k(keys.begin(), keys.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!k.count(it.key())) diags.push_back("unknown field '" + where + it.key() + "'");
    }

    template <class T>
    void get(const json& obj, const char* key, const std::string& where, T& out) {
        if (!obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const std::exception&) {
            diags.push_back("field '" + where + key + "' has the wrong type");
        }
    }

    template <class T>
    void get(const json& obj, const char* key, const std::string& where, std::optional<T>& out) {
        if (!obj.contains(key) || obj.at(key).is_null()) return;
        T v{};
        get(obj, key, where, v);
        out = v;
    }

    const json* section(const json& root, const char* key) {
        if (!root.contains(key)) return nullptr;
        if (!root.at(key).is_object()) {
            diags.push_back("field '" + std::string(key) + "' must be an object");
            return nullptr;
        }
        return &root.at(key);
    }
};

} // namespace detail

/// Parses what it can; every problem lands in `diags`.
inline RunConfig parse_config(const json& j, std::vector<std::string>& diags) {
    RunConfig c;
    if (!j.is_object()) {
        diags.push_back("config must be a JSON object");
        return c;
    }
    detail::Reader r{diags};
    r.known(j, "", {"experiment", "phantom", "noise", "forward", "pals", "solver", "outer", "condbench", "metrics",
                    "output"});
    r.get(j, "experiment", "", c.experiment);
    r.get(j, "output", "", c.output);

    if (auto* s = r.section(j, "phantom")) {
        r.known(*s, "phantom.", {"recipe", "file", "n", "peak"});
        r.get(*s, "recipe", "phantom.", c.phantom.recipe);
        r.get(*s, "file", "phantom.", c.phantom.file);
        r.get(*s, "n", "phantom.", c.phantom.n);
        r.get(*s, "peak", "phantom.", c.phantom.peak);
    }
    if (auto* s = r.section(j, "noise")) {
        r.known(*s, "noise.", {"kind", "snr_db", "seed"});
        std::string kind = to_string(c.noise.kind);
        r.get(*s, "kind", "noise.", kind);
        try {
            c.noise.kind = noise_kind_from_string(kind);
        } catch (const ConfigError& e) {
            diags.push_back(e.what());
        }
        r.get(*s, "snr_db", "noise.", c.noise.snr_db);
        r.get(*s, "seed", "noise.", c.noise.seed);
    }
    if (auto* s = r.section(j, "forward")) {
        r.known(*s, "forward.", {"kernel_size", "kernel_variance", "views", "detectors", "dot"});
        r.get(*s, "kernel_size", "forward.", c.forward.kernel_size);
        r.get(*s, "kernel_variance", "forward.", c.forward.kernel_variance);
        r.get(*s, "views", "forward.", c.forward.views);
        r.get(*s, "detectors", "forward.", c.forward.detectors);
        if (auto* d = r.section(*s, "dot")) {
            r.known(*d, "forward.dot.", {"diffusion", "omega", "nu", "robin", "sources", "detectors"});
            r.get(*d, "diffusion", "forward.dot.", c.forward.dot.diffusion);
            r.get(*d, "omega", "forward.dot.", c.forward.dot.omega);
            r.get(*d, "nu", "forward.dot.", c.forward.dot.nu);
            r.get(*d, "robin", "forward.dot.", c.forward.dot.robin);
            r.get(*d, "sources", "forward.dot.", c.forward.dot.n_sources);
            r.get(*d, "detectors", "forward.dot.", c.forward.dot.n_detectors);
        }
    }
    if (auto* s = r.section(j, "pals")) {
        r.known(*s, "pals.", {"basis_n", "mu", "c", "w", "seed"});
        r.get(*s, "basis_n", "pals.", c.pals.basis_n);
        r.get(*s, "mu", "pals.", c.pals.constants.mu);
        r.get(*s, "c", "pals.", c.pals.constants.c);
        r.get(*s, "w", "pals.", c.pals.constants.w);
        r.get(*s, "seed", "pals.", c.pals.seed);
    }
    if (auto* s = r.section(j, "solver")) {
        r.known(*s, "solver.", {"tol_decrease", "max_iter", "lambda_init", "lambda_search", "noise_floor"});
        r.get(*s, "tol_decrease", "solver.", c.solver.tol_decrease);
        r.get(*s, "max_iter", "solver.", c.solver.max_iter);
        r.get(*s, "lambda_init", "solver.", c.solver.lambda_init);
        r.get(*s, "lambda_search", "solver.", c.solver.lambda_search);
        r.get(*s, "noise_floor", "solver.", c.solver.noise_floor);
    }
    if (auto* s = r.section(j, "outer")) {
        r.known(*s, "outer.", {"c_min", "c_max", "rho", "varphi", "k_max", "eta", "delta", "change", "warm_start",
                               "literal_while", "stop_on_increase"});
        r.get(*s, "c_min", "outer.", c.outer.c_min);
        r.get(*s, "c_max", "outer.", c.outer.c_max);
        r.get(*s, "rho", "outer.", c.outer.rho);
        r.get(*s, "varphi", "outer.", c.outer.varphi);
        r.get(*s, "k_max", "outer.", c.outer.k_max);
        r.get(*s, "eta", "outer.", c.outer.eta);
        r.get(*s, "delta", "outer.", c.outer.delta);
        r.get(*s, "change", "outer.", c.outer.change);
        r.get(*s, "warm_start", "outer.", c.outer.warm_start);
        r.get(*s, "literal_while", "outer.", c.outer.literal_while);
        r.get(*s, "stop_on_increase", "outer.", c.outer.stop_on_increase);
    }
    if (auto* s = r.section(j, "condbench")) {
        r.known(*s, "condbench.", {"radii", "alpha_min", "alpha_max", "samples", "n", "epsilon"});
        r.get(*s, "radii", "condbench.", c.condbench.radii);
        r.get(*s, "alpha_min", "condbench.", c.condbench.alpha_min);
        r.get(*s, "alpha_max", "condbench.", c.condbench.alpha_max);
        r.get(*s, "samples", "condbench.", c.condbench.samples);
        r.get(*s, "n", "condbench.", c.condbench.n);
        r.get(*s, "epsilon", "condbench.", c.condbench.epsilon);
    }
    if (auto* s = r.section(j, "metrics")) {
        r.known(*s, "metrics.", {"reference", "subject"});
        r.get(*s, "reference", "metrics.", c.reference);
        r.get(*s, "subject", "metrics.", c.subject);
    }
    return c;
}

/// Fully expanded config; feeding it back to parse_config gives the same run.
inline json to_json(const RunConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["output"] = c.output;
    if (c.experiment == "metrics") {
        j["metrics"] = {{"reference", c.reference}, {"subject", c.subject}};
        return j;
    }
    if (c.experiment == "condbench") {
        const auto& b = c.condbench;
        j["condbench"] = {{"radii", b.radii},     {"alpha_min", b.alpha_min}, {"alpha_max", b.alpha_max},
                          {"samples", b.samples}, {"n", b.n},                 {"epsilon", b.epsilon}};
        j["pals"] = {{"mu", c.pals.constants.mu}, {"c", c.pals.constants.c}, {"w", c.pals.constants.w}};
        return j;
    }
    json ph;
    if (!c.phantom.recipe.empty()) ph["recipe"] = c.phantom.recipe;
    if (!c.phantom.file.empty()) ph["file"] = c.phantom.file;
    ph["n"] = c.phantom.n;
    ph["peak"] = c.phantom.peak;
    j["phantom"] = ph;
    if (c.experiment == "phantom") return j;

    j["noise"] = {{"kind", to_string(c.noise.kind)}, {"snr_db", c.noise.snr_db}, {"seed", c.noise.seed}};
    const auto& d = c.forward.dot;
    j["forward"] = {{"kernel_size", c.forward.kernel_size},
                    {"kernel_variance", c.forward.kernel_variance},
                    {"views", c.forward.views},
                    {"detectors", c.forward.detectors},
                    {"dot",
                     {{"diffusion", d.diffusion},
                      {"omega", d.omega},
                      {"nu", d.nu},
                      {"robin", d.robin},
                      {"sources", d.n_sources},
                      {"detectors", d.n_detectors}}}};
    j["pals"] = {{"basis_n", c.pals.basis_n},
                 {"mu", c.pals.constants.mu},
                 {"c", c.pals.constants.c},
                 {"w", c.pals.constants.w},
                 {"seed", c.pals.seed}};
    j["solver"] = {{"tol_decrease", c.solver.tol_decrease},
                   {"max_iter", c.solver.max_iter},
                   {"lambda_init", c.solver.lambda_init},
                   {"lambda_search", c.solver.lambda_search},
                   {"noise_floor", c.solver.noise_floor}};
    json o = {{"rho", c.outer.rho},
              {"k_max", c.outer.k_max},
              {"eta", c.outer.eta},
              {"delta", c.outer.delta},
              {"change", c.outer.change},
              {"warm_start", c.outer.warm_start},
              {"literal_while", c.outer.literal_while},
              {"stop_on_increase", c.outer.stop_on_increase}};
    if (c.outer.c_min) o["c_min"] = *c.outer.c_min;
    if (c.outer.c_max) o["c_max"] = *c.outer.c_max;
    if (c.outer.varphi) o["varphi"] = *c.outer.varphi;
    j["outer"] = o;
    return j;
}

namespace detail {

inline bool recipe_is_3d(const std::string& name) { return name == "ct3d"; }

inline Index recipe_grid_n(const PhantomConfig& p) {
    if (p.n > 0) return p.n;
    if (p.recipe.empty()) return 0;
    return phantom_recipe(p.recipe).grid.dim(0);
}

} // namespace detail

/// Every constraint violation in `j`, without running anything. Empty = valid.
inline std::vector<std::string> validate(const json& j) {
    std::vector<std::string> d;
    if (j.is_object() && j.empty()) {
        for (const char* f : {"experiment", "phantom", "noise", "pals", "output"})
            d.push_back("missing required field '" + std::string(f) + "'");
        return d;
    }
    const RunConfig c = parse_config(j, d);
    if (!j.is_object()) return d;

    auto need = [&](const char* key) {
        if (!j.contains(key)) d.push_back("missing required field '" + std::string(key) + "'");
    };
    need("experiment");
    need("output");
    const auto& kinds = experiment_kinds();
    if (j.contains("experiment") && std::find(kinds.begin(), kinds.end(), c.experiment) == kinds.end())
        d.push_back("unknown experiment '" + c.experiment + "'");

    const auto& k = c.pals.constants;
    if (!(k.c > 0.0 && k.c < 1.0)) d.push_back("c must lie in (0,1)");
    if (!(k.mu > 0.0)) d.push_back("mu must be positive");
    if (!(k.w > 0.0)) d.push_back("w must be positive");

    namespace fs = std::filesystem;
    if (c.experiment == "metrics") {
        if (c.reference.empty()) d.push_back("missing required field 'metrics.reference'");
        else if (!fs::exists(c.reference)) d.push_back("file not found: " + c.reference);
        if (c.subject.empty()) d.push_back("missing required field 'metrics.subject'");
        else if (!fs::exists(c.subject)) d.push_back("file not found: " + c.subject);
        return d;
    }
    if (c.experiment == "condbench") {
        const auto& b = c.condbench;
        if (b.radii.empty()) d.push_back("condbench.radii must not be empty");
        for (double r : b.radii)
            if (!(r > 0.0 && r < 0.5)) d.push_back("condbench radius must lie in (0, 0.5) on the unit grid");
        if (!(b.alpha_min > k.c)) d.push_back("condbench.alpha_min must exceed c");
        if (!(b.alpha_max >= b.alpha_min)) d.push_back("condbench.alpha_max must be >= alpha_min");
        if (b.samples < 1) d.push_back("condbench.samples must be >= 1");
        if (b.n < 2) d.push_back("condbench.n must be >= 2");
        if (!(b.epsilon > 0.0)) d.push_back("condbench.epsilon must be positive");
        return d;
    }

    // phantom, and the reconstruction kinds
    need("phantom");
    const bool has_recipe = !c.phantom.recipe.empty(), has_file = !c.phantom.file.empty();
    if (j.contains("phantom") && has_recipe == has_file) d.push_back("phantom needs exactly one of 'recipe' or 'file'");
    bool is3d = false;
    Index grid_n = 0;
    if (has_recipe) {
        try {
            phantom_recipe(c.phantom.recipe);
            is3d = detail::recipe_is_3d(c.phantom.recipe);
            grid_n = detail::recipe_grid_n(c.phantom);
        } catch (const ConfigError& e) {
            d.push_back(e.what());
        }
    }
    if (has_file && !fs::exists(c.phantom.file)) d.push_back("file not found: " + c.phantom.file);
    if (c.phantom.n < 0 || c.phantom.n == 1) d.push_back("phantom.n must be 0 (default) or >= 2");
    if (!(c.phantom.peak > 0.0)) d.push_back("phantom.peak must be positive");
    if (c.experiment == "phantom" || !is_reconstruction(c.experiment)) return d;

    need("noise");
    need("pals");
    if (has_recipe && (c.experiment == "ct3d") != is3d)
        d.push_back("phantom dimension does not match experiment '" + c.experiment + "'");
    if (!std::isfinite(c.noise.snr_db)) d.push_back("noise.snr_db must be finite");

    if (c.pals.basis_n < 1) d.push_back("pals.basis_n must be >= 1");
    else if (grid_n > 0 && c.pals.basis_n > grid_n) d.push_back("basis grid is finer than the image grid");

    if (c.experiment == "deconvolve") {
        if (c.forward.kernel_size < 1 || c.forward.kernel_size % 2 == 0) d.push_back("kernel size must be odd");
        if (!(c.forward.kernel_variance > 0.0)) d.push_back("kernel variance must be positive");
    }
    if ((c.experiment.rfind("radon", 0) == 0 || c.experiment == "ct3d") && c.forward.views < 1)
        d.push_back("forward.views must be >= 1");
    if (c.forward.detectors < 0) d.push_back("forward.detectors must be >= 0");
    if (c.experiment == "dot") {
        const auto& o = c.forward.dot;
        if (!(o.diffusion > 0.0)) d.push_back("dot diffusion must be positive");
        if (!(o.nu > 0.0)) d.push_back("dot nu must be positive");
        if (o.robin < 0.0) d.push_back("dot robin coefficient must be >= 0");
        if (o.n_sources < 1 || o.n_detectors < 1) d.push_back("dot needs sources and detectors");
        else if (grid_n > 0 && (o.n_sources > grid_n - 2 || o.n_detectors > grid_n - 2))
            d.push_back("dot: more sources/detectors than interior rows");
    }

    if (!(c.solver.tol_decrease >= 0.0)) d.push_back("solver.tol_decrease must be >= 0");
    if (c.solver.max_iter < 1) d.push_back("solver.max_iter must be >= 1");
    if (!(c.solver.lambda_init > 0.0)) d.push_back("solver.lambda_init must be positive");
    if (!(c.solver.lambda_search == 0.0 || c.solver.lambda_search > 1.0))
        d.push_back("solver.lambda_search must be 0 or > 1");

    const auto& o = c.outer;
    if (o.delta < 1 || o.delta % 2 == 0) d.push_back("delta must be odd");
    if (o.k_max < 1) d.push_back("k_max must be >= 1");
    if (!(o.eta >= 0.0)) d.push_back("eta must be >= 0");
    if (!(o.rho >= 0.0)) d.push_back("rho must be >= 0");
    if (o.c_min && o.c_max && *o.c_min > *o.c_max) d.push_back("c_min must not exceed c_max");
    if (o.change != "vector" && o.change != "scalar") d.push_back("outer.change must be 'vector' or 'scalar'");
    return d;
}

inline json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
}

/// Parses and validates; throws ConfigError listing every problem.
inline RunConfig load_config(const json& j) {
    const auto d = validate(j);
    if (!d.empty()) {
        std::string msg = "invalid config:";
        for (const auto& s : d) msg += "\n  " + s;
        throw ConfigError(msg);
    }
    std::vector<std::string> ignored;
    return parse_config(j, ignored);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> n = {
        "denoise-gaussian", "denoise-salt-pepper", "denoise-poisson", "denoise-speckle", "multicontrast",
        "deconvolve",       "radon-sparse",        "radon-limited",   "ct3d",            "dot",
        "dot-noiseless",    "condbench",           "phantom"};
    return n;
}

/// Output directories are left relative to the output root.
inline json preset(const std::string& name) {
    auto denoise = [&](const char* kind, double snr) {
        return json{{"experiment", "denoise"},
                    {"output", name},
                    {"phantom", {{"recipe", "fig2-unit"}}},
                    {"noise", {{"kind", kind}, {"snr_db", snr}, {"seed", 7}}},
                    {"pals", {{"basis_n", 12}, {"mu", 10.0}, {"w", 0.05}, {"c", 0.01}, {"seed", 1}}},
                    {"outer", {{"c_min", 0.0}, {"c_max", 1.0}, {"delta", 29}}}};
    };
    if (name == "denoise-gaussian") return denoise("gaussian", 18.87);
    if (name == "denoise-salt-pepper") return denoise("salt_pepper", 12.99);
    if (name == "denoise-poisson") return denoise("poisson", 17.85);
    if (name == "denoise-speckle") return denoise("speckle", 19.40);
    if (name == "multicontrast") {
        json j = denoise("gaussian", 40.0);
        j["phantom"] = {{"recipe", "fig2"}, {"peak", 4.0}};
        j["pals"]["basis_n"] = 11;
        j["outer"] = {{"c_min", 0.0}, {"c_max", 4.0}, {"delta", 29}};
        return j;
    }
    if (name == "deconvolve") {
        json j = denoise("gaussian", 40.0);
        j["experiment"] = "deconvolve";
        j["forward"] = {{"kernel_size", 7}, {"kernel_variance", 1.0}};
        return j;
    }
    if (name == "radon-sparse" || name == "radon-limited") {
        json j = denoise("gaussian", 40.0);
        j["experiment"] = name;
        j["phantom"] = {{"recipe", "cheese"}};
        j["forward"] = {{"views", 15}};
        return j;
    }
    if (name == "ct3d") {
        return json{{"experiment", "ct3d"},
                    {"output", name},
                    {"phantom", {{"recipe", "ct3d"}}},
                    {"noise", {{"kind", "gaussian"}, {"snr_db", 40.0}, {"seed", 7}}},
                    {"forward", {{"views", 31}}},
                    {"pals", {{"basis_n", 7}, {"mu", 10.0}, {"w", 0.001}, {"c", 0.01}, {"seed", 1}}},
                    {"outer", {{"c_min", 0.0}, {"c_max", 1.0}, {"delta", 29}}}};
    }
    if (name == "dot" || name == "dot-noiseless") {
        return json{{"experiment", "dot"},
                    {"output", name},
                    {"phantom", {{"recipe", "dot"}}},
                    {"noise", {{"kind", name == "dot" ? "gaussian" : "none"}, {"snr_db", 40.0}, {"seed", 7}}},
                    {"forward", {{"dot", {{"sources", 32}, {"detectors", 32}}}}},
                    {"pals", {{"basis_n", 8}, {"mu", 4.0}, {"w", 0.001}, {"c", 0.01}, {"seed", 1}}},
                    {"outer", {{"c_min", 0.01}, {"c_max", 0.05}, {"delta", 29}}}};
    }
    if (name == "condbench") {
        return json{{"experiment", "condbench"},
                    {"output", name},
                    {"condbench",
                     {{"radii", {0.1, 0.16, 0.2}}, {"alpha_min", 0.1}, {"alpha_max", 240.0}, {"samples", 200}, {"n", 82}}}};
    }
    if (name == "phantom")
        return json{{"experiment", "phantom"}, {"output", name}, {"phantom", {{"recipe", "fig2"}, {"peak", 4.0}}}};
    throw ConfigError("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

inline PhantomSpec phantom_for(const PhantomConfig& p) {
    if (p.recipe == "fig2" || p.recipe == "fig2-unit")
        return fig2_like(p.n > 0 ? p.n : 82, p.recipe == "fig2" ? p.peak : 1.0);
    if (p.recipe == "fig16") return fig16_like(p.n > 0 ? p.n : 32);
    if (p.recipe == "cheese") return cheese_like(p.n > 0 ? p.n : 64);
    if (p.recipe == "ct3d") return ct3d_phantom(p.n > 0 ? p.n : 27);
    if (p.recipe == "dot") return dot_phantom(p.n > 0 ? p.n : 41);
    return phantom_recipe(p.recipe);
}

inline ScalarField load_truth(const PhantomConfig& p) {
    if (!p.file.empty()) return read_field(p.file);
    return render_phantom(phantom_for(p));
}

inline std::unique_ptr<ForwardModel> make_forward(const RunConfig& c, const GridSpec& g) {
    const std::string& e = c.experiment;
    if (e == "denoise") return std::make_unique<IdentityModel>(g.num_points());
    if (e == "deconvolve")
        return std::make_unique<ConvolutionModel>(g, gaussian_kernel(c.forward.kernel_size, c.forward.kernel_variance));
    if (e == "radon-sparse" || e == "radon-limited")
        return std::make_unique<Radon2dModel>(
            g, radon2d_angles(e == "radon-sparse" ? AngleMode::sparse : AngleMode::limited, c.forward.views),
            c.forward.detectors);
    if (e == "ct3d")
        return std::make_unique<Parallel3dModel>(g, parallel3d_directions(c.forward.views), c.forward.detectors);
    if (e == "dot") return std::make_unique<Dot2dModel>(g, c.forward.dot);
    throw ConfigError("experiment '" + e + "' has no forward model");
}

inline OuterLoopOptions outer_options(const RunConfig& c, const ScalarField& truth, double noise_norm) {
    OuterLoopOptions o;
    o.c_min = c.outer.c_min.value_or(truth.min());
    o.c_max = c.outer.c_max.value_or(truth.max());
    o.rho = c.outer.rho;
    o.varphi = c.outer.varphi;
    o.k_max = c.outer.k_max;
    o.eta = c.outer.eta;
    o.delta = c.outer.delta;
    o.change = c.outer.change == "scalar" ? ChangeForm::scalar : ChangeForm::vector;
    o.warm_start = c.outer.warm_start;
    o.literal_while = c.outer.literal_while;
    o.stop_on_increase = c.outer.stop_on_increase;
    o.solve.tol_decrease = c.solver.tol_decrease;
    o.solve.max_iter = c.solver.max_iter;
    o.solve.lambda_init = c.solver.lambda_init;
    o.solve.lambda_search = c.solver.lambda_search;
    if (c.solver.noise_floor && noise_norm > 0.0) o.solve.noise_norm_sq = noise_norm * noise_norm;
    return o;
}

struct RunSummary {
    std::string output;
    std::vector<MetricReport> metrics;
    int outer_iterations = 0;
    std::vector<StopReason> stop_reasons;
    double realized_snr_db = 0.0;
    double seconds = 0.0;
};

namespace detail {

inline void preview(const ScalarField& f, const std::string& path) {
    if (f.grid().ndim() == 2) write_pgm(f, path);
    else write_pgm(slice(f, 0, f.grid().dim(0) / 2), path);
}

inline std::string prepare_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
    return dir;
}

inline void write_text(const std::string& path, const std::string& s) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << s;
}

} // namespace detail

/// Executes one configuration and writes its artifacts into c.output.
inline RunSummary run(const RunConfig& c, const std::function<void(const std::string&)>& log = {}) {
    auto say = [&](const std::string& s) {
        if (log) log(s);
    };
    const auto t0 = std::chrono::steady_clock::now();
    RunSummary out;
    out.output = detail::prepare_dir(c.output);
    const std::string dir = c.output + "/";
    detail::write_text(dir + "config.json", to_json(c).dump(2) + "\n");

    if (c.experiment == "metrics") {
        const ScalarField ref = read_field(c.reference), sub = read_field(c.subject);
        out.metrics.push_back(compare(ref, sub, c.reference, c.subject));
        write_metrics_csv(out.metrics, dir + "metrics.csv");
    } else if (c.experiment == "condbench") {
        const auto& b = c.condbench;
        const GridSpec g = make_unit_grid({b.n, b.n});
        for (double r : b.radii) {
            char name[64];
            std::snprintf(name, sizeof name, "condbench_r%.3g.csv", r);
            say(std::string("sweeping ") + name);
            write_conditioning_csv(
                conditioning_sweep_single_basis(r, b.alpha_min, b.alpha_max, b.samples, g, c.pals.constants, b.epsilon),
                dir + name);
        }
    } else {
        const ScalarField truth = load_truth(c.phantom);
        write_field(truth, dir + "truth.palf");
        detail::preview(truth, dir + "truth.pgm");
        if (c.experiment != "phantom") {
            const GridSpec& g = truth.grid();
            const auto model = make_forward(c, g);
            const Vec clean = model->apply(truth.values());
            const NoisyData nd = add_noise(clean, c.noise);
            out.realized_snr_db = nd.realized_snr_db;
            write_vector(nd.noisy, dir + "data.palf");
            if (c.experiment == "denoise") {
                const ScalarField noisy(g, nd.noisy);
                detail::preview(noisy, dir + "input.pgm");
                out.metrics.push_back(compare(truth, noisy, "truth", "input"));
            }
            OuterLoopOptions o = outer_options(c, truth, nd.noise_norm);
            o.on_outer = [&](int k, const SolveReport& r) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "pass %d: %d steps, %d accepted, ||r||^2 = %.6g (%s)", k, r.iterations,
                              r.accepted, r.final_residual_sq(), to_string(r.reason).c_str());
                say(buf);
                r.write_csv(dir + "solve_" + std::to_string(k + 1) + ".csv");
            };
            const PalsParams p0 =
                PalsParams::default_initial(BasisGrid::lattice(c.pals.basis_n, g), c.pals.constants, c.pals.seed);
            const ReconstructResult res = run_palentir(*model, nd.noisy, p0, g, o);
            for (const auto& r : res.reports) out.stop_reasons.push_back(r.reason);
            out.outer_iterations = res.outer_iterations;

            write_field(res.f, dir + "recon.palf");
            write_field(res.phi, dir + "phi.palf");
            write_field(res.bounds.high, dir + "c_high.palf");
            write_field(res.bounds.low, dir + "c_low.palf");
            write_vector(res.params.pack(), dir + "params.palf");
            detail::preview(res.f, dir + "recon.pgm");
            std::ostringstream os;
            os << "pass,residual_sq\n";
            os.precision(17);
            for (std::size_t k = 0; k < res.outer_residual_sq.size(); ++k)
                os << static_cast<int>(k) - 1 << "," << res.outer_residual_sq[k] << "\n";
            detail::write_text(dir + "outer.csv", os.str());
            out.metrics.push_back(compare(truth, res.f, "truth", "recon"));
            write_metrics_csv(out.metrics, dir + "metrics.csv");
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace palentir
