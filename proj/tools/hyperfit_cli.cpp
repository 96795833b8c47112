// Command-line pipeline: generate synthetic benchmark data, denoise, discover
// a sparse strain-energy model, evaluate it along canonical paths, or check
// admissibility of a model file.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperfit/hyperfit.hpp"

namespace fs = std::filesystem;
using namespace hyperfit;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerics = 4;

struct GenerateArgs {
    std::string model = "NH2";
    double sigma = 0.0;
    std::string out; // prefix; defaults to <model>_sigma<sigma>
    GenerationConfig gen;
};

struct DiscoverArgs {
    std::string input;
    std::string out = "model.json";
    std::string report;
    std::string dump_system;
    bool exclude_log = false;
    bool no_denoise = false;
    int denoise_budget = 30;
    SolverConfig solver;
};

std::string sigma_tag(double sigma)
{
    std::ostringstream os;
    os << sigma;
    return os.str();
}

json config_echo(const GenerateArgs& a)
{
    json j;
    j["model"] = a.model;
    j["sigma"] = a.sigma;
    j["resolution"] = a.gen.resolution;
    j["hole_radius"] = a.gen.hole_radius;
    j["n_steps"] = a.gen.n_steps;
    j["delta_increment"] = a.gen.delta_increment;
    j["asymmetry"] = a.gen.asymmetry;
    j["seed"] = a.gen.seed;
    j["newton_tol"] = a.gen.newton_tol;
    j["newton_max_iter"] = a.gen.newton_max_iter;
    j["fd_tangent"] = a.gen.fd_tangent;
    return j;
}

json config_echo(const DiscoverArgs& a)
{
    json j;
    j["input"] = a.input;
    j["exclude_log"] = a.exclude_log;
    j["no_denoise"] = a.no_denoise;
    j["denoise_budget"] = a.denoise_budget;
    j["p"] = a.solver.p;
    j["lambda_p0"] = a.solver.lambda_p0;
    j["kappa"] = a.solver.kappa;
    j["n_starts"] = a.solver.n_starts;
    j["max_fp_iters"] = a.solver.max_fp_iters;
    j["eps_tol"] = a.solver.eps_tol;
    j["eps_conv"] = a.solver.eps_conv;
    j["theta_threshold"] = a.solver.theta_threshold;
    j["n_gamma"] = a.solver.n_gamma;
    j["gamma_max"] = a.solver.gamma_max;
    j["lambda_r"] = a.solver.lambda_r;
    j["seed"] = a.solver.seed;
    j["max_escalations"] = a.solver.max_escalations;
    return j;
}

// FNV-1a over the canonical config echo; stable across runs by construction.
std::string config_hash(const json& j)
{
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

int cmd_generate(const GenerateArgs& args)
{
    const BenchmarkModel bm = benchmark_from_string(args.model);
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto model = truth_model(bm, lib);

    const std::string prefix =
        args.out.empty() ? args.model + "_sigma" + sigma_tag(args.sigma) : args.out;

    std::cerr << "generating " << args.model << " (sigma = " << args.sigma << ") ...\n";
    const auto gen = generate_mesh(args.gen.resolution, args.gen.hole_radius);
    const LoadstepData clean = forward_solve(gen.mesh, gen.partition, model, args.gen, bm);

    Dataset ds{gen.mesh, gen.partition, clean};
    if (args.sigma > 0.0) {
        save_dataset(prefix + ".noiseless.json", ds);
        ds.loads = add_noise(clean, args.sigma, args.gen.seed);
    }
    save_dataset(prefix + ".json", ds);

    json meta;
    meta["model"] = args.model;
    meta["truth"] = json::array();
    for (std::size_t k = 0; k < lib.size(); ++k)
        if (model.theta[static_cast<Eigen::Index>(k)] != 0.0)
            meta["truth"].push_back({{"feature", lib[k].name()},
                                     {"coefficient", model.theta[static_cast<Eigen::Index>(k)]}});
    meta["truth_display"] = format_model(model);
    meta["config"] = config_echo(args);
    meta["config_hash"] = config_hash(config_echo(args));
    meta["n_nodes"] = gen.mesh.n_nodes();
    meta["n_elements"] = gen.mesh.n_elements();
    meta["loadsteps"] = clean.n_steps();
    std::ofstream mf(prefix + ".meta.json");
    mf << meta.dump(2) << "\n";

    std::cerr << "wrote " << prefix << ".json (" << gen.mesh.n_nodes() << " nodes, "
              << clean.n_steps() << " steps)\n";
    return 0;
}

int cmd_denoise(const std::string& input, const std::string& output, int budget,
                std::uint64_t seed)
{
    Dataset ds = load_dataset(input);
    DenoiseOptions opt;
    opt.budget = budget;
    opt.seed = seed;
    ds.loads = denoise_displacements(ds.mesh, ds.loads, opt);
    save_dataset(output, ds);
    std::cerr << "wrote " << output << "\n";
    return 0;
}

int cmd_discover(const DiscoverArgs& args)
{
    Dataset ds = load_dataset(args.input);
    const auto lib = FeatureLibrary::generalized_mooney_rivlin(7, 7, !args.exclude_log);

    if (!args.no_denoise) {
        std::cerr << "denoising " << ds.loads.n_steps() << " steps ...\n";
        DenoiseOptions opt;
        opt.budget = args.denoise_budget;
        opt.seed = args.solver.seed;
        opt.n_threads = args.solver.n_threads;
        ds.loads = denoise_displacements(ds.mesh, ds.loads, opt);
    }

    std::cerr << "assembling " << ds.loads.n_steps() << " steps over " << lib.size()
              << " features ...\n";
    const AssembledProblem problem = assemble_dataset(ds, lib, args.solver.lambda_r);
    if (!args.dump_system.empty()) write_debug_system(args.dump_system, problem.system);

    std::cerr << "solving (" << args.solver.n_starts << " starts) ...\n";
    const SolveReport report = discover(problem.system, lib, problem.quad_invariants, args.solver);

    if (!args.report.empty()) {
        json jr = report.to_json();
        jr["config"] = config_echo(args);
        std::ofstream rf(args.report);
        rf << jr.dump(2) << "\n";
    }

    if (!report.success) {
        std::cerr << "discovery failed after " << report.escalations
                  << " penalty escalations\n";
        for (const auto& rec : report.trail)
            std::cerr << "  lambda_p " << rec.lambda_p << ": " << rec.note << "\n";
        return kExitNumerics;
    }

    ModelRecord rec;
    rec.model = report.model;
    rec.provenance.dataset = fs::path(args.input).filename().string();
    rec.provenance.config_hash = config_hash(config_echo(args));
    rec.provenance.seed = args.solver.seed;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) rec.provenance.created = epoch;
    save_model(args.out, rec);

    std::cout << "W = " << format_model(report.model) << "\n";
    std::cerr << "lambda_p " << report.lambda_p_final << ", escalations " << report.escalations
              << ", " << report.model.n_active() << " active features -> " << args.out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::vector<std::string>& path_names,
                 double gamma_min, double gamma_max, int gamma_count,
                 const std::string& out_prefix)
{
    if (path_names.empty()) throw UsageError("no deformation paths requested");
    const ModelRecord rec = load_model(model_path);
    const auto grid = linspace(gamma_min, gamma_max, gamma_count);
    for (const auto& name : path_names) {
        const auto kind = path_from_string(name);
        const auto table = evaluate_curves(rec.model, kind, grid);
        const std::string out = out_prefix + "_" + name + ".csv";
        write_curve_csv(out, table);
        std::cerr << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_check(const std::string& model_path, const std::string& dataset_path,
              const SolverConfig& cfg)
{
    const ModelRecord rec = load_model(model_path);
    std::vector<InvariantSet> states;
    if (!dataset_path.empty()) {
        const Dataset ds = load_dataset(dataset_path);
        for (const auto& step : ds.loads.steps) {
            const auto inv = collect_invariants(ds.mesh, step.u);
            states.insert(states.end(), inv.begin(), inv.end());
        }
    }
    const auto verdict = admissibility_check(rec.model, states, cfg);
    std::cout << (verdict.pass ? "admissible" : "inadmissible: " + verdict.reason) << "\n";
    return verdict.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discovery of sparse hyperelastic strain-energy models from "
                 "full-field displacements and boundary reactions"};
    app.require_subcommand(1);
    app.fallthrough(); // parent options (e.g. --config) may follow the subcommand
    app.set_config("--config", "", "Config file (TOML-style sections)");

    GenerateArgs gen_args;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic benchmark dataset");
    gen->add_option("--model", gen_args.model, "Benchmark model: NH2, NH4, IH, HW, GT")
        ->required();
    gen->add_option("--sigma", gen_args.sigma, "Displacement noise floor");
    gen->add_option("--out,-o", gen_args.out, "Output prefix");
    gen->add_option("--resolution", gen_args.gen.resolution, "Target node count");
    gen->add_option("--hole-radius", gen_args.gen.hole_radius, "Hole radius fraction");
    gen->add_option("--steps", gen_args.gen.n_steps, "Load steps (0 = model default)");
    gen->add_option("--delta-increment", gen_args.gen.delta_increment, "Loading increment");
    gen->add_option("--asymmetry", gen_args.gen.asymmetry, "Top/right displacement ratio");
    gen->add_option("--seed", gen_args.gen.seed, "RNG seed");
    gen->add_option("--newton-tol", gen_args.gen.newton_tol, "Newton residual tolerance");
    gen->add_option("--newton-max-iters", gen_args.gen.newton_max_iter, "Newton iteration cap");
    gen->add_flag("--fd-tangent", gen_args.gen.fd_tangent,
                  "Finite-difference element tangent instead of nested duals");

    std::string dn_input, dn_output = "denoised.json";
    int dn_budget = 30;
    std::uint64_t dn_seed = 0;
    auto* dn = app.add_subcommand("denoise", "Denoise a dataset with kernel ridge regression");
    dn->add_option("--input,-i", dn_input, "Dataset file")->required();
    dn->add_option("--out,-o", dn_output, "Output dataset file");
    dn->add_option("--budget", dn_budget, "Random-search budget");
    dn->add_option("--seed", dn_seed, "RNG seed");

    DiscoverArgs dis_args;
    auto* dis = app.add_subcommand("discover", "Discover a sparse strain-energy model");
    dis->add_option("--input,-i", dis_args.input, "Dataset file")->required();
    dis->add_option("--out,-o", dis_args.out, "Model output file");
    dis->add_option("--report", dis_args.report, "Solver report output file");
    dis->add_option("--dump-system", dis_args.dump_system, "Debug dump of A_eqb, b_eqb");
    dis->add_flag("--exclude-log", dis_args.exclude_log, "Drop the logarithmic feature");
    dis->add_flag("--no-denoise", dis_args.no_denoise, "Skip the KRR preprocessing");
    dis->add_option("--denoise-budget", dis_args.denoise_budget, "KRR random-search budget");
    dis->add_option("--p", dis_args.solver.p, "lp exponent");
    dis->add_option("--lambda-p0", dis_args.solver.lambda_p0, "Initial penalty coefficient");
    dis->add_option("--kappa", dis_args.solver.kappa, "Penalty escalation factor");
    dis->add_option("--starts", dis_args.solver.n_starts, "Parallel fixed-point starts");
    dis->add_option("--max-fp-iters", dis_args.solver.max_fp_iters, "Fixed-point iteration cap");
    dis->add_option("--eps-tol", dis_args.solver.eps_tol, "Feature-removal tolerance");
    dis->add_option("--eps-conv", dis_args.solver.eps_conv, "Convergence tolerance");
    dis->add_option("--threshold", dis_args.solver.theta_threshold, "Coefficient threshold");
    dis->add_option("--n-gamma", dis_args.solver.n_gamma, "Admissibility samples per path");
    dis->add_option("--gamma-max", dis_args.solver.gamma_max, "Admissibility gamma cap");
    dis->add_option("--lambda-r", dis_args.solver.lambda_r, "Reaction-balance weight");
    dis->add_option("--seed", dis_args.solver.seed, "RNG seed");
    dis->add_option("--max-escalations", dis_args.solver.max_escalations, "Escalation cap");
    dis->add_option("--threads", dis_args.solver.n_threads,
                    "Worker threads (default HYPERFIT_THREADS or hardware)");

    std::string ev_model, ev_prefix = "curves";
    std::vector<std::string> ev_paths = {"UT", "UC", "SS", "BT", "BC", "PS"};
    double ev_gmin = 0.01, ev_gmax = 1.0;
    int ev_count = 100;
    auto* ev = app.add_subcommand("evaluate", "Tabulate W and stresses along deformation paths");
    ev->add_option("--model,-m", ev_model, "Model file")->required();
    ev->add_option("--paths", ev_paths, "Deformation paths (UT UC SS BT BC PS)");
    ev->add_option("--gamma-min", ev_gmin, "Grid start");
    ev->add_option("--gamma-max", ev_gmax, "Grid end");
    ev->add_option("--gamma-count", ev_count, "Grid size");
    ev->add_option("--out,-o", ev_prefix, "Output CSV prefix");

    std::string ck_model, ck_dataset;
    SolverConfig ck_cfg;
    auto* ck = app.add_subcommand("check", "Admissibility checks on a model file");
    ck->add_option("--model,-m", ck_model, "Model file")->required();
    ck->add_option("--dataset", ck_dataset, "Optional dataset for quadrature-point checks");
    ck->add_option("--n-gamma", ck_cfg.n_gamma, "Samples per path");
    ck->add_option("--gamma-max", ck_cfg.gamma_max, "Gamma cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_args);
        if (dn->parsed()) return cmd_denoise(dn_input, dn_output, dn_budget, dn_seed);
        if (dis->parsed()) return cmd_discover(dis_args);
        if (ev->parsed()) return cmd_evaluate(ev_model, ev_paths, ev_gmin, ev_gmax, ev_count, ev_prefix);
        if (ck->parsed()) return cmd_check(ck_model, ck_dataset, ck_cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataQualityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerics;
    }
    return 0;
}
