#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kernelrepr/engine.hpp"
#include "kernelrepr/io.hpp"
#include "kernelrepr/lattice.hpp"

namespace fs = std::filesystem;
using namespace kernelrepr;

namespace {

enum Exit { ok = 0, input_error = 1, math_failure = 2 };

int log_level()
{
    const char* v = std::getenv("KERNELREPR_LOG");
    if (v == nullptr) {
        return 1;
    }
    const std::string s(v);
    if (s == "quiet" || s == "0") {
        return 0;
    }
    if (s == "debug" || s == "2") {
        return 2;
    }
    return 1;
}

void info(const std::string& msg)
{
    if (log_level() >= 1) {
        std::cerr << msg << '\n';
    }
}

void debug(const std::string& msg)
{
    if (log_level() >= 2) {
        std::cerr << msg << '\n';
    }
}

struct ScheduleArgs {
    std::string schedule_file;
    std::string kind;
    double M = 6.0;
    std::size_t layers = 16;
    double c_mult = 2.0;
    double safety = 2.0;
    std::string phases = "centered";
    std::uint64_t seed = 0;
};

void add_schedule_options(CLI::App* cmd, ScheduleArgs& a)
{
    cmd->add_option("--M", a.M, "density constant: n_k (1 - r_k) >= M")->check(CLI::PositiveNumber);
    cmd->add_option("--layers", a.layers, "number of layers, radii r_k = 1 - 2^-k")->check(CLI::Range(1, 60));
    cmd->add_option("--c-mult", a.c_mult, "h1 multiplicity constant")->check(CLI::PositiveNumber);
    cmd->add_option("--safety", a.safety, "weighted schedule safety factor")->check(CLI::Range(1.0, 1e6));
    cmd->add_option("--phases", a.phases, "centered or random")->check(CLI::IsMember({"centered", "random"}));
    cmd->add_option("--seed", a.seed, "seed for random phases");
}

LatticeSchedule make_schedule(const ScheduleArgs& a, const Space& space)
{
    if (!a.schedule_file.empty()) {
        return io::schedule_from_json(io::read_json_file(a.schedule_file));
    }
    const auto radii = default_radii(a.layers);
    std::string kind = a.kind;
    if (kind.empty()) {
        kind = space.is_weighted() ? "weighted" : space.is_endpoint() ? "h1" : "hp";
    }
    switch (parse_layer_kind(kind)) {
    case LayerKind::hardy:
        return build_hp_schedule(a.M, radii, parse_phase_mode(a.phases), a.seed);
    case LayerKind::hardy1:
        return build_h1_schedule(a.M, a.c_mult, radii);
    case LayerKind::weighted:
        return build_weighted_schedule(space.is_weighted() ? space.weight() : Weight::hardy(), radii, a.safety);
    }
    throw std::invalid_argument("unknown schedule kind");
}

std::vector<double> density_grid(const LatticeSchedule& s)
{
    std::vector<double> grid;
    for (const auto& layer : s.layers) {
        const double r = layer.top_radius();
        grid.push_back(r + 1e-6 * (1.0 - r));
    }
    return grid;
}

fs::path prepare_out_dir(const std::string& dir)
{
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

int cmd_lattice(const ScheduleArgs& a, const std::string& space_spec, const std::string& out_dir)
{
    const Space space = io::parse_space(space_spec);
    ScheduleArgs args = a;
    if (args.kind.empty()) {
        args.kind = "hp";
    }
    if (args.kind != "weighted" && args.M < kHardyDensityThreshold) {
        std::cerr << "warning: M = " << args.M << " is below the admissible threshold pi sqrt(pi^2 + 1) / 2 = "
                  << std::setprecision(6) << kHardyDensityThreshold << "; convergence is not guaranteed\n";
    }
    const auto schedule = make_schedule(args, space);
    const auto out = prepare_out_dir(out_dir);
    io::write_json_file(out / "schedule.json", io::to_json(schedule));
    std::ofstream csv(out / "density.csv");
    const auto grid = density_grid(schedule);
    io::write_density_csv(csv, schedule, grid);
    info("wrote " + (out / "schedule.json").string() + " (" + std::to_string(schedule.layers.size()) + " layers, " +
         std::to_string(schedule.size()) + " points), density proxy " + std::to_string(density_upper(schedule, grid)));
    return ok;
}

struct DecomposeArgs {
    std::string function;
    std::string space = "h2";
    std::size_t degree = 0;
    double tol = 1e-3;
    double delta = 0.05;
    std::size_t max_layers = 20;
    std::size_t max_degree = std::size_t(1) << 22;
    unsigned threads = 1;
    std::string out_dir = ".";
};

int cmd_decompose(const ScheduleArgs& sa, const DecomposeArgs& a)
{
    const Space space = io::parse_space(a.space);
    const Series f = io::parse_function(a.function, a.degree);
    if (!(norm(f, space) > 0.0)) {
        std::cerr << "error: nothing to decompose (the function has zero norm)\n";
        return input_error;
    }
    const auto schedule = make_schedule(sa, space);
    DecomposeOptions opt;
    opt.tol = a.tol;
    opt.delta = a.delta;
    opt.max_layers = a.max_layers;
    opt.max_degree = a.max_degree;
    opt.threads = a.threads;
    opt.schedule_ref = sa.schedule_file.empty() ? to_string(schedule.kind) + ":M=" + std::to_string(schedule.M) +
                                                      ":layers=" + std::to_string(schedule.layers.size())
                                                : sa.schedule_file;
    debug("decomposing " + a.function + " in " + space.tag());
    const auto result = decompose(f, space, schedule, opt);
    const auto out = prepare_out_dir(a.out_dir);
    io::write_json_file(out / "decomposition.json", io::to_json(result.decomposition));
    std::ofstream csv(out / "report.csv");
    io::write_report_csv(csv, result.report);
    for (const auto& row : result.report.layers) {
        debug("step " + std::to_string(row.step) + " layer " + std::to_string(row.k_selected) + " ratio " +
              std::to_string(row.ratio));
    }
    info(to_string(result.report.termination) + ": " + std::to_string(result.report.layers.size()) + " steps, " +
         std::to_string(result.decomposition.atoms.size()) + " atoms, relative residual " +
         std::to_string(result.decomposition.residual_norms.back() / result.decomposition.residual_norms.front()));
    if (!result.report.success()) {
        std::cerr << "error: " << result.report.diagnostic << '\n';
        return math_failure;
    }
    return ok;
}

struct VerifyArgs {
    std::string decomposition;
    std::string function;
    std::string space;
    std::size_t degree = 0;
    double prefix_limit = 10.0;
    unsigned threads = 1;
    std::string out_dir = ".";
};

int cmd_verify(const VerifyArgs& a)
{
    const Decomposition d = io::decomposition_from_json(io::read_json_file(a.decomposition));
    if (!a.space.empty() && !(io::parse_space(a.space) == d.space)) {
        std::cerr << "error: space " << a.space << " does not match the decomposition's " << d.space.tag() << '\n';
        return math_failure;
    }
    const Series f = io::parse_function(a.function, a.degree);
    const auto out = prepare_out_dir(a.out_dir);
    std::ofstream csv(out / "verify.csv");
    csv << io::timestamp_comment() << '\n';
    csv << "check,layer,value,threshold,status\n";
    csv << std::setprecision(17);

    const double err = reconstruction_error(f, d, a.threads);
    csv << "reconstruction,," << err << ',' << d.reconstruction_error << ",info\n";

    std::size_t degree = std::max(d.degree, f.degree());
    const auto layers = decomposition_layers(d);
    const auto prefix = prefix_sweep(d, degree);
    std::size_t warnings = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const double scale = i < d.residual_norms.size() ? d.residual_norms[i] : d.residual_norms.back();
        const double amp = prefix[i] / scale;
        const bool warn = !(amp <= a.prefix_limit);
        warnings += warn ? 1 : 0;
        csv << "prefix," << layers[i] + 1 << ',' << amp << ',' << a.prefix_limit << ',' << (warn ? "warning" : "ok") << '\n';
    }
    for (std::size_t i = 0; i < layers.size() && i + 1 < d.residual_norms.size(); ++i) {
        const double ratio = d.residual_norms[i + 1] / d.residual_norms[i];
        csv << "ratio," << layers[i] + 1 << ',' << ratio << ",1," << (ratio < 1.0 ? "ok" : "warning") << '\n';
    }
    if (warnings > 0) {
        std::cerr << "warning: " << warnings << " layer(s) exceed the prefix amplification limit\n";
    }
    info("reconstruction error " + std::to_string(err) + " (recorded " + std::to_string(d.reconstruction_error) + ")");
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Representing-series expansions over reproducing kernels"};
    app.require_subcommand(1);

    ScheduleArgs lattice_args;
    std::string lattice_space = "h2";
    std::string lattice_out = ".";
    auto* lattice = app.add_subcommand("lattice", "build a node schedule and its density report");
    lattice->add_option("--kind", lattice_args.kind, "hp, h1 or weighted")->check(CLI::IsMember({"hp", "h1", "weighted"}));
    lattice->add_option("--space", lattice_space, "weight source for weighted schedules");
    lattice->add_option("--out-dir", lattice_out, "output directory");
    add_schedule_options(lattice, lattice_args);

    ScheduleArgs dec_schedule;
    DecomposeArgs dec;
    auto* decompose_cmd = app.add_subcommand("decompose", "expand a function over a schedule");
    decompose_cmd->add_option("--function", dec.function, "geom(c), poly(...), expz, powerlaw(s) or a series file")->required();
    decompose_cmd->add_option("--space", dec.space, "h2|hp:p|h1|diskalg|hardy|dirichlet|bergman:alpha|table:file");
    decompose_cmd->add_option("--schedule", dec_schedule.schedule_file, "schedule JSON (overrides the generator flags)")
        ->check(CLI::ExistingFile);
    decompose_cmd->add_option("--kind", dec_schedule.kind, "schedule kind (default from the space)")
        ->check(CLI::IsMember({"hp", "h1", "weighted"}));
    add_schedule_options(decompose_cmd, dec_schedule);
    decompose_cmd->add_option("--degree", dec.degree, "truncation degree of preset functions (0 = automatic)");
    decompose_cmd->add_option("--tol", dec.tol, "relative residual target")->check(CLI::Range(0.0, 1.0));
    decompose_cmd->add_option("--delta", dec.delta, "allowed relative dilation error")->check(CLI::Range(0.0, 1.0));
    decompose_cmd->add_option("--max-layers", dec.max_layers, "maximum number of greedy steps");
    decompose_cmd->add_option("--max-degree", dec.max_degree, "coefficient degree cap");
    decompose_cmd->add_option("--threads", dec.threads, "worker threads")->check(CLI::Range(1u, 256u));
    decompose_cmd->add_option("--out-dir", dec.out_dir, "output directory");

    VerifyArgs ver;
    auto* verify = app.add_subcommand("verify", "recheck a decomposition file");
    verify->add_option("--decomposition", ver.decomposition, "decomposition JSON")->required()->check(CLI::ExistingFile);
    verify->add_option("--function", ver.function, "the function that was decomposed")->required();
    verify->add_option("--space", ver.space, "expected space tag");
    verify->add_option("--degree", ver.degree, "truncation degree of preset functions (0 = automatic)");
    verify->add_option("--prefix-limit", ver.prefix_limit, "prefix amplification warning threshold");
    verify->add_option("--threads", ver.threads, "worker threads")->check(CLI::Range(1u, 256u));
    verify->add_option("--out-dir", ver.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : input_error;
    }

    try {
        if (lattice->parsed()) {
            return cmd_lattice(lattice_args, lattice_space, lattice_out);
        }
        if (decompose_cmd->parsed()) {
            return cmd_decompose(dec_schedule, dec);
        }
        return cmd_verify(ver);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::length_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return math_failure;
    }
}
