#include "kernelrepr/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kernelrepr::io {

namespace {

json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

std::complex<double> complex_from(const json& j)
{
    if (j.is_number()) {
        return {j.get<double>(), 0.0};
    }
    if (!j.is_array() || j.size() != 2) {
        throw std::invalid_argument("expected a complex number as [re, im]");
    }
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& s)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(trim(s), &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    if (used != trim(s).size()) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    return x;
}

// "name(args)" -> args, or nullopt when spec does not start with name(
bool call_args(const std::string& spec, const std::string& name, std::string& args)
{
    if (spec.rfind(name + "(", 0) != 0 || spec.back() != ')') {
        return false;
    }
    args = spec.substr(name.size() + 1, spec.size() - name.size() - 2);
    return true;
}

std::vector<double> split_numbers(std::string args)
{
    std::vector<double> out;
    if (!args.empty() && args.front() == '[' && args.back() == ']') {
        args = args.substr(1, args.size() - 2);
    }
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number(item));
    }
    return out;
}

Series geometric(double c, std::size_t degree)
{
    const double a = std::abs(c);
    if (!(a < 1.0)) {
        throw std::invalid_argument("geom(c) needs |c| < 1");
    }
    if (degree == 0) {
        degree = a == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(std::log(1e-17 * (1.0 - a)) / std::log(a)));
    }
    Series::Coeffs coeffs(detail::idx(degree + 1));
    double p = 1.0;
    for (std::size_t n = 0; n <= degree; ++n) {
        coeffs[detail::idx(n)] = p;
        p *= c;
    }
    // H^2 norm of the dropped tail
    const double tail = std::pow(a, static_cast<double>(degree + 1)) / std::sqrt(1.0 - a * a);
    return Series(std::move(coeffs), tail);
}

Series power_law(double s, std::size_t degree)
{
    if (!(s > 0.5)) {
        throw std::invalid_argument("powerlaw(s) needs s > 1/2");
    }
    if (degree == 0) {
        degree = 2000;
    }
    Series::Coeffs coeffs(detail::idx(degree + 1));
    for (std::size_t n = 0; n <= degree; ++n) {
        coeffs[detail::idx(n)] = std::pow(static_cast<double>(n + 1), -s);
    }
    const double tail = std::sqrt(std::pow(static_cast<double>(degree + 1), 1.0 - 2.0 * s) / (2.0 * s - 1.0));
    return Series(std::move(coeffs), tail);
}

Series exponential(std::size_t degree)
{
    if (degree == 0) {
        degree = 30;
    }
    Series::Coeffs coeffs(detail::idx(degree + 1));
    double term = 1.0;
    for (std::size_t n = 0; n <= degree; ++n) {
        coeffs[detail::idx(n)] = term;
        term /= static_cast<double>(n + 1);
    }
    return Series(std::move(coeffs), term * 2.0);
}

} // namespace

json to_json(const Series& f)
{
    json coeffs = json::array();
    for (Eigen::Index n = 0; n < f.coeffs().size(); ++n) {
        coeffs.push_back(complex_json(f.coeffs()[n]));
    }
    return json{{"coeffs", coeffs}, {"tail_bound", f.tail_bound()}};
}

Series series_from_json(const json& j)
{
    const auto& c = j.at("coeffs");
    if (!c.is_array() || c.empty()) {
        throw std::invalid_argument("series needs a nonempty coeffs array");
    }
    Series::Coeffs coeffs(static_cast<Eigen::Index>(c.size()));
    for (std::size_t n = 0; n < c.size(); ++n) {
        coeffs[detail::idx(n)] = complex_from(c[n]);
    }
    return Series(std::move(coeffs), j.value("tail_bound", 0.0));
}

json to_json(const Weight& w)
{
    switch (w.kind()) {
    case WeightKind::hardy:
        return json{{"kind", "hardy"}};
    case WeightKind::dirichlet:
        return json{{"kind", "dirichlet"}};
    case WeightKind::bergman:
        return json{{"kind", "bergman"}, {"alpha", w.alpha()}};
    case WeightKind::table:
        return json{{"kind", "table"}, {"table", w.table_values()}};
    }
    return json{{"kind", "hardy"}};
}

Weight weight_from_json(const json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "hardy") {
        return Weight::hardy();
    }
    if (kind == "dirichlet") {
        return Weight::dirichlet();
    }
    if (kind == "bergman") {
        return Weight::bergman(j.value("alpha", 0.0));
    }
    if (kind == "table") {
        return Weight::table(j.at("table").get<std::vector<double>>());
    }
    throw std::invalid_argument("unknown weight kind '" + kind + "'");
}

json to_json(const Space& space)
{
    json j{{"tag", space.tag()}};
    if (space.is_weighted()) {
        j["weight"] = to_json(space.weight());
    }
    return j;
}

Space space_from_json(const json& j)
{
    if (j.is_string()) {
        return parse_space(j.get<std::string>());
    }
    if (j.contains("weight")) {
        return Space::weighted(weight_from_json(j.at("weight")));
    }
    return parse_space(j.at("tag").get<std::string>());
}

json to_json(const LatticeSchedule& s)
{
    json layers = json::array();
    for (const auto& layer : s.layers) {
        json l{{"r", layer.top_radius()},
               {"n", layer.n_points},
               {"mult", layer.multiplicity},
               {"phases", to_string(layer.phases)},
               {"seed", layer.seed}};
        if (layer.kind == LayerKind::weighted) {
            l["radii"] = layer.radii;
        }
        layers.push_back(std::move(l));
    }
    return json{{"kind", to_string(s.kind)}, {"M", s.M}, {"layers", layers}};
}

LatticeSchedule schedule_from_json(const json& j)
{
    LatticeSchedule s;
    s.kind = parse_layer_kind(j.at("kind").get<std::string>());
    s.M = j.value("M", 0.0);
    for (const auto& l : j.at("layers")) {
        LatticeLayer layer;
        layer.kind = s.kind;
        layer.n_points = l.at("n").get<std::size_t>();
        layer.multiplicity = l.value("mult", std::size_t(1));
        layer.phases = parse_phase_mode(l.value("phases", std::string("centered")));
        layer.seed = l.value("seed", std::uint64_t(0));
        if (l.contains("radii")) {
            layer.radii = l.at("radii").get<std::vector<double>>();
        } else {
            layer.radii = {l.at("r").get<double>()};
        }
        layer.validate();
        if (!s.layers.empty() && !(layer.inner_radius() > s.layers.back().top_radius())) {
            throw std::invalid_argument("schedule layers must have increasing radii");
        }
        s.layers.push_back(std::move(layer));
    }
    return s;
}

json to_json(const Decomposition& d)
{
    json atoms = json::array();
    for (const auto& a : d.atoms) {
        json item{{"node", complex_json(a.node)}, {"weight", complex_json(a.weight)}, {"layer", a.layer}, {"l", a.ring}, {"j", a.angle}};
        if (a.kernel == KernelKind::beta) {
            item["kernel"] = "beta";
        }
        atoms.push_back(std::move(item));
    }
    return json{{"space", to_json(d.space)},
                {"schedule_ref", d.schedule_ref},
                {"degree", d.degree},
                {"reconstruction_error", d.reconstruction_error},
                {"residual_norms", d.residual_norms},
                {"atoms", atoms}};
}

Decomposition decomposition_from_json(const json& j)
{
    Decomposition d;
    d.space = space_from_json(j.at("space"));
    d.schedule_ref = j.value("schedule_ref", std::string());
    d.degree = j.value("degree", std::size_t(0));
    d.reconstruction_error = j.value("reconstruction_error", 0.0);
    d.residual_norms = j.value("residual_norms", std::vector<double>{});
    for (const auto& item : j.at("atoms")) {
        KernelAtom a;
        a.node = complex_from(item.at("node"));
        if (!(std::abs(a.node) < 1.0)) {
            throw std::invalid_argument("atom node outside the unit disk");
        }
        a.weight = complex_from(item.at("weight"));
        a.layer = item.value("layer", std::size_t(0));
        a.ring = item.value("l", std::size_t(0));
        a.angle = item.value("j", std::size_t(0));
        a.kernel = item.value("kernel", std::string("cauchy")) == "beta" ? KernelKind::beta : KernelKind::cauchy;
        d.atoms.push_back(a);
    }
    return d;
}

Series parse_function(const std::string& raw, std::size_t degree)
{
    const std::string spec = trim(raw);
    std::string args;
    if (call_args(spec, "geom", args)) {
        return geometric(parse_number(args), degree);
    }
    if (call_args(spec, "poly", args)) {
        const auto a = split_numbers(args);
        if (a.empty()) {
            throw std::invalid_argument("poly() needs at least one coefficient");
        }
        Series::Coeffs coeffs(static_cast<Eigen::Index>(a.size()));
        for (std::size_t n = 0; n < a.size(); ++n) {
            coeffs[detail::idx(n)] = a[n];
        }
        return Series(std::move(coeffs));
    }
    if (call_args(spec, "powerlaw", args)) {
        return power_law(parse_number(args), degree);
    }
    if (spec == "expz") {
        return exponential(degree);
    }
    if (std::filesystem::exists(spec)) {
        return series_from_json(read_json_file(spec));
    }
    throw std::invalid_argument("unknown function '" + spec + "' (expected geom(c), poly(...), expz, powerlaw(s) or a file)");
}

Space parse_space(const std::string& raw)
{
    const std::string spec = trim(raw);
    if (spec == "h2") {
        return Space::hardy(2.0);
    }
    if (spec == "h1") {
        return Space::hardy(1.0);
    }
    if (spec == "diskalg") {
        return Space::disk_algebra();
    }
    if (spec == "hardy") {
        return Space::weighted(Weight::hardy());
    }
    if (spec == "dirichlet") {
        return Space::weighted(Weight::dirichlet());
    }
    if (spec.rfind("hp:", 0) == 0) {
        return Space::hardy(parse_number(spec.substr(3)));
    }
    if (spec.rfind("bergman:", 0) == 0) {
        return Space::weighted(Weight::bergman(parse_number(spec.substr(8))));
    }
    if (spec == "bergman") {
        return Space::weighted(Weight::bergman(0.0));
    }
    if (spec.rfind("table:", 0) == 0) {
        const json j = read_json_file(spec.substr(6));
        if (j.is_array()) {
            return Space::weighted(Weight::table(j.get<std::vector<double>>()));
        }
        return Space::weighted(weight_from_json(j));
    }
    throw std::invalid_argument("unknown space '" + spec + "'");
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(1) << '\n';
}

std::string timestamp_comment()
{
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << "# generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_report_csv(std::ostream& os, const ConvergenceReport& report)
{
    os << timestamp_comment() << '\n';
    os << "layer,k_selected,delta,ratio,bound,prefix_max\n";
    os << std::setprecision(17);
    for (const auto& row : report.layers) {
        os << row.step << ',' << row.k_selected << ',' << row.delta << ',' << row.ratio << ',' << row.bound << ','
           << row.prefix_max << '\n';
    }
    os << "# termination " << to_string(report.termination);
    if (report.failing_layer) {
        os << " failing_layer " << *report.failing_layer + 1;
    }
    os << " reconstruction_error " << report.reconstruction_error << '\n';
}

void write_density_csv(std::ostream& os, const LatticeSchedule& schedule, std::span<const double> r_grid)
{
    os << timestamp_comment() << '\n';
    os << "r,count,scaled\n";
    os << std::setprecision(17);
    for (const auto& [r, scaled] : density_profile(schedule, r_grid)) {
        os << r << ',' << std::llround(scaled / (1.0 - r)) << ',' << scaled << '\n';
    }
}

} // namespace kernelrepr::io
