#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kernelrepr/io.hpp"

using namespace kernelrepr;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::StartsWith;
using cd = std::complex<double>;

TEST_CASE("series JSON round trip")
{
    Series::Coeffs c(3);
    c << cd(1.0, 0.5), cd(-0.1, 0.0), cd(1.0 / 3.0, -2.0);
    const Series f(c, 1e-9);
    const auto j = io::to_json(f);
    CHECK(j.at("coeffs").size() == 3);
    CHECK(j.at("coeffs")[0] == io::json::array({1.0, 0.5}));
    const auto g = io::series_from_json(j);
    CHECK(g.coeffs() == f.coeffs());
    CHECK(g.tail_bound() == f.tail_bound());
    CHECK_THROWS(io::series_from_json(io::json{{"coeffs", io::json::array()}}));
}

TEST_CASE("function presets")
{
    const auto g = io::parse_function("geom(0.7)");
    CHECK(g[0] == cd(1.0));
    CHECK(std::abs(g[3] - cd(0.343)) <= 1e-15);
    CHECK(std::pow(0.7, static_cast<double>(g.degree() + 1)) / 0.3 <= 1e-17);

    const auto p = io::parse_function("poly(1, 2.5, -3)");
    CHECK(p.degree() == 2);
    CHECK(p[2] == cd(-3.0));
    CHECK(io::parse_function("poly([0, 1])")[1] == cd(1.0));

    const auto e = io::parse_function("expz");
    CHECK(std::abs(eval(e, cd(1.0)) - std::exp(1.0)) <= 1e-15);

    const auto s = io::parse_function("powerlaw(2)", 100);
    CHECK(s.degree() == 100);
    CHECK(s[3] == cd(1.0 / 16.0));

    CHECK(io::parse_function("geom(0.5)", 10).degree() == 10);
    CHECK_THROWS_AS(io::parse_function("geom(1.5)"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_function("geom(x)"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_function("sinz"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_function("powerlaw(0.4)"), std::invalid_argument);
}

TEST_CASE("function from a file")
{
    const auto path = std::filesystem::temp_directory_path() / "kernelrepr_io_series.json";
    io::write_json_file(path, io::to_json(io::parse_function("poly(1, 2)")));
    CHECK(io::parse_function(path.string())[1] == cd(2.0));
    std::filesystem::remove(path);
}

TEST_CASE("space tags parse")
{
    CHECK(io::parse_space("h2") == Space::hardy(2.0));
    CHECK(io::parse_space("h1") == Space::hardy(1.0));
    CHECK(io::parse_space("hp:3") == Space::hardy(3.0));
    CHECK(io::parse_space("diskalg") == Space::disk_algebra());
    CHECK(io::parse_space("dirichlet") == Space::weighted(Weight::dirichlet()));
    CHECK(io::parse_space("bergman:1.5") == Space::weighted(Weight::bergman(1.5)));
    CHECK(io::parse_space("hardy") == Space::weighted(Weight::hardy()));
    CHECK_THROWS_AS(io::parse_space("hp:0.5"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_space("sobolev"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_space("bergman:-2"), std::invalid_argument);

    const auto path = std::filesystem::temp_directory_path() / "kernelrepr_io_table.json";
    io::write_json_file(path, io::json::array({1.0, 2.0, 3.0}));
    const auto t = io::parse_space("table:" + path.string());
    CHECK(t.weight().table_values() == std::vector<double>{1.0, 2.0, 3.0});
    std::filesystem::remove(path);
}

TEST_CASE("weight and space JSON round trip")
{
    for (const auto& w : {Weight::hardy(), Weight::dirichlet(), Weight::bergman(0.25), Weight::table({1.0, 0.5})}) {
        CHECK(io::weight_from_json(io::to_json(w)) == w);
        CHECK(io::space_from_json(io::to_json(Space::weighted(w))) == Space::weighted(w));
    }
    CHECK(io::space_from_json(io::to_json(Space::hardy(1.5))) == Space::hardy(1.5));
    CHECK_THROWS(io::weight_from_json(io::json{{"kind", "sobolev"}}));
}

TEST_CASE("schedule JSON round trip")
{
    const auto hp = build_hp_schedule(6.0, default_radii(5), PhaseMode::random, 9);
    const auto a = io::schedule_from_json(io::to_json(hp));
    REQUIRE(a.layers.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(layer_points(a.layers[k]) == layer_points(hp.layers[k]));
    }
    const auto j = io::to_json(hp);
    CHECK(j.at("kind") == "hp");
    CHECK(j.at("M") == 6.0);
    CHECK(j.at("layers")[0].at("n") == 12);
    CHECK(j.at("layers")[0].at("phases") == "random");

    const auto w = build_weighted_schedule(Weight::dirichlet(), default_radii(3), 2.0);
    const auto b = io::schedule_from_json(io::to_json(w));
    CHECK(b.layers[2].radii == w.layers[2].radii);

    auto broken = io::to_json(hp);
    broken["layers"][1]["r"] = 0.1;
    CHECK_THROWS_AS(io::schedule_from_json(broken), std::invalid_argument);
}

TEST_CASE("decomposition JSON round trip")
{
    Decomposition d;
    d.space = Space::weighted(Weight::bergman(1.0));
    d.schedule_ref = "test";
    d.degree = 12;
    d.residual_norms = {1.0, 0.25};
    KernelAtom a;
    a.node = cd(0.5, -0.25);
    a.weight = cd(1.0 / 3.0, 0.1);
    a.kernel = KernelKind::beta;
    a.layer = 2;
    a.ring = 1;
    a.angle = 7;
    d.atoms.push_back(a);
    const auto j = io::to_json(d);
    CHECK(j.at("atoms")[0].at("node") == io::json::array({0.5, -0.25}));
    CHECK(j.at("atoms")[0].at("l") == 1);
    const auto e = io::decomposition_from_json(j);
    CHECK(e.space == d.space);
    CHECK(e.atoms[0].node == a.node);
    CHECK(e.atoms[0].weight == a.weight);
    CHECK(e.atoms[0].kernel == KernelKind::beta);
    CHECK(e.atoms[0].angle == 7);
    CHECK(e.residual_norms == d.residual_norms);
    CHECK(io::to_json(e).dump() == j.dump());

    auto outside = j;
    outside["atoms"][0]["node"] = io::json::array({1.0, 0.0});
    CHECK_THROWS_AS(io::decomposition_from_json(outside), std::invalid_argument);
}

TEST_CASE("CSV output carries a header and a timestamp comment")
{
    ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
    CHECK(io::timestamp_comment() == "# generated 1970-01-02T00:00:00Z");

    ConvergenceReport report;
    LayerReport row;
    row.step = 1;
    row.k_selected = 5;
    row.ratio = 0.5;
    report.layers.push_back(row);
    std::ostringstream os;
    io::write_report_csv(os, report);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK_THAT(line, StartsWith("# generated "));
    std::getline(in, line);
    CHECK(line == "layer,k_selected,delta,ratio,bound,prefix_max");
    std::getline(in, line);
    CHECK_THAT(line, StartsWith("1,5,0,0.5,"));

    std::ostringstream dens;
    const auto s = build_hp_schedule(6.0, default_radii(3));
    const std::vector<double> grid = {0.6, 0.8, 0.9};
    io::write_density_csv(dens, s, grid);
    CHECK_THAT(dens.str(), ContainsSubstring("r,count,scaled\n"));
    CHECK_THAT(dens.str(), ContainsSubstring("0.90000000000000002,84,"));
    ::unsetenv("SOURCE_DATE_EPOCH");
}
