#ifndef KERNELREPR_IO_HPP
#define KERNELREPR_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kernelrepr/engine.hpp"
#include "kernelrepr/lattice.hpp"
#include "kernelrepr/series.hpp"

namespace kernelrepr::io {

using json = nlohmann::json;

json to_json(const Series& f);
Series series_from_json(const json& j);

json to_json(const Weight& w);
Weight weight_from_json(const json& j);

/// {"tag": ..., "weight": {...}} so table weights survive a round trip.
json to_json(const Space& space);
Space space_from_json(const json& j);

json to_json(const LatticeSchedule& s);
LatticeSchedule schedule_from_json(const json& j);

json to_json(const Decomposition& d);
Decomposition decomposition_from_json(const json& j);

/// geom(c), poly(a0, a1, ...), expz, powerlaw(s) or a path to a series JSON
/// file. degree = 0 picks a degree whose dropped tail is below 1e-17.
Series parse_function(const std::string& spec, std::size_t degree = 0);

/// h2 | hp:p | h1 | diskalg | hardy | dirichlet | bergman:alpha | table:file
Space parse_space(const std::string& spec);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

/// "# generated <ISO-8601 UTC>", pinned by SOURCE_DATE_EPOCH when set.
std::string timestamp_comment();

void write_report_csv(std::ostream& os, const ConvergenceReport& report);
/// Columns r, count, scaled with scaled = (1 - r) count.
void write_density_csv(std::ostream& os, const LatticeSchedule& schedule, std::span<const double> r_grid);

} // namespace kernelrepr::io

#endif // KERNELREPR_IO_HPP
