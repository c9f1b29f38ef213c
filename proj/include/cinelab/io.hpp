#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cinelab/dyadic.hpp"
#include "cinelab/experiments.hpp"
#include "cinelab/fields.hpp"
#include "cinelab/furstenberg.hpp"
#include "cinelab/geometry.hpp"
#include "cinelab/intersect.hpp"

namespace cinelab::io {

using json = nlohmann::ordered_json;

json read_json_file(const std::string& path);
// Two-space indentation and a trailing newline.
void write_json_file(const json& j, const std::string& path);
void write_text_file(const std::string& text, const std::string& path);
// Creates the directory and its parents.
void ensure_directory(const std::string& path);

json to_json(const Box& box);
Box box_from_json(const json& j);

json to_json(const ChartSpec& spec);
ChartSpec chart_spec_from_json(const json& j);

// Builtin field kinds only; combinations and custom fields are not serializable.
json to_json(const ScalarField& f);
ScalarField field_from_json(const json& j, const Box& default_domain);

// Induced families are written as {"induced": {chart, Z, renormalize}}.
json to_json(const FunctionFamily& family);
FunctionFamily family_from_json(const json& j);

json to_json(const DyadicSet& set);
DyadicSet set_from_json(const json& j);
// .json files hold the JSON form; anything else is the binary format.
DyadicSet read_set_file(const std::string& path);
void write_set_file(const DyadicSet& set, const std::string& path);

json to_json(const ConfigParams& p);
ConfigParams params_from_json(const json& j);

// Directory with family.json, params.json and set_<i>.bin.
void save_configuration(const Configuration& cfg, const std::string& dir);
Configuration load_configuration(const std::string& dir, const BuildOptions& opts = {});

json to_json(const PointSetSpec& spec);
PointSetSpec point_set_from_json(const json& j);
json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const json& j);

json to_json(const CurvatureReport& r);
json to_json(const CinematicReport& r);
json to_json(const BoundTable& t);
json to_json(const EnergyReport& r);
json to_json(const SpreadReport& r);
json to_json(const Configuration& cfg);  // summary, without the sets
json to_json(const IncidenceReport& r);
json to_json(const DimensionEstimate& e);
json to_json(const ProjectionReport& r);
json to_json(const std::vector<SweepRow>& rows);

}  // namespace cinelab::io
