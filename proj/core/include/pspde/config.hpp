#pragma once

#include "pspde/ensemble.hpp"
#include "pspde/schemes.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pspde
{

inline constexpr int run_config_schema_version = 1;

struct MeshSpec
{
  std::string generator = "rect"; // rect | l_shape | file
  int nx = 8;
  int ny = 8;
  Rect bounds;
  double side = 5.0;
  int n = 0;                       // l_shape resolution; 0: derive from target_h
  std::optional<double> target_h;  // l_shape only
  std::string path;                // file only, relative to the config file
};

/// Named analytic field with an optional vector parameter.
///   zero; constant (value); ramp (t * value, forcing only);
///   vortex (value[0] * divergence-free bump on the bounding box).
struct FieldSpec
{
  std::string id = "zero";
  Vec2 value{0.0, 0.0};
};

/// A number or the recipe h^{2 + delta} (epsilon) / eps^{1 + delta} (k).
struct RecipeValue
{
  bool recipe = false;
  double value = 0.0;
  double delta = 0.1;
  std::optional<double> h; // epsilon recipe only; empty: mesh h_max
};

struct NoiseSpec
{
  bool enabled = true;
  int J = 5;
  std::string lambda = "inverse-square-sum"; // or custom
  std::vector<double> lambda_table;
  double domain_scale = 5.0;
  std::string gamma = "additive"; // or linear
  double amplitude = 1.0;
  double linear_c = 0.0;
};

struct OutputSpec
{
  std::string directory = "out";
  int snapshot_stride = 0;
  bool vtk = false;
};

struct EnsembleSpec
{
  int samples = 100;
  std::string reference; // empty: the saddle counterpart of the scheme
  StepMode mode = StepMode::fixed_k;
  std::vector<double> eps_list; // empty: presets from scheme.epsilon
  int presets = 5;
};

struct AuditSpec
{
  std::vector<double> levels{0.5, 0.25, 0.125};
  double delta = 0.1;
  int samples = 20;
};

/// File-level experiment description (JSON, versioned, unknown keys rejected).
struct RunConfig
{
  int schema_version = run_config_schema_version;
  MeshSpec mesh;
  int velocity_degree = 2;
  int pressure_degree = 1;

  double nu = 1.0;
  double T = 1.0;
  FieldSpec forcing;
  std::optional<Vec2> boundary_default = Vec2{0.0, 0.0};
  std::map<int, Vec2> boundary;
  FieldSpec initial_velocity;
  FieldSpec initial_pressure;

  SchemeKind kind = SchemeKind::penalty_linear;
  RecipeValue epsilon{false, 1e-3, 0.1, std::nullopt};
  RecipeValue k{false, 1e-3, 0.1, std::nullopt};
  bool convection = true;

  NoiseSpec noise;
  PicardOptions picard;
  LinearSolverOptions linear;
  OutputSpec outputs;
  std::uint64_t base_seed = 0;
  EnsembleSpec ensemble;
  AuditSpec audit;

  std::filesystem::path base_dir; // directory of the source file, not serialized
};

/// Parses JSON text. Errors are ConfigError messages prefixed with the
/// offending field path, e.g. "scheme.epsilon: ...".
RunConfig parse_run_config(std::string const & text);
RunConfig load_run_config(std::filesystem::path const & path);
std::string serialize_run_config(RunConfig const & config);

std::shared_ptr<Mesh const> build_mesh(RunConfig const & config);

/// Mesh generator of the config at a requested h_max (for audits).
MeshForSize mesh_for_size(RunConfig const & config);

/// Resolves recipes against the mesh and assembles a validated SchemeConfig.
SchemeConfig make_scheme_config(RunConfig const & config, Mesh const & mesh);

std::shared_ptr<NoiseModel const> make_noise(NoiseSpec const & spec);
VectorField make_field(FieldSpec const & spec, Rect const & box, std::string const & where);
TimeField make_forcing(FieldSpec const & spec, Rect const & box);

/// The exact-constraint scheme a penalty scheme is compared against.
SchemeKind reference_kind(RunConfig const & config);

} // namespace pspde
