#include "helpers.hpp"

#include "pspde/config.hpp"
#include "pspde/error.hpp"
#include "pspde/output.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace pspde;

namespace
{

std::string const minimal = R"J({"schema_version": 1})J";

std::string with(std::string const & body)
{
  return R"J({"schema_version": 1, )J" + body + "}";
}

std::string message_of(std::string const & text)
{
  try
  {
    parse_run_config(text);
  }
  catch (ConfigError const & e)
  {
    return e.what();
  }
  return "";
}

std::string slurp(std::filesystem::path const & p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("defaults and required version")
{
  auto c = parse_run_config(minimal);
  CHECK(c.kind == SchemeKind::penalty_linear);
  CHECK(c.noise.J == 5);
  CHECK(c.velocity_degree == 2);
  CHECK(message_of("{}").find("schema_version") != std::string::npos);
  CHECK(message_of(R"J({"schema_version": 2})J").find("schema_version") != std::string::npos);
  CHECK_THROWS_AS(parse_run_config("{ not json"), ConfigError);
}

TEST_CASE("errors name the offending field")
{
  CHECK(message_of(with(R"J("foo": 1)J")).rfind("foo: unknown key", 0) == 0);
  CHECK(message_of(with(R"J("scheme": {"epsilon": 2.0})J")).rfind("scheme.epsilon:", 0) == 0);
  CHECK(message_of(with(R"J("scheme": {"epsilon": 2.0})J")).find("ε ≤ 1") != std::string::npos);
  CHECK(message_of(with(R"J("scheme": {"kind": "upwind"})J")).rfind("scheme.kind:", 0) == 0);
  CHECK(message_of(with(R"J("noise": {"J": 5, "colour": "red"})J")).rfind("noise.colour: unknown key", 0) == 0);
  CHECK(message_of(with(R"J("physics": {"nu": -1})J")).rfind("physics.nu:", 0) == 0);
  CHECK(message_of(with(R"J("scheme": {"k": {"recipe": "k^2"}})J")).rfind("scheme.k", 0) == 0);
}

TEST_CASE("serialization round trip")
{
  auto c = parse_run_config(with(R"J(
    "mesh": {"generator": "l_shape", "side": 4.0, "n": 8},
    "physics": {"nu": 0.5, "T": 0.3, "forcing": {"id": "ramp", "value": [1.0, -2.0]},
                "boundary": {"default": null, "tags": {"10": [1.0, 0.0]}}},
    "scheme": {"kind": "saddle", "epsilon": {"recipe": "h^(2+delta)", "delta": 0.2, "h": "mesh"},
               "k": {"recipe": "eps^(1+delta)", "delta": 0.3}},
    "noise": {"J": 3, "gamma": "linear", "linear_c": 0.25},
    "solver": {"picard": {"max_iters": 7, "tolerance": 1e-9}, "linear": {"method": "iterative"}},
    "seeds": {"base_seed": 123456789012},
    "ensemble": {"samples": 10, "step_mode": "recipe", "eps_list": [0.1, 0.01]},
    "audit": {"levels": [0.4, 0.2], "samples": 3}
  )J"));
  CHECK(c.mesh.generator == "l_shape");
  CHECK(!c.boundary_default);
  CHECK(c.boundary.at(10)[0] == 1.0);
  CHECK(c.epsilon.recipe);
  CHECK(!c.epsilon.h);
  CHECK(c.k.delta == 0.3);
  CHECK(c.picard.max_iters == 7);
  CHECK(c.linear.method == LinearMethod::iterative);
  CHECK(c.base_seed == 123456789012ULL);
  CHECK(c.ensemble.mode == StepMode::recipe);

  auto const text = serialize_run_config(c);
  auto again = parse_run_config(text);
  CHECK(serialize_run_config(again) == text);
  CHECK(again.forcing.id == "ramp");
  CHECK(again.forcing.value[1] == -2.0);
  CHECK(again.noise.linear_c == 0.25);
  CHECK(again.audit.levels == std::vector<double>{0.4, 0.2});
}

TEST_CASE("recipes resolve against the mesh")
{
  auto c = parse_run_config(with(R"J(
    "mesh": {"generator": "rect", "nx": 4, "ny": 4},
    "physics": {"T": 0.1},
    "scheme": {"epsilon": {"recipe": "h^(2+delta)", "delta": 0.1, "h": "mesh"},
               "k": {"recipe": "eps^(1+delta)", "delta": 0.1}})J"));
  auto mesh = build_mesh(c);
  auto s = make_scheme_config(c, *mesh);
  double const h = std::sqrt(2.0) / 4.0;
  double const eps = std::pow(h, 2.1);
  CHECK(s.epsilon == doctest::Approx(eps).epsilon(1e-12));
  int const M = static_cast<int>(std::lround(0.1 / std::pow(eps, 1.1)));
  CHECK(s.M == M);
  CHECK(s.k * s.M == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("bundled configurations")
{
  std::filesystem::path const dir = PSPDE_SOURCE_DIR "/configs";
  int seen = 0;
  for (auto const & entry : std::filesystem::directory_iterator(dir))
  {
    if (entry.path().extension() != ".json")
      continue;
    CAPTURE(entry.path().string());
    auto c = load_run_config(entry.path());
    CHECK(c.base_dir == dir);
    CHECK_NOTHROW(serialize_run_config(c));
    ++seen;
  }
  CHECK(seen >= 3);

  // eps = 0.16^2.1 and k = eps^1.1 on T = 1
  auto paper = load_run_config(dir / "paper_l_shape.json");
  auto mesh = build_mesh(paper);
  auto s = make_scheme_config(paper, *mesh);
  CHECK(s.epsilon == doctest::Approx(0.021307).epsilon(1e-4));
  CHECK(s.k == doctest::Approx(1.0 / 69.0).epsilon(1e-12));
  CHECK(s.M == 69);
  CHECK(s.kind == SchemeKind::penalty_linear);
  CHECK(reference_kind(paper) == SchemeKind::saddle);
  CHECK(s.noise);
  CHECK(s.noise->lambda(1, 1) == 0.25);
}

TEST_CASE("fields and forcing")
{
  Rect box{0.0, 0.0, 1.0, 2.0};
  auto zero = make_field({"zero", {}}, box, "physics.initial_velocity");
  CHECK(!zero); // empty field: the schemes treat it as zero
  auto constant = make_field({"constant", {1.5, -0.5}}, box, "physics.initial_velocity");
  CHECK(constant({0.3, 0.4})[1] == -0.5);
  auto ramp = make_forcing({"ramp", {2.0, 0.0}}, box);
  CHECK(ramp(0.25, {0.1, 0.1})[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(make_field({"swirl", {}}, box, "physics.initial_velocity"), ConfigError);

  // the vortex bump is divergence free: central differences
  auto vortex = make_field({"vortex", {1.0, 0.0}}, box, "physics.initial_velocity");
  double const d = 1e-5;
  for (Point p : {Point{0.3, 0.7}, Point{0.6, 1.2}, Point{0.45, 0.2}})
  {
    double const div = (vortex({p.x + d, p.y})[0] - vortex({p.x - d, p.y})[0]) / (2 * d) +
                       (vortex({p.x, p.y + d})[1] - vortex({p.x, p.y - d})[1]) / (2 * d);
    CHECK(std::abs(div) <= 1e-6);
  }
}

TEST_CASE("atomic writes replace the whole file")
{
  auto p = testing::temp_path("atomic/out.txt");
  std::filesystem::remove_all(p.parent_path());
  write_file_atomically(p, "first version, longer text");
  CHECK(slurp(p) == "first version, longer text");
  write_file_atomically(p, "second");
  CHECK(slurp(p) == "second");
  int others = 0;
  for ([[maybe_unused]] auto const & e : std::filesystem::directory_iterator(p.parent_path()))
    ++others;
  CHECK(others == 1);
}
