#include "pspde/config.hpp"

#include "pspde/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace pspde
{

using nlohmann::json;

namespace
{

/// Typed access to one JSON object with field-path error messages.
class Obj
{
public:
  Obj(json const & j, std::string path)
    : j_(j)
    , path_(std::move(path))
  {
    if (!j_.is_object())
      fail("", "expected an object");
  }

  void allow(std::initializer_list<char const *> keys) const
  {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto const & [key, value] : j_.items())
      if (!ok.count(key))
        fail(key, "unknown key");
  }

  bool has(char const * key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  json const & at(char const * key) const { return j_.at(key); }
  std::string path(char const * key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(std::string const & key, std::string const & msg) const
  {
    std::string p = path_;
    if (!key.empty())
      p = p.empty() ? key : p + "." + key;
    throw ConfigError((p.empty() ? std::string("config") : p) + ": " + msg);
  }

  double number(char const * key, double fallback) const
  {
    if (!has(key))
      return fallback;
    if (!at(key).is_number())
      fail(key, "expected a number");
    return at(key).get<double>();
  }

  double positive(char const * key, double fallback) const
  {
    double const v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v))
      fail(key, "must be positive");
    return v;
  }

  int integer(char const * key, int fallback) const
  {
    if (!has(key))
      return fallback;
    if (!at(key).is_number_integer())
      fail(key, "expected an integer");
    return at(key).get<int>();
  }

  std::uint64_t unsigned64(char const * key, std::uint64_t fallback) const
  {
    if (!has(key))
      return fallback;
    if (!at(key).is_number_unsigned() && !(at(key).is_number_integer() && at(key).get<std::int64_t>() >= 0))
      fail(key, "expected a non-negative integer");
    return at(key).get<std::uint64_t>();
  }

  bool boolean(char const * key, bool fallback) const
  {
    if (!has(key))
      return fallback;
    if (!at(key).is_boolean())
      fail(key, "expected true or false");
    return at(key).get<bool>();
  }

  std::string string(char const * key, std::string const & fallback) const
  {
    if (!has(key))
      return fallback;
    if (!at(key).is_string())
      fail(key, "expected a string");
    return at(key).get<std::string>();
  }

  Vec2 vec2(char const * key, Vec2 fallback) const
  {
    if (!has(key))
      return fallback;
    return to_vec2(at(key), path(key));
  }

  std::vector<double> numbers(char const * key) const
  {
    std::vector<double> out;
    if (!has(key))
      return out;
    if (!at(key).is_array())
      fail(key, "expected an array of numbers");
    for (auto const & v : at(key))
    {
      if (!v.is_number())
        fail(key, "expected an array of numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  static Vec2 to_vec2(json const & v, std::string const & path)
  {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(path + ": expected a 2-vector [x, y]");
    return {v[0].get<double>(), v[1].get<double>()};
  }

private:
  json const & j_;
  std::string path_;
};

FieldSpec parse_field(json const & j, std::string const & path)
{
  FieldSpec f;
  if (j.is_string())
  {
    f.id = j.get<std::string>();
    return f;
  }
  Obj o(j, path);
  o.allow({"id", "value"});
  f.id = o.string("id", "zero");
  f.value = o.vec2("value", {0.0, 0.0});
  return f;
}

RecipeValue parse_recipe(Obj const & parent, char const * key, RecipeValue fallback, bool with_h)
{
  if (!parent.has(key))
    return fallback;
  json const & j = parent.at(key);
  RecipeValue r;
  if (j.is_number())
  {
    r.value = j.get<double>();
    if (!(r.value > 0.0))
      parent.fail(key, "must be positive");
    return r;
  }
  Obj o(j, parent.path(key));
  if (with_h)
    o.allow({"recipe", "delta", "h"});
  else
    o.allow({"recipe", "delta"});
  r.recipe = true;
  if (o.string("recipe", with_h ? "h^(2+delta)" : "eps^(1+delta)") != (with_h ? "h^(2+delta)" : "eps^(1+delta)"))
    o.fail("recipe", with_h ? "expected \"h^(2+delta)\"" : "expected \"eps^(1+delta)\"");
  r.delta = o.number("delta", 0.1);
  if (!(r.delta >= 0.0))
    o.fail("delta", "must be >= 0");
  if (with_h && o.has("h"))
  {
    if (o.at("h").is_string() && o.at("h").get<std::string>() == "mesh")
      r.h.reset();
    else
      r.h = o.positive("h", 1.0);
  }
  return r;
}

json field_json(FieldSpec const & f)
{
  return json{{"id", f.id}, {"value", {f.value[0], f.value[1]}}};
}

json recipe_json(RecipeValue const & r, bool with_h)
{
  if (!r.recipe)
    return r.value;
  json j{{"recipe", with_h ? "h^(2+delta)" : "eps^(1+delta)"}, {"delta", r.delta}};
  if (with_h)
    j["h"] = r.h ? json(*r.h) : json("mesh");
  return j;
}

std::string method_name(LinearMethod m)
{
  return m == LinearMethod::direct_lu ? "direct-lu" : "iterative";
}

} // namespace

RunConfig parse_run_config(std::string const & text)
{
  json root;
  try
  {
    root = json::parse(text);
  }
  catch (json::parse_error const & e)
  {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  RunConfig c;
  Obj top(root, "");
  top.allow({"schema_version", "mesh", "elements", "physics", "scheme", "noise", "solver", "outputs", "seeds",
             "ensemble", "audit"});
  if (!top.has("schema_version"))
    top.fail("schema_version", "missing");
  c.schema_version = top.integer("schema_version", 0);
  if (c.schema_version != run_config_schema_version)
    top.fail("schema_version", "unsupported version " + std::to_string(c.schema_version) + " (expected " +
                                   std::to_string(run_config_schema_version) + ")");

  if (top.has("mesh"))
  {
    Obj m(top.at("mesh"), "mesh");
    m.allow({"generator", "nx", "ny", "bounds", "side", "n", "target_h", "path"});
    c.mesh.generator = m.string("generator", "rect");
    if (c.mesh.generator == "rect")
    {
      c.mesh.nx = m.integer("nx", 8);
      c.mesh.ny = m.integer("ny", 8);
      if (c.mesh.nx < 1 || c.mesh.ny < 1)
        m.fail("nx", "nx and ny must be >= 1");
      auto b = m.numbers("bounds");
      if (!b.empty())
      {
        if (b.size() != 4)
          m.fail("bounds", "expected [x0, y0, x1, y1]");
        c.mesh.bounds = {b[0], b[1], b[2], b[3]};
      }
    }
    else if (c.mesh.generator == "l_shape")
    {
      c.mesh.side = m.positive("side", 5.0);
      c.mesh.n = m.integer("n", 0);
      if (m.has("target_h"))
        c.mesh.target_h = m.positive("target_h", 1.0);
      if (c.mesh.n == 0 && !c.mesh.target_h)
        m.fail("n", "give n or target_h");
    }
    else if (c.mesh.generator == "file")
    {
      c.mesh.path = m.string("path", "");
      if (c.mesh.path.empty())
        m.fail("path", "missing");
    }
    else
      m.fail("generator", "unknown generator \"" + c.mesh.generator + "\" (rect, l_shape, file)");
  }

  if (top.has("elements"))
  {
    Obj e(top.at("elements"), "elements");
    e.allow({"velocity_degree", "pressure_degree"});
    c.velocity_degree = e.integer("velocity_degree", 2);
    c.pressure_degree = e.integer("pressure_degree", 1);
    for (auto [key, v] : {std::pair{"velocity_degree", c.velocity_degree}, std::pair{"pressure_degree", c.pressure_degree}})
      if (v != 1 && v != 2)
        e.fail(key, "degree must be 1 or 2");
  }

  if (top.has("physics"))
  {
    Obj p(top.at("physics"), "physics");
    p.allow({"nu", "T", "forcing", "boundary", "initial_velocity", "initial_pressure"});
    c.nu = p.positive("nu", 1.0);
    c.T = p.positive("T", 1.0);
    if (p.has("forcing"))
      c.forcing = parse_field(p.at("forcing"), p.path("forcing"));
    if (p.has("initial_velocity"))
      c.initial_velocity = parse_field(p.at("initial_velocity"), p.path("initial_velocity"));
    if (p.has("initial_pressure"))
      c.initial_pressure = parse_field(p.at("initial_pressure"), p.path("initial_pressure"));
    if (p.has("boundary"))
    {
      Obj b(p.at("boundary"), p.path("boundary"));
      b.allow({"default", "tags"});
      if (b.has("default"))
        c.boundary_default = b.vec2("default", {0.0, 0.0});
      else if (p.at("boundary").contains("default"))
        c.boundary_default.reset(); // explicit null: untagged edges stay free
      if (b.has("tags"))
      {
        Obj t(b.at("tags"), b.path("tags"));
        for (auto const & [key, value] : b.at("tags").items())
        {
          int tag = 0;
          try
          {
            std::size_t used = 0;
            tag = std::stoi(key, &used);
            if (used != key.size() || tag < 0)
              throw std::invalid_argument(key);
          }
          catch (std::exception const &)
          {
            t.fail(key, "boundary tags must be non-negative integers");
          }
          c.boundary[tag] = Obj::to_vec2(value, t.path(key.c_str()));
        }
      }
    }
  }

  if (top.has("scheme"))
  {
    Obj s(top.at("scheme"), "scheme");
    s.allow({"kind", "epsilon", "k", "convection"});
    try
    {
      c.kind = scheme_kind_from_string(s.string("kind", to_string(c.kind)));
    }
    catch (ConfigError const & e)
    {
      s.fail("kind", e.what());
    }
    c.epsilon = parse_recipe(s, "epsilon", c.epsilon, true);
    if (!c.epsilon.recipe && c.epsilon.value > 1.0)
      s.fail("epsilon", "penalty scale must satisfy ε ≤ 1, got " + std::to_string(c.epsilon.value));
    c.k = parse_recipe(s, "k", c.k, false);
    c.convection = s.boolean("convection", true);
  }

  if (top.has("noise"))
  {
    Obj n(top.at("noise"), "noise");
    n.allow({"enabled", "J", "lambda", "lambda_table", "domain_scale", "gamma", "amplitude", "linear_c"});
    c.noise.enabled = n.boolean("enabled", true);
    c.noise.J = n.integer("J", 5);
    if (c.noise.J < 1)
      n.fail("J", "must be >= 1");
    c.noise.lambda = n.string("lambda", "inverse-square-sum");
    if (c.noise.lambda != "inverse-square-sum" && c.noise.lambda != "custom")
      n.fail("lambda", "expected inverse-square-sum or custom");
    c.noise.lambda_table = n.numbers("lambda_table");
    c.noise.domain_scale = n.positive("domain_scale", 5.0);
    c.noise.gamma = n.string("gamma", "additive");
    if (c.noise.gamma != "additive" && c.noise.gamma != "linear")
      n.fail("gamma", "expected additive or linear");
    c.noise.amplitude = n.number("amplitude", 1.0);
    c.noise.linear_c = n.number("linear_c", 0.0);
  }

  if (top.has("solver"))
  {
    Obj s(top.at("solver"), "solver");
    s.allow({"picard", "linear"});
    if (s.has("picard"))
    {
      Obj p(s.at("picard"), s.path("picard"));
      p.allow({"max_iters", "tolerance"});
      c.picard.max_iters = p.integer("max_iters", 50);
      if (c.picard.max_iters < 1)
        p.fail("max_iters", "must be >= 1");
      c.picard.tolerance = p.positive("tolerance", 1e-10);
    }
    if (s.has("linear"))
    {
      Obj l(s.at("linear"), s.path("linear"));
      l.allow({"method", "tolerance"});
      auto const method = l.string("method", "direct-lu");
      if (method == "direct-lu")
        c.linear.method = LinearMethod::direct_lu;
      else if (method == "iterative")
        c.linear.method = LinearMethod::iterative;
      else
        l.fail("method", "expected direct-lu or iterative");
      c.linear.tolerance = l.positive("tolerance", 1e-9);
    }
  }

  if (top.has("outputs"))
  {
    Obj o(top.at("outputs"), "outputs");
    o.allow({"directory", "snapshot_stride", "vtk"});
    c.outputs.directory = o.string("directory", "out");
    c.outputs.snapshot_stride = o.integer("snapshot_stride", 0);
    if (c.outputs.snapshot_stride < 0)
      o.fail("snapshot_stride", "must be >= 0");
    c.outputs.vtk = o.boolean("vtk", false);
  }

  if (top.has("seeds"))
  {
    Obj s(top.at("seeds"), "seeds");
    s.allow({"base_seed"});
    c.base_seed = s.unsigned64("base_seed", 0);
  }

  if (top.has("ensemble"))
  {
    Obj e(top.at("ensemble"), "ensemble");
    e.allow({"samples", "reference", "step_mode", "eps_list", "presets"});
    c.ensemble.samples = e.integer("samples", 100);
    if (c.ensemble.samples < 1)
      e.fail("samples", "must be >= 1");
    c.ensemble.reference = e.string("reference", "");
    if (!c.ensemble.reference.empty())
    {
      try
      {
        if (is_penalty(scheme_kind_from_string(c.ensemble.reference)))
          e.fail("reference", "the reference must be a saddle scheme");
      }
      catch (ConfigError const & err)
      {
        if (std::string(err.what()).rfind("ensemble.", 0) == 0)
          throw;
        e.fail("reference", err.what());
      }
    }
    try
    {
      c.ensemble.mode = step_mode_from_string(e.string("step_mode", "fixed-k"));
    }
    catch (ConfigError const & err)
    {
      e.fail("step_mode", err.what());
    }
    c.ensemble.eps_list = e.numbers("eps_list");
    for (std::size_t i = 1; i < c.ensemble.eps_list.size(); ++i)
      if (!(c.ensemble.eps_list[i] < c.ensemble.eps_list[i - 1]))
        e.fail("eps_list", "eps list must be strictly decreasing");
    c.ensemble.presets = e.integer("presets", 5);
    if (c.ensemble.presets < 1)
      e.fail("presets", "must be >= 1");
  }

  if (top.has("audit"))
  {
    Obj a(top.at("audit"), "audit");
    a.allow({"levels", "delta", "samples"});
    if (a.has("levels"))
      c.audit.levels = a.numbers("levels");
    for (double h : c.audit.levels)
      if (!(h > 0.0))
        a.fail("levels", "mesh sizes must be positive");
    c.audit.delta = a.number("delta", 0.1);
    c.audit.samples = a.integer("samples", 20);
    if (c.audit.samples < 1)
      a.fail("samples", "must be >= 1");
  }
  return c;
}

RunConfig load_run_config(std::filesystem::path const & path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto c = parse_run_config(buf.str());
  c.base_dir = path.parent_path();
  return c;
}

std::string serialize_run_config(RunConfig const & c)
{
  json mesh{{"generator", c.mesh.generator}};
  if (c.mesh.generator == "rect")
  {
    mesh["nx"] = c.mesh.nx;
    mesh["ny"] = c.mesh.ny;
    mesh["bounds"] = {c.mesh.bounds.x0, c.mesh.bounds.y0, c.mesh.bounds.x1, c.mesh.bounds.y1};
  }
  else if (c.mesh.generator == "l_shape")
  {
    mesh["side"] = c.mesh.side;
    mesh["n"] = c.mesh.n;
    if (c.mesh.target_h)
      mesh["target_h"] = *c.mesh.target_h;
  }
  else
    mesh["path"] = c.mesh.path;

  json tags = json::object();
  for (auto const & [tag, v] : c.boundary)
    tags[std::to_string(tag)] = {v[0], v[1]};
  json boundary{{"tags", tags}};
  boundary["default"] = c.boundary_default ? json{(*c.boundary_default)[0], (*c.boundary_default)[1]} : json();

  json noise{{"enabled", c.noise.enabled},       {"J", c.noise.J},           {"lambda", c.noise.lambda},
             {"domain_scale", c.noise.domain_scale}, {"gamma", c.noise.gamma}, {"amplitude", c.noise.amplitude},
             {"linear_c", c.noise.linear_c}};
  if (!c.noise.lambda_table.empty())
    noise["lambda_table"] = c.noise.lambda_table;

  json ensemble{{"samples", c.ensemble.samples}, {"step_mode", to_string(c.ensemble.mode)},
                {"eps_list", c.ensemble.eps_list}, {"presets", c.ensemble.presets}};
  if (!c.ensemble.reference.empty())
    ensemble["reference"] = c.ensemble.reference;

  json root{
      {"schema_version", c.schema_version},
      {"mesh", mesh},
      {"elements", {{"velocity_degree", c.velocity_degree}, {"pressure_degree", c.pressure_degree}}},
      {"physics",
       {{"nu", c.nu},
        {"T", c.T},
        {"forcing", field_json(c.forcing)},
        {"boundary", boundary},
        {"initial_velocity", field_json(c.initial_velocity)},
        {"initial_pressure", field_json(c.initial_pressure)}}},
      {"scheme",
       {{"kind", to_string(c.kind)},
        {"epsilon", recipe_json(c.epsilon, true)},
        {"k", recipe_json(c.k, false)},
        {"convection", c.convection}}},
      {"noise", noise},
      {"solver",
       {{"picard", {{"max_iters", c.picard.max_iters}, {"tolerance", c.picard.tolerance}}},
        {"linear", {{"method", method_name(c.linear.method)}, {"tolerance", c.linear.tolerance}}}}},
      {"outputs",
       {{"directory", c.outputs.directory}, {"snapshot_stride", c.outputs.snapshot_stride}, {"vtk", c.outputs.vtk}}},
      {"seeds", {{"base_seed", c.base_seed}}},
      {"ensemble", ensemble},
      {"audit", {{"levels", c.audit.levels}, {"delta", c.audit.delta}, {"samples", c.audit.samples}}},
  };
  return root.dump(2) + "\n";
}

std::shared_ptr<Mesh const> build_mesh(RunConfig const & c)
{
  if (c.mesh.generator == "rect")
    return std::make_shared<Mesh const>(generate_rect_mesh(c.mesh.nx, c.mesh.ny, c.mesh.bounds));
  if (c.mesh.generator == "l_shape")
  {
    int const n = c.mesh.n > 0 ? c.mesh.n : l_shape_resolution_for(c.mesh.side, *c.mesh.target_h);
    return std::make_shared<Mesh const>(generate_l_shape(c.mesh.side, n));
  }
  auto path = std::filesystem::path(c.mesh.path);
  if (path.is_relative())
    path = c.base_dir / path;
  if (path.extension() == ".msh")
    return std::make_shared<Mesh const>(load_msh(path));
  return std::make_shared<Mesh const>(read_native_mesh(path));
}

MeshForSize mesh_for_size(RunConfig const & c)
{
  if (c.mesh.generator == "rect")
  {
    Rect const b = c.mesh.bounds;
    return [b](double h) {
      double const diag = std::hypot(b.x1 - b.x0, b.y1 - b.y0);
      int const n = std::max(1, static_cast<int>(std::ceil(diag / h - 1e-12)));
      return std::make_shared<Mesh const>(generate_rect_mesh(n, n, b));
    };
  }
  if (c.mesh.generator == "l_shape")
  {
    double const side = c.mesh.side;
    return [side](double h) { return std::make_shared<Mesh const>(generate_l_shape(side, l_shape_resolution_for(side, h))); };
  }
  throw ConfigError("mesh.generator: refinement levels need a generated mesh (rect or l_shape)");
}

std::shared_ptr<NoiseModel const> make_noise(NoiseSpec const & spec)
{
  if (!spec.enabled)
    return nullptr;
  NoiseModel::Params p;
  p.J = spec.J;
  p.lambda_kind = spec.lambda == "custom" ? LambdaKind::custom : LambdaKind::inverse_square_sum;
  p.lambda_table = spec.lambda_table;
  p.domain_scale = spec.domain_scale;
  p.gamma_kind = spec.gamma == "linear" ? GammaKind::linear : GammaKind::additive;
  p.amplitude = spec.amplitude;
  p.linear_c = spec.linear_c;
  try
  {
    return std::make_shared<NoiseModel const>(p);
  }
  catch (ConfigError const & e)
  {
    throw ConfigError(std::string("noise: ") + e.what());
  }
}

VectorField make_field(FieldSpec const & spec, Rect const & box, std::string const & where)
{
  if (spec.id == "zero")
    return {};
  if (spec.id == "constant")
  {
    Vec2 const v = spec.value;
    return [v](Point const &) { return v; };
  }
  if (spec.id == "vortex")
  {
    double const a = spec.value[0];
    double const w = box.x1 - box.x0;
    double const h = box.y1 - box.y0;
    double const pi = std::numbers::pi;
    return [=](Point const & p) {
      double const xi = std::clamp((p.x - box.x0) / w, 0.0, 1.0);
      double const eta = std::clamp((p.y - box.y0) / h, 0.0, 1.0);
      double const sx = std::sin(pi * xi);
      double const sy = std::sin(pi * eta);
      return Vec2{a * pi / h * sx * sx * std::sin(2.0 * pi * eta), -a * pi / w * std::sin(2.0 * pi * xi) * sy * sy};
    };
  }
  throw ConfigError(where + ": unknown field id \"" + spec.id + "\" (zero, constant, vortex)");
}

TimeField make_forcing(FieldSpec const & spec, Rect const & box)
{
  if (spec.id == "zero")
    return {};
  if (spec.id == "ramp")
  {
    Vec2 const v = spec.value;
    return [v](double t, Point const &) { return Vec2{t * v[0], t * v[1]}; };
  }
  auto f = make_field(spec, box, "physics.forcing");
  return [f](double, Point const & p) { return f(p); };
}

SchemeKind reference_kind(RunConfig const & c)
{
  if (!c.ensemble.reference.empty())
    return scheme_kind_from_string(c.ensemble.reference);
  return has_convection(c.kind) ? SchemeKind::saddle : SchemeKind::stokes_saddle;
}

SchemeConfig make_scheme_config(RunConfig const & c, Mesh const & mesh)
{
  SchemeConfig s;
  s.nu = c.nu;
  s.kind = c.kind;
  s.picard = c.picard;
  s.linear = c.linear;
  s.velocity_degree = c.velocity_degree;
  s.pressure_degree = c.pressure_degree;
  s.convection = c.convection;
  s.snapshot_stride = c.outputs.snapshot_stride;

  s.epsilon = c.epsilon.recipe ? std::pow(c.epsilon.h ? *c.epsilon.h : mesh.h_max(), 2.0 + c.epsilon.delta)
                               : c.epsilon.value;
  if (s.epsilon > 1.0)
    throw ConfigError("scheme.epsilon: penalty scale must satisfy ε ≤ 1, got " + std::to_string(s.epsilon));
  double const k = c.k.recipe ? std::pow(s.epsilon, 1.0 + c.k.delta) : c.k.value;
  s.set_time_grid(c.T, k);

  Rect const box = mesh.bounding_box();
  s.forcing = make_forcing(c.forcing, box);
  s.initial_velocity = make_field(c.initial_velocity, box, "physics.initial_velocity");
  s.initial_pressure = make_field(c.initial_pressure, box, "physics.initial_pressure");
  s.noise = make_noise(c.noise);

  BoundarySpec b;
  for (auto const & [tag, v] : c.boundary)
  {
    if (!mesh.has_tag(tag))
      throw ConfigError("physics.boundary.tags." + std::to_string(tag) + ": tag not present in the mesh");
    Vec2 const value = v;
    b.by_tag[tag] = [value](Point const &) { return value; };
  }
  if (c.boundary_default)
  {
    Vec2 const value = *c.boundary_default;
    b.fallback = [value](Point const &) { return value; };
  }
  s.boundary = std::move(b);
  s.validate();
  return s;
}

} // namespace pspde
