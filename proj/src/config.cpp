#include "callias/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "callias/errors.hpp"

namespace callias::config {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw SchemaError(path.empty() ? msg : path + ": " + msg);
}

// Typed access to one TOML table; remembers which keys were read so that
// leftovers can be rejected.
class Section {
 public:
  Section(const toml::table& t, std::string path) : t_(&t), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool has(const std::string& k) const { return t_->contains(k); }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const toml::node* node(const std::string& k) {
    used_.insert(k);
    return t_->get(k);
  }

  double number(const std::string& k, std::optional<double> def = std::nullopt) {
    const toml::node* n = node(k);
    if (!n) {
      if (def) return *def;
      fail(key(k), "missing required number");
    }
    if (auto v = n->value_exact<double>()) return *v;
    if (auto v = n->value_exact<int64_t>()) return static_cast<double>(*v);
    fail(key(k), "expected a number");
  }

  std::optional<double> opt_number(const std::string& k) {
    if (!has(k)) {
      used_.insert(k);
      return std::nullopt;
    }
    return number(k);
  }

  long long integer(const std::string& k, std::optional<long long> def = std::nullopt) {
    const toml::node* n = node(k);
    if (!n) {
      if (def) return *def;
      fail(key(k), "missing required integer");
    }
    if (auto v = n->value_exact<int64_t>()) return *v;
    fail(key(k), "expected an integer");
  }

  std::string str(const std::string& k, std::optional<std::string> def = std::nullopt) {
    const toml::node* n = node(k);
    if (!n) {
      if (def) return *def;
      fail(key(k), "missing required string");
    }
    if (auto v = n->value_exact<std::string>()) return *v;
    fail(key(k), "expected a string");
  }

  bool boolean(const std::string& k, bool def) {
    const toml::node* n = node(k);
    if (!n) return def;
    if (auto v = n->value_exact<bool>()) return *v;
    fail(key(k), "expected a boolean");
  }

  const toml::array* array(const std::string& k) {
    const toml::node* n = node(k);
    if (!n) return nullptr;
    if (!n->is_array()) fail(key(k), "expected an array");
    return n->as_array();
  }

  std::vector<double> numbers(const std::string& k) {
    std::vector<double> out;
    if (const toml::array* a = array(k))
      for (std::size_t i = 0; i < a->size(); ++i) {
        const toml::node& e = *a->get(i);
        if (auto v = e.value_exact<double>())
          out.push_back(*v);
        else if (auto w = e.value_exact<int64_t>())
          out.push_back(static_cast<double>(*w));
        else
          fail(key(k) + "[" + std::to_string(i) + "]", "expected a number");
      }
    return out;
  }

  std::vector<long long> integers(const std::string& k) {
    std::vector<long long> out;
    if (const toml::array* a = array(k))
      for (std::size_t i = 0; i < a->size(); ++i) {
        auto v = a->get(i)->value_exact<int64_t>();
        if (!v) fail(key(k) + "[" + std::to_string(i) + "]", "expected an integer");
        out.push_back(*v);
      }
    return out;
  }

  std::vector<std::string> strings(const std::string& k) {
    std::vector<std::string> out;
    if (const toml::array* a = array(k))
      for (std::size_t i = 0; i < a->size(); ++i) {
        auto v = a->get(i)->value_exact<std::string>();
        if (!v) fail(key(k) + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back(*v);
      }
    return out;
  }

  std::optional<Section> table(const std::string& k) {
    const toml::node* n = node(k);
    if (!n) return std::nullopt;
    if (!n->is_table()) fail(key(k), "expected a table");
    return Section(*n->as_table(), key(k));
  }

  Section require_table(const std::string& k) {
    auto t = table(k);
    if (!t) fail(key(k), "missing required table");
    return *t;
  }

  std::vector<std::pair<std::string, Section>> subtables() {
    std::vector<std::pair<std::string, Section>> out;
    for (const auto& [k, v] : *t_) {
      const std::string name(k.str());
      used_.insert(name);
      if (!v.is_table()) fail(key(name), "expected a table");
      out.emplace_back(name, Section(*v.as_table(), key(name)));
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, v] : *t_) {
      (void)v;
      if (!used_.count(std::string(k.str()))) fail(key(std::string(k.str())), "unknown key");
    }
  }

 private:
  const toml::table* t_;
  std::string path_;
  std::set<std::string> used_;
};

Index to_index(long long v, const std::string& path) {
  if (v < 0) fail(path, "must be non-negative");
  return static_cast<Index>(v);
}

SliceSpec parse_slice(Section s) {
  SliceSpec spec;
  const std::string kind = s.str("kind");
  spec.fiber_rank = static_cast<int>(s.integer("fiber_rank", 2));
  if (kind == "points") {
    spec.geometry = PointsSpec{to_index(s.integer("count", 1), s.key("count"))};
  } else if (kind == "plane") {
    PlaneSpec p;
    const auto r = s.opt_number("radius");
    const auto h = s.opt_number("h");
    p.rx = s.number("rx", r ? *r : 4.0);
    p.ry = s.number("ry", r ? *r : p.rx);
    p.hx = s.number("hx", h ? *h : 0.25);
    p.hy = s.number("hy", h ? *h : p.hx);
    spec.geometry = p;
  } else {
    fail(s.key("kind"), "unknown slice kind '" + kind + "' (points, plane)");
  }
  s.finish();
  return spec;
}

const std::map<std::string, std::vector<std::string>>& potential_params() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"constant", {"value"}},
      {"quadratic_bowl", {"scale", "cx", "cy"}},
      {"linear_mass", {"slope", "x0"}},
      {"plateau", {"inner", "outer", "r0", "r1", "cx", "cy"}},
      {"tabulated", {}},
      {"diagonal", {}}};
  return m;
}

PotentialDef parse_potential(Section s) {
  PotentialDef p;
  p.kind = s.str("kind");
  auto it = potential_params().find(p.kind);
  if (it == potential_params().end())
    fail(s.key("kind"), "unknown potential '" + p.kind +
                            "' (constant, quadratic_bowl, linear_mass, plateau, tabulated, diagonal)");
  for (const auto& k : it->second)
    if (s.has(k)) p.params[k] = s.number(k);
  if (p.kind == "tabulated" || p.kind == "diagonal") {
    p.values = s.numbers("values");
    if (p.kind == "tabulated") p.file = s.str("file", "");
    if (p.values.empty() && p.file.empty()) fail(s.path(), "needs values" + std::string(p.kind == "tabulated" ? " or file" : ""));
    if (!p.values.empty() && !p.file.empty()) fail(s.path(), "give either values or file, not both");
  }
  s.finish();
  return p;
}

PatchDef parse_patch(Section& s, const SliceSpec& slice, double* tau_begin = nullptr, double* tau_end = nullptr) {
  PatchDef p;
  if (s.has("box")) {
    const auto box = s.integers("box");
    if (box.size() != 4) s.finish(), fail(s.key("box"), "expected [ix0, ix1, iy0, iy1]");
    const double v = s.number("value");
    BoundarySlice sl = BoundarySlice::make(slice);
    for (long long iy = box[2]; iy <= box[3]; ++iy)
      for (long long ix = box[0]; ix <= box[1]; ++ix) {
        if (ix < 0 || iy < 0 || ix >= sl.nx() || iy >= sl.ny()) fail(s.key("box"), "outside the slice");
        p.sites.push_back(sl.site_at(ix, iy));
        p.values.push_back(v);
      }
  } else {
    for (long long x : s.integers("sites")) p.sites.push_back(to_index(x, s.key("sites")));
    p.values = s.numbers("values");
    if (p.sites.size() != p.values.size()) fail(s.path(), "sites and values differ in length");
  }
  if (tau_begin) {
    const auto tau = s.numbers("tau");
    if (tau.size() == 2) {
      *tau_begin = tau[0];
      *tau_end = tau[1];
    } else if (!tau.empty()) {
      fail(s.key("tau"), "expected [begin, end]");
    }
  }
  if (p.sites.empty()) fail(s.path(), "empty patch");
  s.finish();
  return p;
}

OperatorDef parse_operator(const std::string& name, Section s) {
  OperatorDef d;
  d.name = name;
  d.slice = parse_slice(s.require_table("slice"));
  d.potential = parse_potential(s.require_table("potential"));
  d.mass = s.number("mass", 0.0);
  if (auto p = s.table("patch")) d.patch = parse_patch(*p, d.slice);
  if (const toml::array* a = s.array("dirac")) {
    if (!std::holds_alternative<PointsSpec>(d.slice.geometry)) fail(s.key("dirac"), "only for points slices");
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string path = s.key("dirac") + "[" + std::to_string(i) + "]";
      const toml::array* e = a->get(i)->as_array();
      if (!e || e->size() != 4) fail(path, "expected [row, col, re, im]");
      auto r = e->get(0)->value_exact<int64_t>(), c = e->get(1)->value_exact<int64_t>();
      auto re = e->get(2)->value<double>(), im = e->get(3)->value<double>();
      if (!r || !c || !re || !im) fail(path, "expected [row, col, re, im]");
      d.dirac.push_back({to_index(*r, path), to_index(*c, path), cplx(*re, *im)});
    }
  }
  s.finish();
  return d;
}

ConditionDef parse_condition(std::optional<Section> s) {
  ConditionDef c;
  if (!s) return c;
  c.kind = s->str("kind", "aps");
  if (c.kind != "aps" && c.kind != "dual_aps" && c.kind != "zero" && c.kind != "full")
    fail(s->key("kind"), "unknown condition '" + c.kind + "' (aps, dual_aps, zero, full)");
  c.cut = s->number("cut", 0.0);
  s->finish();
  return c;
}

Margins parse_margins(Section& s) {
  Margins m;
  const auto v = s.numbers("margins");
  if (v.size() == 2) {
    m.left = v[0];
    m.right = v[1];
  } else if (!v.empty()) {
    fail(s.key("margins"), "expected [left, right]");
  }
  return m;
}

TimeGrid parse_grid(Section& s) {
  TimeGrid g;
  g.length = s.number("length", 1.0);
  g.intervals = to_index(s.integer("intervals", 24), s.key("intervals"));
  if (!(g.length > 0) || g.intervals < 1) fail(s.path(), "cylinder needs positive length and intervals");
  return g;
}

CylinderDef parse_cylinder(const std::string& name, Section s, const std::map<std::string, SliceSpec>& slices) {
  CylinderDef c;
  c.name = name;
  c.kind = s.str("kind", "interpolating");
  c.start = s.str("start");
  if (c.kind == "interpolating")
    c.end = s.str("end");
  else if (c.kind != "product")
    fail(s.key("kind"), "unknown cylinder kind '" + c.kind + "' (interpolating, product)");
  c.grid = parse_grid(s);
  c.margins = parse_margins(s);
  if (auto p = s.table("patch")) {
    auto it = slices.find(c.start);
    if (it == slices.end()) fail(s.key("start"), "unknown operator '" + c.start + "'");
    c.patch = parse_patch(*p, it->second, &c.patch_tau_begin, &c.patch_tau_end);
  }
  s.finish();
  return c;
}

FamilyDef parse_family(const std::string& name, Section s) {
  FamilyDef f;
  f.name = name;
  f.start = s.str("start");
  f.end = s.str("end");
  if (s.has("s_grid")) {
    f.s_grid = s.numbers("s_grid");
  } else {
    const long long n = s.integer("s_points", 17);
    if (n < 2) fail(s.key("s_points"), "need at least 2 points");
    for (long long i = 0; i < n; ++i) f.s_grid.push_back(static_cast<double>(i) / static_cast<double>(n - 1));
  }
  s.finish();
  return f;
}

const std::map<std::string, std::vector<std::string>>& check_keys() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"eta_self", {"operators", "intervals"}},
      {"eta_value", {"operators", "expected", "intervals"}},
      {"eta_properties", {"operators", "intervals"}},
      {"eta_equals_2sf", {"family", "reference", "method", "intervals"}},
      {"spectral_flow", {"family", "method", "expected"}},
      {"heat", {"operators", "expected", "tolerance", "intervals"}},
      {"adjoint_duality", {"cylinders", "start_condition", "end_condition"}},
      {"condition_change", {"cylinders", "cuts", "end_condition"}},
      {"dual_change", {"cylinders", "end_condition"}},
      {"splitting", {"cylinders", "nodes", "start_condition", "end_condition"}},
      {"vanishing", {"cylinders", "level"}},
      {"double", {"cylinders"}},
      {"reduction", {"cylinders", "nodes", "level"}},
      {"independence", {"cylinders"}}};
  return m;
}

CheckDef parse_check(Section s) {
  CheckDef c;
  c.kind = s.str("kind");
  c.name = s.str("name", c.kind);
  auto it = check_keys().find(c.kind);
  if (it == check_keys().end()) fail(s.key("kind"), "unknown check kind '" + c.kind + "'");
  const std::set<std::string> allowed(it->second.begin(), it->second.end());
  auto want = [&](const char* k) { return allowed.count(k) > 0; };
  if (want("operators")) c.operators = s.strings("operators");
  if (want("cylinders")) c.cylinders = s.strings("cylinders");
  if (want("family")) c.family = s.str("family");
  if (want("reference")) c.reference = s.str("reference", "");
  if (want("method")) c.method = s.str("method", "crossing_count");
  if (want("start_condition")) c.start_condition = parse_condition(s.table("start_condition"));
  if (want("end_condition")) c.end_condition = parse_condition(s.table("end_condition"));
  if (want("cuts")) c.cuts = s.numbers("cuts");
  if (want("nodes"))
    for (long long v : s.integers("nodes")) c.nodes.push_back(to_index(v, s.key("nodes")));
  if (want("level")) c.level = s.number("level", 1.0);
  if (want("tolerance")) c.tolerance = s.number("tolerance", 1e-6);
  if (want("intervals")) c.intervals = to_index(s.integer("intervals", 8), s.key("intervals"));
  if (want("expected") && s.has("expected")) {
    const toml::node* n = s.node("expected");
    if (auto v = n->value_exact<int64_t>()) {
      c.expected = *v;
      c.expected_real = static_cast<double>(*v);
    } else if (auto w = n->value_exact<double>()) {
      if (c.kind != "heat") fail(s.key("expected"), "expected an integer");
      c.expected_real = *w;
    } else {
      fail(s.key("expected"), "expected a number");
    }
  }
  s.finish();

  auto count = [&](const std::vector<std::string>& v, std::size_t n, const char* what) {
    if (v.size() != n) fail(s.key(what), "expected " + std::to_string(n) + " names");
  };
  const std::string& k = c.kind;
  if (k == "eta_self") count(c.operators, 1, "operators");
  if (k == "eta_value") {
    count(c.operators, 2, "operators");
    if (!c.expected) fail(s.key("expected"), "missing required integer");
  }
  if (k == "eta_properties") count(c.operators, 3, "operators");
  if (k == "heat") count(c.operators, 2, "operators");
  if (k == "double" || k == "independence") count(c.cylinders, 2, "cylinders");
  if (allowed.count("cylinders") && k != "double" && k != "independence") count(c.cylinders, 1, "cylinders");
  if (k == "condition_change" && (c.cuts.empty() || c.cuts.size() % 2 != 0))
    fail(s.key("cuts"), "expected a flat list of (a, b) pairs");
  if (k == "splitting" && c.nodes.empty()) fail(s.key("nodes"), "at least one cut node");
  if (k == "reduction" && c.nodes.size() != 1) fail(s.key("nodes"), "exactly one truncation node");
  if (allowed.count("method") && c.method != "crossing_count" && c.method != "dai_zhang")
    fail(s.key("method"), "unknown method '" + c.method + "' (crossing_count, dai_zhang)");
  return c;
}

void check_ref(const std::set<std::string>& known, const std::string& name, const std::string& path,
               const char* what) {
  if (!known.count(name)) fail(path, std::string("unknown ") + what + " '" + name + "'");
}

}  // namespace

RunConfig parse(const std::string& text, const std::filesystem::path& origin) {
  toml::table root;
  try {
    root = toml::parse(text, origin.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
    throw SchemaError(os.str());
  }
  RunConfig c;
  c.path = origin;
  c.content_hash = sha256_hex(text);
  Section top(root, "");
  c.scenario = top.str("scenario");
  static const std::set<std::string> scenarios{"spectrum", "index", "flow", "eta", "suite"};
  if (!scenarios.count(c.scenario))
    fail("scenario", "unknown scenario '" + c.scenario + "' (spectrum, index, flow, eta, suite)");

  if (auto o = top.table("output")) {
    c.out_dir = o->str("dir", "out");
    o->finish();
  }
  if (auto r = top.table("run")) {
    c.workers = static_cast<int>(r->integer("workers", 1));
    if (c.workers < 1) fail(r->key("workers"), "must be at least 1");
    if (r->has("cache_dir")) c.cache_dir = r->str("cache_dir");
    r->finish();
  }
  if (auto t = top.table("tolerances")) {
    c.zero_tol = t->opt_number("zero_tol");
    c.rank_tol = t->opt_number("rank_tol");
    for (auto v : {c.zero_tol, c.rank_tol})
      if (v && !(*v > 0)) fail(t->path(), "tolerances must be positive");
    t->finish();
  }
  if (auto s = top.table("spectral")) {
    const std::string mode = s->str("mode", "auto");
    if (mode == "auto")
      c.spectral.mode = SpectralOptions::Mode::Auto;
    else if (mode == "dense")
      c.spectral.mode = SpectralOptions::Mode::Dense;
    else if (mode == "window")
      c.spectral.mode = SpectralOptions::Mode::Window;
    else
      fail(s->key("mode"), "unknown mode '" + mode + "' (auto, dense, window)");
    c.spectral.dense_limit = to_index(s->integer("dense_limit", 4000), s->key("dense_limit"));
    c.spectral.window_count = to_index(s->integer("window_count", 200), s->key("window_count"));
    c.spectral.shift = s->number("shift", 0.0);
    s->finish();
  }
  c.spectral.zero_tol = c.zero_tol;

  std::map<std::string, SliceSpec> slices;
  if (auto ops = top.table("operators"))
    for (auto& [name, sec] : ops->subtables()) {
      c.operators.push_back(parse_operator(name, sec));
      slices[name] = c.operators.back().slice;
    }
  if (auto cyl = top.table("cylinders"))
    for (auto& [name, sec] : cyl->subtables()) c.cylinders.push_back(parse_cylinder(name, sec, slices));
  if (auto fam = top.table("families"))
    for (auto& [name, sec] : fam->subtables()) c.families.push_back(parse_family(name, sec));

  std::set<std::string> ops, cyls, fams;
  for (const auto& o : c.operators) ops.insert(o.name);
  for (const auto& y : c.cylinders) {
    check_ref(ops, y.start, "cylinders." + y.name + ".start", "operator");
    if (y.kind == "interpolating") check_ref(ops, y.end, "cylinders." + y.name + ".end", "operator");
    cyls.insert(y.name);
  }
  for (const auto& f : c.families) {
    check_ref(ops, f.start, "families." + f.name + ".start", "operator");
    check_ref(ops, f.end, "families." + f.name + ".end", "operator");
    fams.insert(f.name);
  }

  auto scenario_table = [&](const char* name) {
    if (c.scenario != name && top.has(name)) fail(name, std::string("table only valid for scenario '") + name + "'");
    return c.scenario == name ? std::optional<Section>(top.require_table(name)) : std::nullopt;
  };
  if (auto s = scenario_table("spectrum")) {
    c.spectrum_operators = s->strings("operators");
    if (c.spectrum_operators.empty()) fail(s->key("operators"), "at least one operator");
    for (const auto& n : c.spectrum_operators) check_ref(ops, n, s->key("operators"), "operator");
    s->finish();
  }
  if (auto s = scenario_table("index")) {
    c.index_cylinder = s->str("cylinder");
    check_ref(cyls, c.index_cylinder, s->key("cylinder"), "cylinder");
    c.index_start = parse_condition(s->table("start_condition"));
    c.index_end = parse_condition(s->table("end_condition"));
    c.index_method = s->str("method", "auto");
    if (c.index_method != "auto" && c.index_method != "dense" && c.index_method != "transfer")
      fail(s->key("method"), "unknown method '" + c.index_method + "' (auto, dense, transfer)");
    c.index_adjoint = s->boolean("adjoint", true);
    s->finish();
  }
  if (auto s = scenario_table("flow")) {
    c.flow_family = s->str("family");
    check_ref(fams, c.flow_family, s->key("family"), "family");
    c.flow_method = s->str("method", "crossing_count");
    if (c.flow_method != "crossing_count" && c.flow_method != "dai_zhang")
      fail(s->key("method"), "unknown method '" + c.flow_method + "' (crossing_count, dai_zhang)");
    s->finish();
  }
  if (auto s = scenario_table("eta")) {
    c.eta_a0 = s->str("a0");
    c.eta_a1 = s->str("a1");
    check_ref(ops, c.eta_a0, s->key("a0"), "operator");
    check_ref(ops, c.eta_a1, s->key("a1"), "operator");
    c.eta_cylinder = s->str("cylinder", "");
    c.eta_second_cylinder = s->str("second_cylinder", "");
    if (!c.eta_cylinder.empty()) check_ref(cyls, c.eta_cylinder, s->key("cylinder"), "cylinder");
    if (!c.eta_second_cylinder.empty()) check_ref(cyls, c.eta_second_cylinder, s->key("second_cylinder"), "cylinder");
    c.eta_intervals = to_index(s->integer("intervals", 8), s->key("intervals"));
    c.eta_heat = s->boolean("heat", false);
    s->finish();
  }
  if (auto s = scenario_table("suite")) {
    const toml::array* a = s->array("checks");
    if (!a || a->empty()) fail(s->key("checks"), "at least one check");
    std::set<std::string> names;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string path = s->key("checks") + "[" + std::to_string(i) + "]";
      const toml::table* t = a->get(i)->as_table();
      if (!t) fail(path, "expected a table");
      CheckDef d = parse_check(Section(*t, path));
      if (!names.insert(d.name).second) fail(path + ".name", "duplicate check name '" + d.name + "'");
      for (const auto& n : d.operators) check_ref(ops, n, path + ".operators", "operator");
      for (const auto& n : d.cylinders) check_ref(cyls, n, path + ".cylinders", "cylinder");
      if (!d.family.empty()) check_ref(fams, d.family, path + ".family", "family");
      if (!d.reference.empty()) check_ref(ops, d.reference, path + ".reference", "operator");
      c.checks.push_back(std::move(d));
    }
    s->finish();
  }
  top.finish();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

namespace {

std::vector<double> read_sidecar(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw SchemaError("cannot read tabulated potential " + p.string());
  std::vector<double> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    // Either "value" or "site,value"; a non-numeric first line is a header.
    const auto comma = line.rfind(',');
    const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const double x = std::stod(cell, &used);
      v.push_back(x);
    } catch (const std::exception&) {
      if (lineno == 1) continue;
      throw SchemaError(p.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  return v;
}

std::vector<double> site_field(const OperatorDef& d, const BoundarySlice& s, const std::filesystem::path& base) {
  const auto& P = d.potential.params;
  auto get = [&](const char* k, double def) {
    auto it = P.find(k);
    return it == P.end() ? def : it->second;
  };
  const std::string& k = d.potential.kind;
  if (k == "constant") {
    const double v = get("value", 0.0);
    return sample_sites(s, [v](double, double) { return v; });
  }
  if (k == "quadratic_bowl") {
    const double a = get("scale", 1.0), cx = get("cx", 0.0), cy = get("cy", 0.0);
    return sample_sites(s, [=](double x, double y) { return a * ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / 2; });
  }
  if (k == "linear_mass") {
    const double a = get("slope", 1.0), x0 = get("x0", 0.0);
    return sample_sites(s, [=](double x, double) { return a * (x - x0); });
  }
  if (k == "plateau") {
    const double in = get("inner", -1.0), out = get("outer", 1.0), r0 = get("r0", 1.0), r1 = get("r1", 2.0);
    const double cx = get("cx", 0.0), cy = get("cy", 0.0);
    if (!(r1 > r0)) throw SchemaError("operators." + d.name + ".potential: plateau needs r1 > r0");
    return sample_sites(s, [=](double x, double y) {
      const double r = std::hypot(x - cx, y - cy);
      return in + (out - in) * plateau_step(r, r0, r1);
    });
  }
  std::vector<double> v = d.potential.values;
  if (!d.potential.file.empty()) v = read_sidecar(base / d.potential.file);
  if (static_cast<Index>(v.size()) != s.site_count())
    throw SchemaError("operators." + d.name + ".potential: " + std::to_string(v.size()) +
                      " tabulated values for " + std::to_string(s.site_count()) + " sites");
  return v;
}

}  // namespace

BoundaryOperator build_operator(const OperatorDef& d, const std::filesystem::path& base) {
  const BoundarySlice s = BoundarySlice::make(d.slice);
  BoundaryOperator a = [&] {
    if (d.potential.kind == "diagonal") {
      if (s.kind() != SliceKind::Points) throw SchemaError("operators." + d.name + ".potential: diagonal needs a points slice");
      if (static_cast<Index>(d.potential.values.size()) != s.dim())
        throw SchemaError("operators." + d.name + ".potential: diagonal needs one value per degree of freedom");
      Mat pot = Mat::Zero(s.dim(), s.dim());
      for (Index i = 0; i < s.dim(); ++i) pot(i, i) = d.potential.values[static_cast<std::size_t>(i)] + d.mass * 0.0;
      Mat dirac = Mat::Zero(s.dim(), s.dim());
      for (const auto& e : d.dirac) {
        if (e.row >= s.dim() || e.col >= s.dim()) throw SchemaError("operators." + d.name + ".dirac: index out of range");
        dirac(e.row, e.col) = e.value;
        dirac(e.col, e.row) = std::conj(e.value);
      }
      return build_points_operator(s, dirac, pot, d.name);
    }
    const std::vector<double> f = site_field(d, s, base);
    if (s.kind() == SliceKind::Points && !d.dirac.empty()) {
      Mat dirac = Mat::Zero(s.dim(), s.dim());
      for (const auto& e : d.dirac) {
        if (e.row >= s.dim() || e.col >= s.dim()) throw SchemaError("operators." + d.name + ".dirac: index out of range");
        dirac(e.row, e.col) = e.value;
        dirac(e.col, e.row) = std::conj(e.value);
      }
      return build_points_operator(s, dirac, f, d.mass, d.name);
    }
    return build_boundary_operator(s, f, d.mass, d.name);
  }();
  if (d.patch) a = compact_perturbation(a, Patch{d.patch->sites, d.patch->values}, d.name);
  return a;
}

BoundaryCondition make_condition(const ConditionDef& c, const SpectralData& s, Side side) {
  if (c.kind == "aps") return aps_condition(s, c.cut, side);
  if (c.kind == "dual_aps") return dual_aps_condition(s, c.cut, side);
  if (c.kind == "zero") return zero_condition(s.dim);
  return full_condition(s.dim);
}

Registry::Registry(const RunConfig& c) {
  const auto base = c.path.parent_path();
  auto wrap = [](const std::string& where, auto&& fn) {
    try {
      return fn();
    } catch (const SchemaError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw SchemaError(where + ": " + e.what());
    } catch (const PreconditionError& e) {
      throw SchemaError(where + ": " + e.what());
    }
  };
  for (const auto& d : c.operators)
    ops_.emplace(d.name, wrap("operators." + d.name, [&] { return build_operator(d, base); }));
  for (const auto& y : c.cylinders)
    cyl_.emplace(y.name, wrap("cylinders." + y.name, [&] {
                   CalliasOperator d = y.kind == "product"
                                           ? CalliasOperator::product(op(y.start), y.grid, y.name)
                                           : CalliasOperator::interpolating(op(y.start), op(y.end), y.grid,
                                                                            y.margins, y.name);
                   if (y.patch)
                     d = compact_perturbation(d, Patch{y.patch->sites, y.patch->values}, y.patch_tau_begin,
                                              y.patch_tau_end);
                   return d;
                 }));
  for (const auto& f : c.families)
    fam_.emplace(f.name, wrap("families." + f.name, [&] {
                   const BoundaryOperator a = op(f.start), b = op(f.end);
                   if (a.slice() != b.slice()) throw InvalidArgument("start and end live on different slices");
                   FamilySpec fs;
                   fs.slice = a.slice();
                   fs.s_grid = f.s_grid;
                   fs.operators = [a, b](double s) { return interpolate(a, b, s); };
                   fs.compact_variation = differing_sites(a, b);
                   fs.label = f.name;
                   fs.validate();
                   return fs;
                 }));
}

const BoundaryOperator& Registry::op(const std::string& n) const {
  auto it = ops_.find(n);
  if (it == ops_.end()) throw SchemaError("unknown operator '" + n + "'");
  return it->second;
}

const CalliasOperator& Registry::cylinder(const std::string& n) const {
  auto it = cyl_.find(n);
  if (it == cyl_.end()) throw SchemaError("unknown cylinder '" + n + "'");
  return it->second;
}

const FamilySpec& Registry::family(const std::string& n) const {
  auto it = fam_.find(n);
  if (it == fam_.end()) throw SchemaError("unknown family '" + n + "'");
  return it->second;
}

}  // namespace callias::config
