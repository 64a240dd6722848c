#include "callias/runner.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "callias/config.hpp"
#include "callias/errors.hpp"
#include "callias/kernels.hpp"
#include "callias/linalg.hpp"
#include "callias/report_io.hpp"

namespace callias {

namespace {

using config::CheckDef;
using config::ConditionDef;
using config::Registry;
using config::RunConfig;
using io::Json;

struct Output {
  std::string file;
  std::string content;
};

struct Provenance {
  std::string result;
  std::string route;
};

struct Context {
  const RunConfig& cfg;
  const Registry& reg;
  SpectralEngine& engine;
  IndexPolicy policy;
  FlowOptions flow;
};

// Midpoint between neighbouring eigenvalues (as seen from the side) closest
// to the requested cut.
double nearest_safe_cut(const SpectralData& s, double a, Side side) {
  std::vector<double> v;
  for (Index j = 0; j < s.size(); ++j) v.push_back(side == Side::Start ? s.values(j) : -s.values(j));
  std::sort(v.begin(), v.end());
  std::vector<double> candidates{v.front() - 1.0, v.back() + 1.0};
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if (v[i + 1] - v[i] > 2 * s.zero_tol) candidates.push_back(0.5 * (v[i] + v[i + 1]));
  double best = candidates.front();
  for (double c : candidates)
    if (std::abs(c - a) < std::abs(best - a)) best = c;
  return best;
}

void check_cut(double a, const SpectralData& s, Side side, const std::string& where) {
  if (a == 0.0) return;
  for (Index j = 0; j < s.size(); ++j) {
    const double l = side == Side::Start ? s.values(j) : -s.values(j);
    if (std::abs(l - a) <= s.zero_tol) {
      std::ostringstream os;
      os << std::setprecision(17) << where << ": cut " << a << " collides with eigenvalue " << l << " of "
         << (side == Side::Start ? "A" : "-A") << " (" << s.label << "); nearest safe cut is "
         << nearest_safe_cut(s, a, side);
      throw PreconditionError(os.str());
    }
  }
}

BoundaryCondition condition(const ConditionDef& c, const SpectralData& s, Side side, const std::string& where) {
  if (c.kind == "aps" || c.kind == "dual_aps") check_cut(c.cut, s, side, where);
  return config::make_condition(c, s, side);
}

Json condition_json(const ConditionDef& c) { return Json{{"kind", c.kind}, {"cut", c.cut}}; }

FlowResult::Method flow_method(const std::string& m) {
  return m == "dai_zhang" ? FlowResult::Method::DaiZhang : FlowResult::Method::CrossingCount;
}

Json verdicts_json(const std::vector<Verdict>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(io::to_json(x));
  return a;
}

bool all_passed(const std::vector<Verdict>& v) {
  for (const auto& x : v)
    if (!x.passed) return false;
  return true;
}

struct CheckResult {
  Json body;
  bool passed = false;
  bool gating = true;
  std::string route;
};

CheckResult run_check(const CheckDef& c, Context& ctx) {
  const Registry& reg = ctx.reg;
  SpectralEngine& engine = ctx.engine;
  const IndexPolicy& policy = ctx.policy;
  const TimeGrid grid{1.0, c.intervals};
  CheckResult r;
  const std::string where = "check '" + c.name + "'";
  const std::string& k = c.kind;

  if (k == "eta_self") {
    const BoundaryOperator& a = reg.op(c.operators[0]);
    EtaReport e = relative_eta(a, a, CalliasOperator::product(a, grid, c.name), engine, policy);
    r.passed = e.eta == 0 && e.routes_agree && e.parity_ok;
    r.body = {{"expected", 0}, {"eta", io::to_json(e)}};
    r.route = "eta via APS and dual-APS index on the product cylinder";
  } else if (k == "eta_value") {
    const BoundaryOperator &a0 = reg.op(c.operators[0]), &a1 = reg.op(c.operators[1]);
    const CalliasOperator d = CalliasOperator::interpolating(a0, a1, grid, {}, c.name);
    const CalliasOperator d2 = CalliasOperator::interpolating(a0, a1, TimeGrid{1.0, 2 * c.intervals}, {0.25, 0.25},
                                                              c.name + "-second");
    EtaReport e = relative_eta(a0, a1, d, engine, policy, &d2);
    r.passed = e.eta == *c.expected && e.routes_agree && e.parity_ok && e.independent_eta == e.eta;
    r.body = {{"expected", *c.expected}, {"eta", io::to_json(e)}};
    r.route = "eta via APS and dual-APS index on two interpolating cobordisms";
  } else if (k == "eta_properties") {
    EtaProperties p =
        eta_properties(reg.op(c.operators[0]), reg.op(c.operators[1]), reg.op(c.operators[2]), grid, engine, policy);
    bool agree = true;
    for (const auto& e : p.reports) agree = agree && e.routes_agree && e.parity_ok;
    r.passed = p.antisymmetry && p.cocycle && agree;
    r.body = {{"properties", io::to_json(p)}};
    r.route = "eta via APS index on plateau cobordisms between each ordered pair";
  } else if (k == "eta_equals_2sf") {
    EtaSfOptions o;
    o.grid = grid;
    o.method = flow_method(c.method);
    o.flow = ctx.flow;
    const BoundaryOperator* ref = c.reference.empty() ? nullptr : &reg.op(c.reference);
    EtaSfVerdict v = check_eta_equals_2sf(reg.family(c.family), engine, policy, o, ref);
    r.passed = v.passed && v.difference_passed && v.flow.sf == v.flow.sf_other;
    r.body = {{"verdict", io::to_json(v)}};
    r.route = std::string("eta via APS index; sf via ") + method_name(v.flow.method) + " cross-checked by the other method";
  } else if (k == "spectral_flow") {
    FlowResult f = spectral_flow(reg.family(c.family), flow_method(c.method), engine, ctx.flow);
    r.passed = f.sf == f.sf_other && (!c.expected || f.sf == *c.expected);
    r.body = {{"expected", c.expected ? Json(*c.expected) : Json(nullptr)}, {"flow", io::to_json(f)}};
    r.route = std::string("sf via ") + method_name(f.method) + " cross-checked by the other method";
  } else if (k == "heat") {
    const BoundaryOperator &a0 = reg.op(c.operators[0]), &a1 = reg.op(c.operators[1]);
    auto s0 = engine.decompose(a0);
    auto s1 = engine.decompose(a1);
    const double h = relative_eta_heat(*s0, *s1);
    r.body = {{"heat_route", h}};
    if (c.expected_real) {
      r.passed = std::abs(h - *c.expected_real) <= c.tolerance;
      r.body["expected"] = *c.expected_real;
      r.route = "heat-trace quadrature against the expected value";
    } else {
      EtaReport e = relative_eta(a0, a1, CalliasOperator::interpolating(a0, a1, grid, {}, c.name), engine, policy);
      r.passed = std::abs(h - static_cast<double>(e.eta)) <= c.tolerance;
      r.gating = false;
      r.body["index_route"] = e.eta;
      r.body["difference"] = h - static_cast<double>(e.eta);
      r.route = "heat-trace quadrature compared with the index route; reported only";
    }
    r.body["tolerance"] = c.tolerance;
  } else {
    const CalliasOperator& d = reg.cylinder(c.cylinders[0]);
    auto s0 = engine.decompose(d.start_operator());
    auto s1 = engine.decompose(d.end_operator());
    std::vector<Verdict> vs;
    if (k == "adjoint_duality") {
      vs.push_back(check_adjoint_duality(
          ConstrainedOperator::assemble(d, condition(c.start_condition, *s0, Side::Start, where),
                                        condition(c.end_condition, *s1, Side::End, where)),
          policy));
      r.body["start_condition"] = condition_json(c.start_condition);
      r.body["end_condition"] = condition_json(c.end_condition);
    } else if (k == "condition_change") {
      const BoundaryCondition end = condition(c.end_condition, *s1, Side::End, where);
      for (std::size_t i = 0; i + 1 < c.cuts.size(); i += 2) {
        check_cut(c.cuts[i], *s0, Side::Start, where);
        check_cut(c.cuts[i + 1], *s0, Side::Start, where);
        vs.push_back(check_condition_change(d, *s0, c.cuts[i], c.cuts[i + 1], end, policy));
      }
      r.body["end_condition"] = condition_json(c.end_condition);
    } else if (k == "dual_change") {
      vs.push_back(check_dual_change(d, *s0, condition(c.end_condition, *s1, Side::End, where), policy));
    } else if (k == "splitting") {
      const BoundaryCondition b0 = condition(c.start_condition, *s0, Side::Start, where);
      const BoundaryCondition b1 = condition(c.end_condition, *s1, Side::End, where);
      for (Index node : c.nodes) vs.push_back(check_splitting(d, b0, b1, node, engine, policy));
    } else if (k == "vanishing") {
      vs.push_back(check_vanishing(d, c.level, engine, policy));
    } else if (k == "double") {
      vs.push_back(check_double(d, reg.cylinder(c.cylinders[1]), policy));
    } else if (k == "reduction") {
      vs.push_back(check_reduction(d, c.nodes[0], c.level, engine, policy));
    } else if (k == "independence") {
      vs.push_back(check_independence(d, reg.cylinder(c.cylinders[1]), engine, policy));
    }
    r.passed = all_passed(vs);
    r.body["verdicts"] = verdicts_json(vs);
    std::set<std::string> methods;
    for (const auto& v : vs)
      for (const auto& rep : v.reports) methods.insert(rep.method);
    r.route = "index identity via";
    for (const auto& m : methods) r.route += " " + m;
  }
  return r;
}

std::vector<Output> run_spectrum(Context& ctx, std::vector<Provenance>& prov) {
  std::vector<const BoundaryOperator*> ops;
  for (const auto& n : ctx.cfg.spectrum_operators) ops.push_back(&ctx.reg.op(n));
  auto data = kernels::decompose_batch(ctx.engine, ops, ctx.cfg.workers);
  std::vector<Output> out;
  Json summary = Json::array();
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string& name = ctx.cfg.spectrum_operators[i];
    Json s = io::spectrum_summary(*data[i]);
    const SpectralQuality q = spectral_quality(*ops[i], *data[i]);
    s["residual"] = q.residual;
    s["orthonormality"] = q.orthonormality;
    s["csv"] = "spectrum_" + name + ".csv";
    summary.push_back(Json{{"operator", name}, {"spectrum", s}});
    out.push_back({"spectrum_" + name + ".csv", io::spectrum_csv(*data[i])});
    prov.push_back({"spectrum_" + name + ".csv",
                    data[i]->complete() ? "dense Hermitian eigensolver" : "shift-invert window eigensolver"});
  }
  out.push_back({"spectrum.json", io::dump(Json{{"scenario", "spectrum"}, {"operators", summary}})});
  return out;
}

std::vector<Output> run_index(Context& ctx, std::vector<Provenance>& prov) {
  const RunConfig& c = ctx.cfg;
  const CalliasOperator& d = ctx.reg.cylinder(c.index_cylinder);
  auto s0 = ctx.engine.decompose(d.start_operator());
  auto s1 = ctx.engine.decompose(d.end_operator());
  const ConstrainedOperator op = ConstrainedOperator::assemble(
      d, condition(c.index_start, *s0, Side::Start, "index.start_condition"),
      condition(c.index_end, *s1, Side::End, "index.end_condition"));
  IndexReport r = compute_index(op, ctx.policy);
  Json j{{"scenario", "index"},
         {"cylinder", c.index_cylinder},
         {"start_condition", condition_json(c.index_start)},
         {"end_condition", condition_json(c.index_end)},
         {"report", io::to_json(r)}};
  prov.push_back({"index.json:report", r.method});
  if (c.index_adjoint) {
    IndexReport ra = compute_index(adjoint_bvp(op), ctx.policy);
    j["adjoint_report"] = io::to_json(ra);
    j["adjoint_duality"] = ra.index == -r.index;
    prov.push_back({"index.json:adjoint_report", ra.method});
  }
  return {{"index.json", io::dump(j)}};
}

std::vector<Output> run_flow(Context& ctx, std::vector<Provenance>& prov) {
  const FamilySpec& f = ctx.reg.family(ctx.cfg.flow_family);
  FlowResult r = spectral_flow(f, flow_method(ctx.cfg.flow_method), ctx.engine, ctx.flow);
  EigenCurves curves = eigencurves(f, ctx.engine, ctx.flow);
  Json j{{"scenario", "flow"}, {"family", ctx.cfg.flow_family}, {"flow", io::to_json(r)}, {"csv", "eigencurves.csv"}};
  prov.push_back({"flow.json:sf", std::string(method_name(r.method)) + ", cross-checked by the other method"});
  prov.push_back({"eigencurves.csv", "eigensolver on the s-grid with overlap branch matching"});
  return {{"flow.json", io::dump(j)}, {"eigencurves.csv", io::eigencurves_csv(curves)}};
}

std::vector<Output> run_eta(Context& ctx, std::vector<Provenance>& prov) {
  const RunConfig& c = ctx.cfg;
  const BoundaryOperator &a0 = ctx.reg.op(c.eta_a0), &a1 = ctx.reg.op(c.eta_a1);
  const CalliasOperator d = c.eta_cylinder.empty()
                                ? CalliasOperator::interpolating(a0, a1, TimeGrid{1.0, c.eta_intervals}, {}, "eta")
                                : ctx.reg.cylinder(c.eta_cylinder);
  const CalliasOperator* second = c.eta_second_cylinder.empty() ? nullptr : &ctx.reg.cylinder(c.eta_second_cylinder);
  EtaReport e = relative_eta(a0, a1, d, ctx.engine, ctx.policy, second);
  prov.push_back({"eta.json:eta", "APS index route, dual-APS route as cross-check"});
  if (c.eta_heat) {
    e.heat_route = relative_eta_heat(*ctx.engine.decompose(a0), *ctx.engine.decompose(a1));
    prov.push_back({"eta.json:heat_route", "heat-trace quadrature (Gauss-Kronrod head, erfc tail)"});
  }
  Json j{{"scenario", "eta"}, {"a0", c.eta_a0}, {"a1", c.eta_a1}, {"report", io::to_json(e)}};
  return {{"eta.json", io::dump(j)}};
}

std::vector<Output> run_suite(Context& ctx, const std::vector<const CheckDef*>& checks, std::vector<Provenance>& prov,
                              bool& failed) {
  const int n = static_cast<int>(checks.size());
  std::vector<CheckResult> results(checks.size());
  std::vector<std::exception_ptr> errors(checks.size());
#pragma omp parallel for schedule(dynamic) num_threads(ctx.cfg.workers)
  for (int i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = run_check(*checks[static_cast<std::size_t>(i)], ctx);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Json arr = Json::array();
  bool all = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const CheckResult& r = results[i];
    Json j{{"name", checks[i]->name}, {"kind", checks[i]->kind}, {"passed", r.passed}, {"gating", r.gating}};
    for (auto it = r.body.begin(); it != r.body.end(); ++it) j[it.key()] = it.value();
    arr.push_back(j);
    if (r.gating && !r.passed) all = false;
    prov.push_back({"suite.json:" + checks[i]->name, r.route});
  }
  failed = !all;
  Json j{{"scenario", "suite"}, {"all_passed", all}, {"checks", arr}};
  return {{"suite.json", io::dump(j)}};
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() ? p : base / p;
}

void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace

int run(const RunFlags& flags, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Output> outputs;
  std::vector<Provenance> prov;
  bool verdict_failed = false;
  RunConfig cfg;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> cache_dir;
  EngineStats stats;
  std::vector<std::string> warnings;
  std::size_t check_count = 0;

  try {
    cfg = config::load(flags.config);
    const auto base = cfg.path.parent_path();
    if (flags.workers) {
      if (*flags.workers < 1) throw SchemaError("--workers must be at least 1");
      cfg.workers = *flags.workers;
    }
    out_dir = flags.out ? *flags.out : resolve(cfg.out_dir, base);
    if (flags.cache_dir)
      cache_dir = *flags.cache_dir;
    else if (cfg.cache_dir)
      cache_dir = resolve(*cfg.cache_dir, base);

    std::vector<const CheckDef*> selected;
    if (!flags.suite.empty()) {
      if (cfg.scenario != "suite") throw SchemaError("--suite given but the scenario is '" + cfg.scenario + "'");
      for (const auto& name : flags.suite) {
        const CheckDef* hit = nullptr;
        for (const auto& c : cfg.checks)
          if (c.name == name) hit = &c;
        if (!hit) throw SchemaError("--suite: no check named '" + name + "'");
        selected.push_back(hit);
      }
    } else {
      for (const auto& c : cfg.checks) selected.push_back(&c);
    }
    check_count = selected.size();

    const Registry reg(cfg);
    pin_blas_threads();
    kernels::set_default_workers(cfg.workers);

    SpectralOptions so = cfg.spectral;
    std::optional<SpectralEngine> engine_slot;
    try {
      engine_slot.emplace(so, cache_dir);
    } catch (const InvalidArgument& e) {
      log << "error: " << e.what() << "\n";
      return kExitIo;
    }
    SpectralEngine& engine = *engine_slot;
    Context ctx{cfg, reg, engine, {}, {}};
    ctx.policy.engine = &engine;
    ctx.policy.rank_tol = cfg.rank_tol;
    ctx.policy.method = cfg.index_method == "dense"      ? IndexPolicy::Method::Dense
                        : cfg.index_method == "transfer" ? IndexPolicy::Method::Transfer
                                                         : IndexPolicy::Method::Auto;
    ctx.flow.spectral.zero_tol = cfg.zero_tol;
    ctx.flow.workers = cfg.workers;

    try {
      if (cfg.scenario == "spectrum")
        outputs = run_spectrum(ctx, prov);
      else if (cfg.scenario == "index")
        outputs = run_index(ctx, prov);
      else if (cfg.scenario == "flow")
        outputs = run_flow(ctx, prov);
      else if (cfg.scenario == "eta")
        outputs = run_eta(ctx, prov);
      else
        outputs = run_suite(ctx, selected, prov, verdict_failed);
    } catch (const InvalidArgument& e) {
      throw SchemaError(e.what());
    }
    stats = engine.stats();
    warnings = engine.warnings();
  } catch (const SchemaError& e) {
    log << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const PreconditionError& e) {
    log << "precondition failed: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json files = Json::array();
  for (const auto& o : outputs) files.push_back(o.file);
  Json provenance = Json::array();
  for (const auto& p : prov) provenance.push_back(Json{{"result", p.result}, {"route", p.route}});
  Json warn = Json::array();
  for (const auto& w : warnings) warn.push_back(w);
  Json manifest{{"version", kVersionTag},
                {"scenario", cfg.scenario},
                {"config", cfg.path.string()},
                {"config_sha256", cfg.content_hash},
                {"workers", cfg.workers},
                {"checks_run", check_count},
                {"wall_time_s", wall},
                {"cache",
                 {{"dir", cache_dir ? Json(cache_dir->string()) : Json(nullptr)},
                  {"solver_calls", stats.solver_calls},
                  {"cache_hits", stats.cache_hits},
                  {"memo_hits", stats.memo_hits}}},
                {"warnings", warn},
                {"csv_schema", io::kCsvSchema},
                {"outputs", files},
                {"provenance", provenance},
                {"exit_code", verdict_failed ? kExitVerdictFailed : kExitOk}};
  outputs.push_back({"manifest.json", io::dump(manifest)});

  try {
    std::filesystem::create_directories(out_dir);
    for (const auto& o : outputs) write_file(out_dir / o.file, o.content);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitIo;
  }
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  if (verdict_failed) {
    log << "suite: at least one gating check failed (see " << (out_dir / "suite.json").string() << ")\n";
    return kExitVerdictFailed;
  }
  return kExitOk;
}

}  // namespace callias
