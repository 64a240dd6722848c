#include "callias/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace callias::io {

std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void emit(const Json& j, int indent, int level, std::string& out) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (level + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * level), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        out += Json(it.key()).dump();
        out += indent > 0 ? ": " : ":";
        emit(it.value(), indent, level + 1, out);
      }
      out += nl;
      out += close;
      out += "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        emit(v, indent, level + 1, out);
      }
      out += nl;
      out += close;
      out += "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

Json opt(const std::optional<long long>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

std::string dump(const Json& j, int indent) {
  std::string out;
  emit(j, indent, 0, out);
  out += "\n";
  return out;
}

Json to_json(const IndexReport& r) {
  return Json{{"method", r.method},         {"dim_ker", r.dim_ker},
              {"dim_coker", r.dim_coker},   {"index", r.index},
              {"counting_index", r.counting_index}, {"consistent", r.consistent},
              {"rank_tol", r.rank_tol},     {"sv_gap", r.sv_gap},
              {"flagged", r.flagged},       {"dim_domain", r.dim_domain},
              {"dim_codomain", r.dim_codomain}};
}

Json to_json(const Verdict& v) {
  Json reports = Json::array();
  for (const auto& r : v.reports) reports.push_back(to_json(r));
  return Json{{"name", v.name}, {"passed", v.passed}, {"lhs", v.lhs},
              {"rhs", v.rhs},   {"detail", v.detail}, {"reports", reports}};
}

Json to_json(const Crossing& c) {
  return Json{{"s", c.s}, {"width", c.width}, {"direction", c.direction}, {"branch", c.branch}};
}

Json to_json(const FlowResult& f) {
  Json cr = Json::array();
  for (const auto& c : f.crossings) cr.push_back(to_json(c));
  Json samples = Json::array();
  for (double s : f.samples) samples.push_back(s);
  return Json{{"method", method_name(f.method)},
              {"sf", f.sf},
              {"sf_other_method", f.sf_other},
              {"methods_agree", f.sf == f.sf_other},
              {"refinement_depth", f.refinement_depth},
              {"crossings", cr},
              {"samples", samples}};
}

Json to_json(const EtaReport& e) {
  Json reports = Json::array();
  for (const auto& r : e.reports) reports.push_back(to_json(r));
  Json j{{"eta", e.eta},
         {"components",
          {{"index", e.components.index},
           {"dim_ker_a0", e.components.dim_ker_a0},
           {"dim_ker_a1", e.components.dim_ker_a1}}},
         {"dual_route", e.dual_route},
         {"dual_index", e.dual_index},
         {"routes_agree", e.routes_agree},
         {"parity_ok", e.parity_ok},
         {"independent_eta", opt(e.independent_eta)},
         {"heat_route", e.heat_route ? Json(*e.heat_route) : Json(nullptr)},
         {"zero_tol_a0", e.zero_tol_a0},
         {"zero_tol_a1", e.zero_tol_a1},
         {"reports", reports}};
  return j;
}

Json to_json(const EtaProperties& p) {
  Json reports = Json::array();
  for (const auto& r : p.reports) reports.push_back(to_json(r));
  return Json{{"eta10", p.eta10},          {"eta01", p.eta01},     {"eta21", p.eta21},
              {"eta20", p.eta20},          {"antisymmetry", p.antisymmetry},
              {"cocycle", p.cocycle},      {"reports", reports}};
}

Json to_json(const EtaSfVerdict& v) {
  return Json{{"eta", v.eta},
              {"sf", v.sf},
              {"passed", v.passed},
              {"eta_end_ref", opt(v.eta_end_ref)},
              {"eta_start_ref", opt(v.eta_start_ref)},
              {"difference_passed", v.difference_passed},
              {"eta_report", to_json(v.eta_report)},
              {"flow", to_json(v.flow)}};
}

Json to_json(const EssentialSupportReport& r) {
  Json sites = Json::array();
  for (Index x : r.violating) sites.push_back(x);
  Json j{{"level", r.level}, {"empty", r.empty}, {"violating", sites}};
  if (!r.empty) j["box"] = {r.box[0], r.box[1], r.box[2], r.box[3]};
  return j;
}

Json spectrum_summary(const SpectralData& s) {
  Json j{{"label", s.label},           {"op_hash", s.op_hash},   {"dim", s.dim},
         {"count", s.size()},          {"kernel_dim", s.kernel_dim()}, {"zero_tol", s.zero_tol},
         {"complete", s.complete()}};
  if (s.window)
    j["window"] = {{"lower", s.window->lower},
                   {"upper", s.window->upper},
                   {"below", s.window->below},
                   {"above", s.window->above}};
  return j;
}

std::string spectrum_csv(const SpectralData& s) {
  std::string out = "index,lambda\n";
  const Index off = s.window ? s.window->below : 0;
  for (Index j = 0; j < s.size(); ++j) out += std::to_string(off + j) + "," + format_double(s.values(j)) + "\n";
  return out;
}

std::string eigencurves_csv(const EigenCurves& c) {
  std::string out = "s,branch,lambda\n";
  for (std::size_t i = 0; i < c.s.size(); ++i)
    for (Index j = 0; j < c.values[i].size(); ++j)
      out += format_double(c.s[i]) + "," + std::to_string(c.branch[i][static_cast<std::size_t>(j)]) + "," +
             format_double(c.values[i](j)) + "\n";
  return out;
}

}  // namespace callias::io
