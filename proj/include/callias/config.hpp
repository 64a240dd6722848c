#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "callias/bvp.hpp"
#include "callias/callias_ops.hpp"
#include "callias/flow_eta.hpp"
#include "callias/grid.hpp"
#include "callias/spectral.hpp"

namespace callias::config {

struct PotentialDef {
  std::string kind;  // constant, quadratic_bowl, linear_mass, plateau, tabulated, diagonal
  std::map<std::string, double> params;
  std::vector<double> values;  // tabulated or diagonal
  std::string file;            // tabulated sidecar CSV, relative to the config
};

struct PatchDef {
  std::vector<Index> sites;
  std::vector<double> values;
};

struct DiracEntry {
  Index row = 0, col = 0;
  cplx value;
};

struct OperatorDef {
  std::string name;
  SliceSpec slice;
  PotentialDef potential;
  double mass = 0;
  std::optional<PatchDef> patch;
  std::vector<DiracEntry> dirac;  // points slices only; Hermitian completion
};

struct CylinderDef {
  std::string name;
  std::string kind = "interpolating";  // interpolating, product
  std::string start, end;
  TimeGrid grid{1.0, 24};
  Margins margins{};
  std::optional<PatchDef> patch;  // time-local perturbation of the interior
  double patch_tau_begin = 0.4, patch_tau_end = 0.6;
};

struct FamilyDef {
  std::string name;
  std::string start, end;  // s -> (1 - s) start + s end
  std::vector<double> s_grid;
};

struct ConditionDef {
  std::string kind = "aps";  // aps, dual_aps, zero, full
  double cut = 0;
};

struct CheckDef {
  std::string name;
  std::string kind;
  std::vector<std::string> operators;
  std::vector<std::string> cylinders;
  std::string family;
  std::string reference;
  ConditionDef start_condition, end_condition;
  std::vector<double> cuts;        // condition_change: pairs a, b flattened
  std::vector<Index> nodes;        // splitting cuts or truncation node
  double level = 1.0;
  std::optional<long long> expected;
  std::optional<double> expected_real;
  double tolerance = 1e-6;
  std::string method = "crossing_count";
  Index intervals = 8;
};

struct RunConfig {
  std::string scenario;
  std::filesystem::path path;
  std::string content_hash;
  std::filesystem::path out_dir = "out";
  int workers = 1;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<double> zero_tol, rank_tol;
  SpectralOptions spectral;
  std::string index_method = "auto";

  std::vector<OperatorDef> operators;
  std::vector<CylinderDef> cylinders;
  std::vector<FamilyDef> families;

  // Scenario payloads.
  std::vector<std::string> spectrum_operators;
  std::string index_cylinder;
  ConditionDef index_start, index_end;
  bool index_adjoint = true;
  std::string flow_family;
  std::string flow_method = "crossing_count";
  std::string eta_a0, eta_a1, eta_cylinder, eta_second_cylinder;
  Index eta_intervals = 8;
  bool eta_heat = false;
  std::vector<CheckDef> checks;
};

// Parses and schema-checks; every error is a SchemaError with the offending
// key path.
RunConfig load(const std::filesystem::path& path);
RunConfig parse(const std::string& text, const std::filesystem::path& origin);

// Resolved objects, built once all definitions passed the schema.
class Registry {
 public:
  explicit Registry(const RunConfig& c);
  const BoundaryOperator& op(const std::string& name) const;
  const CalliasOperator& cylinder(const std::string& name) const;
  const FamilySpec& family(const std::string& name) const;

 private:
  std::map<std::string, BoundaryOperator> ops_;
  std::map<std::string, CalliasOperator> cyl_;
  std::map<std::string, FamilySpec> fam_;
};

BoundaryOperator build_operator(const OperatorDef& d, const std::filesystem::path& base_dir);
BoundaryCondition make_condition(const ConditionDef& c, const SpectralData& s, Side side);

}  // namespace callias::config
