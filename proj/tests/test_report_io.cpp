#include <doctest.h>

#include <limits>

#include "callias/report_io.hpp"

using namespace callias;

TEST_CASE("doubles print with 17 significant digits") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(2.0) == "2");
  CHECK(io::format_double(-1.5e-300) == "-1.5000000000000001e-300");
  CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "null");
  CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "null");
}

TEST_CASE("dump keeps insertion order and is stable") {
  io::Json j;
  j["zeta"] = 1;
  j["alpha"] = 0.1;
  j["list"] = {1.0 / 3.0, std::numeric_limits<double>::infinity(), "x"};
  j["empty"] = io::Json::object();
  const std::string a = io::dump(j);
  CHECK(a == io::dump(j));
  CHECK(a ==
        "{\n"
        "  \"zeta\": 1,\n"
        "  \"alpha\": 0.10000000000000001,\n"
        "  \"list\": [\n"
        "    0.33333333333333331,\n"
        "    null,\n"
        "    \"x\"\n"
        "  ],\n"
        "  \"empty\": {}\n"
        "}\n");
  CHECK(io::dump(j, 0) == "{\"zeta\":1,\"alpha\":0.10000000000000001,\"list\":[0.33333333333333331,null,\"x\"],\"empty\":{}}\n");
}

TEST_CASE("index report fields") {
  IndexReport r;
  r.dim_ker = 2;
  r.dim_coker = 1;
  r.index = 1;
  r.counting_index = 1;
  r.consistent = true;
  r.sv_gap = std::numeric_limits<double>::infinity();
  const io::Json j = io::to_json(r);
  for (const char* k : {"dim_ker", "dim_coker", "index", "counting_index", "rank_tol", "sv_gap", "consistent"})
    CHECK(j.contains(k));
  CHECK(io::dump(j).find("\"sv_gap\": null") != std::string::npos);
}

TEST_CASE("csv layouts") {
  const SpectralData s = eigendecompose(build_boundary_operator(BoundarySlice::points(1), {0.75}, 0.0));
  CHECK(io::spectrum_csv(s) == "index,lambda\n0,-0.75\n1,0.75\n");

  EigenCurves c;
  c.s = {0.0, 1.0};
  c.values = {RVec::Constant(1, -1.0), RVec::Constant(1, 0.5)};
  c.branch = {{0}, {0}};
  CHECK(io::eigencurves_csv(c) == "s,branch,lambda\n0,0,-1\n1,0,0.5\n");
  CHECK(io::kCsvSchema == 1);
}
