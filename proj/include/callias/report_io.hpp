#pragma once

#include <string>

#include <json.hpp>

#include "callias/bvp.hpp"
#include "callias/callias_ops.hpp"
#include "callias/flow_eta.hpp"
#include "callias/spectral.hpp"

namespace callias::io {

using Json = nlohmann::ordered_json;

// CSV column layout version, recorded in the run manifest.
inline constexpr int kCsvSchema = 1;

// Deterministic JSON text: keys in insertion order, doubles with 17
// significant digits, non-finite doubles as null.
std::string dump(const Json& j, int indent = 2);

Json to_json(const IndexReport& r);
Json to_json(const Verdict& v);
Json to_json(const Crossing& c);
Json to_json(const FlowResult& f);
Json to_json(const EtaReport& e);
Json to_json(const EtaProperties& p);
Json to_json(const EtaSfVerdict& v);
Json to_json(const EssentialSupportReport& r);
// Summary only; eigenvalues go to CSV.
Json spectrum_summary(const SpectralData& s);

// index,lambda
std::string spectrum_csv(const SpectralData& s);
// s,branch,lambda
std::string eigencurves_csv(const EigenCurves& c);

std::string format_double(double x);

}  // namespace callias::io
