#include <json.hpp>

#include "cstoc/verify.hpp"

namespace cstoc {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Inconclusive: return "inconclusive";
    case Verdict::Fail: return "fail";
  }
  return "inconclusive";
}

ProbePoint ProbePoint::state(double t, double x) {
  ProbePoint p;
  p.t = t;
  p.x = {x};
  return p;
}

ProbePoint ProbePoint::budget(double t, double x, double m) {
  ProbePoint p = state(t, x);
  p.m = m;
  p.has_m = true;
  return p;
}

std::string VerificationReport::to_text() const {
  nlohmann::json j;
  j["name"] = name;
  j["point"]["t"] = t;
  j["point"]["x"] = x;
  if (has_m) j["point"]["m"] = m;
  j["estimate"] = estimate;
  j["se"] = se;
  j["slack"] = slack;
  j["verdict"] = verdict_name(verdict);
  j["n_paths"] = n_paths;
  j["seed"] = seed;
  if (has_delta) j["delta"] = delta;
  if (!note.empty()) j["note"] = note;
  if (!details.empty()) {
    nlohmann::json d;
    for (const auto& [key, value] : details) d[key] = value;
    j["details"] = d;
  }
  return j.dump(2) + "\n";
}

}  // namespace cstoc
