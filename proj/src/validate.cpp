#include "cstoc/validate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cstoc/rng.hpp"

namespace cstoc {

bool ValidationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.status == CheckStatus::Pass; });
}

bool ValidationReport::any_fail() const {
  return std::any_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.status == CheckStatus::Fail; });
}

std::string ValidationReport::text() const {
  std::ostringstream out;
  out << "validation seed=" << seed << " samples=" << samples << "\n";
  for (const CheckResult& c : checks) {
    const char* s = c.status == CheckStatus::Pass ? "pass"
                    : c.status == CheckStatus::Warn ? "warn"
                                                    : "fail";
    out << "  " << std::left << std::setw(28) << c.name << " " << std::setw(4) << s << " "
        << std::scientific << std::setprecision(6) << c.evidence;
    if (!c.message.empty()) out << "  " << c.message;
    out << "\n";
  }
  return out.str();
}

namespace {

struct Sampler {
  NormalStream stream;
  std::uint64_t n = 0;
  explicit Sampler(std::uint64_t seed) : stream(seed) {}
  double uniform(double lo, double hi) {
    const double u = stream.uniform(n / 16, static_cast<std::uint32_t>(n % 16), 0);
    ++n;
    return lo + (hi - lo) * u;
  }
};

}  // namespace

ValidationReport validate_problem(const ProblemSpec& spec, const ValidationBox& box,
                                  std::uint64_t seed, int samples) {
  spec.check_well_formed();  // throws on structural errors

  const int d = spec.dim;
  std::vector<double> lo = box.lo, hi = box.hi;
  if (lo.empty()) lo.assign(d, -1.0);
  if (hi.empty()) hi.assign(d, 1.0);
  if (lo.size() != static_cast<std::size_t>(d) || hi.size() != static_cast<std::size_t>(d))
    throw SpecError("validation box dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(lo[i] < hi[i])) throw SpecError("validation box is empty");

  ValidationReport report;
  report.seed = seed;
  report.samples = samples;
  Sampler rng(seed);

  const auto ugrid = spec.controls.grid(std::min(spec.controls.points_per_axis, 5));

  double lip_mu = 0.0, lip_sigma = 0.0;
  double growth_mu = 0.0, growth_sigma = 0.0;
  double growth_f = 0.0, growth_g = 0.0;
  bool eval_ok = true;
  std::string eval_err;

  std::vector<double> x1(d), x2(d), mu1(d), mu2(d);
  std::vector<double> s1(d * d), s2(d * d);
  const double diam = [&] {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    return std::sqrt(s);
  }();

  for (int it = 0; it < samples && eval_ok; ++it) {
    for (int i = 0; i < d; ++i) {
      x1[i] = rng.uniform(lo[i], hi[i]);
      // Pair points across scales so quotients probe short and long ranges.
      const double r = rng.uniform(-1.0, 1.0) * diam * std::pow(10.0, -3.0 * rng.uniform(0.0, 1.0));
      x2[i] = std::clamp(x1[i] + r, lo[i], hi[i]);
    }
    double dx = 0.0;
    for (int i = 0; i < d; ++i) dx += (x1[i] - x2[i]) * (x1[i] - x2[i]);
    dx = std::sqrt(dx);
    const double nx1 = std::sqrt(
        std::inner_product(x1.begin(), x1.end(), x1.begin(), 0.0));

    try {
      for (const auto& u : ugrid) {
        spec.eval_drift(0.0, x1, u, mu1);
        spec.eval_diffusion(0.0, x1, u, s1);
        double nmu1 = 0.0, ns1 = 0.0;
        for (int i = 0; i < d; ++i) nmu1 += mu1[i] * mu1[i];
        for (double v : s1) ns1 += v * v;
        nmu1 = std::sqrt(nmu1);
        ns1 = std::sqrt(ns1);
        growth_mu = std::max(growth_mu, nmu1 / (1.0 + nx1));
        growth_sigma = std::max(growth_sigma, ns1 / (1.0 + nx1));
        if (dx > 1e-12) {
          spec.eval_drift(0.0, x2, u, mu2);
          spec.eval_diffusion(0.0, x2, u, s2);
          double dmu = 0.0, ds = 0.0;
          for (int i = 0; i < d; ++i) dmu += (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]);
          for (std::size_t i = 0; i < s1.size(); ++i) ds += (s1[i] - s2[i]) * (s1[i] - s2[i]);
          lip_mu = std::max(lip_mu, std::sqrt(dmu) / dx);
          lip_sigma = std::max(lip_sigma, std::sqrt(ds) / dx);
        }
      }
      growth_f = std::max(growth_f, std::abs(spec.eval_reward(x1)) / (1.0 + nx1 * nx1));
      growth_g = std::max(growth_g, std::abs(spec.eval_constraint(x1)) / (1.0 + nx1 * nx1));
    } catch (const EvalError& e) {
      eval_ok = false;
      eval_err = e.what();
    }
  }

  auto push = [&](std::string name, CheckStatus st, double ev, std::string msg = {}) {
    report.checks.push_back({std::move(name), st, ev, std::move(msg)});
  };

  if (!eval_ok) {
    push("expression_evaluation", CheckStatus::Fail, 0.0, eval_err);
    return report;
  }
  push("expression_evaluation", CheckStatus::Pass, 1.0);
  push("lipschitz_mu", CheckStatus::Pass, lip_mu, "sampled quotient");
  push("lipschitz_sigma", CheckStatus::Pass, lip_sigma, "sampled quotient");

  // Linear growth of the coefficients: compare the quotient on the inner
  // half-box against the full box; a clear increase flags superlinear growth.
  {
    double inner_mu = 0.0, inner_sigma = 0.0;
    Sampler rng2(mix64(seed ^ 0x9e37u));
    std::vector<double> xi(d);
    std::vector<double> mu(d), sg(d * d);
    for (int it = 0; it < samples; ++it) {
      for (int i = 0; i < d; ++i) {
        const double mid = 0.5 * (lo[i] + hi[i]);
        const double half = 0.25 * (hi[i] - lo[i]);
        xi[i] = rng2.uniform(mid - half, mid + half);
      }
      const double nx = std::sqrt(std::inner_product(xi.begin(), xi.end(), xi.begin(), 0.0));
      for (const auto& u : ugrid) {
        spec.eval_drift(0.0, xi, u, mu);
        spec.eval_diffusion(0.0, xi, u, sg);
        double nmu = 0.0, ns = 0.0;
        for (int i = 0; i < d; ++i) nmu += mu[i] * mu[i];
        for (double v : sg) ns += v * v;
        inner_mu = std::max(inner_mu, std::sqrt(nmu) / (1.0 + nx));
        inner_sigma = std::max(inner_sigma, std::sqrt(ns) / (1.0 + nx));
      }
    }
    const double ratio_mu = inner_mu > 1e-12 ? growth_mu / inner_mu : 1.0;
    const double ratio_sigma = inner_sigma > 1e-12 ? growth_sigma / inner_sigma : 1.0;
    push("linear_growth_mu", ratio_mu > 1.6 ? CheckStatus::Warn : CheckStatus::Pass,
         growth_mu, ratio_mu > 1.6 ? "quotient grows with |x|" : "sampled quotient");
    push("linear_growth_sigma", ratio_sigma > 1.6 ? CheckStatus::Warn : CheckStatus::Pass,
         growth_sigma, ratio_sigma > 1.6 ? "quotient grows with |x|" : "sampled quotient");
  }

  push("quadratic_growth_f", CheckStatus::Pass, growth_f, "sampled quotient");
  push("quadratic_growth_g", CheckStatus::Pass, growth_g, "sampled quotient");

  if (spec.has_domain()) {
    // delta sign consistency: positive somewhere (O meets the box) and the
    // analytic kinds agree with delta's sign at sampled probes.
    Sampler rng3(mix64(seed ^ 0xd1f3u));
    int pos = 0, neg = 0, mismatch = 0;
    std::vector<double> xi(d);
    for (int it = 0; it < samples; ++it) {
      for (int i = 0; i < d; ++i) xi[i] = rng3.uniform(lo[i], hi[i]);
      EvalContext ctx;
      ctx.x = xi;
      const double dv = spec.domain->delta.eval(ctx);
      if (dv > 0.0) ++pos;
      if (dv < 0.0) ++neg;
      if (spec.domain->kind != DomainKind::Generic) {
        const double dist = distance_to_complement(spec, xi);
        if ((dv > 1e-9 && dist <= 0.0) || (dv < -1e-9 && dist > 0.0)) ++mismatch;
      }
    }
    if (pos == 0)
      push("delta_sign", CheckStatus::Fail, 0.0, "delta never positive on the box");
    else if (mismatch > 0)
      push("delta_sign", CheckStatus::Fail, static_cast<double>(mismatch),
           "delta sign disagrees with the declared shape");
    else
      push("delta_sign", CheckStatus::Pass, static_cast<double>(pos),
           neg == 0 ? "no exterior probes in box" : "interior and exterior probes seen");
  }

  return report;
}

}  // namespace cstoc
