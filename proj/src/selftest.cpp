#include "skt/harness.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>
#include <random>
#include <sstream>

namespace skt {

namespace {

class Suite {
 public:
  explicit Suite(std::ostream& out) : out_(out) {}

  template <typename Fn>
  void check(const char* name, Fn&& fn) {
    std::string detail;
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    out_ << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) out_ << " (" << detail << ")";
    out_ << "\n";
    (ok ? result_.passed : result_.failed) += 1;
  }

  SelftestResult result() const { return result_; }

 private:
  std::ostream& out_;
  SelftestResult result_;
};

std::string str(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Coefficients with a positive max-kappa certificate.
std::pair<CoefficientSet, EntropyWeights> random_structured(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> off(0.0, 1.0), diag(0.5, 2.0), base(0.1, 1.0);
  for (;;) {
    Matrix a(n, n);
    Vector a0(n);
    for (int i = 0; i < n; ++i) {
      a0(i) = base(rng);
      for (int j = 0; j < n; ++j) a(i, j) = i == j ? diag(rng) : off(rng);
    }
    CoefficientSet c(a, a0);
    if (auto w = find_pi_max_kappa(c)) return {c, *w};
  }
}

}  // namespace

SelftestResult run_selftest(std::ostream& out, std::uint64_t seed) {
  Suite suite(out);
  std::mt19937_64 rng(seed);

  suite.check("closed-form cyclic weights flip at a^3 = 1/512", [](std::string& d) {
    const double t = 0.125;
    const bool below = cyclic3_pi(t * (1 - 1e-9), t * (1 - 1e-9), t * (1 - 1e-9)).has_value();
    const bool above = cyclic3_pi(t * (1 + 1e-9), t * (1 + 1e-9), t * (1 + 1e-9)).has_value();
    d = "below " + std::to_string(below) + ", above " + std::to_string(above);
    return !below && above;
  });

  suite.check("max-kappa program agrees with the closed form on cyclic3", [&](std::string& d) {
    std::uniform_real_distribution<double> dist(0.02, 1.0);
    int bad = 0;
    for (int k = 0; k < 200; ++k) {
      const double x = dist(rng), y = dist(rng), z = dist(rng);
      if (std::abs(512.0 * x * y * z - 1.0) < 1e-3) continue;
      const bool lp = find_pi_max_kappa(cyclic3_coefficients(x, y, z)).has_value();
      if (lp != cyclic3_pi(x, y, z).has_value()) ++bad;
    }
    d = std::to_string(bad) + " disagreements";
    return bad == 0;
  });

  suite.check("cyclic3 sweep threshold", [](std::string& d) {
    const auto s = sweep_cyclic3(0.10, 0.15, 16, 1);
    if (!s.lp_threshold) return false;
    d = "threshold " + str(*s.lp_threshold);
    return std::abs(*s.lp_threshold - 0.125) <= 1e-3;
  });

  suite.check("self-diffusion dominance is stricter than the kappa condition", [](std::string&) {
    const auto c2 = cyclic3_coefficients(0.2, 0.2, 0.2);
    return !check_wcd(c2) && find_pi_max_kappa(c2).has_value() &&
           !check_wcd(cyclic3_coefficients(0.4, 0.4, 0.4)) &&
           check_wcd(cyclic3_coefficients(0.6, 0.6, 0.6));
  });

  suite.check("symmetric coefficients are detailed balanced", [](std::string&) {
    const auto cfg = preset_config("skt-two-species");
    const auto pi = check_detailed_balance(cfg.coefficients());
    return pi && std::abs((*pi)(0) - 0.5) < 1e-14 && std::abs((*pi)(1) - 0.5) < 1e-14;
  });

  suite.check("quadratic-form lower bounds", [&](std::string& d) {
    std::uniform_real_distribution<double> zdist(-1.0, 1.0), ldist(-6.0, 3.0), edist(-4.0, 0.0);
    long fails = 0;
    for (int k = 0; k < 600; ++k) {
      const int n = 2 + k % 3;
      const auto [coeffs, weights] = random_structured(rng, n);
      Vector u(n), z(n);
      for (int i = 0; i < n; ++i) {
        u(i) = std::exp(ldist(rng));
        z(i) = zdist(rng);
      }
      const double eps = std::pow(10.0, edist(rng));
      const double eta = 0.5 * eta0(coeffs);
      fails += !quadform_bound_HA(u, z, coeffs, weights.pi).holds();
      fails += !quadform_bound_HepsAeps(u, z, coeffs, weights, eps).holds();
      fails += !quadform_bound_shifted(u, z, coeffs, weights, eps, eta).holds();
    }
    d = std::to_string(fails) + " failures";
    return fails == 0;
  });

  suite.check("entropy-variable transform round trip", [&](std::string& d) {
    std::uniform_real_distribution<double> ldist(std::log(1e-6), std::log(1e6)), pdist(0.1, 10.0),
        edist(std::log(1e-2), 0.0);
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const double u = std::exp(ldist(rng)), pi = pdist(rng), eps = std::exp(edist(rng));
      const double back = invert_entropy_derivative(entropy_derivative(u, pi, eps), pi, eps);
      worst = std::max(worst, std::abs(back - u) / u);
    }
    d = "max rel err " + str(worst);
    return worst <= 1e-12;
  });

  suite.check("mass: conserved without delta, predicted drift with delta", [](std::string& d) {
    auto cfg = preset_config("skt-two-species");
    cfg.grid.nx = 40;
    cfg.t_end = 0.05;
    cfg.scheme.mode = SchemeMode::standard;
    cfg.scheme.reg.delta = 0.0;
    const auto a = simulate(cfg);
    cfg.scheme.reg.delta = 1e-2;
    const auto b = simulate(cfg);
    d = "delta=0 " + str(a.summary.max_mass_error_delta0) + ", drift " +
        str(b.summary.max_mass_drift_error);
    return a.summary.max_mass_error_delta0 <= 1e-12 && b.summary.max_mass_drift_error <= 1e-10;
  });

  for (const auto& preset : scenario_presets()) {
    const std::string name = "entropy inequality and duality monitor: " + preset.name;
    suite.check(name.c_str(), [&](std::string& d) {
      auto cfg = preset_config(preset.name);
      cfg.grid.nx = 40;
      cfg.t_end = 50 * cfg.scheme.reg.tau;
      const auto o = simulate(cfg);
      d = std::to_string(o.summary.accepted_steps) + " steps";
      return o.summary.entropy_failures == 0 && o.summary.pointwise_duality_violations == 0 &&
             o.summary.cubic_integral.allFinite();
    });
  }

  suite.check("relative entropy decreases and bounds the L1 distance", [](std::string& d) {
    auto cfg = preset_config("skt-two-species-asym");
    cfg.grid.nx = 50;
    cfg.t_end = 0.2;
    const auto o = simulate(cfg);
    d = "max increase " + str(o.summary.max_h_eta_increase);
    return o.summary.h_eta_violations == 0 && o.summary.ck_violations == 0;
  });

  suite.check("field file round trip", [&](std::string&) {
    const auto cfg = preset_config("segregation");
    auto field = make_initial(cfg.initial, cfg.grid.make(), cfg.species());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index k = 0; k < field.values.size(); ++k) field.values.data()[k] = dist(rng) / 3.0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("skt-selftest-" + std::to_string(seed) + ".txt");
    write_field(field, path.string(), 0.25);
    double t = 0.0;
    const auto back = load_field(path.string(), &t);
    std::filesystem::remove(path);
    return back.grid == field.grid && back.values == field.values && t == 0.25;
  });

  return suite.result();
}

}  // namespace skt
