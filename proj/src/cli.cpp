#include "pilotwave/cli.hpp"

#include "pilotwave/benchmarks.hpp"
#include "pilotwave/decay.hpp"
#include "pilotwave/dkp.hpp"
#include "pilotwave/fieldmodes.hpp"
#include "pilotwave/reldirac.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace pilotwave::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
    case ErrorCategory::shape:
    case ErrorCategory::unsupported:
      return exit_invalid_input;
    case ErrorCategory::validation:
    case ErrorCategory::domain:
    case ErrorCategory::stability:
      return exit_validation;
    case ErrorCategory::physics:
    case ErrorCategory::node:
      return exit_physics;
    case ErrorCategory::numerical:
    case ErrorCategory::sampler:
      return exit_numerical;
    case ErrorCategory::io:
      return exit_io;
  }
  return exit_internal;
}

int ValidationReport::exit_code() const {
  int worst = exit_ok;
  for (const auto& i : issues) {
    const int c = exit_code_for(i.category);
    // Input errors outrank everything else.
    if (worst == exit_ok || c == exit_invalid_input) worst = c;
  }
  return worst;
}

// ------------------------------------------------------------------ registry

namespace {

json cnum(double re, double im) { return json::array({re, im}); }

std::vector<ExperimentInfo> build_registry() {
  const json none;
  std::vector<ExperimentInfo> r;
  r.push_back({"pair-decay",
               "decaying two-particle system: guided pairs against the closed form",
               {
                   {"alpha", "number", 1.0, "initial relative spread (Var(x1-x2) = hbar alpha)"},
                   {"m1", "number", 1.0, "mass of particle 1"},
                   {"m2", "number", 1.0, "mass of particle 2"},
                   {"hbar", "number", 1.0, "reduced Planck constant"},
                   {"n", "integer", 100, "number of pairs"},
                   {"t_final", "number?", none, "end time (default 20 mu alpha)"},
                   {"dt", "number?", none, "RK4 step (default mu alpha / 20)"},
                   {"record_every", "integer", 10, "steps between stored points"},
                   {"centre_spread", "number", 1.0, "std. dev. of the sampled pair centre"},
               }});
  r.push_back({"imaging",
               "ghost imaging: partner beables through a thin lens after detection at a",
               {
                   {"alpha", "number", 0.01, "relative spread parameter"},
                   {"m1", "number", 1.0, "mass of the detected particle"},
                   {"m2", "number", 1.0, "mass of the imaged particle"},
                   {"hbar", "number", 1.0, "reduced Planck constant"},
                   {"sigma", "number", 100.0, "centre-of-mass parameter (Var(X) = hbar^2/sigma)"},
                   {"f", "number?", 10.0, "focal length"},
                   {"S", "number?", none, "object distance (default 2f)"},
                   {"Sp", "number?", none, "image distance (from the lens equation)"},
                   {"waist", "number", 0.2, "post-lens waist w"},
                   {"a_y", "number", 1.0, "detection point y"},
                   {"a_z", "number", 0.0, "detection point z"},
                   {"aperture", "number?", none, "lens aperture radius (default unlimited)"},
                   {"n", "integer", 200, "number of runs"},
                   {"dt", "number", 0.05, "nominal RK4 step"},
                   {"record_every", "integer", 10, "steps between stored points"},
               }});
  r.push_back({"equivariance",
               "KS test of a guided equilibrium ensemble against |psi(t)|^2",
               {
                   {"case", "string", "spin0-gaussian",
                    "spin0-gaussian | pauli-eigenstate | decaying-pair | field-mode"},
                   {"n", "integer", 10000, "ensemble size"},
                   {"g", "number", 0.5, "gyromagnetic factor (pauli-eigenstate)"},
               }});
  r.push_back({"arrival-time",
               "flux-weighted mean arrival time of a spin-1/2 eigenstate for several g",
               {
                   {"g_values", "json", json::array({0.0, 0.5}), "gyromagnetic factors"},
                   {"x0", "number", 4.0, "initial distance to the detector"},
                   {"k0", "number", 2.0, "mean wavenumber"},
                   {"sigma0", "number", 0.3, "initial packet width"},
                   {"t_end", "number", 8.0, "end of the arrival window"},
                   {"snapshots", "integer", 801, "snapshot count"},
               }});
  r.push_back({"measurement",
               "pointer measurement of a two-state superposition; channel fractions",
               {
                   {"weight", "number", 0.8, "Born weight |c_1|^2 of the first channel"},
                   {"coupling", "number", 3.0, "pointer momentum kick per unit eigenvalue"},
                   {"n", "integer", 10000, "ensemble size"},
                   {"t_readout", "number", 4.0, "readout time"},
               }});
  r.push_back({"dirac-demo",
               "Dirac plane-wave superposition: trajectories and |v| <= 1",
               {
                   {"mass", "number", 1.0, "particle mass"},
                   {"terms", "json",
                    json::array({json{{"coef", 1.0}, {"p", {0.6, 0.0, 0.0}}, {"sign", "positive"},
                                      {"spin", "up"}},
                                 json{{"coef", cnum(0.5, 0.3)}, {"p", {-0.2, 0.5, 0.0}},
                                      {"sign", "positive"}, {"spin", "down"}}}),
                    "plane-wave terms {coef, p, sign, spin}"},
                   {"n", "integer", 50, "trajectories"},
                   {"t_final", "number", 10.0, "end time"},
                   {"dt", "number", 0.01, "RK4 step"},
                   {"record_every", "integer", 10, "steps between stored points"},
                   {"checks", "integer", 10000, "random points for the causality check"},
               }});
  r.push_back({"dkp-energyflow",
               "DKP energy-momentum flow lines and energy density slice",
               {
                   {"rep", "string", "spin0", "spin0 | spin1"},
                   {"massless", "boolean", false, "Harish-Chandra massless projection"},
                   {"mass", "number", 1.0, "mass (normalization only when massless)"},
                   {"terms", "json", none, "plane-wave terms {coef, p, polarization, E}"},
                   {"observer", "json", "rest", "rest | total-momentum | [n0, n1, n2, n3]"},
                   {"box", "number", 20.0, "box edge for the total momentum"},
                   {"n", "integer", 50, "trajectories"},
                   {"t_final", "number", 10.0, "end time"},
                   {"dt", "number", 0.01, "RK4 step"},
                   {"record_every", "integer", 10, "steps between stored points"},
                   {"field_points", "integer", 64, "energy-density slice resolution"},
                   {"field_extent", "number", 10.0, "slice half-width"},
                   {"checks", "integer", 10000, "random points for the causality check"},
               }});
  r.push_back({"energy-shell",
               "energy-shell profile g(x) for a decay with an energy window",
               {
                   {"eplus_frac", "number", 0.02, "E_+ / (m c^2)"},
                   {"gap", "number", 0.001, "E_- = (1 - gap) E_+"},
                   {"mu_over_m", "number", 0.5, "reduced mass over particle mass"},
                   {"x_max", "number", 50.0, "curve range in units of lambda_c"},
                   {"points", "integer", 2001, "curve points"},
               }});
  r.push_back({"field-modes",
               "bosonic field modes: oscillator wavefunctions and mode beables",
               {
                   {"modes", "json",
                    json::array({json{{"k", 1.0}, {"fock", {1.0}}, {"q", 0.3}},
                                 json{{"k", 2.0},
                                      {"fock", {std::sqrt(0.5), std::sqrt(0.5)}},
                                      {"q", 0.4}},
                                 json{{"k", 1.5}, {"coherent", cnum(1.2, 0.3)}, {"q", 0.1}}}),
                    "modes {k, fock | coherent, q}"},
                   {"dispersion", "string", "massless", "massless | nonrelativistic"},
                   {"mass", "number", 1.0, "mass for the nonrelativistic dispersion"},
                   {"hbar", "number", 1.0, "reduced Planck constant"},
                   {"dt", "number", 1e-3, "RK4 step"},
                   {"steps", "integer", 4000, "number of steps"},
                   {"record_every", "integer", 10, "steps between stored points"},
               }});
  return r;
}

}  // namespace

const std::vector<ExperimentInfo>& registry() {
  static const std::vector<ExperimentInfo> r = build_registry();
  return r;
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const auto& e : registry())
    if (e.name == name) return e;
  throw Error(ErrorCategory::config, "experiment", "unknown experiment '" + name + "'");
}

// ------------------------------------------------------------------ config

namespace {

std::string normalize_key(std::string k) {
  while (!k.empty() && k.front() == '-') k.erase(k.begin());
  for (char& ch : k)
    if (ch == '-') ch = '_';
  return k;
}

json parse_flag_value(const std::string& v) {
  try {
    return json::parse(v);
  } catch (const json::parse_error&) {
    return v;
  }
}

void check_kind(const ParamSpec& p, const json& v) {
  bool ok = true;
  if (p.kind == "number") ok = v.is_number();
  else if (p.kind == "number?") ok = v.is_number() || v.is_null();
  else if (p.kind == "integer") ok = v.is_number_integer();
  else if (p.kind == "string") ok = v.is_string();
  else if (p.kind == "boolean") ok = v.is_boolean();
  if (!ok) throw Error(ErrorCategory::config, p.name, "expected " + p.kind + ", got " + v.dump());
}

}  // namespace

ExperimentConfig load_config(const std::optional<std::string>& file,
                             const std::optional<std::string>& experiment, const FlagMap& flags,
                             std::optional<std::uint64_t> seed,
                             std::optional<std::string> output_dir) {
  ExperimentConfig c;
  json given = json::object();
  if (file) {
    const json f = read_json(*file);
    if (!f.is_object()) throw Error(ErrorCategory::config, *file, "top level must be an object");
    for (const auto& [k, v] : f.items()) {
      if (k == "experiment") {
        if (!v.is_string()) throw Error(ErrorCategory::config, k, "must be a string");
        c.experiment = v.get<std::string>();
      } else if (k == "seed") {
        if (!v.is_number_unsigned()) throw Error(ErrorCategory::config, k, "must be a non-negative integer");
        c.seed = v.get<std::uint64_t>();
      } else if (k == "output_dir") {
        if (!v.is_string()) throw Error(ErrorCategory::config, k, "must be a string");
        c.output_dir = v.get<std::string>();
      } else if (k == "schema_version") {
        if (v != kSchemaVersion)
          throw Error(ErrorCategory::config, k, "unsupported schema_version " + v.dump());
      } else if (k == "parameters") {
        if (!v.is_object()) throw Error(ErrorCategory::config, k, "must be an object");
        given = v;
      } else {
        throw Error(ErrorCategory::config, k, "unknown key");
      }
    }
  }
  if (experiment) {
    if (!c.experiment.empty() && c.experiment != *experiment)
      throw Error(ErrorCategory::config, "experiment",
                  "config names '" + c.experiment + "' but '" + *experiment + "' was requested");
    c.experiment = *experiment;
  }
  if (c.experiment.empty()) throw Error(ErrorCategory::config, "experiment", "no experiment given");
  const ExperimentInfo& info = find_experiment(c.experiment);
  for (const auto& [k, v] : flags) given[normalize_key(k)] = parse_flag_value(v);
  if (seed) c.seed = *seed;
  if (output_dir) c.output_dir = *output_dir;

  for (const auto& [k, v] : given.items()) {
    const ParamSpec* spec = nullptr;
    for (const auto& p : info.params)
      if (p.name == k) spec = &p;
    if (!spec) throw Error(ErrorCategory::config, k, "unknown parameter for " + info.name);
    check_kind(*spec, v);
  }
  for (const auto& p : info.params)
    c.parameters[p.name] = given.contains(p.name) ? given[p.name] : p.fallback;
  return c;
}

// ------------------------------------------------------------------ helpers

namespace {

struct Params {
  const json& j;
  double num(const char* k) const { return j.at(k).get<double>(); }
  long integer(const char* k) const { return j.at(k).get<long>(); }
  std::string str(const char* k) const { return j.at(k).get<std::string>(); }
  bool null(const char* k) const { return j.at(k).is_null(); }
  double num_or(const char* k, double d) const { return null(k) ? d : num(k); }
};

cplx parse_complex(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw Error(ErrorCategory::config, field, "expected a number or [re, im]");
}

Vec3 parse_vec3(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 3)
    throw Error(ErrorCategory::config, field, "expected three numbers");
  Vec3 r;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw Error(ErrorCategory::config, field, "expected three numbers");
    r[i] = v[i].get<double>();
  }
  return r;
}

CVec3 parse_cvec3(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 3)
    throw Error(ErrorCategory::config, field, "expected three entries");
  CVec3 r;
  for (int i = 0; i < 3; ++i) r[i] = parse_complex(v[i], field);
  return r;
}

void require_positive(const Params& p, const char* k) {
  if (!(p.num(k) > 0)) throw Error(ErrorCategory::validation, k, "must be positive");
}

void require_count(const Params& p, const char* k, long lo) {
  if (p.integer(k) < lo)
    throw Error(ErrorCategory::validation, k, "must be at least " + std::to_string(lo));
}

void check_object_keys(const json& o, const std::string& field,
                       std::initializer_list<const char*> allowed) {
  if (!o.is_object()) throw Error(ErrorCategory::config, field, "expected an object");
  for (const auto& [k, v] : o.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw Error(ErrorCategory::config, field + "." + k, "unknown key");
  }
}

// Deterministic uniform start points on the z = 0 slice of [-L, L]^2.
std::vector<Vec3> plane_starts(std::size_t n, double L, std::uint64_t seed) {
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    const double x = -L + 2 * L * rng.uniform();
    const double y = -L + 2 * L * rng.uniform();
    out[i] = Vec3(x, y, 0.0);
  }
  return out;
}

double fmt6(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return std::strtod(b, nullptr);
}

std::string text6(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

std::string num_text(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

// ---- per-experiment preparation (shared by validate and run)

using Check = std::function<void(const Params&, json&)>;

std::vector<Check> checks_for(const std::string& exp);

// ---- pair-decay

DecayPairSpec pair_spec(const Params& p) {
  DecayPairSpec s{p.num("alpha"), p.num("m1"), p.num("m2"), p.num("hbar")};
  s.validate();
  return s;
}

LensSpec lens_spec(const Params& p) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double f = p.num_or("f", nan), S = p.num_or("S", nan), Sp = p.num_or("Sp", nan);
  if (std::isnan(S) && std::isnan(Sp) && !std::isnan(f)) S = 2 * f;
  return LensSpec::make(f, S, Sp);
}

ModeState mode_state(const Params& p) {
  const json& m = p.j.at("modes");
  if (!m.is_array() || m.empty()) throw Error(ErrorCategory::config, "modes", "expected a non-empty array");
  std::vector<ModeSpec> specs;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string f = "modes[" + std::to_string(i) + "]";
    check_object_keys(m[i], f, {"k", "fock", "coherent", "q"});
    ModeSpec s;
    if (!m[i].contains("k") || !m[i]["k"].is_number()) throw Error(ErrorCategory::config, f + ".k", "number required");
    s.k = m[i]["k"].get<double>();
    s.q = m[i].value("q", 0.0);
    const bool fock = m[i].contains("fock"), coh = m[i].contains("coherent");
    if (fock == coh) throw Error(ErrorCategory::config, f, "give exactly one of fock, coherent");
    if (fock) {
      if (!m[i]["fock"].is_array()) throw Error(ErrorCategory::config, f + ".fock", "expected an array");
      for (const auto& c : m[i]["fock"]) s.fock.push_back(parse_complex(c, f + ".fock"));
    } else {
      s.fock = coherent_fock(parse_complex(m[i]["coherent"], f + ".coherent"));
    }
    specs.push_back(std::move(s));
  }
  return ModeState::make(std::move(specs), parse_dispersion(p.str("dispersion")), p.num("mass"),
                         p.num("hbar"));
}

PlaneWaveSpinorState dirac_state(const Params& p) {
  const json& t = p.j.at("terms");
  if (!t.is_array() || t.empty()) throw Error(ErrorCategory::config, "terms", "expected a non-empty array");
  std::vector<DiracTerm> terms;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::string f = "terms[" + std::to_string(i) + "]";
    check_object_keys(t[i], f, {"coef", "p", "sign", "spin"});
    DiracTerm d;
    d.coef = parse_complex(t[i].value("coef", json(1.0)), f + ".coef");
    d.p = parse_vec3(t[i].value("p", json::array({0, 0, 0})), f + ".p");
    const std::string sign = t[i].value("sign", std::string("positive"));
    if (sign != "positive" && sign != "negative")
      throw Error(ErrorCategory::config, f + ".sign", "positive or negative");
    d.sign = sign == "positive" ? EnergySign::positive : EnergySign::negative;
    d.chi = spin_label(t[i].value("spin", std::string("up")));
    terms.push_back(d);
  }
  require_positive(p, "mass");
  return PlaneWaveSpinorState::one(p.num("mass"), terms);
}

json dkp_default_terms(DkpRep rep) {
  if (rep == DkpRep::spin0)
    return json::array({json{{"coef", 1.0}, {"p", {0.5, 0.0, 0.0}}},
                        json{{"coef", cnum(0.6, 0.2)}, {"p", {-0.3, 0.4, 0.0}}}});
  return json::array({json{{"coef", 1.0}, {"p", {0.5, 0.0, 0.0}}, {"polarization", {0, 1, 0}}},
                      json{{"coef", 0.6}, {"p", {-0.3, 0.4, 0.0}}, {"polarization", {0, 0, 1}}}});
}

DkpState dkp_state(const Params& p) {
  const DkpRep rep = parse_dkp_rep(p.str("rep"));
  const json t = p.null("terms") ? dkp_default_terms(rep) : p.j.at("terms");
  if (!t.is_array() || t.empty()) throw Error(ErrorCategory::config, "terms", "expected a non-empty array");
  std::vector<DkpPlaneWave> waves;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::string f = "terms[" + std::to_string(i) + "]";
    check_object_keys(t[i], f, {"coef", "p", "polarization", "E"});
    DkpPlaneWave w;
    w.coef = parse_complex(t[i].value("coef", json(1.0)), f + ".coef");
    w.p = parse_vec3(t[i].value("p", json::array({0, 0, 0})), f + ".p");
    if (t[i].contains("polarization")) w.polarization = parse_cvec3(t[i]["polarization"], f + ".polarization");
    else if (rep == DkpRep::spin1) throw Error(ErrorCategory::config, f + ".polarization", "required for spin1");
    if (t[i].contains("E")) {
      if (!t[i]["E"].is_number()) throw Error(ErrorCategory::config, f + ".E", "number required");
      w.E = t[i]["E"].get<double>();
    }
    waves.push_back(w);
  }
  require_positive(p, "mass");
  return build_dkp_state(rep, p.num("mass"), p.j.at("massless").get<bool>(), waves);
}

ObserverVector dkp_observer(const Params& p, const DkpState& s) {
  const json& o = p.j.at("observer");
  if (o.is_string()) {
    if (o == "rest") return ObserverVector::make(Eigen::Vector4d(1, 0, 0, 0));
    if (o == "total-momentum") {
      require_positive(p, "box");
      const double h = 0.5 * p.num("box");
      const TotalMomentum tm = total_energy_momentum(s, Vec3(-h, -h, -h), Vec3(h, h, h), 24);
      return *tm.observer;
    }
    throw Error(ErrorCategory::config, "observer", "rest, total-momentum or four numbers");
  }
  if (!o.is_array() || o.size() != 4) throw Error(ErrorCategory::config, "observer", "rest, total-momentum or four numbers");
  Eigen::Vector4d n;
  for (int i = 0; i < 4; ++i) {
    if (!o[i].is_number()) throw Error(ErrorCategory::config, "observer", "four numbers expected");
    n[i] = o[i].get<double>();
  }
  return ObserverVector::make(n);
}

std::vector<Check> checks_for(const std::string& exp) {
  std::vector<Check> c;
  if (exp == "pair-decay") {
    c.push_back([](const Params& p, json& d) {
      const DecayPairSpec s = pair_spec(p);
      d["mu"] = s.mu();
      d["M"] = s.M();
      d["t_final"] = p.num_or("t_final", 20 * s.mu() * s.alpha);
      d["dt"] = p.num_or("dt", s.mu() * s.alpha / 20);
    });
    c.push_back([](const Params& p, json&) {
      if (!p.null("t_final") && !(p.num("t_final") > 0))
        throw Error(ErrorCategory::validation, "t_final", "must be positive");
      if (!p.null("dt") && !(p.num("dt") > 0)) throw Error(ErrorCategory::validation, "dt", "must be positive");
    });
    c.push_back([](const Params& p, json&) {
      require_count(p, "n", 1);
      require_count(p, "record_every", 1);
      if (!(p.num("centre_spread") >= 0))
        throw Error(ErrorCategory::validation, "centre_spread", "must be >= 0");
    });
  } else if (exp == "imaging") {
    c.push_back([](const Params& p, json& d) { d["mu"] = pair_spec(p).mu(); });
    c.push_back([](const Params& p, json& d) {
      const LensSpec l = lens_spec(p);
      d["f"] = l.f;
      d["S"] = l.S;
      d["Sp"] = l.Sp;
      d["lens_equation_residual"] = std::abs(1 / l.S + 1 / l.Sp - 1 / l.f) * l.f;
      d["expected_focus"] = {-l.S / 2 - l.Sp, -l.Sp / l.S * p.num("a_y"), -l.Sp / l.S * p.num("a_z")};
    });
    c.push_back([](const Params& p, json&) {
      require_positive(p, "sigma");
      require_positive(p, "waist");
      require_positive(p, "dt");
      require_count(p, "n", 1);
      require_count(p, "record_every", 1);
      if (!p.null("aperture")) require_positive(p, "aperture");
    });
  } else if (exp == "equivariance") {
    c.push_back([](const Params& p, json& d) { d["case"] = to_string(parse_equivariance_case(p.str("case"))); });
    c.push_back([](const Params& p, json& d) {
      require_count(p, "n", 1000);
      d["ks_critical_1pct"] = ks_critical_1pct(std::size_t(p.integer("n")));
    });
  } else if (exp == "arrival-time") {
    c.push_back([](const Params& p, json&) {
      const json& g = p.j.at("g_values");
      if (!g.is_array() || g.empty()) throw Error(ErrorCategory::config, "g_values", "expected a non-empty array");
      for (const auto& v : g)
        if (!v.is_number()) throw Error(ErrorCategory::config, "g_values", "numbers expected");
    });
    c.push_back([](const Params& p, json& d) {
      require_positive(p, "x0");
      require_positive(p, "k0");
      require_positive(p, "sigma0");
      require_positive(p, "t_end");
      require_count(p, "snapshots", 3);
      d["classical_arrival"] = p.num("x0") / p.num("k0");
    });
  } else if (exp == "measurement") {
    c.push_back([](const Params& p, json& d) {
      const double w = p.num("weight");
      two_channel_measurement(w);
      d["born_weights"] = {w, 1 - w};
    });
    c.push_back([](const Params& p, json&) {
      require_positive(p, "coupling");
      require_positive(p, "t_readout");
      require_count(p, "n", 1);
    });
  } else if (exp == "dirac-demo") {
    c.push_back([](const Params& p, json& d) {
      const PlaneWaveSpinorState s = dirac_state(p);
      json e = json::array();
      for (const auto& t : s.terms()) e.push_back(dirac_energy(t.p, t.sign, s.mass()));
      d["energies"] = e;
    });
    c.push_back([](const Params& p, json&) {
      require_positive(p, "t_final");
      require_positive(p, "dt");
      require_count(p, "n", 1);
      require_count(p, "record_every", 1);
      require_count(p, "checks", 1);
    });
  } else if (exp == "dkp-energyflow") {
    c.push_back([](const Params& p, json& d) {
      const DkpState s = dkp_state(p);
      json e = json::array();
      double worst = 0.0;
      for (const auto& t : s.terms()) {
        e.push_back(t.E);
        worst = std::max(worst, constraint_residual(s.matrices(), t, s.mass(), s.massless()));
      }
      d["energies"] = e;
      d["constraint_residual"] = worst;
      const ObserverVector n = dkp_observer(p, s);
      d["observer"] = {n.n[0], n.n[1], n.n[2], n.n[3]};
    });
    c.push_back([](const Params& p, json&) {
      require_positive(p, "t_final");
      require_positive(p, "dt");
      require_positive(p, "field_extent");
      require_count(p, "n", 1);
      require_count(p, "record_every", 1);
      require_count(p, "field_points", 2);
      require_count(p, "checks", 1);
    });
  } else if (exp == "energy-shell") {
    c.push_back([](const Params& p, json& d) {
      const double ep = p.num("eplus_frac");
      const EnergyShell e = energy_shell(ep, ep * (1 - p.num("gap")), p.num("mu_over_m"));
      d["a_plus"] = fmt6(e.a_plus);
      d["a_minus"] = fmt6(e.a_minus);
      d["g0"] = e.g0();
    });
    c.push_back([](const Params& p, json&) {
      require_positive(p, "x_max");
      require_count(p, "points", 2);
    });
  } else if (exp == "field-modes") {
    c.push_back([](const Params& p, json& d) {
      const ModeState s = mode_state(p);
      json e = json::array();
      for (std::size_t l = 0; l < s.size(); ++l) e.push_back(s.energy(l));
      d["mode_energies"] = e;
    });
    c.push_back([](const Params& p, json&) {
      require_positive(p, "dt");
      require_count(p, "steps", 0);
      require_count(p, "record_every", 1);
    });
  }
  return c;
}

// ---- runners

std::string path_in(const ExperimentConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

json run_pair_decay(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  const DecayPairSpec s = pair_spec(p);
  const double tf = p.num_or("t_final", 20 * s.mu() * s.alpha);
  const double dt = p.num_or("dt", s.mu() * s.alpha / 20);
  const long n = p.integer("n");
  const long every = p.integer("record_every");
  const double cs = p.num("centre_spread");
  const double rs = std::sqrt(s.hbar * s.alpha);
  std::vector<PairTrajectoryResult> res(n);
  parallel_for(std::size_t(n), [&](std::size_t k) {
    CounterRng rng(c.seed, k);
    Vec3 X, r;
    for (int a = 0; a < 3; ++a) X[a] = cs * rng.normal();
    for (int a = 0; a < 3; ++a) r[a] = rs * rng.normal();
    const Config start{X + s.m2 / s.M() * r, X - s.m1 / s.M() * r};
    res[k] = pair_trajectories(s, start, tf, dt);
  });
  TrajectoryWriter w(path_in(c, "trajectories.csv"));
  double rel = 0, drift = 0, scaled = 0, dir = 0, bal = 0;
  for (long k = 0; k < n; ++k) {
    const auto& r = res[k];
    const std::string st = to_string(r.numeric.status);
    double scale = 0.0;
    for (std::size_t i = 0; i < r.numeric.times.size(); ++i) {
      const Config& x = r.numeric.configs[i];
      scale = std::max(scale, s.m1 * x[0].norm() + s.m2 * x[1].norm());
      if (i % every == 0 || i + 1 == r.numeric.times.size())
        for (int q = 0; q < 2; ++q) w.row(k, q, r.numeric.times[i], x[q], st);
    }
    rel = std::max(rel, r.max_rel_error);
    drift = std::max(drift, r.max_centre_drift);
    if (scale > 0) scaled = std::max(scaled, r.max_centre_drift / scale);
    dir = std::max(dir, r.max_direction_drift);
    bal = std::max(bal, r.max_momentum_balance);
  }
  w.close();
  files.push_back("trajectories.csv");
  return {{"pairs", n},
          {"t_final", tf},
          {"dt", dt},
          {"max_rel_error_vs_closed_form", rel},
          {"max_centre_drift", drift},
          {"max_centre_drift_rel_scale", scaled},
          {"max_direction_drift", dir},
          {"max_momentum_balance_rel", bal}};
}

json run_imaging(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  ImagingSpec is;
  is.pair = pair_spec(p);
  is.sigma = p.num("sigma");
  is.lens = lens_spec(p);
  is.waist = p.num("waist");
  is.a_perp = Vec3(0, p.num("a_y"), p.num("a_z"));
  if (!p.null("aperture")) is.aperture = p.num("aperture");
  is.dt = p.num("dt");
  is.record_every = int(p.integer("record_every"));
  const ImagingResult r = imaging_trajectories(is, std::size_t(p.integer("n")), c.seed);
  TrajectoryWriter w(path_in(c, "trajectories.csv"));
  for (std::size_t k = 0; k < r.runs.size(); ++k) {
    const auto& run = r.runs[k];
    for (std::size_t i = 0; i < run.beable1.times.size(); ++i)
      w.row(long(k), 0, run.beable1.times[i], run.beable1.configs[i][0], to_string(run.beable1.status));
    for (std::size_t i = 0; i < run.beable2.times.size(); ++i)
      w.row(long(k), 1, run.beable2.times[i], run.beable2.configs[i][0], to_string(run.beable2.status));
  }
  w.close();
  files.push_back("trajectories.csv");
  const Vec3 d = r.mean_endpoint - r.expected_focus;
  return {{"runs", r.runs.size()},
          {"exited", r.exited},
          {"detection_point", {r.detection_point[0], r.detection_point[1], r.detection_point[2]}},
          {"expected_focus", {r.expected_focus[0], r.expected_focus[1], r.expected_focus[2]}},
          {"mean_endpoint", {r.mean_endpoint[0], r.mean_endpoint[1], r.mean_endpoint[2]}},
          {"transverse_offset", std::hypot(d[1], d[2])},
          {"waist", is.waist},
          {"rms_spread", r.rms_spread},
          {"max_chord_deviation", r.max_chord_deviation},
          {"lens", {{"f", is.lens.f}, {"S", is.lens.S}, {"Sp", is.lens.Sp}}}};
}

json report_json(const EquivarianceReport& r) {
  json tests = json::array();
  for (const auto& k : r.tests)
    tests.push_back({{"t", k.t}, {"axis", k.axis}, {"statistic", k.statistic}, {"critical", k.critical}, {"pass", k.pass}});
  return {{"pass", r.pass}, {"max_ratio", r.max_ratio}, {"lost", r.lost}, {"tests", tests}};
}

json run_equivariance(const ExperimentConfig& c, const Params& p, std::vector<std::string>&) {
  const EquivarianceCase k = parse_equivariance_case(p.str("case"));
  json out = report_json(run_equivariance_case(k, std::size_t(p.integer("n")), c.seed, p.num("g")));
  out["case"] = to_string(k);
  out["n"] = p.integer("n");
  return out;
}

json run_arrival(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  ArrivalBenchmark b;
  b.x0 = p.num("x0");
  b.k0 = p.num("k0");
  b.sigma0 = p.num("sigma0");
  b.t_end = p.num("t_end");
  b.snapshots = int(p.integer("snapshots"));
  Curve curve;
  curve.header["kind"] = "arrival_flux";
  curve.columns = {"t"};
  json results = json::array();
  std::vector<ArrivalResult> rs;
  for (const auto& g : p.j.at("g_values")) {
    rs.push_back(arrival_benchmark(b, g.get<double>()));
    curve.columns.push_back("flux_g" + num_text(g.get<double>()));
    results.push_back({{"g", g}, {"mean", rs.back().mean}, {"quad_error", rs.back().quad_error}, {"total_flux", rs.back().total}});
  }
  for (std::size_t i = 0; i < rs[0].times.size(); ++i) {
    std::vector<double> row{rs[0].times[i]};
    for (const auto& r : rs) row.push_back(r.flux[i]);
    curve.rows.push_back(std::move(row));
  }
  write_curve_csv(path_in(c, "arrival_flux.csv"), curve);
  files.push_back("arrival_flux.csv");
  json out{{"results", results}};
  if (rs.size() >= 2) {
    const double diff = std::abs(rs[1].mean - rs[0].mean);
    out["mean_difference_first_two"] = diff;
    out["difference_over_error"] = diff / std::max(rs[0].quad_error + rs[1].quad_error, 1e-300);
  }
  return out;
}

json run_measurement(const ExperimentConfig& c, const Params& p, std::vector<std::string>&) {
  BranchingSpec b = two_channel_measurement(p.num("weight"));
  b.coupling = p.num("coupling");
  b.t_readout = p.num("t_readout");
  const std::size_t n = std::size_t(p.integer("n"));
  const BranchingResult r = measurement_branching(b, n, c.seed);
  json sig = json::array();
  for (std::size_t k = 0; k < r.fractions.size(); ++k) {
    const double sd = std::sqrt(r.born[k] * (1 - r.born[k]) / double(n));
    sig.push_back(sd > 0 ? std::abs(r.fractions[k] - r.born[k]) / sd : 0.0);
  }
  return {{"n", n},
          {"fractions", r.fractions},
          {"born", r.born},
          {"counts", r.counts},
          {"unassigned", r.unassigned},
          {"binomial_sigmas", sig},
          {"overlap", r.overlap}};
}

// Integrates start points under a velocity callback that may throw node errors.
TrajectoryRecord integrate_with(const std::function<Vec3(const Vec3&, double)>& vel, const Vec3& x0,
                                double tf, double dt, int every) {
  const ClosedFormVelocity field(1, [&](const Config& x, double t, Config& v) {
    try {
      v.assign(1, vel(x[0], t));
      return VelStatus::ok;
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::node) return VelStatus::node;
      throw;
    }
  });
  IntegrationControls ctl;
  ctl.dt = dt;
  ctl.record_every = every;
  return integrate_trajectory({{x0}, 0.0}, field, tf, ctl);
}

json run_dirac(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  const PlaneWaveSpinorState s = dirac_state(p);
  const auto starts = plane_starts(std::size_t(p.integer("n")), 5.0, c.seed);
  std::vector<TrajectoryRecord> recs(starts.size());
  auto vel = [&](const Vec3& x, double t) { return dirac_velocity(s, x, t).v; };
  parallel_for(starts.size(), [&](std::size_t k) {
    recs[k] = integrate_with(vel, starts[k], p.num("t_final"), p.num("dt"), int(p.integer("record_every")));
  });
  TrajectoryWriter w(path_in(c, "trajectories.csv"));
  long nodes = 0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (recs[k].status != TrajStatus::ok) ++nodes;
    for (std::size_t i = 0; i < recs[k].times.size(); ++i)
      w.row(long(k), 0, recs[k].times[i], recs[k].configs[i][0], to_string(recs[k].status));
  }
  w.close();
  files.push_back("trajectories.csv");

  // Causality over random points and times; product-state reduction.
  const long checks = p.integer("checks");
  double vmax = 0.0;
  long violations = 0;
  for (long i = 0; i < checks; ++i) {
    CounterRng rng(c.seed ^ 0x9e3779b97f4a7c15ULL, std::uint64_t(i));
    const Vec3 x(20 * rng.uniform() - 10, 20 * rng.uniform() - 10, 20 * rng.uniform() - 10);
    try {
      const double v = dirac_velocity(s, x, 20 * rng.uniform()).v.norm();
      vmax = std::max(vmax, v);
      if (v > 1.0 + 1e-12) ++violations;
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::node) throw;
    }
  }
  std::vector<DiracPairTerm> pair;
  for (const auto& a : s.terms())
    for (const auto& b : s.terms())
      pair.push_back({a.coef * b.coef, {a.p, b.p}, {a.sign, b.sign}, {a.chi, b.chi}});
  const PlaneWaveSpinorState s2 = PlaneWaveSpinorState::two(s.mass(), pair, false);
  double red = 0.0;
  for (int i = 0; i < 100; ++i) {
    CounterRng rng(c.seed ^ 0x51ed27ULL, std::uint64_t(i));
    const Vec3 x1(10 * rng.uniform() - 5, 10 * rng.uniform() - 5, 0), x2(10 * rng.uniform() - 5, 10 * rng.uniform() - 5, 0);
    const double t = 5 * rng.uniform();
    try {
      const auto v = dirac2_velocity(s2, x1, x2, t);
      red = std::max({red, (v[0] - dirac_velocity(s, x1, t).v).norm(), (v[1] - dirac_velocity(s, x2, t).v).norm()});
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::node) throw;
    }
  }
  return {{"trajectories", recs.size()},
          {"stopped_at_nodes", nodes},
          {"causality_points", checks},
          {"max_speed", vmax},
          {"speed_violations", violations},
          {"product_state_max_deviation", red}};
}

json run_dkp(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  const DkpState s = dkp_state(p);
  const ObserverVector obs = dkp_observer(p, s);
  const auto starts = plane_starts(std::size_t(p.integer("n")), 5.0, c.seed);
  std::vector<TrajectoryRecord> recs(starts.size());
  auto vel = [&](const Vec3& x, double t) { return energy_momentum_current(s, obs, x, t).v; };
  parallel_for(starts.size(), [&](std::size_t k) {
    recs[k] = integrate_with(vel, starts[k], p.num("t_final"), p.num("dt"), int(p.integer("record_every")));
  });
  TrajectoryWriter w(path_in(c, "trajectories.csv"));
  for (std::size_t k = 0; k < recs.size(); ++k)
    for (std::size_t i = 0; i < recs[k].times.size(); ++i)
      w.row(long(k), 0, recs[k].times[i], recs[k].configs[i][0], to_string(recs[k].status));
  w.close();
  files.push_back("trajectories.csv");

  Field2D f;
  f.quantity = "j0";
  f.nx = f.ny = int(p.integer("field_points"));
  const double L = p.num("field_extent");
  f.x_lo = f.y_lo = -L;
  f.x_hi = f.y_hi = L;
  f.data.resize(std::size_t(f.nx) * f.ny);
  parallel_for(f.data.size(), [&](std::size_t i) {
    const int ix = int(i % f.nx), iy = int(i / f.nx);
    const Vec3 x(-L + 2 * L * ix / (f.nx - 1), -L + 2 * L * iy / (f.ny - 1), 0.0);
    const Eigen::Matrix4d th = energy_momentum_tensor(s, x, 0.0);
    const Eigen::Vector4d nl(obs.n[0], -obs.n[1], -obs.n[2], -obs.n[3]);
    f.data[i] = (th * nl)[0];
  });
  write_field(path_in(c, "energy_density.bin"), f);
  files.push_back("energy_density.bin");
  files.push_back("energy_density.bin.json");

  const long checks = p.integer("checks");
  double min_j0 = std::numeric_limits<double>::infinity(), min_jj = min_j0, vmax = 0.0;
  long violations = 0;
  for (long i = 0; i < checks; ++i) {
    CounterRng rng(c.seed ^ 0x9e3779b97f4a7c15ULL, std::uint64_t(i));
    const Vec3 x(20 * rng.uniform() - 10, 20 * rng.uniform() - 10, 20 * rng.uniform() - 10);
    const double t = 20 * rng.uniform();
    const Eigen::Matrix4d th = energy_momentum_tensor(s, x, t);
    const Eigen::Vector4d nl(obs.n[0], -obs.n[1], -obs.n[2], -obs.n[3]);
    const Eigen::Vector4d j = th * nl;
    const double jj = j[0] * j[0] - j.tail<3>().squaredNorm();
    const double scale = std::max(j[0] * j[0], 1e-300);
    min_j0 = std::min(min_j0, j[0]);
    min_jj = std::min(min_jj, jj / scale);
    if (j[0] > 0) vmax = std::max(vmax, j.tail<3>().norm() / j[0]);
    if (j[0] < -1e-12 * s.density_bound() || jj < -1e-10 * scale) ++violations;
  }
  DkpPairState pair;
  pair.terms.push_back({1.0, s, s});
  double red = 0.0;
  for (int i = 0; i < 100; ++i) {
    CounterRng rng(c.seed ^ 0x51ed27ULL, std::uint64_t(i));
    const Vec3 x1(10 * rng.uniform() - 5, 10 * rng.uniform() - 5, 0), x2(10 * rng.uniform() - 5, 10 * rng.uniform() - 5, 0);
    const double t = 5 * rng.uniform();
    try {
      const DkpPairFlow fl = dkp2_velocity(pair, obs, x1, x2, t);
      red = std::max({red, (fl.v[0] - energy_momentum_current(s, obs, x1, t).v).norm(),
                      (fl.v[1] - energy_momentum_current(s, obs, x2, t).v).norm()});
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::node) throw;
    }
  }
  double worst = 0.0;
  for (const auto& t : s.terms()) worst = std::max(worst, constraint_residual(s.matrices(), t, s.mass(), s.massless()));
  return {{"rep", to_string(s.rep())},
          {"massless", s.massless()},
          {"observer", {obs.n[0], obs.n[1], obs.n[2], obs.n[3]}},
          {"trajectories", recs.size()},
          {"causality_points", checks},
          {"min_j0", min_j0},
          {"min_jj_over_j0sq", min_jj},
          {"max_speed", vmax},
          {"causality_violations", violations},
          {"constraint_residual", worst},
          {"product_state_max_deviation", red}};
}

json run_energy_shell(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  const double ep = p.num("eplus_frac");
  const EnergyShell e = energy_shell(ep, ep * (1 - p.num("gap")), p.num("mu_over_m"));
  const auto pts = energy_shell_curve(e, p.num("x_max"), int(p.integer("points")));
  Curve curve;
  curve.header["kind"] = "energy_shell";
  curve.header["units"] = "x in lambda_c, a in 1/lambda_c";
  curve.header["a_plus"] = text6(e.a_plus);
  curve.header["a_minus"] = text6(e.a_minus);
  curve.header["a_plus_full"] = num_text(e.a_plus);
  curve.header["a_minus_full"] = num_text(e.a_minus);
  curve.columns = {"x", "g2"};
  for (const auto& q : pts) curve.rows.push_back({q[0], q[1]});
  write_curve_csv(path_in(c, "energy_shell.csv"), curve);
  files.push_back("energy_shell.csv");
  const ShellWeights w = shell_weights(e, p.num("x_max"), 5.0);
  return {{"a_plus", fmt6(e.a_plus)},
          {"a_minus", fmt6(e.a_minus)},
          {"a_plus_full", e.a_plus},
          {"a_minus_full", e.a_minus},
          {"g0", e.g0()},
          {"g2_weight_within_5", w.plain},
          {"g2x2_weight_within_5", w.radial}};
}

json run_field_modes(const ExperimentConfig& c, const Params& p, std::vector<std::string>& files) {
  ModeState s = mode_state(p);
  std::vector<double> e0;
  for (std::size_t l = 0; l < s.size(); ++l) e0.push_back(s.energy_expectation(l, 0.0));
  const ModeTrajectory tr = evolve_modes(s, p.num("dt"), int(p.integer("steps")));
  TrajectoryWriter w(path_in(c, "trajectories.csv"));
  const long every = p.integer("record_every");
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    if (long(i) % every == 0 || i + 1 == tr.times.size())
      for (std::size_t l = 0; l < s.size(); ++l) w.row(0, int(l), tr.times[i], Vec3(tr.q[i][l], 0, 0), "ok");
  w.close();
  files.push_back("trajectories.csv");
  double drift = 0.0;
  json moved = json::array();
  for (std::size_t l = 0; l < s.size(); ++l) {
    drift = std::max(drift, std::abs(s.energy_expectation(l, s.t()) - e0[l]));
    double m = 0.0;
    for (const auto& q : tr.q) m = std::max(m, std::abs(q[l] - tr.q[0][l]));
    moved.push_back(m);
  }
  return {{"modes", s.size()}, {"t_final", s.t()}, {"energy_drift", drift}, {"max_excursion", moved}};
}

}  // namespace

ValidationReport validate(const ExperimentConfig& c) {
  ValidationReport r;
  const Params p{c.parameters};
  for (const auto& check : checks_for(c.experiment)) {
    try {
      check(p, r.derived);
    } catch (const Error& e) {
      r.issues.push_back({e.category(), e.field(), e.reason()});
    } catch (const json::exception& e) {
      r.issues.push_back({ErrorCategory::config, "parameters", e.what()});
    }
  }
  return r;
}

RunResult run(const ExperimentConfig& c) {
  const ValidationReport v = validate(c);
  if (!v.ok()) throw Error(v.issues.front().category, v.issues.front().field, v.issues.front().message);
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw Error(ErrorCategory::io, c.output_dir, ec.message());

  const auto t0 = std::chrono::steady_clock::now();
  const Params p{c.parameters};
  RunResult r;
  const std::string& e = c.experiment;
  if (e == "pair-decay") r.summary = run_pair_decay(c, p, r.files);
  else if (e == "imaging") r.summary = run_imaging(c, p, r.files);
  else if (e == "equivariance") r.summary = run_equivariance(c, p, r.files);
  else if (e == "arrival-time") r.summary = run_arrival(c, p, r.files);
  else if (e == "measurement") r.summary = run_measurement(c, p, r.files);
  else if (e == "dirac-demo") r.summary = run_dirac(c, p, r.files);
  else if (e == "dkp-energyflow") r.summary = run_dkp(c, p, r.files);
  else if (e == "energy-shell") r.summary = run_energy_shell(c, p, r.files);
  else if (e == "field-modes") r.summary = run_field_modes(c, p, r.files);
  else throw Error(ErrorCategory::config, "experiment", "unknown experiment '" + e + "'");
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json stats = r.summary;
  stats["schema_version"] = kSchemaVersion;
  stats["experiment"] = e;
  stats["seed"] = c.seed;
  write_json(path_in(c, "stats.json"), stats);
  r.files.push_back("stats.json");

  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json manifest{{"schema_version", kSchemaVersion},
                {"experiment", e},
                {"seed", c.seed},
                {"config", {{"experiment", e}, {"seed", c.seed}, {"output_dir", c.output_dir}, {"parameters", c.parameters}}},
                {"derived", v.derived},
                {"versions",
                 {{"pilotwave", "1.0.0"},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", __VERSION__}}},
                {"threads", thread_count()},
                {"wall_time_s", r.wall_time},
                {"timestamp", stamp},
                {"summary", r.summary},
                {"files", r.files}};
  write_json(path_in(c, "manifest.json"), manifest);
  r.files.push_back("manifest.json");
  return r;
}

// ------------------------------------------------------------------ files

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCategory::io, path, "cannot open for writing");
  f.write(text.data(), std::streamsize(text.size()));
  if (!f) throw Error(ErrorCategory::io, path, "write failed");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCategory::io, path, "cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char d) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == d) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error(ErrorCategory::io, path, "bad number '" + s + "'");
  return v;
}

// Reads "# key=value" lines; requires schema_version first.
std::map<std::string, std::string> read_header(std::istringstream& in, const std::string& path,
                                               std::string& first_data_line) {
  std::map<std::string, std::string> h;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) != 0) {
      first_data_line = line;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCategory::io, path, "bad header line");
    const std::string k = line.substr(2, eq - 2), v = line.substr(eq + 1);
    if (first && k != "schema_version") throw Error(ErrorCategory::io, path, "schema_version must come first");
    first = false;
    h[k] = v;
  }
  if (h.count("schema_version") == 0 || h["schema_version"] != std::to_string(kSchemaVersion))
    throw Error(ErrorCategory::io, path, "unsupported or missing schema_version");
  return h;
}

}  // namespace

TrajectoryWriter::TrajectoryWriter(const std::string& path) : path_(path) {
  buf_ = "# schema_version=" + std::to_string(kSchemaVersion) + "\n# kind=trajectories\n";
  buf_ += "run_id,particle,t,x,y,z,status\n";
}

void TrajectoryWriter::row(long run_id, int particle, double t, const Vec3& x, const std::string& status) {
  buf_ += std::to_string(run_id) + "," + std::to_string(particle) + "," + num_text(t) + "," + num_text(x[0]) + "," +
          num_text(x[1]) + "," + num_text(x[2]) + "," + status + "\n";
}

void TrajectoryWriter::close() { write_text(path_, buf_); }

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string head;
  const auto h = read_header(in, path, head);
  if (h.count("kind") == 0 || h.at("kind") != "trajectories") throw Error(ErrorCategory::io, path, "not a trajectory file");
  if (head != "run_id,particle,t,x,y,z,status") throw Error(ErrorCategory::io, path, "unexpected column header");
  std::vector<TrajectoryRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw Error(ErrorCategory::io, path, "expected 7 fields");
    TrajectoryRow r;
    r.run_id = long(to_double(f[0], path));
    r.particle = int(to_double(f[1], path));
    r.t = to_double(f[2], path);
    r.x = to_double(f[3], path);
    r.y = to_double(f[4], path);
    r.z = to_double(f[5], path);
    r.status = f[6];
    if (r.status != "ok" && r.status != "node_encounter" && r.status != "exited")
      throw Error(ErrorCategory::io, path, "unknown status '" + r.status + "'");
    rows.push_back(r);
  }
  return rows;
}

void write_curve_csv(const std::string& path, const Curve& c) {
  std::string s = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  for (const auto& [k, v] : c.header)
    if (k != "schema_version") s += "# " + k + "=" + v + "\n";
  for (std::size_t i = 0; i < c.columns.size(); ++i) s += (i ? "," : "") + c.columns[i];
  s += "\n";
  for (const auto& r : c.rows) {
    if (r.size() != c.columns.size()) throw Error(ErrorCategory::shape, path, "row width differs from columns");
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + num_text(r[i]);
    s += "\n";
  }
  write_text(path, s);
}

Curve read_curve_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  Curve c;
  std::string head;
  c.header = read_header(in, path, head);
  c.columns = split(head, ',');
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != c.columns.size()) throw Error(ErrorCategory::io, path, "row width differs from header");
    std::vector<double> r;
    for (const auto& x : f) r.push_back(to_double(x, path));
    c.rows.push_back(std::move(r));
  }
  return c;
}

void write_field(const std::string& path, const Field2D& f) {
  if (f.data.size() != std::size_t(f.nx) * std::size_t(f.ny))
    throw Error(ErrorCategory::shape, path, "data size differs from nx * ny");
  std::string bytes(f.data.size() * 8, '\0');
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &f.data[i], 8);
    for (int b = 0; b < 8; ++b) bytes[8 * i + b] = char((u >> (8 * b)) & 0xff);
  }
  write_text(path, bytes);
  write_json(path + ".json", {{"schema_version", kSchemaVersion},
                              {"quantity", f.quantity},
                              {"dtype", "float64"},
                              {"endianness", "little"},
                              {"order", "row-major, y slowest"},
                              {"shape", {f.ny, f.nx}},
                              {"extents", {{"x", {f.x_lo, f.x_hi}}, {"y", {f.y_lo, f.y_hi}}}}});
}

Field2D read_field(const std::string& path) {
  const json side = read_json(path + ".json");
  try {
    if (side.at("schema_version") != kSchemaVersion || side.at("dtype") != "float64" || side.at("endianness") != "little")
      throw Error(ErrorCategory::io, path, "unsupported field sidecar");
    Field2D f;
    f.quantity = side.at("quantity").get<std::string>();
    f.ny = side.at("shape")[0].get<int>();
    f.nx = side.at("shape")[1].get<int>();
    f.x_lo = side.at("extents").at("x")[0].get<double>();
    f.x_hi = side.at("extents").at("x")[1].get<double>();
    f.y_lo = side.at("extents").at("y")[0].get<double>();
    f.y_hi = side.at("extents").at("y")[1].get<double>();
    const std::string bytes = read_text(path);
    if (bytes.size() != std::size_t(f.nx) * std::size_t(f.ny) * 8)
      throw Error(ErrorCategory::io, path, "file size does not match the sidecar shape");
    f.data.resize(std::size_t(f.nx) * f.ny);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      std::uint64_t u = 0;
      for (int b = 0; b < 8; ++b) u |= std::uint64_t(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
      std::memcpy(&f.data[i], &u, 8);
    }
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, path + ".json", e.what());
  }
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::config, path, e.what());
  }
}

namespace {

json read_versioned(const std::string& path, std::initializer_list<const char*> keys) {
  json j = read_json(path);
  if (!j.is_object() || !j.contains("schema_version") || j["schema_version"] != kSchemaVersion)
    throw Error(ErrorCategory::io, path, "unsupported or missing schema_version");
  for (const char* k : keys)
    if (!j.contains(k)) throw Error(ErrorCategory::io, path, std::string("missing key ") + k);
  return j;
}

}  // namespace

json read_stats(const std::string& path) { return read_versioned(path, {"experiment", "seed"}); }

json read_manifest(const std::string& path) {
  return read_versioned(path, {"experiment", "seed", "config", "versions", "wall_time_s", "summary", "files"});
}

std::string usage() {
  std::string s =
      "usage: pilotwave run <experiment> [--config FILE] [--seed N] [--out DIR] [--<param> VALUE ...]\n"
      "       pilotwave validate <experiment> [--config FILE] [--<param> VALUE ...]\n"
      "       pilotwave list\n"
      "\nexit codes: 0 ok, 2 invalid input, 3 validation, 4 physics, 5 numerical, 6 I/O\n"
      "\nexperiments:\n";
  for (const auto& e : registry()) s += "  " + e.name + "  " + e.summary + "\n";
  return s;
}

}  // namespace pilotwave::cli
