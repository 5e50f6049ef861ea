#pragma once

// Config-driven runs behind the command-line driver. Each returns its checks
// and the text of every file it emits; writing and hashing happen in the caller.

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blil/config.hpp"
#include "blil/counterexample.hpp"
#include "blil/manifest.hpp"
#include "blil/suites.hpp"

namespace blil {

struct RunOutput {
  std::vector<CheckRecord> checks;
  std::map<std::string, std::string> files;
};

inline HarmonicField build_field(const ExperimentConfig& c, int i) {
  const auto w = parse_weight(c.weight);
  const auto& f = c.field;
  if (f.kind == "lacunary") return lacunary_series(w, f.terms, {}, c.seed + static_cast<std::uint64_t>(i));
  if (f.kind == "constant") return constant_field(f.value);
  if (f.kind == "weight") return weight_field(w);
  if (f.kind == "weight2") return weight_squared_field(w);
  return poisson_extend(boundary_from_csv(f.boundary), c.tol);
}

inline GridSpec growth_grid(const ExperimentConfig& c) {
  return {c.samples.lo, c.samples.hi, 0, std::ldexp(1.0, -c.grid.depth), 4.0, static_cast<std::size_t>(c.grid.heights),
          true, c.grid.ratio, static_cast<std::size_t>(c.grid.cap)};
}

inline std::vector<double> config_levels(const ExperimentConfig& c) {
  std::vector<double> v;
  for (int k = c.levels.from; k <= c.levels.to; ++k) v.push_back(std::ldexp(1.0, k));
  return v;
}

/// Largest k with w(s_k) = 2^k attainable above the smallest double. Slowly
/// growing weights reach only a few levels.
inline int reachable_levels(const Weight& w) {
  return static_cast<int>(std::floor(std::log2(w(std::numeric_limits<double>::denorm_min()))));
}

// ---------------------------------------------------------------------------

/// Monotone, unbounded, doubling and scale-sequence checks, plus the multiplier band.
inline RunOutput run_weights_check(const ExperimentConfig& c) {
  const auto w = parse_weight(c.weight);
  RunOutput out;
  const auto grid = log_grid(std::ldexp(1.0, -c.grid.depth), 1.0, 200);
  std::ostringstream wcsv;
  wcsv << "y,w\n";
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double y : grid) {
    const double v = w(y);
    wcsv << fmt17(y) << ',' << fmt17(v) << '\n';
    monotone = monotone && v >= 1.0 && v <= prev * (1 + 1e-12);
    prev = v;
  }
  out.checks.push_back({"monotone", monotone, {}, "w >= 1 and non-increasing on the log grid"});
  const double D = verify_doubling(w, grid);
  out.checks.push_back({"doubling", D <= w.doubling_constant() + 1e-12,
                        {{"measured", D}, {"declared", w.doubling_constant()}}, "max w(y)/w(2y)"});
  const auto seq = scale_sequence(w, std::min(c.levels.to, reachable_levels(w)), c.tol);
  std::ostringstream scsv;
  scsv << "k,s,alpha\n";
  double worst = 0.0;
  for (std::size_t k = 0; k < seq.s.size(); ++k) {
    scsv << k << ',' << fmt17(seq.s[k]) << ',' << seq.alpha[k] << '\n';
    worst = std::max(worst, std::abs(w(seq.s[k]) / std::ldexp(1.0, static_cast<int>(k)) - 1.0));
  }
  out.checks.push_back({"scale_sequence", worst <= 1e-6, {{"max_rel_err", worst}, {"levels", static_cast<double>(seq.s.size())}},
                        "w(s_k) = 2^k over the levels reachable in double precision"});
  std::ostringstream mcsv;
  mcsv << "tau,m,m_times_w\n";
  double lo = 1e300, hi = 0.0;
  for (double tau : log_grid(1.0, 1e6, 100)) {
    const double m = multiplier_symbol(w, tau);
    lo = std::min(lo, m * w(1.0 / tau));
    hi = std::max(hi, m * w(1.0 / tau));
    mcsv << fmt17(tau) << ',' << fmt17(m) << ',' << fmt17(m * w(1.0 / tau)) << '\n';
  }
  out.checks.push_back({"multiplier_band", hi / lo <= 100.0, {{"c", lo}, {"C", hi}}, "m(tau) w(1/tau) in [c, C]"});
  out.files = {{"weight.csv", wcsv.str()}, {"scales.csv", scsv.str()}, {"multiplier.csv", mcsv.str()}};
  return out;
}

/// Growth norm and Bloch seminorm per field, each on the grid and its refinement.
inline RunOutput run_field_build(const ExperimentConfig& c) {
  const auto w = parse_weight(c.weight);
  const auto grid = growth_grid(c);
  RunOutput out;
  std::ostringstream csv;
  csv << "field,growth_norm,growth_norm_refined,bloch,bloch_refined\n";
  bool stable = true;
  for (int i = 0; i < c.field.count; ++i) {
    const auto u = build_field(c, i);
    const double g = growth_norm(u, flat_domain(), w, grid), gr = growth_norm(u, flat_domain(), w, grid.refined());
    const double b = bloch_seminorm(u, flat_domain(), grid), br = bloch_seminorm(u, flat_domain(), grid.refined());
    csv << i << ',' << fmt17(g) << ',' << fmt17(gr) << ',' << fmt17(b) << ',' << fmt17(br) << '\n';
    auto near = [](double a, double r) { return std::isfinite(a) && std::abs(r - a) <= 0.1 * std::abs(a); };
    stable = stable && near(g, gr) && near(b, br);
  }
  out.checks.push_back({"grid_stable", stable, {}, "norms change by at most 10% under refinement"});
  out.files["fields.csv"] = csv.str();
  return out;
}

/// Ratio profiles at every x for every field. `profiles.csv` has one row per
/// (field, x, level), `per_x.csv` the per-x maxima, `summary.csv` one row per field.
inline RunOutput run_lil_experiment(const ExperimentConfig& c) {
  const auto w = parse_weight(c.weight);
  const auto grid = growth_grid(c);
  const auto levels = config_levels(c);
  const auto xs = c.samples.points();
  RunOutput out;
  std::ostringstream prof, perx, sum;
  prof << "field,x,k,delta,value,ratio,ratio_valid,level\n";
  perx << "field,x,max_abs_ratio\n";
  sum << "field,seed,grid_sup_ratio,growth_norm,ratio_over_growth_norm\n";
  double worst = 0.0;
  for (int i = 0; i < c.field.count; ++i) {
    const auto u = build_field(c, i);
    const double gn = growth_norm(u, flat_domain(), w, grid);
    double sup = 0.0;
    for (double x : xs) {
      const auto p = lil_ratio_profile_levels(u, flat_domain(), w, x, levels, c.tol);
      for (std::size_t l = 0; l < p.levels.size(); ++l) {
        prof << i << ',' << fmt17(x) << ',' << c.levels.from + static_cast<int>(l) << ',' << fmt17(p.deltas[l]) << ','
             << fmt17(p.values[l]) << ',' << (p.ratios[l] ? fmt17(*p.ratios[l]) : std::string()) << ','
             << (p.ratios[l] ? 1 : 0) << ',' << fmt17(p.levels[l]) << '\n';
      }
      perx << i << ',' << fmt17(x) << ',' << fmt17(p.max_abs_ratio()) << '\n';
      sup = std::max(sup, p.max_abs_ratio());
    }
    const double rel = gn > 0.0 ? sup / gn : (sup > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    sum << i << ',' << c.seed + static_cast<std::uint64_t>(i) << ',' << fmt17(sup) << ',' << fmt17(gn) << ','
        << fmt17(rel) << '\n';
    worst = std::max(worst, rel);
  }
  out.checks.push_back({"ratio_bounded", worst <= 10.0, {{"max_ratio_over_growth_norm", worst}},
                        "grid-sup ratio <= 10 growth_norm (soft threshold)"});
  out.files = {{"profiles.csv", prof.str()}, {"per_x.csv", perx.str()}, {"summary.csv", sum.str()}};
  return out;
}

/// Profiles at each x for the first field, and the sup of |H - I| over the x grid
/// at each level's delta.
inline RunOutput run_average_profile(const ExperimentConfig& c) {
  const auto w = parse_weight(c.weight);
  const auto u = build_field(c, 0);
  const auto xs = c.samples.points();
  RunOutput out;
  std::ostringstream prof, err;
  prof << "x,k,delta,value,ratio,ratio_valid,level\n";
  for (double x : xs) {
    const auto p = lil_ratio_profile_levels(u, flat_domain(), w, x, config_levels(c), c.tol);
    for (std::size_t l = 0; l < p.levels.size(); ++l) {
      prof << fmt17(x) << ',' << c.levels.from + static_cast<int>(l) << ',' << fmt17(p.deltas[l]) << ','
           << fmt17(p.values[l]) << ',' << (p.ratios[l] ? fmt17(*p.ratios[l]) : std::string()) << ','
           << (p.ratios[l] ? 1 : 0) << ',' << fmt17(p.levels[l]) << '\n';
    }
  }
  std::vector<double> thetas;
  for (int k = c.levels.from; k <= c.levels.to; ++k) thetas.push_back(std::ldexp(1.0, -k));
  const auto scan = approximation_error_scan(u, flat_domain(), w, xs, thetas, c.tol);
  err << "k,theta,sup_abs_H_minus_I\n";  // theta = 2^-k
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    err << c.levels.from + static_cast<int>(i) << ',' << fmt17(thetas[i]) << ',' << fmt17(scan.per_theta[i]) << '\n';
  }
  out.checks.push_back({"approximation_trend_free", trend_free(scan.per_theta), {{"sup", scan.sup}},
                        "each level <= 1.2x running median"});
  out.files = {{"profiles.csv", prof.str()}, {"approximation.csv", err.str()}};
  return out;
}

/// Surrogate martingale sampled from H of the first field; the table itself on build.
inline RunOutput run_martingale(const ExperimentConfig& c, bool check) {
  const auto w = parse_weight(c.weight);
  const auto u = build_field(c, 0);
  RunOutput out;
  const int K = std::min(c.martingale.depth, reachable_levels(w) - 1);
  if (K < 1) throw DomainError("weight '" + c.weight + "' reaches fewer than two dyadic levels");
  const auto n = static_cast<std::size_t>(c.martingale.points);
  if (!check) {
    const auto scales = scale_sequence(w, K + 1, c.tol);
    std::vector<double> ts;
    for (std::size_t i = 0; i < n; ++i) ts.push_back((static_cast<double>(i) + 0.37) / n);
    const double L = c.samples.hi - c.samples.lo;
    auto H = [&](double t, double y) { return bloch_approximant_H(u, flat_domain(), w, c.samples.lo + L * t, y, c.tol); };
    const auto table = bloch_to_martingale(H, flat_domain(), scales, 1.0, K, ts);
    std::ostringstream tab, def;
    write_table_csv(tab, table);
    def << "k,defect\n";
    for (std::size_t k = 0; k < table.defect.size(); ++k) def << k << ',' << fmt17(table.defect[k]) << '\n';
    out.checks.push_back({"defect_finite",
                          std::all_of(table.defect.begin(), table.defect.end(), [](double d) { return std::isfinite(d); }),
                          {{"depth", K}},
                          "martingale defect per level"});
    out.files = {{"table.csv", tab.str()}, {"defects.csv", def.str()}};
    return out;
  }
  const double gn = growth_norm(u, flat_domain(), w, growth_grid(c));
  const auto p = suites::li_probe(u, w, K, n);
  std::ostringstream li;
  li << "k,level_vs_average,level_step\n";
  for (std::size_t k = 0; k < p.bounds.level_vs_average.size(); ++k) {
    li << k << ',' << fmt17(p.bounds.level_vs_average[k]) << ','
       << (k < p.bounds.level_steps.size() ? fmt17(p.bounds.level_steps[k]) : std::string()) << '\n';
  }
  out.checks.push_back({"level_vs_average_trend_free", trend_free(p.bounds.level_vs_average),
                        {{"sup", p.bounds.sup_level_vs_average}, {"slope", suites::index_slope(p.bounds.level_vs_average)}},
                        "|Lambda_k - I(x, s_k)| per level"});
  out.checks.push_back({"level_steps_trend_free", trend_free(p.bounds.level_steps),
                        {{"sup", p.bounds.sup_level_steps}, {"slope", suites::index_slope(p.bounds.level_steps)}},
                        "|Lambda_k - Lambda_(k+1)| per level"});
  out.checks.push_back({"average_step_bound", p.max_step <= 2 * gn * (1 + 1e-6),
                        {{"max_step", p.max_step}, {"growth_norm", gn}, {"depth", K}},
                        "|I(x, s_k) - I(x, s_(k+1))| <= 2 growth_norm"});
  out.files = {{"li.csv", li.str()}};
  return out;
}

// ---------------------------------------------------------------------------
// Counterexample

inline ConstructionParams counterexample_params(const MotherWavelet& phi, const ExperimentConfig& c) {
  const auto& ce = c.counterexample;
  Overrides ov;
  if (ce.a > 0) ov.a = ce.a;
  ov.relax_bracket_upper = ce.relax_bracket_upper;
  ov.relax_j0 = ce.relax_j0;
  ov.disable_stopping = ce.disable_stopping;
  const auto w = parse_weight(ce.weight);
  if (ce.beta.empty()) return choose_params(phi, w, ce.j_max, ov);
  return make_params(phi, ce.a > 0 ? ce.a : smallest_admissible_a(phi), ce.beta, w, ov);
}

inline Sampler counterexample_sampler(const StoppingConstruction& sc, const ExperimentConfig& c, std::uint64_t salt) {
  if (sc.depth() <= 12) return {Sampler::Kind::grid, 4096};
  return {Sampler::Kind::monte_carlo, static_cast<std::size_t>(c.counterexample.samples), c.seed + salt};
}

/// `check = false` resolves the sample chains and emits the snapshot only.
/// `snapshot` rows, when given, seed the memo before anything is evaluated.
inline RunOutput run_counterexample(const ExperimentConfig& c, bool check,
                                    const std::vector<std::pair<DyadicInterval, Decision>>* snapshot = nullptr) {
  const auto phi = make_mother_wavelet();
  const auto params = counterexample_params(phi, c);
  StoppingConstruction sc(phi, params);
  if (snapshot) sc.restore(*snapshot);
  RunOutput out;
  const int K = sc.depth();
  const auto sp = counterexample_sampler(sc, c, 0);
  const auto loci = sample_loci(sp, K);
  std::string beta;
  for (int b : params.beta) beta += (beta.empty() ? "" : " ") + std::to_string(b);
  std::string notes;
  for (const auto& n : params.notes) notes += (notes.empty() ? "" : "; ") + n;
  out.checks.push_back({"params", true,
                        {{"a", params.a}, {"j0", params.j0}, {"depth", K}, {"generations", params.generations()}},
                        "beta = " + beta + (notes.empty() ? "" : "; " + notes)});
  if (!check) {
    for (const auto& x : loci) sc.chain(x, K);
    std::ostringstream snap;
    write_snapshot_csv(snap, sc);
    out.files["snapshot.csv"] = snap.str();
    return out;
  }
  double step = 0.0, margin = 1e300;
  bool lattice = true;
  for (int k = 1; k <= K; ++k) {
    const double s = bloch_step_norm(sc, k, loci);
    step = std::max(step, s);
    lattice = lattice && (k % params.a == 0 || s == 0.0);
  }
  for (int k = 0; k <= K; ++k) margin = std::min(margin, growth_bound(sc, k) - growth_envelope(sc, k, loci));
  out.checks.push_back({"step_bound", step <= 1.0, {{"max_step", step}}, "sup |Phi_k - Phi_(k-1)| <= 1"});
  out.checks.push_back({"rank_lattice", lattice, {}, "bumps only at ranks divisible by a"});
  out.checks.push_back({"envelope_bound", margin >= 0.0, {{"min_margin", margin}}, "|Phi_k| <= w(2^-k) + 2 + 2|phi'|"});

  // The coefficient floor needs the admissible sparsity; a smaller override a
  // only keeps the structural and measure checks.
  const double floor = 0.5 * std::abs(phi.haar_pairing) - 1e-8;
  const bool admissible = params.a >= smallest_admissible_a(phi);
  if (!admissible) out.checks.front().note += "; coefficient bound skipped";
  for (int j = 1; j < params.generations(); ++j) {
    const auto active = active_intervals(sc, j, loci);
    if (admissible && !active.empty()) {
      const auto b = haar_coefficient_bound(sc, j, active);
      out.checks.push_back({"coefficient_bound_g" + std::to_string(j), b.min_abs >= floor,
                            {{"min_abs", b.min_abs}, {"floor", floor}, {"count", static_cast<double>(b.count)}},
                            "active Haar coefficients >= |<phi,psi>|/2"});
    }
    const auto q = quadratic_lower_bound(sc, j, loci);
    if (q.surviving > 0) {
      out.checks.push_back({"quadratic_bound_g" + std::to_string(j), q.min_sum >= q.threshold,
                            {{"min_sum", q.min_sum}, {"threshold", q.threshold},
                             {"surviving", static_cast<double>(q.surviving)}},
                            "square sum over a generation >= threshold"});
    }
  }

  std::ostringstream meas;
  meas << "generation,level_threshold,level_measure,level_stderr,witness_y,witness_threshold,witness_measure,"
          "witness_lower\n";
  std::vector<MeasureEstimate> level;
  double level_min = 1.0;
  for (int j = 0; j < params.generations(); ++j) {
    level.push_back(level_set_measure(sc, j, level_threshold(sc, j), sp));
    level_min = std::min(level_min, level.back().measure);
  }
  out.checks.push_back({"level_sets", level_min >= 0.1, {{"min_measure", level_min}}, "|{|Phi| >= w/4}| >= 1/10"});
  const bool witness = params.overrides.relax_j0 || params.generations() >= params.j0;
  std::vector<std::optional<WitnessResult>> wit(params.generations());
  if (witness) {
    const auto build = counterexample_sampler(sc, c, 1);
    const auto test = counterexample_sampler(sc, c, 2);
    const int first = params.overrides.relax_j0 ? 1 : params.j0;
    double A = 0.0;
    for (int k = first; k <= params.generations(); ++k) A = std::max(A, measure_witness_constant(sc, k, build));
    double wmin = 1.0;
    for (int k = first; k <= params.generations(); ++k) {
      wit[k - 1] = growth_witness(sc, k, A, test);
      wmin = std::min(wmin, wit[k - 1]->lower);
    }
    out.checks.push_back({"witness", wmin >= 0.1, {{"A", A}, {"min_lower", wmin}}, "|{|v(., y_k)| >= w(y_k)/A}| >= 1/10"});
  }
  for (int j = 0; j < params.generations(); ++j) {
    meas << j << ',' << fmt17(level_threshold(sc, j)) << ',' << fmt17(level[j].measure) << ','
         << fmt17(level[j].stderr_) << ',';
    if (wit[j]) {
      meas << fmt17(wit[j]->y) << ',' << fmt17(wit[j]->threshold) << ',' << fmt17(wit[j]->measure) << ','
           << fmt17(wit[j]->lower) << '\n';
    } else {
      meas << ",,,\n";
    }
  }
  std::ostringstream snap;
  write_snapshot_csv(snap, sc);
  out.files = {{"measures.csv", meas.str()}, {"snapshot.csv", snap.str()}};
  return out;
}

/// Acceptance suite as a run: one check carrying the suite's measurements.
inline RunOutput run_acceptance_suite(const std::string& key) {
  const auto r = run_suite(key);
  std::string note;
  for (const auto& f : r.failures) note += (note.empty() ? "" : "; ") + f;
  auto measured = r.measured;
  measured.emplace_back("seconds", r.seconds);
  measured.emplace_back("budget_seconds", r.budget);
  RunOutput out;
  out.checks.push_back({std::to_string(r.id) + ":" + r.name, r.pass, measured, note});
  return out;
}

}  // namespace blil
