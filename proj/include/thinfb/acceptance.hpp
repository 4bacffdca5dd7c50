#pragma once
// The acceptance suite: eleven criteria run at pinned parameters and
// thresholds, one directory per criterion under the selftest output root.
// Criterion 8 post-processes the converged planar and tilted minimizers of
// criteria 7 and 10; criterion 11 reruns criteria 1-10 with the same seed
// and byte-compares every emitted file.

#include <chrono>

#include "thinfb/experiment.hpp"

namespace thinfb {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0;
  std::string dir;
  std::vector<Assertion> assertions;
};

namespace detail {

inline Config criterion_config(int id, const std::string& title, uint64_t seed) {
  Config c;
  c.set("kind", "acceptance-criterion");
  c.set("criterion", std::to_string(id));
  c.set("title", title);
  c.set("seed", std::to_string(seed));
  return c;
}

inline CriterionResult finish_criterion(int id, const std::string& title, uint64_t seed,
                                        const std::string& dir, RunResult result,
                                        std::chrono::steady_clock::time_point t0) {
  finalize_run(dir, criterion_config(id, title, seed), result);
  CriterionResult cr;
  cr.id = id;
  cr.title = title;
  cr.pass = result.pass();
  cr.dir = dir;
  cr.assertions = result.assertions;
  cr.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cr;
}

inline bool files_identical(const std::string& dir_a, const std::string& dir_b) {
  namespace fs = std::filesystem;
  std::vector<std::string> rel;
  for (const auto& e : fs::recursive_directory_iterator(dir_a))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), dir_a).string());
  std::sort(rel.begin(), rel.end());
  for (const std::string& r : rel) {
    if (!fs::exists(dir_b + "/" + r)) return false;
    if (read_file(dir_a + "/" + r) != read_file(dir_b + "/" + r)) return false;
  }
  long count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_b))
    if (e.is_regular_file()) ++count_b;
  return count_b == static_cast<long>(rel.size());
}

}  // namespace detail

/// Criteria 1-10 at their pinned parameters. Returns results in id order.
inline std::vector<CriterionResult> run_criteria(const std::string& root, uint64_t seed) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  fs::create_directories(root);
  std::vector<CriterionResult> out;
  auto dir_of = [&](int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s/criterion-%02d", root.c_str(), id);
    return std::string(buf);
  };

  {  // 1: barrier separation scaling
    auto t0 = clock::now();
    BarrierAuditParams p;
    p.seed = seed;
    out.push_back(detail::finish_criterion(1, "barrier separation scaling exponent >= 1.9", seed,
                                           dir_of(1), run_barrier_separation(p, dir_of(1)), t0));
  }
  {  // 2: subsolution positivity
    auto t0 = clock::now();
    BarrierAuditParams p;
    p.seed = seed;
    out.push_back(detail::finish_criterion(2, "subsolution margin implies positive FD Laplacian",
                                           seed, dir_of(2),
                                           run_subsolution_positivity(p, dir_of(2)), t0));
  }
  {  // 3: barrier flatness
    auto t0 = clock::now();
    BarrierAuditParams p;
    p.seed = seed;
    out.push_back(detail::finish_criterion(3, "barrier trapping width <= 4 delta + 2h", seed,
                                           dir_of(3), run_barrier_flatness(p, dir_of(3)), t0));
  }
  {  // 4: inverse-hodograph Laplacian expansion
    auto t0 = clock::now();
    HodographRoundtripParams p;
    p.seed = seed;
    out.push_back(detail::finish_criterion(4, "inverse-hodograph expansion exponent >= 1.8", seed,
                                           dir_of(4), run_hodograph_roundtrip(p, dir_of(4)), t0));
  }
  {  // 5: linearized exact-solution recovery
    auto t0 = clock::now();
    LinearizedExtractParams p;
    p.seed = seed;
    out.push_back(detail::finish_criterion(
        5, "linearized recovery (a0,b0)=(8c1,-8c1) within 1e-4, defect <= 1e-6", seed, dir_of(5),
        run_linearized_extract(p, dir_of(5)), t0));
  }
  {  // 6: slit-solver convergence
    auto t0 = clock::now();
    SolverConvergenceParams p;
    out.push_back(detail::finish_criterion(6, "slit-solver order >= 1.9 away from L", seed,
                                           dir_of(6), run_solver_convergence(p, dir_of(6)), t0));
  }

  MinimizeOutcome planar;
  {  // 7: planar minimizer recovery
    auto t0 = clock::now();
    MinimizeParams p;
    p.seed = seed;
    p.n = 1;
    p.h = 1.0 / 128;
    p.data = "planar";
    planar = run_minimize(p, dir_of(7));
    out.push_back(
        detail::finish_criterion(7, "planar minimizer: FB within 2h, energy within 1%, alpha in "
                                    "[0.9,1.1]",
                                 seed, dir_of(7), planar.result, t0));
  }

  FlatnessDecayOutcome decay;
  {  // 9: oscillation decay
    auto t0 = clock::now();
    FlatnessDecayParams p;
    p.seed = seed;
    decay = run_flatness_decay(p, dir_of(9));
    out.push_back(detail::finish_criterion(
        9, "hodograph oscillation strictly decreasing with geometric rate in (0,1)", seed,
        dir_of(9), decay.result, t0));
  }

  ImprovementFitOutcome drift;
  {  // 10: improvement-of-flatness drift
    auto t0 = clock::now();
    ImprovementFitParams p;
    p.seed = seed;
    drift = run_improvement_fit(p, dir_of(10));
    out.push_back(detail::finish_criterion(
        10, "coefficient drift fits a power law with positive exponent", seed, dir_of(10),
        drift.result, t0));
  }

  {  // 8: optimal-regularity exponents of the planar and tilted states
    auto t0 = clock::now();
    RunResult r;
    r.kind = "regularity-exponent";
    r.seed = seed;
    r.assertions.push_back(
        Assertion::within("planar_regularity_exponent", planar.regularity_exponent, 0.5, 0.05));
    r.assertions.push_back(
        Assertion::within("tilted_regularity_exponent", drift.regularity_exponent, 0.5, 0.05));
    r.measured["planar_regularity_exponent"] = planar.regularity_exponent;
    r.measured["tilted_regularity_exponent"] = drift.regularity_exponent;
    out.push_back(detail::finish_criterion(
        8, "optimal-regularity exponent in [0.45,0.55] on planar and tilted states", seed,
        dir_of(8), r, t0));
  }

  std::sort(out.begin(), out.end(),
            [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
  return out;
}

/// The full acceptance suite: criteria 1-10 plus the determinism rerun.
inline std::vector<CriterionResult> run_selftest(const std::string& root, uint64_t seed) {
  using clock = std::chrono::steady_clock;
  std::vector<CriterionResult> out = run_criteria(root, seed);

  auto t0 = clock::now();
  std::string rerun_root = root + "/determinism-rerun";
  run_criteria(rerun_root, seed);
  bool identical = true;
  for (int id = 1; id <= 10; ++id) {
    char a[32], b[64];
    std::snprintf(a, sizeof a, "criterion-%02d", id);
    std::snprintf(b, sizeof b, "determinism-rerun/criterion-%02d", id);
    identical &= detail::files_identical(root + "/" + a, root + "/" + b);
  }
  RunResult r;
  r.kind = "determinism";
  r.seed = seed;
  r.assertions.push_back(Assertion::truth("rerun_outputs_byte_identical", identical));
  out.push_back(detail::finish_criterion(11, "identical seed reproduces byte-identical outputs",
                                         seed, root + "/criterion-11", r, t0));
  return out;
}

}  // namespace thinfb
