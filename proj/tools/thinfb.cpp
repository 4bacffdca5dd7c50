// thinfb: experiment harness for the thin one-phase free boundary lab.
//   thinfb run <spec-file>   execute one experiment spec
//   thinfb report <dir>      verify and summarize a finished run
//   thinfb selftest          run the full acceptance suite

#include <CLI11.hpp>

#include <cstdio>

#include "thinfb/acceptance.hpp"

namespace {

int cmd_run(const std::string& spec_path, const std::string& out_override) {
  thinfb::Config spec = thinfb::Config::parse_file(spec_path);
  std::string outdir = !out_override.empty() ? out_override : spec.str_or("out", "");
  if (outdir.empty()) thinfb::fail(thinfb::Err::ConfigError, "no output directory: set out= or --out");

  thinfb::RunResult result = thinfb::run_spec(spec, outdir);
  for (const auto& a : result.assertions)
    std::printf("[%s] %s: %s %s %s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(),
                thinfb::fmt_double(a.value).c_str(), a.cmp.c_str(),
                thinfb::fmt_double(a.threshold).c_str());
  if (!result.pass()) {
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& a : result.assertions)
      if (!a.pass) {
        nlohmann::ordered_json f;
        f["name"] = a.name;
        f["value"] = a.value;
        f["cmp"] = a.cmp;
        f["threshold"] = a.threshold;
        failures.push_back(f);
      }
    thinfb::write_file(outdir + "/failures.json", failures.dump(2) + "\n");
    std::printf("FAILED: %s\n", (outdir + "/failures.json").c_str());
    return 1;
  }
  std::printf("ok: %s\n", outdir.c_str());
  return 0;
}

int cmd_report(const std::string& dir) {
  thinfb::Report rep = thinfb::read_report(dir);
  std::printf("kind: %s\n", rep.kind.c_str());
  std::printf("checksums: %s\n", rep.checksums_ok ? "ok" : "MISMATCH");
  for (const auto& l : rep.lines)
    std::printf("[%s] %s: %s\n", l.pass ? "PASS" : "FAIL", l.name.c_str(), l.detail.c_str());
  std::printf("files:\n");
  for (const auto& f : rep.inventory) std::printf("  %s\n", f.c_str());
  return rep.pass() ? 0 : 1;
}

int cmd_selftest(const std::string& outdir, uint64_t seed) {
  std::vector<thinfb::CriterionResult> results = thinfb::run_selftest(outdir, seed);
  bool all = true;
  for (const auto& c : results) {
    std::printf("[%s] %2d. %s (%.1fs)\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                c.seconds);
    for (const auto& a : c.assertions)
      if (!a.pass)
        std::printf("       failed: %s = %s (%s %s)\n", a.name.c_str(),
                    thinfb::fmt_double(a.value).c_str(), a.cmp.c_str(),
                    thinfb::fmt_double(a.threshold).c_str());
    all &= c.pass;
  }
  std::printf("%s\n", all ? "selftest: all criteria pass" : "selftest: FAILURES above");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thin one-phase free boundary laboratory"};
  app.require_subcommand(1);

  std::string spec_path, out_override, report_dir;
  std::string selftest_out = "selftest-out";
  uint64_t seed = 42;

  CLI::App* run = app.add_subcommand("run", "execute an experiment spec file");
  run->add_option("spec", spec_path, "key=value spec file")->required();
  run->add_option("--out", out_override, "override the output directory");

  CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("dir", report_dir, "run directory")->required();

  CLI::App* selftest = app.add_subcommand("selftest", "run the full acceptance suite");
  selftest->add_option("--out", selftest_out, "output root");
  selftest->add_option("--seed", seed, "base seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(spec_path, out_override);
    if (report->parsed()) return cmd_report(report_dir);
    if (selftest->parsed()) return cmd_selftest(selftest_out, seed);
  } catch (const thinfb::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == thinfb::Err::ConfigError || e.code() == thinfb::Err::MissingManifest ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
