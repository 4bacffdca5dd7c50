// Acceptance suite: runs every criterion at its pinned parameters and prints
// one pass/fail line each. Exits nonzero if any criterion fails.

#include <cstdio>

#include "thinfb/acceptance.hpp"

int main(int argc, char** argv) {
  std::string root = argc > 1 ? argv[1] : "acceptance-out";
  uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 42;

  std::vector<thinfb::CriterionResult> results;
  try {
    results = thinfb::run_selftest(root, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
    return 1;
  }

  bool all = true;
  for (const auto& c : results) {
    std::printf("[%s] %2d. %s (%.1fs)\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                c.seconds);
    for (const auto& a : c.assertions)
      std::printf("        %-42s %s %s %s%s\n", a.name.c_str(),
                  thinfb::fmt_double(a.value).c_str(), a.cmp.c_str(),
                  thinfb::fmt_double(a.threshold).c_str(), a.pass ? "" : "   <-- FAIL");
    all &= c.pass;
  }
  std::printf("%s\n", all ? "acceptance: all criteria pass" : "acceptance: FAILURES above");
  return all ? 0 : 1;
}
