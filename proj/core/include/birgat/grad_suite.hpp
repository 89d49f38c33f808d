#pragma once

#include <string>
#include <vector>

#include <cstdint>

namespace birgat {

struct GradSuiteRow {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Module-by-module gradient verification against central finite differences
/// (step 1e-5, double precision): every primitive op at 1e-6, the BiRGAT
/// layer, the decoder step and the full micro encoder-decoder at 1e-4.
/// Parameters are drawn at magnitudes the finite differences can resolve.
std::vector<GradSuiteRow> run_gradient_suite(uint64_t seed);

bool gradient_suite_passed(const std::vector<GradSuiteRow>& rows);
std::string gradient_suite_table(const std::vector<GradSuiteRow>& rows);

}  // namespace birgat
