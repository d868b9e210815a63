#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace auxmat {

struct GradCheckReport {
  std::string op;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Names accepted by run_gradchecks, in report order.
const std::vector<std::string>& gradcheck_ops();

/// Finite-difference checks of every differentiable op at 64-bit precision,
/// each on small random inputs for every seed. The reported error is the
/// maximum over seeds. `op` is one name from gradcheck_ops() or "all".
std::vector<GradCheckReport> run_gradchecks(const std::string& op = "all",
                                            const std::vector<std::uint64_t>& seeds = {0, 1, 2});

}  // namespace auxmat
