#include "rbflow/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rbflow {

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blow_up: return "blow_up";
    case RunStatus::cone_exit: return "cone_exit";
  }
  return "?";
}

Vector Trajectory::at(double time) const {
  if (t.empty()) throw std::logic_error("Trajectory::at: empty trajectory");
  if (time <= t.front()) return y.front();
  if (time >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
  const double h = t[i + 1] - t[i];
  const double th = (time - t[i]) / h, th1 = 1.0 - th;
  const Matrix& r = dense[i];
  return r.col(0) + th * (r.col(1) + th1 * (r.col(2) + th * (r.col(3) + th1 * r.col(4))));
}

}  // namespace rbflow
