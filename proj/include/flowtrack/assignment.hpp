#pragma once

#include <vector>

#include <Eigen/Dense>

namespace flowtrack {

// Minimum-total-cost one-to-one matching of rows to columns (Hungarian method with
// potentials). Every element of the smaller side is matched; the result maps each row to
// its column or -1.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace flowtrack
