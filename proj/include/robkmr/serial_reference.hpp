#pragma once

// Single-threaded reference versions of the OpenMP kernels. They are kept for
// the parallel-vs-serial tests and the benchmark target; library code always
// calls the parallel versions.

#include <Eigen/Dense>

#include "robkmr/kernels.hpp"

namespace robkmr::serial {

Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& rows);
GramMatrix gaussian_gram(const DataView& view, double bandwidth);
GramMatrix ibs_gram(const DataView& view);
GramMatrix hadamard(const GramMatrix& a, const GramMatrix& b);
GramMatrix robust_center(const GramMatrix& k, const Eigen::VectorXd& weights);
double trace_of_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace robkmr::serial
