#pragma once

#include <Eigen/Dense>

#include "gridstudy/dynamics.hpp"

namespace gridstudy::detail {

inline Eigen::MatrixXcd to_eigen(const dyn::ComplexMatrix& m) {
  Eigen::MatrixXcd out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out(r, c) = m.at(r, c);
  return out;
}

inline dyn::ComplexMatrix from_eigen(const Eigen::MatrixXcd& m) {
  dyn::ComplexMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) = m(r, c);
  return out;
}

}  // namespace gridstudy::detail
