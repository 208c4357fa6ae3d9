#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace csifb {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using CRowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// One bit per element, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace csifb
