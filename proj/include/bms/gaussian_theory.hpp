#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bms/error.hpp"

namespace bms {

/// Population covariance of Gaussian data after `step` blurring updates with
/// a Gaussian kernel of bandwidth `tau`.
struct ShrinkState {
  Eigen::MatrixXd covariance;
  double tau = 1.0;
  int step = 0;
};

namespace detail {

inline constexpr double kSymmetryTolerance = 1e-12;

// Eigendecomposition of a validated SPD covariance.
inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spd_eigen(const ShrinkState& s) {
  const Eigen::MatrixXd& c = s.covariance;
  if (!(s.tau > 0.0) || !std::isfinite(s.tau))
    throw ArgumentError("shrink state: tau must be positive and finite");
  if (c.rows() == 0 || c.rows() != c.cols())
    throw ArgumentError("shrink state: covariance must be a nonempty square matrix");
  if (!c.allFinite()) throw ArgumentError("shrink state: covariance must be finite");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale)
    throw ArgumentError("shrink state: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0))
    throw ArgumentError("shrink state: covariance is not positive definite");
  return eig;
}

}  // namespace detail

/// Population blurring map x -> (I + tau^2 Sigma^-1)^-1 x, applied through the
/// eigenbasis of Sigma: each eigen-axis is scaled by lambda / (lambda + tau^2).
inline Eigen::VectorXd shrink_map(const Eigen::VectorXd& x, const ShrinkState& state) {
  const auto eig = detail::spd_eigen(state);
  if (x.size() != state.covariance.rows())
    throw Error(ErrorCode::DimensionMismatch, "shrink_map: vector/covariance size mismatch");
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::ArrayXd lambda = eig.eigenvalues().array();
  const Eigen::ArrayXd factor = lambda / (lambda + state.tau * state.tau);
  return v * (factor * (v.transpose() * x).array()).matrix();
}

/// Sigma_{s+1} = M Sigma_s M with M = (I + tau^2 Sigma_s^-1)^-1. Built in the
/// eigenbasis, so eigenvectors carry over and lambda -> lambda^3/(lambda+tau^2)^2.
inline ShrinkState covariance_step(const ShrinkState& state) {
  const auto eig = detail::spd_eigen(state);
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::ArrayXd lambda = eig.eigenvalues().array();
  const double t2 = state.tau * state.tau;
  const Eigen::ArrayXd next = lambda * lambda * lambda / ((lambda + t2) * (lambda + t2));
  ShrinkState out;
  out.covariance = v * next.matrix().asDiagonal() * v.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.tau = state.tau;
  out.step = state.step + 1;
  return out;
}

/// lambda_0, lambda_1, ..., lambda_steps of one eigen-axis under blurring.
inline std::vector<double> eigenvalue_sequence(double lambda0, double tau, int steps) {
  if (!(lambda0 > 0.0) || !(tau > 0.0))
    throw ArgumentError("eigenvalue_sequence: lambda0 and tau must be positive");
  if (steps < 0) throw ArgumentError("eigenvalue_sequence: steps must be >= 0");
  std::vector<double> seq{lambda0};
  const double t2 = tau * tau;
  for (int s = 0; s < steps; ++s) {
    const double l = seq.back();
    const double r = l / (l + t2);
    seq.push_back(r * r * l);
  }
  return seq;
}

/// Blurring standard deviations sigma_s for N(0, sigma0^2) data.
inline std::vector<double> blurring_std_sequence(double sigma0, double tau, int steps) {
  if (!(sigma0 > 0.0)) throw ArgumentError("blurring_std_sequence: sigma0 must be positive");
  std::vector<double> seq = eigenvalue_sequence(sigma0 * sigma0, tau, steps);
  for (double& v : seq) v = std::sqrt(v);
  return seq;
}

/// Nonblurring standard deviations: geometric with ratio sigma0^2/(sigma0^2+tau^2),
/// since the kernel average always runs over the original data.
inline std::vector<double> nonblurring_std_sequence(double sigma0, double tau, int steps) {
  if (!(sigma0 > 0.0) || !(tau > 0.0))
    throw ArgumentError("nonblurring_std_sequence: sigma0 and tau must be positive");
  if (steps < 0) throw ArgumentError("nonblurring_std_sequence: steps must be >= 0");
  const double ratio = sigma0 * sigma0 / (sigma0 * sigma0 + tau * tau);
  std::vector<double> seq{sigma0};
  for (int s = 0; s < steps; ++s) seq.push_back(seq.back() * ratio);
  return seq;
}

}  // namespace bms
