#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "turbcast/optics.hpp"
#include "turbcast/turbulence.hpp"

namespace turbcast::qkd {

// h(x) = -x log2(x/(d-1)) - (1-x) log2(1-x); h(0) = 0 by continuity.
double shannon_h(double e, int d);

// R(d, e) = log2(d) - 2 h(e). Negative values mean no security; callers clamp
// for reporting.
double key_rate(int d, double e);

// Unique root of R(d, e) = 0 on (0, (d-1)/d), bisected to 1e-6.
double security_threshold(int d);

// QDER of a row-normalized crosstalk matrix under a uniform prior over sent
// modes: 1 - mean(diagonal).
double qder(const Eigen::MatrixXd& row_normalized);

struct ChannelParams {
  op::BeamParams beam;
  op::GridSpec grid;
  int d = 8;
  int j_max = 36;
  // Zernike aperture diameter; 0 = max(5.5 w0, receiver aperture), a disk
  // covering ~99.9% of the widest alphabet mode at z = 0.
  double d_eff = 0;
  int n_realizations = 100;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency (capped)
  bool paired_screens = true;       // share screen draws across cn2 levels
  bool independent_coeffs = false;  // drop same-order Zernike cross-covariances
  // Receiver tracks beam wander: the tip/tilt screen components are
  // compensated before mode projection. Without tracking, the residual tilt
  // ramp across the received beam dominates every other aberration.
  bool tip_tilt_tracked = true;

  double effective_d_eff() const;
};

struct BasisResult {
  Eigen::MatrixXd mean_raw;   // average detection probabilities, rows = sent
  Eigen::MatrixXd crosstalk;  // row-normalized average (post-selection)
  Eigen::VectorXd row_sums;   // post-selection fractions of mean_raw
  double qder = 0;
  std::vector<double> diagonal_means;  // per realization, raw
  int worst_index = 0;                 // argmin of diagonal_means
};

struct ChannelResult {
  double cn2 = 0;
  int n_realizations = 0;
  std::vector<std::uint64_t> screen_seeds;
  BasisResult oam;
  BasisResult angle;

  const BasisResult& basis(op::ModeLabel::Basis b) const {
    return b == op::ModeLabel::Basis::oam ? oam : angle;
  }
};

// Runs the turbulence ensemble once and reports both bases from shared
// screens: sample screen at z=0, apply to each sent mode, propagate L, apply
// the receiver aperture, project on the ideal vacuum-propagated modes at z=L.
class ChannelSimulator {
 public:
  explicit ChannelSimulator(const ChannelParams& params);
  ~ChannelSimulator();
  ChannelSimulator(const ChannelSimulator&) = delete;
  ChannelSimulator& operator=(const ChannelSimulator&) = delete;

  ChannelResult run(double cn2, int level_index = 0) const;

  // Screen coefficients of one ensemble member, after any tracking; the same
  // values the simulation applies.
  Eigen::VectorXd screen_coefficients(double cn2, int level_index,
                                      int realization) const;

  // Aberrated fields (after screen, propagation and aperture) of every mode
  // of one basis for a single realization; used for worst-case exports.
  std::vector<op::ComplexField> realization_fields(double cn2, int level_index,
                                                   int realization,
                                                   op::ModeLabel::Basis basis) const;

  const ChannelParams& params() const { return params_; }

 private:
  struct Impl;
  ChannelParams params_;
  std::unique_ptr<Impl> impl_;
};

ChannelResult simulate_channel(const ChannelParams& params, double cn2);

struct QkdRow {
  double cn2 = 0;
  std::string basis;
  double qder = 0;
  double bits_per_photon = 0;  // max(0, key_rate)
  bool secure = false;
};

struct QkdReport {
  std::vector<double> cn2_levels;
  std::vector<QkdRow> rows;  // one per (level, basis), OAM first
  std::vector<ChannelResult> channels;
  double threshold = 0;  // security_threshold(d)
  int d = 8;
  std::uint64_t seed = 0;
};

QkdReport run_table(const ChannelParams& params, const std::vector<double>& cn2_levels);

}  // namespace turbcast::qkd
