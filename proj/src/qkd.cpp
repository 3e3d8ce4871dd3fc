#include "turbcast/qkd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <thread>

#include "turbcast/common.hpp"

namespace turbcast::qkd {

double shannon_h(double e, int d) {
  if (d < 2) throw config_error("shannon_h: dimension must be at least 2");
  if (e < 0.0 || e >= 1.0) throw numeric_error("shannon_h: error rate outside [0,1)");
  if (e == 0.0) return 0.0;
  return -e * std::log2(e / (d - 1)) - (1.0 - e) * std::log2(1.0 - e);
}

double key_rate(int d, double e) { return std::log2(static_cast<double>(d)) - 2.0 * shannon_h(e, d); }

double security_threshold(int d) {
  double lo = 0.0, hi = (d - 1.0) / d;
  // R is positive at 0 and negative at the entropy maximum
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    (key_rate(d, mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double qder(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw numeric_error("qder: matrix must be square");
  return 1.0 - m.diagonal().mean();
}

double ChannelParams::effective_d_eff() const {
  return d_eff > 0.0 ? d_eff : std::max(5.5 * beam.w0, beam.aperture);
}

// ---------------------------------------------------------------------------

struct ChannelSimulator::Impl {
  std::vector<int> alphabet;
  std::vector<op::ComplexField> senders;    // modes at z = 0
  std::vector<op::ComplexField> receivers;  // ideal propagated modes at z = L
  Eigen::MatrixXcd angle_coeffs;            // C: OAM -> ANGLE
  turb::ZernikeSpectrum spectrum;
  std::unique_ptr<turb::ZernikeStack> stack;
};

namespace {

void validate(const ChannelParams& p) {
  if (p.d < 2 || p.d % 2 != 0) throw config_error("channel dimension must be even");
  if (p.grid.n < 2 || (p.grid.n & (p.grid.n - 1)) != 0)
    throw config_error("grid samples per side must be a power of two");
  if (p.grid.window_m < 4.0 * p.beam.aperture - 1e-12)
    throw config_error("grid window must cover at least 4x the receiver aperture");
  if (p.beam.w0 < 8.0 * p.grid.pitch())
    throw config_error("grid pitch must resolve w0 with at least 8 samples");
  if (p.n_realizations < 1) throw config_error("need at least one realization");
}

std::uint64_t screen_seed(const ChannelParams& p, int level_index, int realization) {
  // Paired ensembles share base draws across levels; the coefficient scale
  // carries the level dependence.
  const std::uint64_t stream =
      p.paired_screens ? p.seed : derive_seed(p.seed, 0xA11CEu + static_cast<std::uint64_t>(level_index));
  return derive_seed(stream, static_cast<std::uint64_t>(realization));
}

int thread_count(const ChannelParams& p) {
  if (p.threads > 0) return p.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(hw == 0 ? 1u : hw, 8u));
}

}  // namespace

ChannelSimulator::ChannelSimulator(const ChannelParams& params)
    : params_(params), impl_(std::make_unique<Impl>()) {
  validate(params_);
  impl_->alphabet = op::oam_alphabet(params_.d);
  impl_->angle_coeffs = op::angle_coefficients(params_.d);
  for (int l : impl_->alphabet) {
    impl_->senders.push_back(op::lg_mode(l, 0.0, params_.beam, params_.grid));
    impl_->receivers.push_back(
        op::lg_mode(l, params_.beam.path_length, params_.beam, params_.grid));
  }
  impl_->spectrum =
      turb::make_spectrum(params_.j_max, params_.effective_d_eff(), params_.independent_coeffs);
  impl_->stack = std::make_unique<turb::ZernikeStack>(
      params_.grid, params_.effective_d_eff() / 2.0, params_.j_max);
}

ChannelSimulator::~ChannelSimulator() = default;

namespace {

struct RealizationOut {
  Eigen::MatrixXd p_oam;    // rows = sent, cols = detected
  Eigen::MatrixXd p_angle;
  double diag_oam = 0;
  double diag_angle = 0;
};

}  // namespace

ChannelResult ChannelSimulator::run(double cn2, int level_index) const {
  const int d = params_.d;
  const int n = params_.n_realizations;
  const double r0 = turb::fried_r0(cn2, params_.beam.lambda, params_.beam.path_length);
  const double scale = impl_->spectrum.amplitude_scale(r0);

  ChannelResult result;
  result.cn2 = cn2;
  result.n_realizations = n;
  result.screen_seeds.resize(n);
  for (int i = 0; i < n; ++i) result.screen_seeds[i] = screen_seed(params_, level_index, i);

  std::vector<RealizationOut> outs(n);
  std::atomic<int> next(0);
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) break;
      Rng rng(result.screen_seeds[i]);
      const Eigen::VectorXd coeffs = impl_->spectrum.sample(scale, rng);
      Eigen::MatrixXcd amps(d, d);  // (detected, sent)
      for (int s = 0; s < d; ++s) {
        op::ComplexField field = impl_->senders[s];
        impl_->stack->apply(field, coeffs);
        field = op::propagate(field, params_.beam.path_length, params_.beam);
        field = op::apply_aperture(field, params_.beam.aperture).field;
        for (int r = 0; r < d; ++r)
          amps(r, s) = op::overlap(impl_->receivers[r], field);
      }
      const Eigen::MatrixXcd amps_angle =
          impl_->angle_coeffs.adjoint() * amps * impl_->angle_coeffs;
      RealizationOut& out = outs[i];
      out.p_oam = amps.cwiseAbs2().transpose();
      out.p_angle = amps_angle.cwiseAbs2().transpose();
      out.diag_oam = amps.cwiseAbs2().diagonal().mean();
      out.diag_angle = amps_angle.cwiseAbs2().diagonal().mean();
    }
  };

  const int n_threads = std::min(thread_count(params_), n);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  auto finish = [&](auto member_p, auto member_d) {
    BasisResult basis;
    basis.mean_raw = Eigen::MatrixXd::Zero(d, d);
    basis.diagonal_means.reserve(n);
    for (int i = 0; i < n; ++i) {
      basis.mean_raw += outs[i].*member_p;
      basis.diagonal_means.push_back(outs[i].*member_d);
    }
    basis.mean_raw /= static_cast<double>(n);
    basis.row_sums = basis.mean_raw.rowwise().sum();
    basis.crosstalk = basis.mean_raw;
    for (int r = 0; r < d; ++r) {
      if (basis.row_sums[r] <= 0.0)
        throw numeric_error("crosstalk row has no detected power");
      basis.crosstalk.row(r) /= basis.row_sums[r];
    }
    basis.qder = qkd::qder(basis.crosstalk);
    basis.worst_index = static_cast<int>(
        std::min_element(basis.diagonal_means.begin(), basis.diagonal_means.end()) -
        basis.diagonal_means.begin());
    return basis;
  };
  result.oam = finish(&RealizationOut::p_oam, &RealizationOut::diag_oam);
  result.angle = finish(&RealizationOut::p_angle, &RealizationOut::diag_angle);
  return result;
}

std::vector<op::ComplexField> ChannelSimulator::realization_fields(
    double cn2, int level_index, int realization, op::ModeLabel::Basis basis) const {
  const double r0 = turb::fried_r0(cn2, params_.beam.lambda, params_.beam.path_length);
  const double scale = impl_->spectrum.amplitude_scale(r0);
  Rng rng(screen_seed(params_, level_index, realization));
  const Eigen::VectorXd coeffs = impl_->spectrum.sample(scale, rng);

  std::vector<op::ComplexField> fields;
  for (int m = 0; m < params_.d; ++m) {
    op::ComplexField field;
    if (basis == op::ModeLabel::Basis::oam) {
      field = impl_->senders[m];
    } else {
      field = impl_->senders[0];
      field.a *= impl_->angle_coeffs(0, m);
      for (int li = 1; li < params_.d; ++li)
        field.a += impl_->angle_coeffs(li, m) * impl_->senders[li].a;
    }
    impl_->stack->apply(field, coeffs);
    field = op::propagate(field, params_.beam.path_length, params_.beam);
    fields.push_back(op::apply_aperture(field, params_.beam.aperture).field);
  }
  return fields;
}

ChannelResult simulate_channel(const ChannelParams& params, double cn2) {
  return ChannelSimulator(params).run(cn2, 0);
}

QkdReport run_table(const ChannelParams& params, const std::vector<double>& cn2_levels) {
  if (cn2_levels.empty()) throw config_error("run_table: no turbulence levels given");
  ChannelSimulator sim(params);
  QkdReport report;
  report.cn2_levels = cn2_levels;
  report.d = params.d;
  report.seed = params.seed;
  report.threshold = security_threshold(params.d);
  for (std::size_t idx = 0; idx < cn2_levels.size(); ++idx) {
    const ChannelResult channel = sim.run(cn2_levels[idx], static_cast<int>(idx));
    for (const auto* basis : {&channel.oam, &channel.angle}) {
      QkdRow row;
      row.cn2 = channel.cn2;
      row.basis = (basis == &channel.oam) ? "OAM" : "ANGLE";
      row.qder = basis->qder;
      row.bits_per_photon = std::max(0.0, key_rate(params.d, basis->qder));
      row.secure = basis->qder < report.threshold;
      report.rows.push_back(row);
    }
    report.channels.push_back(std::move(channel));
  }
  return report;
}

}  // namespace turbcast::qkd
