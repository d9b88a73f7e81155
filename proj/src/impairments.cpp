#include "mmsync/impairments.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "mmsync/binary_io.hpp"

namespace mmsync {

void PhaseNoiseModel::validate() const {
  if (!(f_p > 0.0 && f_z > f_p))
    throw std::invalid_argument("PhaseNoiseModel: requires f_z > f_p > 0");
}

double pn_psd(const PhaseNoiseModel& model, double f) {
  const double rz = f / model.f_z;
  const double rp = f / model.f_p;
  return model.level() * (1.0 + rz * rz) / (1.0 + rp * rp);
}

double pn_autocorrelation(const PhaseNoiseModel& model, double tau) {
  const double ratio = (model.f_p * model.f_p) / (model.f_z * model.f_z);
  double r = kPi * model.f_p * (1.0 - ratio) * std::exp(-kTwoPi * model.f_p * std::abs(tau));
  if (tau == 0.0) r += ratio;
  return model.level() * r;
}

PnCovariance::PnCovariance(MatrixXd matrix, double sampling_interval)
    : matrix_(std::move(matrix)), sampling_interval_(sampling_interval) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("PnCovariance: not square");
  const int n = size();
  if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("PnCovariance: not symmetric");
  const double scale = n > 0 ? matrix_.diagonal().maxCoeff() : 0.0;
  if (n == 0 || (scale == 0.0 && matrix_.cwiseAbs().maxCoeff() == 0.0)) {
    factor_ = MatrixXd::Zero(n, n);
    return;
  }
  if (!(scale > 0.0)) throw std::domain_error("PnCovariance: non-positive diagonal");
  MatrixXd ridged = matrix_;
  ridged.diagonal().array() += 1e-12 * scale;
  Eigen::LLT<MatrixXd> llt(ridged);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("PnCovariance: factorization failed (matrix not PSD)");
  factor_ = llt.matrixL();
}

PnCovariance pn_covariance(const PhaseNoiseModel& model, int n, double sampling_interval) {
  model.validate();
  if (n < 1) throw std::invalid_argument("pn_covariance: n must be >= 1");
  std::vector<double> r(n);
  for (int k = 0; k < n; ++k) r[k] = pn_autocorrelation(model, k * sampling_interval);
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = r[std::abs(i - j)];
  return PnCovariance(std::move(m), sampling_interval);
}

MatrixXd pn_covariance_at(const PhaseNoiseModel& model, const std::vector<long>& positions,
                          double sampling_interval) {
  model.validate();
  const int n = static_cast<int>(positions.size());
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v =
          pn_autocorrelation(model, static_cast<double>(std::labs(positions[i] - positions[j])) *
                                        sampling_interval);
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

VectorXd sample_phase_noise(const PnCovariance& cov, Rng& rng) {
  const int n = cov.size();
  VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  return cov.factor().triangularView<Eigen::Lower>() * z;
}

VectorXd sample_phase_noise(const PnCovariance& cov, std::uint64_t seed) {
  Rng rng(seed);
  return sample_phase_noise(cov, rng);
}

void ImpairmentConfig::validate() const {
  if (phase_noise_enabled) phase_noise.validate();
  if (!(sampling_rate > 0.0)) throw std::invalid_argument("ImpairmentConfig: bad sampling rate");
  if (!(max_cfo_hz >= 0.0 && max_cfo_hz < sampling_rate / 2.0))
    throw std::invalid_argument("ImpairmentConfig: f_d must lie in [0, fs/2)");
  if (n0_min < 0 || n0_max < n0_min) throw std::invalid_argument("ImpairmentConfig: bad n0 range");
  if (num_samples < 1) throw std::invalid_argument("ImpairmentConfig: num_samples must be >= 1");
}

namespace {

PnCovariance build_covariance(const ImpairmentConfig& c) {
  if (!c.phase_noise_enabled) return PnCovariance(MatrixXd::Zero(c.num_samples, c.num_samples), 1.0 / c.sampling_rate);
  return pn_covariance(c.phase_noise, c.num_samples, 1.0 / c.sampling_rate);
}

}  // namespace

ImpairmentModel::ImpairmentModel(ImpairmentConfig config) : config_(std::move(config)) {
  config_.validate();
  covariance_ = build_covariance(config_);
}

ImpairmentRealization ImpairmentModel::draw(Rng& rng) const {
  ImpairmentRealization r;
  const double fd = config_.max_cfo_hz / config_.sampling_rate;
  const double u = rng.uniform(-1.0, 1.0);
  r.cfo = fd > 0.0 ? fd * u : 0.0;
  r.n0 = rng.uniform_int(config_.n0_min, config_.n0_max);
  if (config_.phase_noise_enabled)
    r.pn = sample_phase_noise(covariance_, rng);
  else
    r.pn = VectorXd::Zero(config_.num_samples);
  return r;
}

ImpairmentRealization ImpairmentModel::draw(std::uint64_t seed) const {
  Rng rng(seed);
  return draw(rng);
}

ImpairmentRealization draw_impairments(const ImpairmentConfig& config, std::uint64_t seed) {
  return ImpairmentModel(config).draw(seed);
}

void write_psd_csv(std::ostream& os, const PhaseNoiseModel& model,
                   const std::vector<double>& freqs) {
  os << "f_hz,psd\n" << std::setprecision(17);
  for (double f : freqs) os << f << ',' << pn_psd(model, f) << '\n';
}

void write_autocorrelation_csv(std::ostream& os, const PhaseNoiseModel& model,
                               const std::vector<double>& lags) {
  os << "tau_s,autocorrelation\n" << std::setprecision(17);
  for (double t : lags) os << t << ',' << pn_autocorrelation(model, t) << '\n';
}

void write_impairments(std::ostream& os, const ImpairmentRealization& imp) {
  binio::put<std::int32_t>(os, imp.n0);
  binio::put<double>(os, imp.cfo);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(imp.pn.size()));
  for (Eigen::Index i = 0; i < imp.pn.size(); ++i) binio::put<double>(os, imp.pn[i]);
}

ImpairmentRealization read_impairments(std::istream& is) {
  ImpairmentRealization imp;
  imp.n0 = binio::get<std::int32_t>(is);
  imp.cfo = binio::get<double>(is);
  const auto n = binio::get<std::uint32_t>(is);
  imp.pn.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) imp.pn[i] = binio::get<double>(is);
  return imp;
}

}  // namespace mmsync
