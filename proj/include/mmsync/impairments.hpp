#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mmsync/rng.hpp"
#include "mmsync/types.hpp"

namespace mmsync {

struct PhaseNoiseModel {
  double g_theta_dbc = -85.0;  // dBc/Hz
  double f_z = 100e6;          // Hz
  double f_p = 1e6;            // Hz

  double level() const { return db_to_linear(g_theta_dbc); }
  void validate() const;
};

// Two-sided PSD in rad^2/Hz.
double pn_psd(const PhaseNoiseModel& model, double f);

// The delta term is a Kronecker delta at tau == 0 exactly.
double pn_autocorrelation(const PhaseNoiseModel& model, double tau);

// Real symmetric PSD covariance together with a square-root factor L
// (cov ~= L L^T) used for sampling.
class PnCovariance {
 public:
  PnCovariance() = default;
  // Factorizes `matrix` plus a ridge of 1e-12 * max diagonal. Throws
  // std::domain_error when the matrix is not positive semidefinite.
  PnCovariance(MatrixXd matrix, double sampling_interval);

  const MatrixXd& matrix() const { return matrix_; }
  const MatrixXd& factor() const { return factor_; }
  double sampling_interval() const { return sampling_interval_; }
  int size() const { return static_cast<int>(matrix_.rows()); }

 private:
  MatrixXd matrix_;
  MatrixXd factor_;
  double sampling_interval_ = 1.0;
};

PnCovariance pn_covariance(const PhaseNoiseModel& model, int n, double sampling_interval);

// Covariance over arbitrary sample positions (in sample periods); the
// estimator uses this for the useful samples of a frame, which skip the
// cyclic prefixes.
MatrixXd pn_covariance_at(const PhaseNoiseModel& model, const std::vector<long>& positions,
                          double sampling_interval);

VectorXd sample_phase_noise(const PnCovariance& cov, std::uint64_t seed);
VectorXd sample_phase_noise(const PnCovariance& cov, Rng& rng);

struct ImpairmentConfig {
  PhaseNoiseModel phase_noise;
  bool phase_noise_enabled = true;
  double sampling_rate = 81920.0 / 42e-6;  // Hz
  double max_cfo_hz = 400e3;
  int n0_min = 0;
  int n0_max = 15;
  int num_samples = 1;  // PN vector length (whole received buffer)

  void validate() const;
};

struct ImpairmentRealization {
  int n0 = 0;
  double cfo = 0.0;  // cycles per sample
  VectorXd pn;       // radians, one entry per received sample
};

// Caches the PN covariance factor so repeated draws are cheap. Immutable
// after construction; safe to share across threads.
class ImpairmentModel {
 public:
  explicit ImpairmentModel(ImpairmentConfig config);

  ImpairmentRealization draw(std::uint64_t seed) const;
  ImpairmentRealization draw(Rng& rng) const;

  const ImpairmentConfig& config() const { return config_; }
  const PnCovariance& covariance() const { return covariance_; }

 private:
  ImpairmentConfig config_;
  PnCovariance covariance_;
};

ImpairmentRealization draw_impairments(const ImpairmentConfig& config, std::uint64_t seed);

// Two-column CSV exports: "f_hz,psd" and "tau_s,autocorrelation".
void write_psd_csv(std::ostream& os, const PhaseNoiseModel& model, const std::vector<double>& freqs);
void write_autocorrelation_csv(std::ostream& os, const PhaseNoiseModel& model,
                               const std::vector<double>& lags);

// Binary record: i32 n0, f64 cfo, u32 length, length f64 PN samples.
void write_impairments(std::ostream& os, const ImpairmentRealization& imp);
ImpairmentRealization read_impairments(std::istream& is);

}  // namespace mmsync
