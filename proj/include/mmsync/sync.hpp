#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mmsync/impairments.hpp"
#include "mmsync/link_sim.hpp"
#include "mmsync/training.hpp"
#include "mmsync/types.hpp"

namespace mmsync {

// Sample layout of one training frame relative to the frame start n0.
struct FrameLayout {
  int num_subcarriers = 64;
  int cyclic_prefix = 16;
  int num_symbols = 4;
  int preamble_length = 64;
  int num_taps = 8;

  static FrameLayout from(const TrainingConfig& config, int num_taps);

  int useful_samples() const { return num_symbols * num_subcarriers; }
  int symbol_length() const { return num_subcarriers + cyclic_prefix; }
  // Offset of the first useful sample of symbol t from the frame start.
  int useful_offset(int t) const { return preamble_length + cyclic_prefix + t * symbol_length(); }
  int frame_length() const { return preamble_length + num_symbols * symbol_length(); }
  std::vector<long> useful_positions() const;
  void validate() const;
};

// Unitary DFT partition: F1[k, d] = e^{-j 2 pi k d / K} / sqrt(K), d < D.
MatrixXcd dft_partition(int num_subcarriers, int num_taps);

// A = X[n0] P_E (I (x) E F^H) S (1 (x) F1), kept in factored form. The
// product (I (x) F^H) S (1 (x) F1) is stored densely as `base`; the diagonal
// CFO and PN phasors multiply its rows.
class StructuredTransfer {
 public:
  StructuredTransfer(const FrameLayout& layout, int n0, double cfo, const VectorXd& pn,
                     const MatrixXcd& pilots);

  const FrameLayout& layout() const { return layout_; }
  int n0() const { return n0_; }
  double cfo() const { return cfo_; }
  const VectorXd& pn() const { return pn_; }
  const MatrixXcd& pilots() const { return pilots_; }
  double symbol_energy() const { return symbol_energy_; }

  // phi(n0, t) = e^{j 2 pi cfo (n0 + P + L_c + t (K + L_c))}
  VectorXcd symbol_phasors() const;
  // e^{j 2 pi cfo n}, n < K
  VectorXcd within_symbol_phasors() const;
  VectorXcd pn_phasors() const;
  // Diagonal of X P_E (I (x) E): the combined per-sample rotation.
  VectorXcd phasors() const;

  const MatrixXcd& base() const { return *base_; }
  MatrixXcd dense() const;
  // A^H y for y with N_tr K rows.
  MatrixXcd adjoint_apply(const MatrixXcd& y) const;

 private:
  FrameLayout layout_;
  int n0_;
  double cfo_;
  VectorXd pn_;
  MatrixXcd pilots_;
  double symbol_energy_;
  std::shared_ptr<const MatrixXcd> base_;
};

enum class TimingMetric { matched_filter, per_sample };

// Metric per candidate lag 0..max_lag.
VectorXd timing_metric(const MatrixXcd& rx, const VectorXcd& preamble, int max_lag,
                       TimingMetric metric = TimingMetric::matched_filter);
int detect_timing(const MatrixXcd& rx, const VectorXcd& preamble, int max_lag,
                  TimingMetric metric = TimingMetric::matched_filter);

// Useful samples stacked per symbol, N_tr K x L_r.
MatrixXcd extract_useful(const MatrixXcd& rx, int n0, const FrameLayout& layout);

// (1 / (N_tr E_s)) A^H y: D x L_r delay taps.
MatrixXcd estimate_g(const MatrixXcd& y, const StructuredTransfer& transfer);

// PN prior over the useful samples of a frame (CP gaps included in the lag
// structure). Holds the Cholesky factor and, for small frames, the inverse.
class PnPrior {
 public:
  PnPrior(const PhaseNoiseModel& model, const FrameLayout& layout, double sampling_interval,
          int dense_limit = 1024);

  int size() const { return static_cast<int>(covariance_.rows()); }
  const MatrixXd& covariance() const { return covariance_; }
  const MatrixXd& factor() const { return factor_; }
  bool has_inverse() const { return inverse_.size() > 0; }
  const MatrixXd& inverse() const { return inverse_; }
  VectorXd solve(const VectorXd& x) const;

 private:
  MatrixXd covariance_;
  MatrixXd factor_;
  MatrixXd inverse_;
};

struct PnSolveOptions {
  int dense_limit = 1024;  // dense Cholesky solve up to this many unknowns
  double cg_tolerance = 1e-10;
  int cg_max_iterations = 0;  // 0: number of unknowns
};

// MAP phase-noise estimate, linearized around the PN stored in `transfer`
// (whose CFO is taken as known). Returns the updated PN vector.
VectorXd estimate_pn(const MatrixXcd& y, const StructuredTransfer& transfer, const PnPrior& prior,
                     double noise_variance, const PnSolveOptions& options = {});

struct CfoSearch {
  double max_cfo = 400e3 / (81920.0 / 42e-6);  // cycles per sample
  int grid_points = 129;
  double tolerance = 1e-7;
  bool refine = true;
};

// sum_i |A(cfo)^H y_i|^2 with the PN fixed.
class CfoObjective {
 public:
  CfoObjective(const MatrixXcd& y, const FrameLayout& layout, int n0, const VectorXd& pn,
               const MatrixXcd& pilots);
  double operator()(double cfo) const;

 private:
  FrameLayout layout_;
  int n0_;
  MatrixXcd derotated_;
  MatrixXcd base_adjoint_;
  std::vector<double> positions_;
};

double estimate_cfo(const MatrixXcd& y, const FrameLayout& layout, int n0, const VectorXd& pn,
                    const MatrixXcd& pilots, const CfoSearch& search);

double estimate_noise_variance(const MatrixXcd& y, const StructuredTransfer& transfer);

// (sigma^2 / K) I_{L_r} (x) (F1 B^{-1} F1^H)
MatrixXcd crlb_beamformed(const MatrixXcd& gram, double noise_variance, int num_subcarriers,
                          int num_chains);

struct SyncConfig {
  int max_lag = 15;
  TimingMetric timing = TimingMetric::matched_filter;
  CfoSearch cfo;
  int alternations = 2;
  bool pn_correction = true;
  std::optional<int> known_n0;
  std::optional<double> genie_noise_variance;
  PnSolveOptions pn_solver;
  // Floor on the noise variance fed to the PN regularizer, relative to the
  // mean received power; keeps the system well posed on noiseless input.
  double pn_snr_cap_db = 60.0;
};

struct SyncEstimate {
  int n0_hat = 0;
  double cfo_hat = 0.0;
  VectorXd pn_hat;   // N_tr K
  MatrixXcd g_taps;  // D x L_r
  MatrixXcd g_freq;  // K x L_r
  double noise_variance_hat = 0.0;
  int iterations = 0;
};

// Runs the full per-frame chain. Immutable after construction; `run` may be
// called concurrently.
class Synchronizer {
 public:
  // `pn_model` empty means the receiver assumes no phase noise.
  Synchronizer(FrameLayout layout, SyncConfig config, std::optional<PhaseNoiseModel> pn_model,
               double sampling_interval);

  // `noise_variance` overrides the bootstrap estimate used by the PN step.
  SyncEstimate run(const MatrixXcd& rx, const MatrixXcd& pilots, const VectorXcd& preamble,
                   std::optional<double> noise_variance = std::nullopt) const;

  const FrameLayout& layout() const { return layout_; }
  const SyncConfig& config() const { return config_; }

 private:
  FrameLayout layout_;
  SyncConfig config_;
  std::shared_ptr<const PnPrior> prior_;
};

SyncEstimate joint_sync(const ReceivedFrame& frame, const TrainingPlan& plan, int m, int num_taps,
                        const SyncConfig& config, std::optional<PhaseNoiseModel> pn_model,
                        double sampling_interval);

}  // namespace mmsync
