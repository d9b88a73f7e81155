#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmsync/channel_model.hpp"
#include "mmsync/config.hpp"
#include "mmsync/impairments.hpp"
#include "mmsync/sparse_recovery.hpp"
#include "mmsync/sync.hpp"
#include "mmsync/training.hpp"

namespace mmsync {

inline constexpr double kNmseFloorDb = -120.0;

// |x_hat - x|^2 / |x|^2 (linear). Throws on zero-norm truth.
double nmse(const MatrixXcd& estimate, const MatrixXcd& truth);
// Per-subcarrier NMSE averaged over subcarriers (linear).
double nmse(const MatrixList& estimate, const MatrixList& truth);
double to_db(double linear);  // floored at kNmseFloorDb

double detection_probability(const std::vector<int>& estimates, const std::vector<int>& truth);

// Mean over k of log2 det(I + snr/N_s He He^H), He = U^H H[k] V with U, V the
// leading N_s singular vectors of the estimate.
double spectral_efficiency(const MatrixList& estimate, const MatrixList& truth, double snr_linear,
                           int streams);

double overhead_factor(double training_time, double coherence_time);

enum class OverheadMode { computed, paper };

// clustered: the synthetic cluster generator. on_grid: `grid_paths` rays
// pointing exactly at dictionary columns, the first at delay zero and the
// rest at whole-sample delays.
enum class ChannelKind { clustered, on_grid };

struct SweepConfig {
  std::vector<double> snr_db{-15.0, -10.0, -5.0, 0.0, 5.0};
  std::vector<double> g_theta_dbc{-85.0};
  std::vector<int> rx_chains{4};
  int trials = 100;
  std::uint64_t seed = 1;

  int num_tx = 32;
  int num_rx = 16;
  int tx_chains = 4;
  int num_subcarriers = 64;
  int cyclic_prefix = 16;
  int num_symbols = 4;
  int num_frames = 16;
  int num_taps = 8;
  int streams = 2;
  double sampling_rate = 81920.0 / 42e-6;
  double max_cfo_hz = 400e3;
  bool cfo_enabled = true;  // false: true CFO is zero, the search range is kept
  int n0_max = -1;  // -1: L_c - 1

  double f_z = 100e6;
  double f_p = 1e6;
  bool pn_enabled = true;

  ChannelKind channel = ChannelKind::clustered;
  int grid_paths = 1;
  ClusterModel clusters;
  double rolloff = 0.25;
  int pulse_span = 4;
  double element_spacing = 0.5;
  int tx_grid_factor = 2;
  int rx_grid_factor = 2;

  int zc_root = 1;
  ShiftSchedule shift_schedule = ShiftSchedule::decoupled;
  double preamble_boost_db = 6.0;

  TimingMetric timing = TimingMetric::matched_filter;
  int alternations = 2;
  bool pn_correction = true;
  int cfo_grid_points = 129;
  double cfo_tolerance = 1e-7;
  bool cfo_refine = true;
  bool genie_noise_variance = false;
  int pn_dense_limit = 1024;

  int swomp_max_iterations = 16;
  double swomp_stop_factor = 1.0;

  double coherence_time = 2.5e-3;
  OverheadMode overhead_mode = OverheadMode::computed;
  int threads = 0;  // 0: hardware concurrency

  static SweepConfig preset(const std::string& name);
  // Unknown keys are rejected.
  void apply(const KeyValueConfig& kv);
  void validate() const;

  int resolved_n0_max() const { return n0_max >= 0 ? n0_max : cyclic_prefix - 1; }
  double sampling_interval() const { return 1.0 / sampling_rate; }
  double training_time() const;
  double overhead() const;  // factor applied to se
  TrainingConfig training(int rx_chains) const;
  ImpairmentConfig impairments(double g_theta_dbc) const;
  SyncConfig sync() const;
  ArrayGeometry tx_array() const { return {num_tx, element_spacing}; }
  ArrayGeometry rx_array() const { return {num_rx, element_spacing}; }
  AngularDictionary dictionary() const;
};

struct GridPoint {
  double snr_db = 0.0;
  double g_theta_dbc = -85.0;
  int rx_chains = 4;
};

struct MetricRow {
  GridPoint point;
  int trials = 0;
  int failures = 0;
  double p_detect = 0.0;
  double p_detect_ci = 0.0;
  double nmse_g_db = 0.0;
  double nmse_cfo_db = 0.0;
  double nmse_h_db = 0.0;
  double se = 0.0;
  double se_ci = 0.0;
  double se_with_overhead = 0.0;
};

struct EstimateRow {
  int trial = 0;
  int frame = 0;
  GridPoint point;
  int n0_true = 0;
  int n0_hat = 0;
  double cfo_true = 0.0;
  double cfo_hat = 0.0;
  double pn_nmse_db = 0.0;
  double g_nmse_db = 0.0;
  double noise_variance_true = 0.0;
  double noise_variance_hat = 0.0;
};

enum class Pipeline { full, sync_only };

using MetricSink = std::function<void(const MetricRow&)>;
using EstimateSink = std::function<void(const EstimateRow&)>;

std::vector<GridPoint> grid_points(const SweepConfig& config);

// Streams one row per grid point, ordered by grid point. When
// `estimate_sink` is set it receives every per-frame estimate, ordered by
// (grid point, trial, frame).
void run_sweep(const SweepConfig& config, Pipeline pipeline, const MetricSink& sink,
               const EstimateSink& estimate_sink = {});

// Trial-level building blocks, exposed for tools and tests.
ChannelRealization draw_trial_channel(const SweepConfig& config, int trial);

void write_metric_header(std::ostream& os);
void write_metric_row(std::ostream& os, const MetricRow& row);
void write_estimate_header(std::ostream& os);
void write_estimate_row(std::ostream& os, const EstimateRow& row);

}  // namespace mmsync
