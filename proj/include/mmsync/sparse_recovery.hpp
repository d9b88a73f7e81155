#pragma once

#include <utility>
#include <vector>

#include "mmsync/channel_model.hpp"
#include "mmsync/link_sim.hpp"
#include "mmsync/training.hpp"
#include "mmsync/types.hpp"

namespace mmsync {

struct MeasurementModel {
  // Rows of frame m: (q^T F^T) (x) (D_w^{-H} W^H), acting on vec(H[k]).
  MatrixXcd phi;                  // M L_r x N_t N_r
  MatrixXcd measurements;         // M L_r x K, column k stacks ghat_m[k]
  std::vector<double> noise_variance;  // per frame
  // Per-frame factors of phi, used to form the dictionary product without
  // the N_t N_r x G_t G_r Kronecker matrix.
  std::vector<VectorXcd> tx_weights;  // F_RF q, N_t
  std::vector<MatrixXcd> rx_weights;  // D_w^{-H} W^H, L_r x N_r

  int num_frames() const { return static_cast<int>(tx_weights.size()); }
  int rows_per_frame() const {
    return rx_weights.empty() ? 0 : static_cast<int>(rx_weights[0].rows());
  }
};

// Estimate-noise variance per entry of ghat[k] when sigma^2 is the sample
// noise variance: D sigma^2 / (N_tr E_s).
double measurement_noise_variance(double sample_noise_variance, int num_taps, int num_symbols,
                                  double symbol_energy = 1.0);

// `estimates[m]` is K x L_r (rows are subcarriers).
MeasurementModel build_measurement(const std::vector<FramePlan>& frames,
                                   const std::vector<MatrixXcd>& estimates,
                                   const std::vector<double>& noise_variance);

// Upsilon = Phi (conj(A_T) (x) A_R); column index t * G_r + r.
MatrixXcd sensing_matrix(const MeasurementModel& model, const AngularDictionary& dict);

struct SwompOptions {
  int max_iterations = 16;
  double stop_factor = 1.0;
};

struct SparseChannelEstimate {
  std::vector<std::pair<int, int>> support;  // (receive index, transmit index)
  MatrixXcd gains;                           // |support| x K
  MatrixList channel;                        // K matrices N_r x N_t
  std::vector<double> residual_power;        // before each iteration and at exit
};

SparseChannelEstimate swomp(const MeasurementModel& model, const AngularDictionary& dict,
                            const SwompOptions& options = {});

MatrixList reconstruct(const std::vector<std::pair<int, int>>& support, const MatrixXcd& gains,
                       const AngularDictionary& dict, int num_subcarriers);

}  // namespace mmsync
