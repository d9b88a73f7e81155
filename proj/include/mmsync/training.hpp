#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmsync/types.hpp"

namespace mmsync {

struct ZCSequence {
  int length = 0;
  int root = 1;
  VectorXcd values;
};

// Odd length: exp(-j pi u n (n+1) / N). Even length: exp(-j pi u n^2 / N).
ZCSequence zadoff_chu(int length, int root);

struct GolayPreamble {
  VectorXcd values;         // Ga64, +-1
  VectorXcd complementary;  // Gb64, +-1
  double power_boost = 1.0; // linear, relative to the OFDM sample power
};

GolayPreamble golay_preamble(double boost_db = 6.0);

// (P v)[r] = v[(r - shift) mod L]: shift = 1 maps [a, b, c] to [c, a, b].
MatrixXd permutation_matrix(int size, int shift);

// Which cyclic shift the active subarray's ZC sequence gets in frame m.
//  locked:    shift = m mod L_t, the same index that selects the subarray.
//  decoupled: shift = floor(m / L_t) mod K_t, so each subarray walks through
//             every shift across frames.
enum class ShiftSchedule { locked, decoupled };

struct TrainingConfig {
  int num_tx = 32;
  int num_rx = 16;
  int tx_chains = 4;
  int rx_chains = 4;
  int num_subcarriers = 64;
  int cyclic_prefix = 16;
  int num_symbols = 4;
  int zc_root = 1;
  double preamble_boost_db = 6.0;
  ShiftSchedule shift_schedule = ShiftSchedule::decoupled;

  int tx_subarray_size() const { return num_tx / tx_chains; }
  int rx_subarray_size() const { return num_rx / rx_chains; }
  int symbol_length() const { return num_subcarriers + cyclic_prefix; }
  void validate() const;
};

struct PrecoderDesign {
  MatrixXcd analog;          // F_RF, N_t x L_t
  VectorXcd modulation;      // q, L_t
  std::vector<int> q_index;  // QPSK quadrant per chain
  int active_subarray = 0;   // j*
  int zc_shift = 0;
};

struct CombinerDesign {
  MatrixXcd analog;           // W_RF, N_r x L_r
  std::vector<int> selected;  // p_i*, index within subarray i
};

int active_subarray(int m, const TrainingConfig& config);
int zc_shift(int m, const TrainingConfig& config);

PrecoderDesign design_precoder(int m, const TrainingConfig& config, std::uint64_t seed);
CombinerDesign design_combiner(int m, const TrainingConfig& config, std::uint64_t seed);

// Rebuild the designs from their integer descriptions.
PrecoderDesign precoder_from_indices(const TrainingConfig& config, int active, int shift,
                                     const std::vector<int>& q_index);
CombinerDesign combiner_from_indices(const TrainingConfig& config, const std::vector<int>& selected);

// Unit-modulus QPSK pilots for every symbol of frame m, N_tr x K.
MatrixXcd frame_pilots(int m, const TrainingConfig& config, std::uint64_t pilot_seed);

// One CP-OFDM symbol: x[n] = (1/K) sum_k s[k] e^{j 2 pi k n / K}, CP prepended.
VectorXcd ofdm_modulate(const VectorXcd& pilots, int cyclic_prefix);

struct FramePlan {
  PrecoderDesign precoder;
  CombinerDesign combiner;
  MatrixXcd pilots;  // N_tr x K
};

struct TrainingPlan {
  TrainingConfig config;
  GolayPreamble preamble;
  std::uint64_t seed = 0;
  std::vector<FramePlan> frames;

  int num_frames() const { return static_cast<int>(frames.size()); }
  // Transmit amplitude of the boosted preamble.
  double preamble_amplitude() const;
  VectorXcd scaled_preamble() const { return preamble_amplitude() * preamble.values; }
};

TrainingPlan make_training_plan(const TrainingConfig& config, int num_frames, std::uint64_t seed);

// [boosted Ga64 | N_tr CP-OFDM symbols]
VectorXcd assemble_frame(const TrainingPlan& plan, int m);

// Text plan file; see README for the layout.
void write_training_plan(std::ostream& os, const TrainingPlan& plan);
TrainingPlan read_training_plan(std::istream& is);

}  // namespace mmsync
