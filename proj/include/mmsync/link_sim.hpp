#pragma once

#include <iosfwd>
#include <string>

#include "mmsync/impairments.hpp"
#include "mmsync/rng.hpp"
#include "mmsync/types.hpp"

namespace mmsync {

// Upper-triangular D_w with W^H W = D_w^H D_w.
struct WhiteningFilter {
  MatrixXcd factor;

  // D_w^{-H} X
  MatrixXcd whiten(const MatrixXcd& x) const;
};

WhiteningFilter whitening_from_combiner(const MatrixXcd& combiner);

struct BeamformedChannel {
  MatrixXcd taps;  // D x L_r, row d is g[d]^T
  MatrixXcd freq;  // K x L_r, row k is gcheck[k]^T
};

BeamformedChannel beamformed_taps(const MatrixList& channel_taps, const MatrixXcd& precoder,
                                  const VectorXcd& modulation, const MatrixXcd& combiner,
                                  const WhiteningFilter& whitener, int num_subcarriers);

// gcheck[k] = sum_d g[d] e^{-j 2 pi k d / K}
MatrixXcd taps_to_freq(const MatrixXcd& taps, int num_subcarriers);

struct ReceivedFrame {
  MatrixXcd samples;  // L_r x buffer length
  ImpairmentRealization truth;
  double snr_db = 0.0;
  double noise_variance = 0.0;
};

// Received buffer length for a transmit stream of `tx_length` samples.
int received_length(int tx_length, int num_taps, int n0_max);

// r[n] = e^{j(2 pi cfo n + theta[n])} sum_d g[d] s[n - d - n0] + v[n], for
// n = 0 .. pn.size()-1, with v ~ CN(0, noise_variance I).
ReceivedFrame simulate_rx(const VectorXcd& tx, const MatrixXcd& g_taps,
                          const ImpairmentRealization& impairments, double noise_variance,
                          Rng& rng);

// SNR = (sum_d |g[d]|^2 / L_r) E_s / sigma^2, in dB.
double snr_db(const MatrixXcd& g_taps, double noise_variance, double symbol_energy);
double noise_variance_for_snr(const MatrixXcd& g_taps, double snr_db, double symbol_energy);

// Removes the CP of each symbol and applies the K-point DFT. `start` is the
// first sample of the first symbol's CP. Returns K x N_tr per chain, stacked
// horizontally as K x (N_tr * L_r) with chain-major columns.
MatrixXcd ofdm_demodulate(const MatrixXcd& samples, int start, int num_subcarriers,
                          int cyclic_prefix, int num_symbols);

// Golden-frame record: magic "MMRX", u32 version, u32 L_r, u32 length,
// f64 snr_db, f64 noise variance, interleaved re/im samples (row-major),
// then the impairment record.
void write_received_frame(std::ostream& os, const ReceivedFrame& frame);
ReceivedFrame read_received_frame(std::istream& is);
void write_received_frame(const std::string& path, const ReceivedFrame& frame);
ReceivedFrame read_received_frame(const std::string& path);

}  // namespace mmsync
