#include "mmsync/link_sim.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "mmsync/binary_io.hpp"

namespace mmsync {

MatrixXcd WhiteningFilter::whiten(const MatrixXcd& x) const {
  return factor.adjoint().triangularView<Eigen::Lower>().solve(x);
}

WhiteningFilter whitening_from_combiner(const MatrixXcd& combiner) {
  if (combiner.cols() < 1 || combiner.rows() < combiner.cols())
    throw std::invalid_argument("whitening_from_combiner: combiner must be tall");
  const MatrixXcd gram = combiner.adjoint() * combiner;
  Eigen::LLT<MatrixXcd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("whitening_from_combiner: rank-deficient combiner");
  const MatrixXcd u = llt.matrixU();
  const double scale = gram.diagonal().real().maxCoeff();
  if (u.diagonal().cwiseAbs().minCoeff() <= 1e-12 * std::sqrt(scale))
    throw std::invalid_argument("whitening_from_combiner: rank-deficient combiner");
  return {u};
}

MatrixXcd taps_to_freq(const MatrixXcd& taps, int num_subcarriers) {
  const int d_len = static_cast<int>(taps.rows());
  if (num_subcarriers < d_len) throw std::invalid_argument("taps_to_freq: K < D");
  MatrixXcd f1(num_subcarriers, d_len);
  for (int k = 0; k < num_subcarriers; ++k)
    for (int d = 0; d < d_len; ++d)
      f1(k, d) = std::polar(1.0, -kTwoPi * static_cast<double>((static_cast<long>(k) * d) %
                                                               num_subcarriers) /
                                     num_subcarriers);
  return f1 * taps;
}

BeamformedChannel beamformed_taps(const MatrixList& channel_taps, const MatrixXcd& precoder,
                                  const VectorXcd& modulation, const MatrixXcd& combiner,
                                  const WhiteningFilter& whitener, int num_subcarriers) {
  if (channel_taps.empty()) throw std::invalid_argument("beamformed_taps: no taps");
  const auto nr = channel_taps[0].rows();
  const auto nt = channel_taps[0].cols();
  if (precoder.rows() != nt || precoder.cols() != modulation.size() || combiner.rows() != nr ||
      whitener.factor.rows() != combiner.cols())
    throw std::invalid_argument("beamformed_taps: dimension mismatch");
  const VectorXcd f = precoder * modulation;
  const MatrixXcd w = whitener.whiten(combiner.adjoint());
  const int d_len = static_cast<int>(channel_taps.size());
  BeamformedChannel out;
  out.taps.resize(d_len, combiner.cols());
  for (int d = 0; d < d_len; ++d) {
    if (channel_taps[d].rows() != nr || channel_taps[d].cols() != nt)
      throw std::invalid_argument("beamformed_taps: inconsistent tap dimensions");
    out.taps.row(d) = (w * (channel_taps[d] * f)).transpose();
  }
  out.freq = taps_to_freq(out.taps, num_subcarriers);
  return out;
}

int received_length(int tx_length, int num_taps, int n0_max) { return tx_length + num_taps + n0_max; }

ReceivedFrame simulate_rx(const VectorXcd& tx, const MatrixXcd& g_taps,
                          const ImpairmentRealization& impairments, double noise_variance,
                          Rng& rng) {
  if (noise_variance < 0.0) throw std::invalid_argument("simulate_rx: negative noise variance");
  const int len = static_cast<int>(impairments.pn.size());
  const int lr = static_cast<int>(g_taps.cols());
  const int d_len = static_cast<int>(g_taps.rows());
  const int s_len = static_cast<int>(tx.size());
  ReceivedFrame out;
  out.truth = impairments;
  out.noise_variance = noise_variance;
  out.samples = MatrixXcd::Zero(lr, len);
  for (int n = 0; n < len; ++n) {
    const double phase = kTwoPi * std::fmod(impairments.cfo * n, 1.0) + impairments.pn[n];
    const cplx rot = std::polar(1.0, phase);
    for (int d = 0; d < d_len; ++d) {
      const int idx = n - d - impairments.n0;
      if (idx < 0 || idx >= s_len) continue;
      out.samples.col(n) += rot * tx[idx] * g_taps.row(d).transpose();
    }
  }
  if (noise_variance > 0.0)
    for (int n = 0; n < len; ++n)
      for (int i = 0; i < lr; ++i) out.samples(i, n) += rng.complex_normal(noise_variance);
  return out;
}

double snr_db(const MatrixXcd& g_taps, double noise_variance, double symbol_energy) {
  const double gain = g_taps.squaredNorm() / static_cast<double>(g_taps.cols());
  return 10.0 * std::log10(gain * symbol_energy / noise_variance);
}

double noise_variance_for_snr(const MatrixXcd& g_taps, double snr, double symbol_energy) {
  const double gain = g_taps.squaredNorm() / static_cast<double>(g_taps.cols());
  return gain * symbol_energy / db_to_linear(snr);
}

MatrixXcd ofdm_demodulate(const MatrixXcd& samples, int start, int num_subcarriers,
                          int cyclic_prefix, int num_symbols) {
  const int lr = static_cast<int>(samples.rows());
  const int sym = num_subcarriers + cyclic_prefix;
  if (start < 0 || start + num_symbols * sym > samples.cols())
    throw std::out_of_range("ofdm_demodulate: symbols outside the buffer");
  Eigen::FFT<double> fft;
  MatrixXcd out(num_subcarriers, num_symbols * lr);
  std::vector<cplx> in(num_subcarriers), spec;
  for (int i = 0; i < lr; ++i)
    for (int t = 0; t < num_symbols; ++t) {
      const int base = start + t * sym + cyclic_prefix;
      for (int n = 0; n < num_subcarriers; ++n) in[n] = samples(i, base + n);
      fft.fwd(spec, in);
      for (int k = 0; k < num_subcarriers; ++k) out(k, i * num_symbols + t) = spec[k];
    }
  return out;
}

namespace {
constexpr char kFrameMagic[4] = {'M', 'M', 'R', 'X'};
constexpr std::uint32_t kFrameVersion = 1;
}  // namespace

void write_received_frame(std::ostream& os, const ReceivedFrame& frame) {
  os.write(kFrameMagic, 4);
  binio::put<std::uint32_t>(os, kFrameVersion);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(frame.samples.rows()));
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(frame.samples.cols()));
  binio::put<double>(os, frame.snr_db);
  binio::put<double>(os, frame.noise_variance);
  for (Eigen::Index r = 0; r < frame.samples.rows(); ++r)
    for (Eigen::Index c = 0; c < frame.samples.cols(); ++c) {
      binio::put<double>(os, frame.samples(r, c).real());
      binio::put<double>(os, frame.samples(r, c).imag());
    }
  write_impairments(os, frame.truth);
  if (!os) throw std::runtime_error("write_received_frame: write failed");
}

ReceivedFrame read_received_frame(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFrameMagic, 4) != 0)
    throw std::runtime_error("read_received_frame: bad magic");
  if (binio::get<std::uint32_t>(is) != kFrameVersion)
    throw std::runtime_error("read_received_frame: unsupported version");
  const auto rows = binio::get<std::uint32_t>(is);
  const auto cols = binio::get<std::uint32_t>(is);
  ReceivedFrame f;
  f.snr_db = binio::get<double>(is);
  f.noise_variance = binio::get<double>(is);
  f.samples.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) {
      const double re = binio::get<double>(is);
      const double im = binio::get<double>(is);
      f.samples(r, c) = {re, im};
    }
  f.truth = read_impairments(is);
  return f;
}

void write_received_frame(const std::string& path, const ReceivedFrame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_received_frame: cannot open " + path);
  write_received_frame(os, frame);
}

ReceivedFrame read_received_frame(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_received_frame: cannot open " + path);
  return read_received_frame(is);
}

}  // namespace mmsync
