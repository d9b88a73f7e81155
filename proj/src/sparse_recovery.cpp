#include "mmsync/sparse_recovery.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmsync {

double measurement_noise_variance(double sample_noise_variance, int num_taps, int num_symbols,
                                  double symbol_energy) {
  return num_taps * sample_noise_variance / (num_symbols * symbol_energy);
}

MeasurementModel build_measurement(const std::vector<FramePlan>& frames,
                                   const std::vector<MatrixXcd>& estimates,
                                   const std::vector<double>& noise_variance) {
  const int m_len = static_cast<int>(frames.size());
  if (m_len < 1) throw std::invalid_argument("build_measurement: need at least one frame");
  if (static_cast<int>(estimates.size()) != m_len || static_cast<int>(noise_variance.size()) != m_len)
    throw std::invalid_argument("build_measurement: plans and estimates not aligned");
  const auto nt = frames[0].precoder.analog.rows();
  const auto nr = frames[0].combiner.analog.rows();
  const auto lr = frames[0].combiner.analog.cols();
  const auto k_len = estimates[0].rows();

  MeasurementModel model;
  model.phi.resize(m_len * lr, nt * nr);
  model.measurements.resize(m_len * lr, k_len);
  model.noise_variance = noise_variance;
  for (int m = 0; m < m_len; ++m) {
    const FramePlan& f = frames[m];
    if (f.precoder.analog.rows() != nt || f.combiner.analog.rows() != nr ||
        f.combiner.analog.cols() != lr || estimates[m].rows() != k_len || estimates[m].cols() != lr)
      throw std::invalid_argument("build_measurement: shape mismatch");
    const VectorXcd tx = f.precoder.analog * f.precoder.modulation;
    const MatrixXcd rx = whitening_from_combiner(f.combiner.analog).whiten(f.combiner.analog.adjoint());
    // vec(W H f) = (f^T (x) W) vec(H) with column-major vec.
    for (Eigen::Index c = 0; c < nt; ++c)
      model.phi.block(m * lr, c * nr, lr, nr) = tx[c] * rx;
    model.measurements.middleRows(m * lr, lr) = estimates[m].transpose();
    model.tx_weights.push_back(tx);
    model.rx_weights.push_back(rx);
  }
  return model;
}

MatrixXcd sensing_matrix(const MeasurementModel& model, const AngularDictionary& dict) {
  const int gt = dict.transmit.size();
  const int gr = dict.receive.size();
  const int lr = model.rows_per_frame();
  MatrixXcd ups(model.num_frames() * lr, static_cast<Eigen::Index>(gt) * gr);
  for (int m = 0; m < model.num_frames(); ++m) {
    // a_T^H f for every transmit atom, and W a_R for every receive atom.
    const VectorXcd bt = dict.transmit.atoms.adjoint() * model.tx_weights[m];
    const MatrixXcd br = model.rx_weights[m] * dict.receive.atoms;
    for (int t = 0; t < gt; ++t) ups.block(m * lr, static_cast<Eigen::Index>(t) * gr, lr, gr) = bt[t] * br;
  }
  return ups;
}

MatrixList reconstruct(const std::vector<std::pair<int, int>>& support, const MatrixXcd& gains,
                       const AngularDictionary& dict, int num_subcarriers) {
  const auto nr = dict.receive.atoms.rows();
  const auto nt = dict.transmit.atoms.rows();
  MatrixList out(num_subcarriers, MatrixXcd::Zero(nr, nt));
  if (static_cast<Eigen::Index>(support.size()) != gains.rows() ||
      (!support.empty() && gains.cols() != num_subcarriers))
    throw std::invalid_argument("reconstruct: gains must be |support| x K");
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto [r, t] = support[s];
    if (r < 0 || r >= dict.receive.size() || t < 0 || t >= dict.transmit.size())
      throw std::out_of_range("reconstruct: grid index out of range");
    const MatrixXcd outer = dict.receive.atoms.col(r) * dict.transmit.atoms.col(t).adjoint();
    for (int k = 0; k < num_subcarriers; ++k) out[k] += gains(static_cast<Eigen::Index>(s), k) * outer;
  }
  return out;
}

SparseChannelEstimate swomp(const MeasurementModel& model, const AngularDictionary& dict,
                            const SwompOptions& options) {
  const int lr = model.rows_per_frame();
  const int rows = model.num_frames() * lr;
  const int k_len = static_cast<int>(model.measurements.cols());
  const int gr = dict.receive.size();
  if (options.max_iterations < 0 || !(options.stop_factor >= 0.0))
    throw std::invalid_argument("swomp: bad options");
  for (double v : model.noise_variance)
    if (!(v > 0.0)) throw std::invalid_argument("swomp: noise variance must be positive");

  // Whiten each frame block by its estimate-noise standard deviation, so the
  // stopping threshold becomes the unit variance.
  VectorXd weight(rows);
  for (int m = 0; m < model.num_frames(); ++m)
    weight.segment(m * lr, lr).setConstant(1.0 / std::sqrt(model.noise_variance[m]));
  const MatrixXcd ups = weight.asDiagonal() * sensing_matrix(model, dict);
  const MatrixXcd y = weight.asDiagonal() * model.measurements;

  SparseChannelEstimate est;
  std::vector<Eigen::Index> cols;
  std::vector<char> used(ups.cols(), 0);
  MatrixXcd residual = y;
  MatrixXcd coeffs;
  const double denom = static_cast<double>(rows) * k_len;
  for (;;) {
    const double power = residual.squaredNorm() / denom;
    est.residual_power.push_back(power);
    if (power <= options.stop_factor || static_cast<int>(cols.size()) >= options.max_iterations ||
        static_cast<Eigen::Index>(cols.size()) >= std::min<Eigen::Index>(rows, ups.cols()))
      break;
    const MatrixXcd corr = ups.adjoint() * residual;
    const VectorXd score = corr.cwiseAbs().rowwise().sum();
    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index c = 0; c < score.size(); ++c)
      if (!used[c] && score[c] > best_score) {
        best_score = score[c];
        best = c;
      }
    if (best < 0 || best_score <= 0.0) break;
    used[best] = 1;
    cols.push_back(best);

    MatrixXcd sub(rows, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t s = 0; s < cols.size(); ++s) sub.col(static_cast<Eigen::Index>(s)) = ups.col(cols[s]);
    Eigen::ColPivHouseholderQR<MatrixXcd> qr(sub);
    if (qr.rank() < sub.cols()) throw std::runtime_error("swomp: singular Gram matrix on the support");
    coeffs = qr.solve(y);
    residual = y - sub * coeffs;
  }

  for (Eigen::Index c : cols)
    est.support.emplace_back(static_cast<int>(c % gr), static_cast<int>(c / gr));
  est.gains = cols.empty() ? MatrixXcd(0, k_len) : coeffs;
  est.channel = reconstruct(est.support, est.gains, dict, k_len);
  return est;
}

}  // namespace mmsync
