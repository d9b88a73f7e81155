#include "mmsync/sync.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace mmsync {

FrameLayout FrameLayout::from(const TrainingConfig& config, int num_taps) {
  FrameLayout l;
  l.num_subcarriers = config.num_subcarriers;
  l.cyclic_prefix = config.cyclic_prefix;
  l.num_symbols = config.num_symbols;
  l.preamble_length = 64;
  l.num_taps = num_taps;
  l.validate();
  return l;
}

std::vector<long> FrameLayout::useful_positions() const {
  std::vector<long> pos;
  pos.reserve(useful_samples());
  for (int t = 0; t < num_symbols; ++t)
    for (int n = 0; n < num_subcarriers; ++n) pos.push_back(useful_offset(t) + n);
  return pos;
}

void FrameLayout::validate() const {
  if (num_subcarriers < 1 || num_symbols < 0 || preamble_length < 0 || num_taps < 1)
    throw std::invalid_argument("FrameLayout: bad dimensions");
  if (num_taps > num_subcarriers) throw std::invalid_argument("FrameLayout: D > K");
  if (cyclic_prefix < num_taps - 1)
    throw std::invalid_argument("FrameLayout: cyclic prefix shorter than the channel");
}

MatrixXcd dft_partition(int num_subcarriers, int num_taps) {
  MatrixXcd f1(num_subcarriers, num_taps);
  const double s = 1.0 / std::sqrt(static_cast<double>(num_subcarriers));
  for (int k = 0; k < num_subcarriers; ++k)
    for (int d = 0; d < num_taps; ++d)
      f1(k, d) = std::polar(s, -kTwoPi * static_cast<double>((static_cast<long>(k) * d) %
                                                             num_subcarriers) /
                                   num_subcarriers);
  return f1;
}

namespace {

// (I (x) F^H) S (1 (x) F1): block t is the K x D circular convolution matrix
// of the symbol's time-domain waveform.
MatrixXcd transfer_base(const FrameLayout& layout, const MatrixXcd& pilots) {
  const int k_len = layout.num_subcarriers;
  const int d_len = layout.num_taps;
  Eigen::FFT<double> fft;
  MatrixXcd base(layout.useful_samples(), d_len);
  std::vector<cplx> spec(k_len), time;
  for (int t = 0; t < layout.num_symbols; ++t) {
    for (int k = 0; k < k_len; ++k) spec[k] = pilots(t, k);
    fft.inv(time, spec);
    for (int n = 0; n < k_len; ++n)
      for (int d = 0; d < d_len; ++d) base(t * k_len + n, d) = time[((n - d) % k_len + k_len) % k_len];
  }
  return base;
}

VectorXcd cfo_phasors(const FrameLayout& layout, int n0, double cfo) {
  VectorXcd ph(layout.useful_samples());
  int i = 0;
  for (long p : layout.useful_positions()) {
    const double cycles = std::fmod(cfo * static_cast<double>(n0 + p), 1.0);
    ph[i++] = std::polar(1.0, kTwoPi * cycles);
  }
  return ph;
}

void check_pilots(const FrameLayout& layout, const MatrixXcd& pilots) {
  if (pilots.rows() != layout.num_symbols || pilots.cols() != layout.num_subcarriers)
    throw std::invalid_argument("pilot matrix must be N_tr x K");
}

}  // namespace

StructuredTransfer::StructuredTransfer(const FrameLayout& layout, int n0, double cfo,
                                       const VectorXd& pn, const MatrixXcd& pilots)
    : layout_(layout), n0_(n0), cfo_(cfo), pn_(pn), pilots_(pilots) {
  layout_.validate();
  check_pilots(layout_, pilots_);
  if (pn_.size() != layout_.useful_samples())
    throw std::invalid_argument("StructuredTransfer: PN length must equal N_tr K");
  symbol_energy_ = pilots_.size() > 0 ? pilots_.cwiseAbs2().mean() : 1.0;
  base_ = std::make_shared<const MatrixXcd>(transfer_base(layout_, pilots_));
}

VectorXcd StructuredTransfer::symbol_phasors() const {
  VectorXcd x(layout_.num_symbols);
  for (int t = 0; t < layout_.num_symbols; ++t)
    x[t] = std::polar(1.0, kTwoPi * std::fmod(cfo_ * (n0_ + layout_.useful_offset(t)), 1.0));
  return x;
}

VectorXcd StructuredTransfer::within_symbol_phasors() const {
  VectorXcd e(layout_.num_subcarriers);
  for (int n = 0; n < layout_.num_subcarriers; ++n) e[n] = std::polar(1.0, kTwoPi * cfo_ * n);
  return e;
}

VectorXcd StructuredTransfer::pn_phasors() const {
  VectorXcd p(pn_.size());
  for (Eigen::Index i = 0; i < pn_.size(); ++i) p[i] = std::polar(1.0, pn_[i]);
  return p;
}

VectorXcd StructuredTransfer::phasors() const {
  return cfo_phasors(layout_, n0_, cfo_).cwiseProduct(pn_phasors());
}

MatrixXcd StructuredTransfer::dense() const { return phasors().asDiagonal() * base(); }

MatrixXcd StructuredTransfer::adjoint_apply(const MatrixXcd& y) const {
  if (y.rows() != layout_.useful_samples())
    throw std::invalid_argument("adjoint_apply: y must have N_tr K rows");
  return base().adjoint() * (phasors().conjugate().asDiagonal() * y);
}

VectorXd timing_metric(const MatrixXcd& rx, const VectorXcd& preamble, int max_lag,
                       TimingMetric metric) {
  const int p_len = static_cast<int>(preamble.size());
  if (max_lag < 0 || max_lag + p_len > rx.cols())
    throw std::out_of_range("timing_metric: search window exceeds the frame");
  VectorXd out(max_lag + 1);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rx.rows(); ++i) {
      if (metric == TimingMetric::matched_filter) {
        cplx c{0.0, 0.0};
        for (int n = 0; n < p_len; ++n) c += rx(i, lag + n) * std::conj(preamble[n]);
        acc += std::norm(c);
      } else {
        for (int n = 0; n < p_len; ++n) acc += std::norm(rx(i, lag + n) * std::conj(preamble[n]));
      }
    }
    out[lag] = acc;
  }
  return out;
}

int detect_timing(const MatrixXcd& rx, const VectorXcd& preamble, int max_lag, TimingMetric metric) {
  const VectorXd m = timing_metric(rx, preamble, max_lag, metric);
  Eigen::Index best = 0;
  m.maxCoeff(&best);  // first maximizer on ties
  return static_cast<int>(best);
}

MatrixXcd extract_useful(const MatrixXcd& rx, int n0, const FrameLayout& layout) {
  const int k_len = layout.num_subcarriers;
  if (n0 < 0 || n0 + layout.frame_length() > rx.cols())
    throw std::out_of_range("extract_useful: frame outside the received buffer");
  MatrixXcd y(layout.useful_samples(), rx.rows());
  for (int t = 0; t < layout.num_symbols; ++t)
    y.middleRows(t * k_len, k_len) = rx.middleCols(n0 + layout.useful_offset(t), k_len).transpose();
  return y;
}

MatrixXcd estimate_g(const MatrixXcd& y, const StructuredTransfer& transfer) {
  const double scale = 1.0 / (transfer.layout().num_symbols * transfer.symbol_energy());
  return scale * transfer.adjoint_apply(y);
}

PnPrior::PnPrior(const PhaseNoiseModel& model, const FrameLayout& layout, double sampling_interval,
                 int dense_limit) {
  covariance_ = pn_covariance_at(model, layout.useful_positions(), sampling_interval);
  const int n = size();
  MatrixXd ridged = covariance_;
  ridged.diagonal().array() += 1e-12 * covariance_.diagonal().maxCoeff();
  Eigen::LLT<MatrixXd> llt(ridged);
  if (llt.info() != Eigen::Success) throw std::domain_error("PnPrior: covariance not positive definite");
  factor_ = llt.matrixL();
  if (n <= dense_limit) inverse_ = llt.solve(MatrixXd::Identity(n, n));
}

VectorXd PnPrior::solve(const VectorXd& x) const {
  const auto l = factor_.triangularView<Eigen::Lower>();
  return l.transpose().solve(l.solve(x));
}

namespace {

// Pieces of the linearized MAP system that do not depend on the solver.
struct PnSystem {
  MatrixXcd data;      // derotated y, N x L_r
  MatrixXcd base;      // C0
  VectorXd diag;       // Re(Z 1)
  VectorXd b;          // Im(Z 1)

  // Z x for real x: sum_i conj(y_i) .* (C0 C0^H (y_i .* x))
  VectorXcd apply_z(const VectorXd& x) const {
    VectorXcd acc = VectorXcd::Zero(data.rows());
    for (Eigen::Index i = 0; i < data.cols(); ++i) {
      const VectorXcd u = data.col(i).cwiseProduct(x.cast<cplx>());
      const VectorXcd g = base * (base.adjoint() * u);
      acc += data.col(i).conjugate().cwiseProduct(g);
    }
    return acc;
  }

  // Laplacian form diag(Re Z 1) - Re Z
  VectorXd apply_laplacian(const VectorXd& x) const {
    return diag.cwiseProduct(x) - apply_z(x).real();
  }
};

}  // namespace

VectorXd estimate_pn(const MatrixXcd& y, const StructuredTransfer& transfer, const PnPrior& prior,
                     double noise_variance, const PnSolveOptions& options) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("estimate_pn: noise variance must be positive");
  const int n = transfer.layout().useful_samples();
  if (y.rows() != n || prior.size() != n) throw std::invalid_argument("estimate_pn: size mismatch");

  PnSystem sys;
  sys.data = transfer.phasors().conjugate().asDiagonal() * y;
  sys.base = transfer.base();
  const VectorXcd z1 = sys.apply_z(VectorXd::Ones(n));
  sys.diag = z1.real();
  sys.b = z1.imag();

  const double lambda = 0.5 * noise_variance * transfer.layout().num_symbols * transfer.symbol_energy();
  const VectorXd& theta0 = transfer.pn();
  const bool linearized = theta0.cwiseAbs().maxCoeff() > 0.0;

  VectorXd delta;
  if (n <= options.dense_limit && prior.has_inverse()) {
    const MatrixXcd g0 = sys.base * sys.base.adjoint();
    const MatrixXcd w = sys.data.conjugate() * sys.data.transpose();
    const MatrixXd re_z = g0.cwiseProduct(w).real();
    MatrixXd system = -re_z;
    system.diagonal() += sys.diag;
    system += lambda * prior.inverse();
    system = 0.5 * (system + system.transpose()).eval();
    VectorXd rhs = -sys.b;
    if (linearized) rhs -= lambda * (prior.inverse() * theta0);
    Eigen::LLT<MatrixXd> llt(system);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("estimate_pn: system matrix not positive definite");
    delta = llt.solve(rhs);
  } else {
    // Whitened coordinates theta = L u turn the prior term into lambda I.
    const auto l = prior.factor().triangularView<Eigen::Lower>();
    auto op = [&](const VectorXd& u) -> VectorXd {
      const VectorXd t = l * u;
      return VectorXd(l.transpose() * sys.apply_laplacian(t)) + lambda * u;
    };
    VectorXd rhs = -(l.transpose() * sys.b);
    if (linearized) rhs -= lambda * l.solve(theta0);
    VectorXd u = VectorXd::Zero(n);
    VectorXd r = rhs;
    VectorXd p = r;
    double rr = r.squaredNorm();
    const double stop = options.cg_tolerance * options.cg_tolerance * std::max(rhs.squaredNorm(), 1e-300);
    const int max_it = options.cg_max_iterations > 0 ? options.cg_max_iterations : n;
    for (int it = 0; it < max_it && rr > stop; ++it) {
      const VectorXd ap = op(p);
      const double curv = p.dot(ap);
      if (!(curv > 0.0)) throw std::runtime_error("estimate_pn: system matrix not positive definite");
      const double alpha = rr / curv;
      u += alpha * p;
      r -= alpha * ap;
      const double rr_new = r.squaredNorm();
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
    delta = l * u;
  }
  return theta0 + delta;
}

CfoObjective::CfoObjective(const MatrixXcd& y, const FrameLayout& layout, int n0, const VectorXd& pn,
                           const MatrixXcd& pilots)
    : layout_(layout), n0_(n0) {
  layout_.validate();
  check_pilots(layout_, pilots);
  const int n = layout_.useful_samples();
  if (y.rows() != n || pn.size() != n) throw std::invalid_argument("CfoObjective: size mismatch");
  derotated_.resize(n, y.cols());
  for (int i = 0; i < n; ++i) derotated_.row(i) = std::polar(1.0, -pn[i]) * y.row(i);
  base_adjoint_ = transfer_base(layout_, pilots).adjoint();
  for (long p : layout_.useful_positions()) positions_.push_back(static_cast<double>(n0_ + p));
}

double CfoObjective::operator()(double cfo) const {
  const int n = static_cast<int>(positions_.size());
  VectorXcd rot(n);
  for (int i = 0; i < n; ++i) rot[i] = std::polar(1.0, -kTwoPi * std::fmod(cfo * positions_[i], 1.0));
  return (base_adjoint_ * (rot.asDiagonal() * derotated_)).squaredNorm();
}

double estimate_cfo(const MatrixXcd& y, const FrameLayout& layout, int n0, const VectorXd& pn,
                    const MatrixXcd& pilots, const CfoSearch& search) {
  if (search.grid_points < 1) throw std::invalid_argument("estimate_cfo: empty grid");
  if (!(search.max_cfo >= 0.0 && search.max_cfo < 0.5))
    throw std::invalid_argument("estimate_cfo: grid must lie inside (-0.5, 0.5)");
  if (search.max_cfo == 0.0 || search.grid_points == 1) return 0.0;

  const CfoObjective obj(y, layout, n0, pn, pilots);
  const int g = search.grid_points;
  const double step = 2.0 * search.max_cfo / (g - 1);
  double best = 0.0;
  double best_val = -1.0;
  for (int i = 0; i < g; ++i) {
    // Symmetric grid; the middle point is exactly zero for odd sizes.
    const double c = (2 * i == g - 1) ? 0.0 : -search.max_cfo + i * step;
    const double v = obj(c);
    if (v > best_val) {
      best_val = v;
      best = c;
    }
  }
  if (!search.refine) return best;

  // Golden-section search for the maximum within one grid step.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::max(best - step, -search.max_cfo);
  double b = std::min(best + step, search.max_cfo);
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = obj(c);
  double fd = obj(d);
  while (b - a > search.tolerance) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = obj(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = obj(d);
    }
  }
  const double refined = 0.5 * (a + b);
  return obj(refined) > best_val ? refined : best;
}

double estimate_noise_variance(const MatrixXcd& y, const StructuredTransfer& transfer) {
  const int n = transfer.layout().useful_samples();
  const int d_len = transfer.layout().num_taps;
  if (n <= d_len) throw std::invalid_argument("estimate_noise_variance: requires N_tr K > D");
  if (y.rows() != n) throw std::invalid_argument("estimate_noise_variance: size mismatch");
  const MatrixXcd a = transfer.dense();
  Eigen::ColPivHouseholderQR<MatrixXcd> qr(a);
  if (qr.rank() < d_len) throw std::runtime_error("estimate_noise_variance: rank-deficient transfer");
  const MatrixXcd residual = y - a * qr.solve(y);
  return residual.squaredNorm() / (static_cast<double>(y.cols()) * (n - d_len));
}

MatrixXcd crlb_beamformed(const MatrixXcd& gram, double noise_variance, int num_subcarriers,
                          int num_chains) {
  const int d_len = static_cast<int>(gram.rows());
  if (gram.cols() != d_len || d_len > num_subcarriers || num_chains < 1)
    throw std::invalid_argument("crlb_beamformed: bad dimensions");
  Eigen::LLT<MatrixXcd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("crlb_beamformed: singular B");
  const MatrixXcd f1 = dft_partition(num_subcarriers, d_len);
  const MatrixXcd block = (noise_variance / num_subcarriers) * (f1 * llt.solve(f1.adjoint()));
  const int k_len = num_subcarriers;
  MatrixXcd out = MatrixXcd::Zero(num_chains * k_len, num_chains * k_len);
  for (int i = 0; i < num_chains; ++i) out.block(i * k_len, i * k_len, k_len, k_len) = block;
  return out;
}

Synchronizer::Synchronizer(FrameLayout layout, SyncConfig config,
                           std::optional<PhaseNoiseModel> pn_model, double sampling_interval)
    : layout_(layout), config_(std::move(config)) {
  layout_.validate();
  if (config_.alternations < 1) throw std::invalid_argument("Synchronizer: alternations must be >= 1");
  if (config_.pn_correction && pn_model)
    prior_ = std::make_shared<const PnPrior>(*pn_model, layout_, sampling_interval,
                                             config_.pn_solver.dense_limit);
}

SyncEstimate Synchronizer::run(const MatrixXcd& rx, const MatrixXcd& pilots,
                               const VectorXcd& preamble, std::optional<double> noise_variance) const {
  SyncEstimate est;
  est.n0_hat = config_.known_n0 ? *config_.known_n0
                                : detect_timing(rx, preamble, config_.max_lag, config_.timing);
  const MatrixXcd y = extract_useful(rx, est.n0_hat, layout_);
  const int n = layout_.useful_samples();

  VectorXd pn = VectorXd::Zero(n);
  double cfo = estimate_cfo(y, layout_, est.n0_hat, pn, pilots, config_.cfo);
  if (prior_) {
    if (!noise_variance) noise_variance = config_.genie_noise_variance;
    double sigma2 = noise_variance
                        ? *noise_variance
                        : estimate_noise_variance(y, StructuredTransfer(layout_, est.n0_hat, cfo, pn, pilots));
    const double floor = db_to_linear(-config_.pn_snr_cap_db) * y.cwiseAbs2().mean();
    sigma2 = std::max(sigma2, floor);
    for (int a = 0; a < config_.alternations; ++a) {
      if (a > 0) cfo = estimate_cfo(y, layout_, est.n0_hat, pn, pilots, config_.cfo);
      pn = estimate_pn(y, StructuredTransfer(layout_, est.n0_hat, cfo, pn, pilots), *prior_, sigma2,
                       config_.pn_solver);
      ++est.iterations;
    }
  } else {
    est.iterations = 1;
  }

  const StructuredTransfer transfer(layout_, est.n0_hat, cfo, pn, pilots);
  est.cfo_hat = cfo;
  est.pn_hat = pn;
  est.g_taps = estimate_g(y, transfer);
  est.g_freq = taps_to_freq(est.g_taps, layout_.num_subcarriers);
  est.noise_variance_hat = estimate_noise_variance(y, transfer);
  return est;
}

SyncEstimate joint_sync(const ReceivedFrame& frame, const TrainingPlan& plan, int m, int num_taps,
                        const SyncConfig& config, std::optional<PhaseNoiseModel> pn_model,
                        double sampling_interval) {
  if (m < 0 || m >= plan.num_frames()) throw std::out_of_range("joint_sync: frame index");
  const Synchronizer sync(FrameLayout::from(plan.config, num_taps), config, pn_model, sampling_interval);
  return sync.run(frame.samples, plan.frames[m].pilots, plan.scaled_preamble());
}

}  // namespace mmsync
