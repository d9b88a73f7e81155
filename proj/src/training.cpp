#include "mmsync/training.hpp"

#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "mmsync/rng.hpp"

namespace mmsync {

ZCSequence zadoff_chu(int length, int root) {
  if (length < 1) throw std::invalid_argument("zadoff_chu: length must be >= 1");
  if (std::gcd(length, root) != 1) throw std::invalid_argument("zadoff_chu: root not coprime with length");
  ZCSequence z{length, root, VectorXcd(length)};
  const long n_len = length;
  for (long n = 0; n < n_len; ++n) {
    // Reduce the exponent modulo 2N before scaling to keep the phase exact.
    const long e = (length % 2 == 1) ? (root * n * (n + 1)) % (2 * n_len) : (root * n * n) % (2 * n_len);
    z.values[n] = std::polar(1.0, -kPi * static_cast<double>(e) / n_len);
  }
  return z;
}

GolayPreamble golay_preamble(double boost_db) {
  // Recursive construction of the 802.11ad length-64 pair.
  const int delays[6] = {2, 1, 4, 8, 16, 32};
  const int weights[6] = {1, 1, -1, -1, 1, -1};
  std::vector<int> a(64, 0), b(64, 0);
  a[0] = 1;
  b[0] = 1;
  for (int k = 0; k < 6; ++k) {
    std::vector<int> na(64, 0), nb(64, 0);
    for (int n = 0; n < 64; ++n) {
      const int shifted = n - delays[k] >= 0 ? b[n - delays[k]] : 0;
      na[n] = weights[k] * a[n] + shifted;
      nb[n] = weights[k] * a[n] - shifted;
    }
    a.swap(na);
    b.swap(nb);
  }
  GolayPreamble g;
  g.values.resize(64);
  g.complementary.resize(64);
  for (int n = 0; n < 64; ++n) {
    g.values[n] = a[n];
    g.complementary[n] = b[n];
  }
  g.power_boost = db_to_linear(boost_db);
  return g;
}

MatrixXd permutation_matrix(int size, int shift) {
  if (size < 1) throw std::invalid_argument("permutation_matrix: size must be >= 1");
  const int s = ((shift % size) + size) % size;
  MatrixXd p = MatrixXd::Zero(size, size);
  for (int c = 0; c < size; ++c) p((c + s) % size, c) = 1.0;
  return p;
}

void TrainingConfig::validate() const {
  if (num_tx < 1 || num_rx < 1 || tx_chains < 1 || rx_chains < 1)
    throw std::invalid_argument("TrainingConfig: array sizes must be positive");
  if (num_tx % tx_chains != 0) throw std::invalid_argument("TrainingConfig: N_t not divisible by L_t");
  if (num_rx % rx_chains != 0) throw std::invalid_argument("TrainingConfig: N_r not divisible by L_r");
  if (num_subcarriers < 1 || cyclic_prefix < 0 || num_symbols < 0)
    throw std::invalid_argument("TrainingConfig: bad OFDM dimensions");
  if (std::gcd(tx_subarray_size(), zc_root) != 1)
    throw std::invalid_argument("TrainingConfig: ZC root not coprime with K_t");
}

int active_subarray(int m, const TrainingConfig& config) { return m % config.tx_chains; }

int zc_shift(int m, const TrainingConfig& config) {
  const int kt = config.tx_subarray_size();
  if (config.shift_schedule == ShiftSchedule::locked) return m % config.tx_chains % kt;
  return (m / config.tx_chains) % kt;
}

namespace {

cplx qpsk(int index) { return std::polar(1.0, kPi / 4.0 + kPi / 2.0 * (index & 3)); }

}  // namespace

PrecoderDesign precoder_from_indices(const TrainingConfig& config, int active, int shift,
                                     const std::vector<int>& q_index) {
  config.validate();
  const int lt = config.tx_chains;
  const int kt = config.tx_subarray_size();
  if (active < 0 || active >= lt) throw std::out_of_range("precoder: active subarray out of range");
  if (static_cast<int>(q_index.size()) != lt) throw std::invalid_argument("precoder: q length != L_t");
  PrecoderDesign d;
  d.active_subarray = active;
  d.zc_shift = ((shift % kt) + kt) % kt;
  d.q_index = q_index;
  d.analog = MatrixXcd::Zero(config.num_tx, lt);
  const VectorXcd z = zadoff_chu(kt, config.zc_root).values;
  const VectorXcd f = permutation_matrix(kt, d.zc_shift).cast<cplx>() * z;
  d.analog.block(active * kt, active, kt, 1) = f;
  d.modulation.resize(lt);
  for (int i = 0; i < lt; ++i) d.modulation[i] = qpsk(q_index[i]) / std::sqrt(static_cast<double>(lt));
  return d;
}

PrecoderDesign design_precoder(int m, const TrainingConfig& config, std::uint64_t seed) {
  if (m < 0) throw std::invalid_argument("design_precoder: negative frame index");
  Rng rng(derive_seed(seed, Stream::precoder, static_cast<std::uint64_t>(m)));
  std::vector<int> q(config.tx_chains);
  for (int& v : q) v = rng.uniform_int(0, 3);
  return precoder_from_indices(config, active_subarray(m, config), zc_shift(m, config), q);
}

CombinerDesign combiner_from_indices(const TrainingConfig& config, const std::vector<int>& selected) {
  config.validate();
  const int lr = config.rx_chains;
  const int kr = config.rx_subarray_size();
  if (static_cast<int>(selected.size()) != lr) throw std::invalid_argument("combiner: p* length != L_r");
  CombinerDesign d;
  d.selected = selected;
  d.analog = MatrixXcd::Zero(config.num_rx, lr);
  for (int i = 0; i < lr; ++i) {
    if (selected[i] < 0 || selected[i] >= kr) throw std::out_of_range("combiner: antenna index out of range");
    d.analog(i * kr + selected[i], i) = 1.0;
  }
  return d;
}

CombinerDesign design_combiner(int m, const TrainingConfig& config, std::uint64_t seed) {
  if (m < 0) throw std::invalid_argument("design_combiner: negative frame index");
  Rng rng(derive_seed(seed, Stream::combiner, static_cast<std::uint64_t>(m)));
  std::vector<int> p(config.rx_chains);
  for (int& v : p) v = rng.uniform_int(0, config.rx_subarray_size() - 1);
  return combiner_from_indices(config, p);
}

MatrixXcd frame_pilots(int m, const TrainingConfig& config, std::uint64_t pilot_seed) {
  Rng rng(derive_seed(pilot_seed, Stream::pilots, static_cast<std::uint64_t>(m)));
  MatrixXcd s(config.num_symbols, config.num_subcarriers);
  for (int t = 0; t < config.num_symbols; ++t)
    for (int k = 0; k < config.num_subcarriers; ++k) s(t, k) = qpsk(rng.uniform_int(0, 3));
  return s;
}

VectorXcd ofdm_modulate(const VectorXcd& pilots, int cyclic_prefix) {
  const int k_len = static_cast<int>(pilots.size());
  if (k_len < 1) throw std::invalid_argument("ofdm_modulate: no subcarriers");
  if (cyclic_prefix < 0 || cyclic_prefix > k_len)
    throw std::invalid_argument("ofdm_modulate: cyclic prefix must lie in [0, K]");
  // Eigen's inverse FFT already applies the 1/K factor.
  Eigen::FFT<double> fft;
  std::vector<cplx> in(pilots.data(), pilots.data() + k_len), time;
  fft.inv(time, in);
  VectorXcd out(k_len + cyclic_prefix);
  for (int n = 0; n < cyclic_prefix; ++n) out[n] = time[k_len - cyclic_prefix + n];
  for (int n = 0; n < k_len; ++n) out[cyclic_prefix + n] = time[n];
  return out;
}

double TrainingPlan::preamble_amplitude() const {
  // Mean OFDM sample power is E_s / K with unit-modulus pilots.
  return std::sqrt(preamble.power_boost / config.num_subcarriers);
}

TrainingPlan make_training_plan(const TrainingConfig& config, int num_frames, std::uint64_t seed) {
  config.validate();
  if (num_frames < 0) throw std::invalid_argument("make_training_plan: negative frame count");
  TrainingPlan plan;
  plan.config = config;
  plan.preamble = golay_preamble(config.preamble_boost_db);
  plan.seed = seed;
  plan.frames.reserve(num_frames);
  for (int m = 0; m < num_frames; ++m)
    plan.frames.push_back({design_precoder(m, config, seed), design_combiner(m, config, seed),
                           frame_pilots(m, config, seed)});
  return plan;
}

VectorXcd assemble_frame(const TrainingPlan& plan, int m) {
  if (m < 0 || m >= plan.num_frames()) throw std::out_of_range("assemble_frame: frame index");
  const TrainingConfig& c = plan.config;
  const int pre = static_cast<int>(plan.preamble.values.size());
  VectorXcd out(pre + c.num_symbols * c.symbol_length());
  out.head(pre) = plan.scaled_preamble();
  const MatrixXcd& s = plan.frames[m].pilots;
  for (int t = 0; t < c.num_symbols; ++t)
    out.segment(pre + t * c.symbol_length(), c.symbol_length()) =
        ofdm_modulate(s.row(t).transpose(), c.cyclic_prefix);
  return out;
}

void write_training_plan(std::ostream& os, const TrainingPlan& plan) {
  const TrainingConfig& c = plan.config;
  os << "# mmsync training plan v1\n" << std::setprecision(17);
  os << "num_tx " << c.num_tx << "\nnum_rx " << c.num_rx << "\ntx_chains " << c.tx_chains
     << "\nrx_chains " << c.rx_chains << "\nsubcarriers " << c.num_subcarriers
     << "\ncyclic_prefix " << c.cyclic_prefix << "\nsymbols " << c.num_symbols << "\nzc_root "
     << c.zc_root << "\nboost_db " << c.preamble_boost_db << "\nschedule "
     << (c.shift_schedule == ShiftSchedule::locked ? "locked" : "decoupled") << "\npilot_seed "
     << plan.seed << "\nframes " << plan.num_frames() << '\n';
  for (int m = 0; m < plan.num_frames(); ++m) {
    const FramePlan& f = plan.frames[m];
    os << "frame " << m << " j " << f.precoder.active_subarray << " shift " << f.precoder.zc_shift
       << " p";
    for (int p : f.combiner.selected) os << ' ' << p;
    os << " q";
    for (int q : f.precoder.q_index) os << ' ' << q;
    os << '\n';
  }
}

namespace {

void expect(std::istream& is, const std::string& key) {
  std::string tok;
  if (!(is >> tok) || tok != key) throw std::runtime_error("training plan: expected '" + key + "'");
}

template <typename T>
T read_value(std::istream& is, const std::string& key) {
  expect(is, key);
  T v{};
  if (!(is >> v)) throw std::runtime_error("training plan: bad value for '" + key + "'");
  return v;
}

}  // namespace

TrainingPlan read_training_plan(std::istream& is) {
  std::string header;
  std::getline(is, header);
  if (header != "# mmsync training plan v1") throw std::runtime_error("training plan: bad header");
  TrainingConfig c;
  c.num_tx = read_value<int>(is, "num_tx");
  c.num_rx = read_value<int>(is, "num_rx");
  c.tx_chains = read_value<int>(is, "tx_chains");
  c.rx_chains = read_value<int>(is, "rx_chains");
  c.num_subcarriers = read_value<int>(is, "subcarriers");
  c.cyclic_prefix = read_value<int>(is, "cyclic_prefix");
  c.num_symbols = read_value<int>(is, "symbols");
  c.zc_root = read_value<int>(is, "zc_root");
  c.preamble_boost_db = read_value<double>(is, "boost_db");
  const auto schedule = read_value<std::string>(is, "schedule");
  if (schedule == "locked")
    c.shift_schedule = ShiftSchedule::locked;
  else if (schedule == "decoupled")
    c.shift_schedule = ShiftSchedule::decoupled;
  else
    throw std::runtime_error("training plan: unknown schedule " + schedule);
  c.validate();

  TrainingPlan plan;
  plan.config = c;
  plan.preamble = golay_preamble(c.preamble_boost_db);
  plan.seed = read_value<std::uint64_t>(is, "pilot_seed");
  const int frames = read_value<int>(is, "frames");
  for (int m = 0; m < frames; ++m) {
    if (read_value<int>(is, "frame") != m) throw std::runtime_error("training plan: frames out of order");
    const int j = read_value<int>(is, "j");
    const int shift = read_value<int>(is, "shift");
    expect(is, "p");
    std::vector<int> p(c.rx_chains), q(c.tx_chains);
    for (int& v : p)
      if (!(is >> v)) throw std::runtime_error("training plan: bad p* entry");
    expect(is, "q");
    for (int& v : q)
      if (!(is >> v)) throw std::runtime_error("training plan: bad q entry");
    plan.frames.push_back({precoder_from_indices(c, j, shift, q), combiner_from_indices(c, p),
                           frame_pilots(m, c, plan.seed)});
  }
  return plan;
}

}  // namespace mmsync
