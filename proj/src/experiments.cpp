#include "mmsync/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "mmsync/link_sim.hpp"
#include "mmsync/rng.hpp"

namespace mmsync {

double nmse(const MatrixXcd& estimate, const MatrixXcd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("nmse: shape mismatch");
  const double den = truth.squaredNorm();
  if (!(den > 0.0)) throw std::invalid_argument("nmse: zero-norm truth");
  return (estimate - truth).squaredNorm() / den;
}

double nmse(const MatrixList& estimate, const MatrixList& truth) {
  if (estimate.size() != truth.size() || truth.empty())
    throw std::invalid_argument("nmse: list length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) acc += nmse(estimate[k], truth[k]);
  return acc / static_cast<double>(truth.size());
}

double to_db(double linear) {
  if (std::isnan(linear)) return linear;
  if (!(linear > 0.0)) return kNmseFloorDb;
  return std::max(10.0 * std::log10(linear), kNmseFloorDb);
}

double detection_probability(const std::vector<int>& estimates, const std::vector<int>& truth) {
  if (estimates.empty() || estimates.size() != truth.size())
    throw std::invalid_argument("detection_probability: need matching, non-empty lists");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += estimates[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double spectral_efficiency(const MatrixList& estimate, const MatrixList& truth, double snr_linear,
                           int streams) {
  if (estimate.size() != truth.size() || truth.empty())
    throw std::invalid_argument("spectral_efficiency: list length mismatch");
  const auto nr = truth[0].rows();
  const auto nt = truth[0].cols();
  if (streams < 1 || streams > std::min(nr, nt))
    throw std::invalid_argument("spectral_efficiency: N_s must lie in [1, min(N_t, N_r)]");
  double acc = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    Eigen::JacobiSVD<MatrixXcd> svd(estimate[k], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const MatrixXcd u = svd.matrixU().leftCols(streams);
    const MatrixXcd v = svd.matrixV().leftCols(streams);
    const MatrixXcd he = u.adjoint() * truth[k] * v;
    MatrixXcd m = MatrixXcd::Identity(streams, streams) + (snr_linear / streams) * he * he.adjoint();
    Eigen::LLT<MatrixXcd> llt(m);
    const MatrixXcd l = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < streams; ++i) logdet += 2.0 * std::log2(l(i, i).real());
    acc += logdet;
  }
  return acc / static_cast<double>(truth.size());
}

double overhead_factor(double training_time, double coherence_time) {
  if (!(coherence_time > 0.0) || training_time < 0.0 || training_time >= coherence_time)
    throw std::invalid_argument("overhead_factor: requires 0 <= T_train < T_coherence");
  return 1.0 - training_time / coherence_time;
}

SweepConfig SweepConfig::preset(const std::string& name) {
  SweepConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.num_tx = 128;
    c.num_rx = 64;
    c.tx_chains = 8;
    c.rx_chains = {4};
    c.num_subcarriers = 256;
    c.cyclic_prefix = 64;
    c.num_symbols = 8;
    c.num_frames = 32;
    c.num_taps = 16;
    c.pn_dense_limit = 1024;
    return c;
  }
  throw std::invalid_argument("unknown preset: " + name + " (expected desk or paper)");
}

namespace {

template <typename T>
std::vector<T> narrow_list(const std::vector<long>& v) {
  return std::vector<T>(v.begin(), v.end());
}

}  // namespace

void SweepConfig::apply(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values()) {
    if (key == "snr_db") snr_db = kv.get_doubles(key);
    else if (key == "g_theta_dbc") g_theta_dbc = kv.get_doubles(key);
    else if (key == "rx_chains") rx_chains = narrow_list<int>(kv.get_ints(key));
    else if (key == "trials") trials = static_cast<int>(kv.get_int(key));
    else if (key == "seed") seed = static_cast<std::uint64_t>(kv.get_int(key));
    else if (key == "num_tx") num_tx = static_cast<int>(kv.get_int(key));
    else if (key == "num_rx") num_rx = static_cast<int>(kv.get_int(key));
    else if (key == "tx_chains") tx_chains = static_cast<int>(kv.get_int(key));
    else if (key == "subcarriers") num_subcarriers = static_cast<int>(kv.get_int(key));
    else if (key == "cyclic_prefix") cyclic_prefix = static_cast<int>(kv.get_int(key));
    else if (key == "symbols") num_symbols = static_cast<int>(kv.get_int(key));
    else if (key == "frames") num_frames = static_cast<int>(kv.get_int(key));
    else if (key == "taps") num_taps = static_cast<int>(kv.get_int(key));
    else if (key == "streams") streams = static_cast<int>(kv.get_int(key));
    else if (key == "sampling_rate") sampling_rate = kv.get_double(key);
    else if (key == "max_cfo_hz") max_cfo_hz = kv.get_double(key);
    else if (key == "n0_max") n0_max = static_cast<int>(kv.get_int(key));
    else if (key == "f_z") f_z = kv.get_double(key);
    else if (key == "f_p") f_p = kv.get_double(key);
    else if (key == "pn_enabled") pn_enabled = kv.get_bool(key);
    else if (key == "cfo_enabled") cfo_enabled = kv.get_bool(key);
    else if (key == "channel") {
      if (value == "clustered") channel = ChannelKind::clustered;
      else if (value == "on_grid") channel = ChannelKind::on_grid;
      else throw std::invalid_argument("channel must be clustered or on_grid");
    } else if (key == "grid_paths") grid_paths = static_cast<int>(kv.get_int(key));
    else if (key == "clusters") clusters.num_clusters = static_cast<int>(kv.get_int(key));
    else if (key == "rays_per_cluster") clusters.rays_per_cluster = static_cast<int>(kv.get_int(key));
    else if (key == "angular_spread_deg") clusters.angular_spread_deg = kv.get_double(key);
    else if (key == "cluster_delay_mean") clusters.cluster_delay_mean = kv.get_double(key);
    else if (key == "ray_delay_mean") clusters.ray_delay_mean = kv.get_double(key);
    else if (key == "rician_factor_db") clusters.rician_factor_db = kv.get_double(key);
    else if (key == "line_of_sight") clusters.line_of_sight = kv.get_bool(key);
    else if (key == "pathloss") clusters.pathloss = kv.get_double(key);
    else if (key == "rolloff") rolloff = kv.get_double(key);
    else if (key == "pulse_span") pulse_span = static_cast<int>(kv.get_int(key));
    else if (key == "element_spacing") element_spacing = kv.get_double(key);
    else if (key == "tx_grid_factor") tx_grid_factor = static_cast<int>(kv.get_int(key));
    else if (key == "rx_grid_factor") rx_grid_factor = static_cast<int>(kv.get_int(key));
    else if (key == "zc_root") zc_root = static_cast<int>(kv.get_int(key));
    else if (key == "shift_schedule") {
      if (value == "locked") shift_schedule = ShiftSchedule::locked;
      else if (value == "decoupled") shift_schedule = ShiftSchedule::decoupled;
      else throw std::invalid_argument("shift_schedule must be locked or decoupled");
    } else if (key == "preamble_boost_db") preamble_boost_db = kv.get_double(key);
    else if (key == "timing_metric") {
      if (value == "matched_filter") timing = TimingMetric::matched_filter;
      else if (value == "per_sample") timing = TimingMetric::per_sample;
      else throw std::invalid_argument("timing_metric must be matched_filter or per_sample");
    } else if (key == "alternations") alternations = static_cast<int>(kv.get_int(key));
    else if (key == "pn_correction") pn_correction = kv.get_bool(key);
    else if (key == "cfo_grid_points") cfo_grid_points = static_cast<int>(kv.get_int(key));
    else if (key == "cfo_tolerance") cfo_tolerance = kv.get_double(key);
    else if (key == "cfo_refine") cfo_refine = kv.get_bool(key);
    else if (key == "genie_noise_variance") genie_noise_variance = kv.get_bool(key);
    else if (key == "pn_dense_limit") pn_dense_limit = static_cast<int>(kv.get_int(key));
    else if (key == "swomp_max_iterations") swomp_max_iterations = static_cast<int>(kv.get_int(key));
    else if (key == "swomp_stop_factor") swomp_stop_factor = kv.get_double(key);
    else if (key == "coherence_time") coherence_time = kv.get_double(key);
    else if (key == "overhead") {
      if (value == "computed") overhead_mode = OverheadMode::computed;
      else if (value == "paper") overhead_mode = OverheadMode::paper;
      else throw std::invalid_argument("overhead must be computed or paper");
    } else if (key == "threads") threads = static_cast<int>(kv.get_int(key));
    else throw std::invalid_argument("unknown config key: " + key);
  }
}

void SweepConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("SweepConfig: trials must be >= 1");
  if (snr_db.empty() || g_theta_dbc.empty() || rx_chains.empty())
    throw std::invalid_argument("SweepConfig: sweep lists must be non-empty");
  if (num_frames < 1) throw std::invalid_argument("SweepConfig: frames must be >= 1");
  for (int lr : rx_chains) training(lr).validate();
  FrameLayout::from(training(rx_chains[0]), num_taps);
  impairments(g_theta_dbc[0]).validate();
  clusters.validate();
  if (streams < 1 || streams > std::min(num_tx, num_rx))
    throw std::invalid_argument("SweepConfig: streams must lie in [1, min(N_t, N_r)]");
  if (tx_grid_factor < 1 || rx_grid_factor < 1)
    throw std::invalid_argument("SweepConfig: grid factors must be >= 1");
  if (channel == ChannelKind::on_grid &&
      (grid_paths < 1 || grid_paths > tx_grid_factor * num_tx * rx_grid_factor * num_rx))
    throw std::invalid_argument("SweepConfig: grid_paths out of range");
  if (threads < 0) throw std::invalid_argument("SweepConfig: threads must be >= 0");
  overhead();
}

double SweepConfig::training_time() const {
  return sampling_interval() * (cyclic_prefix + num_subcarriers) * num_symbols * num_frames;
}

double SweepConfig::overhead() const {
  if (overhead_mode == OverheadMode::paper) return 0.97;
  return overhead_factor(training_time(), coherence_time);
}

TrainingConfig SweepConfig::training(int lr) const {
  TrainingConfig t;
  t.num_tx = num_tx;
  t.num_rx = num_rx;
  t.tx_chains = tx_chains;
  t.rx_chains = lr;
  t.num_subcarriers = num_subcarriers;
  t.cyclic_prefix = cyclic_prefix;
  t.num_symbols = num_symbols;
  t.zc_root = zc_root;
  t.preamble_boost_db = preamble_boost_db;
  t.shift_schedule = shift_schedule;
  return t;
}

ImpairmentConfig SweepConfig::impairments(double g_theta) const {
  ImpairmentConfig c;
  c.phase_noise = {g_theta, f_z, f_p};
  c.phase_noise_enabled = pn_enabled;
  c.sampling_rate = sampling_rate;
  c.max_cfo_hz = cfo_enabled ? max_cfo_hz : 0.0;
  c.n0_min = 0;
  c.n0_max = resolved_n0_max();
  const int frame_len = 64 + num_symbols * (num_subcarriers + cyclic_prefix);
  c.num_samples = received_length(frame_len, num_taps, resolved_n0_max());
  return c;
}

SyncConfig SweepConfig::sync() const {
  SyncConfig s;
  s.max_lag = resolved_n0_max();
  s.timing = timing;
  s.cfo.max_cfo = max_cfo_hz / sampling_rate;
  s.cfo.grid_points = cfo_grid_points;
  s.cfo.tolerance = cfo_tolerance;
  s.cfo.refine = cfo_refine;
  s.alternations = alternations;
  s.pn_correction = pn_correction && pn_enabled;
  s.pn_solver.dense_limit = pn_dense_limit;
  return s;
}

std::vector<GridPoint> grid_points(const SweepConfig& config) {
  std::vector<GridPoint> out;
  for (int lr : config.rx_chains)
    for (double g : config.g_theta_dbc)
      for (double s : config.snr_db) out.push_back({s, g, lr});
  return out;
}

AngularDictionary SweepConfig::dictionary() const {
  return build_dictionaries(tx_array(), rx_array(), tx_grid_factor * num_tx, rx_grid_factor * num_rx);
}

ChannelRealization draw_trial_channel(const SweepConfig& config, int trial) {
  Rng rng(derive_seed(config.seed, Stream::channel, static_cast<std::uint64_t>(trial)));
  ClusterParams params;
  if (config.channel == ChannelKind::clustered) {
    params = draw_clusters(config.clusters, config.num_taps, config.sampling_interval(), rng);
  } else {
    const AngularDictionary dict = config.dictionary();
    std::vector<GridPath> paths;
    std::set<std::pair<int, int>> used;
    while (static_cast<int>(paths.size()) < config.grid_paths) {
      GridPath p;
      p.rx_index = rng.uniform_int(0, dict.receive.size() - 1);
      p.tx_index = rng.uniform_int(0, dict.transmit.size() - 1);
      if (!used.insert({p.rx_index, p.tx_index}).second) continue;
      p.gain = rng.complex_normal(1.0);
      p.delay = paths.empty() ? 0.0 : rng.uniform_int(0, std::max(0, config.num_taps - 2)) * config.sampling_interval();
      paths.push_back(p);
    }
    params = on_grid_params(paths, dict);
  }
  PulseShape pulse{config.rolloff, config.pulse_span, config.sampling_interval()};
  return generate_channel(params, config.tx_array(), config.rx_array(), pulse, config.num_taps);
}

namespace {

struct PointContext {
  GridPoint point;
  TrainingConfig training;
  FrameLayout layout;
  std::shared_ptr<const ImpairmentModel> impairments;
  std::shared_ptr<const Synchronizer> sync;
  std::shared_ptr<const AngularDictionary> dict;
};

struct TrialOutcome {
  bool ok = false;
  int frames = 0;
  int detected = 0;
  double nmse_g = 0.0;  // sum over frames, linear
  double cfo_err2 = 0.0;
  double cfo_pow = 0.0;
  double nmse_h = 0.0;
  double se = 0.0;
  std::vector<EstimateRow> rows;
};

TrialOutcome run_trial(const SweepConfig& c, const PointContext& ctx, Pipeline pipeline, int trial,
                       bool keep_rows) {
  TrialOutcome out;
  const int k_len = c.num_subcarriers;
  const int lr = ctx.point.rx_chains;
  const auto tr = static_cast<std::uint64_t>(trial);

  const ChannelRealization chan = draw_trial_channel(c, trial);
  const TrainingPlan plan = make_training_plan(ctx.training, c.num_frames, derive_seed(c.seed, Stream::plan, tr));

  std::vector<BeamformedChannel> bf;
  double gain = 0.0;
  for (const FramePlan& f : plan.frames) {
    const WhiteningFilter w = whitening_from_combiner(f.combiner.analog);
    bf.push_back(beamformed_taps(chan.taps, f.precoder.analog, f.precoder.modulation, f.combiner.analog, w, k_len));
    gain += bf.back().taps.squaredNorm() / lr;
  }
  gain /= c.num_frames;
  // Per-sample SNR: the mean transmitted OFDM sample energy is 1/K.
  const double sigma2 = gain * (1.0 / k_len) / db_to_linear(ctx.point.snr_db);

  std::vector<MatrixXcd> estimates;
  std::vector<double> est_var;
  for (int m = 0; m < c.num_frames; ++m) {
    const auto mm = static_cast<std::uint64_t>(m);
    const VectorXcd tx = assemble_frame(plan, m);
    const ImpairmentRealization imp = ctx.impairments->draw(derive_seed(c.seed, Stream::impairments, tr, mm));
    Rng noise(derive_seed(c.seed, Stream::noise, tr, mm));
    const ReceivedFrame rx = simulate_rx(tx, bf[m].taps, imp, sigma2, noise);
    const SyncEstimate est =
        ctx.sync->run(rx.samples, plan.frames[m].pilots, plan.scaled_preamble(),
                      c.genie_noise_variance ? std::optional<double>(sigma2) : std::nullopt);

    ++out.frames;
    out.detected += est.n0_hat == imp.n0;
    const double g_err = bf[m].freq.squaredNorm() > 0.0 ? nmse(est.g_freq, bf[m].freq)
                                                        : std::numeric_limits<double>::quiet_NaN();
    out.nmse_g += g_err;
    out.cfo_err2 += (est.cfo_hat - imp.cfo) * (est.cfo_hat - imp.cfo);
    out.cfo_pow += imp.cfo * imp.cfo;

    if (keep_rows) {
      EstimateRow row;
      row.trial = trial;
      row.frame = m;
      row.point = ctx.point;
      row.n0_true = imp.n0;
      row.n0_hat = est.n0_hat;
      row.cfo_true = imp.cfo;
      row.cfo_hat = est.cfo_hat;
      VectorXd pn_true(ctx.layout.useful_samples());
      int i = 0;
      for (long p : ctx.layout.useful_positions()) pn_true[i++] = imp.pn[imp.n0 + p];
      row.pn_nmse_db = pn_true.squaredNorm() > 0.0
                           ? to_db((est.pn_hat - pn_true).squaredNorm() / pn_true.squaredNorm())
                           : std::numeric_limits<double>::quiet_NaN();
      row.g_nmse_db = to_db(g_err);
      row.noise_variance_true = sigma2;
      row.noise_variance_hat = est.noise_variance_hat;
      out.rows.push_back(row);
    }

    if (pipeline == Pipeline::full) {
      estimates.push_back(est.g_freq);
      est_var.push_back(measurement_noise_variance(est.noise_variance_hat, c.num_taps, c.num_symbols));
    }
  }

  if (pipeline == Pipeline::full) {
    // One floor for all frames: a per-frame floor would reweight frames by
    // their own energy on noiseless input.
    double ref = 0.0;
    for (const MatrixXcd& g : estimates) ref += g.cwiseAbs2().mean() / c.num_frames;
    for (double& v : est_var) v = std::max({v, 1e-15 * ref, std::numeric_limits<double>::min()});
    const MeasurementModel model = build_measurement(plan.frames, estimates, est_var);
    const SparseChannelEstimate sparse =
        swomp(model, *ctx.dict, {c.swomp_max_iterations, c.swomp_stop_factor});
    const MatrixList truth = frequency_response(chan, k_len);
    out.nmse_h = nmse(sparse.channel, truth);
    // Rate is evaluated on the true channel normalized to N_r N_t mean gain.
    double energy = 0.0;
    for (const MatrixXcd& h : truth) energy += h.squaredNorm();
    const double kappa = std::sqrt(static_cast<double>(c.num_rx) * c.num_tx * k_len / energy);
    MatrixList scaled = truth;
    for (MatrixXcd& h : scaled) h *= kappa;
    out.se = spectral_efficiency(sparse.channel, scaled, db_to_linear(ctx.point.snr_db), c.streams);
  }
  out.ok = true;
  return out;
}

template <typename F>
void parallel_for(int count, int threads, F&& body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int i = next++; i < count; i = next++) body(i);
    });
  for (std::thread& t : pool) t.join();
}

double ci95(double p, int n) { return n > 0 ? 1.96 * std::sqrt(p * (1.0 - p) / n) : 0.0; }

}  // namespace

void run_sweep(const SweepConfig& config, Pipeline pipeline, const MetricSink& sink,
               const EstimateSink& estimate_sink) {
  config.validate();
  const int threads = config.threads > 0 ? config.threads
                                         : std::max(1u, std::thread::hardware_concurrency());
  const auto dict = std::make_shared<const AngularDictionary>(config.dictionary());
  const double overhead = config.overhead();

  for (const GridPoint& gp : grid_points(config)) {
    PointContext ctx;
    ctx.point = gp;
    ctx.training = config.training(gp.rx_chains);
    ctx.layout = FrameLayout::from(ctx.training, config.num_taps);
    const ImpairmentConfig ic = config.impairments(gp.g_theta_dbc);
    ctx.impairments = std::make_shared<const ImpairmentModel>(ic);
    std::optional<PhaseNoiseModel> pn;
    if (config.pn_enabled) pn = ic.phase_noise;
    ctx.sync = std::make_shared<const Synchronizer>(ctx.layout, config.sync(), pn, config.sampling_interval());
    ctx.dict = dict;

    std::vector<TrialOutcome> results(config.trials);
    parallel_for(config.trials, threads, [&](int t) {
      try {
        results[t] = run_trial(config, ctx, pipeline, t, static_cast<bool>(estimate_sink));
      } catch (const std::exception&) {
        results[t] = TrialOutcome{};
      }
    });

    MetricRow row;
    row.point = gp;
    row.trials = config.trials;
    int frames = 0, detected = 0, ok = 0;
    double g_sum = 0.0, cfo_err = 0.0, cfo_pow = 0.0, h_sum = 0.0, se_sum = 0.0, se_sq = 0.0;
    for (const TrialOutcome& r : results) {
      if (!r.ok) {
        ++row.failures;
        continue;
      }
      ++ok;
      frames += r.frames;
      detected += r.detected;
      g_sum += r.nmse_g;
      cfo_err += r.cfo_err2;
      cfo_pow += r.cfo_pow;
      h_sum += r.nmse_h;
      se_sum += r.se;
      se_sq += r.se * r.se;
      if (estimate_sink)
        for (const EstimateRow& e : r.rows) estimate_sink(e);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.p_detect = frames > 0 ? static_cast<double>(detected) / frames : nan;
    row.p_detect_ci = frames > 0 ? ci95(row.p_detect, frames) : nan;
    row.nmse_g_db = frames > 0 ? to_db(g_sum / frames) : nan;
    row.nmse_cfo_db = cfo_pow > 0.0 ? to_db(cfo_err / cfo_pow) : nan;
    if (pipeline == Pipeline::full && ok > 0) {
      row.nmse_h_db = to_db(h_sum / ok);
      row.se = se_sum / ok;
      const double var = ok > 1 ? std::max(0.0, (se_sq - ok * row.se * row.se) / (ok - 1)) : 0.0;
      row.se_ci = 1.96 * std::sqrt(var / ok);
      row.se_with_overhead = overhead * row.se;
    } else {
      row.nmse_h_db = row.se = row.se_ci = row.se_with_overhead = nan;
    }
    sink(row);
  }
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_metric_header(std::ostream& os) {
  os << "# mmsync metrics v1\n"
        "snr_db,g_theta_dbc,rx_chains,trials,failures,p_detect,p_detect_ci,nmse_g_db,nmse_cfo_db,"
        "nmse_h_db,se,se_ci,se_with_overhead\n";
}

void write_metric_row(std::ostream& os, const MetricRow& r) {
  os << fmt(r.point.snr_db) << ',' << fmt(r.point.g_theta_dbc) << ',' << r.point.rx_chains << ','
     << r.trials << ',' << r.failures << ',' << fmt(r.p_detect) << ',' << fmt(r.p_detect_ci) << ','
     << fmt(r.nmse_g_db) << ',' << fmt(r.nmse_cfo_db) << ',' << fmt(r.nmse_h_db) << ',' << fmt(r.se)
     << ',' << fmt(r.se_ci) << ',' << fmt(r.se_with_overhead) << '\n';
}

void write_estimate_header(std::ostream& os) {
  os << "# mmsync estimates v1\n"
        "trial,frame,snr_db,g_theta_dbc,rx_chains,n0_true,n0_hat,cfo_true,cfo_hat,pn_nmse_db,"
        "g_nmse_db,sigma2_true,sigma2_hat\n";
}

void write_estimate_row(std::ostream& os, const EstimateRow& r) {
  os << r.trial << ',' << r.frame << ',' << fmt(r.point.snr_db) << ',' << fmt(r.point.g_theta_dbc)
     << ',' << r.point.rx_chains << ',' << r.n0_true << ',' << r.n0_hat << ',' << fmt(r.cfo_true)
     << ',' << fmt(r.cfo_hat) << ',' << fmt(r.pn_nmse_db) << ',' << fmt(r.g_nmse_db) << ','
     << fmt(r.noise_variance_true) << ',' << fmt(r.noise_variance_hat) << '\n';
}

}  // namespace mmsync
