// mmsync command-line driver.
//
//   mmsync sweep        --preset desk --config c.txt --out metrics.csv [--estimates est.csv]
//   mmsync sync-only    ... same flags, skips compressive estimation
//   mmsync channel-gen  --trial 3 --domain frequency --out h.bin
//   mmsync golden-check --dir fixtures [--write]

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmsync/experiments.hpp"

using namespace mmsync;
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string preset = "desk";
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  long long seed = -1;
  int threads = -1;
};

void add_common(CLI::App* app, CommonOptions& o, bool out_required) {
  app->add_option("--preset", o.preset, "Scale preset")->check(CLI::IsMember({"desk", "paper"}));
  app->add_option("-c,--config", o.config_path, "Key-value config file")->check(CLI::ExistingFile);
  auto* out = app->add_option("-o,--out", o.out, "Output path");
  if (out_required) out->required();
  app->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

// Preset, then config file, then --set, then dedicated flags.
SweepConfig resolve(const CommonOptions& o) {
  SweepConfig c = SweepConfig::preset(o.preset);
  if (!o.config_path.empty()) c.apply(KeyValueConfig::from_file(o.config_path));
  KeyValueConfig kv;
  for (const std::string& s : o.overrides) kv.set_assignment(s);
  c.apply(kv);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (o.threads >= 0) c.threads = o.threads;
  c.validate();
  return c;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(17);
  return os;
}

int run_sweep_command(const CommonOptions& o, const std::string& estimates_path, Pipeline pipeline) {
  const SweepConfig c = resolve(o);
  std::ofstream metrics = open_out(o.out);
  write_metric_header(metrics);
  std::ofstream estimates;
  EstimateSink est_sink;
  if (!estimates_path.empty()) {
    estimates = open_out(estimates_path);
    write_estimate_header(estimates);
    est_sink = [&](const EstimateRow& r) { write_estimate_row(estimates, r); };
  }
  run_sweep(c, pipeline,
            [&](const MetricRow& r) {
              write_metric_row(metrics, r);
              metrics.flush();
              std::fprintf(stderr, "L_r=%d G=%g dBc SNR=%g dB  p_detect=%.3f nmse_g=%.2f dB", r.point.rx_chains,
                           r.point.g_theta_dbc, r.point.snr_db, r.p_detect, r.nmse_g_db);
              if (pipeline == Pipeline::full)
                std::fprintf(stderr, " nmse_H=%.2f dB se=%.3f", r.nmse_h_db, r.se);
              std::fprintf(stderr, "%s\n", r.failures ? " (trial failures)" : "");
            },
            est_sink);
  return 0;
}

int channel_gen(const CommonOptions& o, int trial, const std::string& domain) {
  const SweepConfig c = resolve(o);
  const ChannelRealization chan = draw_trial_channel(c, trial);
  ChannelFile f;
  f.sampling_interval = chan.sampling_interval;
  if (domain == "delay") {
    f.domain = ChannelDomain::delay;
    f.matrices = chan.taps;
  } else {
    f.domain = ChannelDomain::frequency;
    f.matrices = frequency_response(chan, c.num_subcarriers);
  }
  write_channel(o.out, f);
  std::fprintf(stderr, "wrote %zu %s matrices of %dx%d (%d rays) to %s\n", f.matrices.size(), domain.c_str(),
               chan.num_rx(), chan.num_tx(), chan.params.total_rays(), o.out.c_str());
  return 0;
}

// Golden fixtures: plan.txt, frame_<m>.mmrx and expected.csv in one directory.
// Frames come from the first grid point of the resolved config.
constexpr const char* kGoldenHeader = "# mmsync golden v1";

struct Fixture {
  int frame;
  SyncEstimate est;
};

Synchronizer golden_synchronizer(const SweepConfig& c, const TrainingPlan& plan) {
  const ImpairmentConfig ic = c.impairments(c.g_theta_dbc.at(0));
  std::optional<PhaseNoiseModel> pn;
  if (c.pn_enabled) pn = ic.phase_noise;
  return Synchronizer(FrameLayout::from(plan.config, c.num_taps), c.sync(), pn, c.sampling_interval());
}

void write_expected(std::ostream& os, const std::vector<Fixture>& fx) {
  os.precision(17);
  os << kGoldenHeader << "\nframe,field,row,col,re,im\n";
  for (const Fixture& f : fx) {
    os << f.frame << ",n0,0,0," << f.est.n0_hat << ",0\n";
    os << f.frame << ",cfo,0,0," << f.est.cfo_hat << ",0\n";
    os << f.frame << ",noise_variance,0,0," << f.est.noise_variance_hat << ",0\n";
    for (Eigen::Index k = 0; k < f.est.g_freq.rows(); ++k)
      for (Eigen::Index i = 0; i < f.est.g_freq.cols(); ++i)
        os << f.frame << ",g," << k << ',' << i << ',' << f.est.g_freq(k, i).real() << ','
           << f.est.g_freq(k, i).imag() << '\n';
  }
}

int golden_write(const SweepConfig& c, const fs::path& dir, int frames) {
  fs::create_directories(dir);
  const GridPoint gp = grid_points(c).at(0);
  const TrainingPlan plan = make_training_plan(c.training(gp.rx_chains), frames, derive_seed(c.seed, Stream::plan));
  {
    std::ofstream os(dir / "plan.txt");
    write_training_plan(os, plan);
  }
  const ChannelRealization chan = draw_trial_channel(c, 0);
  const ImpairmentModel imp_model(c.impairments(gp.g_theta_dbc));
  const Synchronizer sync = golden_synchronizer(c, plan);
  std::vector<Fixture> fx;
  for (int m = 0; m < frames; ++m) {
    const FramePlan& f = plan.frames[m];
    const auto bf = beamformed_taps(chan.taps, f.precoder.analog, f.precoder.modulation, f.combiner.analog,
                                    whitening_from_combiner(f.combiner.analog), c.num_subcarriers);
    const double sigma2 = noise_variance_for_snr(bf.taps, gp.snr_db, 1.0 / c.num_subcarriers);
    Rng noise(derive_seed(c.seed, Stream::noise, 0, static_cast<std::uint64_t>(m)));
    ReceivedFrame rx = simulate_rx(assemble_frame(plan, m), bf.taps,
                                   imp_model.draw(derive_seed(c.seed, Stream::impairments, 0, m)), sigma2, noise);
    rx.snr_db = gp.snr_db;
    write_received_frame((dir / ("frame_" + std::to_string(m) + ".mmrx")).string(), rx);
    fx.push_back({m, sync.run(rx.samples, f.pilots, plan.scaled_preamble())});
    std::fprintf(stderr, "frame %d: n0 %d -> %d, cfo %.3e -> %.3e\n", m, rx.truth.n0, fx.back().est.n0_hat,
                 rx.truth.cfo, fx.back().est.cfo_hat);
  }
  std::ofstream os(dir / "expected.csv");
  write_expected(os, fx);
  std::fprintf(stderr, "wrote %d golden frames to %s\n", frames, dir.c_str());
  return 0;
}

int golden_verify(const SweepConfig& c, const fs::path& dir, double tol) {
  std::ifstream plan_in(dir / "plan.txt");
  if (!plan_in) throw std::runtime_error("missing " + (dir / "plan.txt").string());
  const TrainingPlan plan = read_training_plan(plan_in);
  const Synchronizer sync = golden_synchronizer(c, plan);

  std::ifstream exp(dir / "expected.csv");
  std::string line;
  if (!std::getline(exp, line) || line != kGoldenHeader)
    throw std::runtime_error("expected.csv: missing or unsupported version header");
  std::getline(exp, line);

  std::vector<SyncEstimate> fresh(plan.num_frames());
  std::vector<bool> done(plan.num_frames(), false);
  int mismatches = 0, checked = 0;
  while (std::getline(exp, line)) {
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> f;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw std::runtime_error("expected.csv: malformed line: " + line);
    const int m = std::stoi(f[0]);
    if (m < 0 || m >= plan.num_frames()) throw std::runtime_error("expected.csv: frame out of range");
    if (!done[m]) {
      const ReceivedFrame rx = read_received_frame((dir / ("frame_" + std::to_string(m) + ".mmrx")).string());
      fresh[m] = sync.run(rx.samples, plan.frames[m].pilots, plan.scaled_preamble());
      done[m] = true;
    }
    const SyncEstimate& e = fresh[m];
    const cplx want{std::stod(f[4]), std::stod(f[5])};
    cplx got;
    double scale = 1.0;
    if (f[1] == "n0") {
      got = e.n0_hat;
    } else if (f[1] == "cfo") {
      got = e.cfo_hat;
      scale = c.max_cfo_hz / c.sampling_rate;
    } else if (f[1] == "noise_variance") {
      got = e.noise_variance_hat;
      scale = std::abs(want);
    } else if (f[1] == "g") {
      got = e.g_freq(std::stoi(f[2]), std::stoi(f[3]));
      scale = e.g_freq.cwiseAbs().maxCoeff();
    } else {
      throw std::runtime_error("expected.csv: unknown field " + f[1]);
    }
    ++checked;
    const double bound = f[1] == "n0" ? 0.0 : tol * scale;
    if (std::abs(got - want) > bound) {
      if (++mismatches <= 10)
        std::fprintf(stderr, "mismatch frame %d %s[%s,%s]: got %.17g%+.17gj want %.17g%+.17gj\n", m, f[1].c_str(),
                     f[2].c_str(), f[3].c_str(), got.real(), got.imag(), want.real(), want.imag());
    }
  }
  std::printf("golden-check: %d values over %d frames, %d mismatches (tol %.1e)\n", checked, plan.num_frames(),
              mismatches, tol);
  return mismatches == 0 && checked > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint timing, CFO, phase-noise and compressive channel estimation for hybrid MIMO-OFDM"};
  app.require_subcommand(1);

  CommonOptions sweep_opts, sync_opts, chan_opts, golden_opts;
  std::string sweep_est, sync_est, domain = "delay";
  int trial = 0, golden_frames = 4;
  bool golden_write_mode = false;
  double golden_tol = 1e-8;
  std::string golden_dir;

  auto* sweep = app.add_subcommand("sweep", "Full pipeline sweep, writes the metric CSV");
  add_common(sweep, sweep_opts, true);
  sweep->add_option("--estimates", sweep_est, "Per-frame estimate CSV");

  auto* sync_only = app.add_subcommand("sync-only", "Synchronization-only sweep");
  add_common(sync_only, sync_opts, true);
  sync_only->add_option("--estimates", sync_est, "Per-frame estimate CSV");

  auto* chan = app.add_subcommand("channel-gen", "Write one channel realization");
  add_common(chan, chan_opts, true);
  chan->add_option("--trial", trial, "Trial index")->check(CLI::NonNegativeNumber);
  chan->add_option("--domain", domain, "delay taps or per-subcarrier response")
      ->check(CLI::IsMember({"delay", "frequency"}));

  auto* golden = app.add_subcommand("golden-check", "Verify or regenerate golden-frame fixtures");
  add_common(golden, golden_opts, false);
  golden->add_option("--dir", golden_dir, "Fixture directory")->required();
  golden->add_flag("--write", golden_write_mode, "Regenerate the fixtures instead of checking");
  golden->add_option("--frames", golden_frames, "Frames to write")->check(CLI::PositiveNumber);
  golden->add_option("--tol", golden_tol, "Relative tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) return run_sweep_command(sweep_opts, sweep_est, Pipeline::full);
    if (*sync_only) return run_sweep_command(sync_opts, sync_est, Pipeline::sync_only);
    if (*chan) return channel_gen(chan_opts, trial, domain);
    if (*golden) {
      const SweepConfig c = resolve(golden_opts);
      return golden_write_mode ? golden_write(c, golden_dir, golden_frames) : golden_verify(c, golden_dir, golden_tol);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
