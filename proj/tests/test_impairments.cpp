#include <cmath>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "doctest.h"
#include "mmsync/impairments.hpp"

using namespace mmsync;

namespace {

const PhaseNoiseModel kPaper{-85.0, 100e6, 1e6};
const double kTs = 42e-6 / 81920.0;

}  // namespace

TEST_SUITE("impairments") {

TEST_CASE("phase-noise PSD") {
  const double g = std::pow(10.0, -8.5);
  CHECK(pn_psd(kPaper, 0.0) == doctest::Approx(3.162e-9).epsilon(1e-3));
  CHECK(pn_psd(kPaper, 0.0) == doctest::Approx(g).epsilon(1e-14));
  const double f = 10 * kPaper.f_z;
  CHECK(pn_psd(kPaper, f) == doctest::Approx(g * (1 + 100.0) / (1 + 1e6)).epsilon(1e-13));
  CHECK(pn_psd(kPaper, kPaper.f_p) == doctest::Approx(g * (1 + 1e-4) / 2).epsilon(1e-13));
  CHECK(pn_psd(kPaper, -3e6) == pn_psd(kPaper, 3e6));
}

TEST_CASE("phase-noise autocorrelation") {
  const double g = std::pow(10.0, -8.5);
  const double r0 = g * (1e-4 + 3.14159265358979 * 1e6 * 0.9999);
  CHECK(pn_autocorrelation(kPaper, 0.0) == doctest::Approx(r0).epsilon(1e-12));
  CHECK(pn_autocorrelation(kPaper, 0.0) == doctest::Approx(9.93e-3).epsilon(2e-3));
  CHECK(pn_autocorrelation(kPaper, 1e-6) == doctest::Approx(1.854e-5).epsilon(2e-3));
  CHECK(pn_autocorrelation(kPaper, 1.0) == doctest::Approx(0.0));
  for (double tau : {1e-10, 3e-9, 1e-7}) {
    CHECK(pn_autocorrelation(kPaper, tau) == pn_autocorrelation(kPaper, -tau));
    CHECK(pn_autocorrelation(kPaper, tau) < pn_autocorrelation(kPaper, 0.0));
  }
  CHECK_THROWS_AS(PhaseNoiseModel({-85, 1e6, 1e6}).validate(), std::invalid_argument);
}

TEST_CASE("covariance construction") {
  const auto c1 = pn_covariance(kPaper, 1, kTs);
  CHECK(c1.matrix()(0, 0) == pn_autocorrelation(kPaper, 0.0));
  const auto c3 = pn_covariance(kPaper, 3, kTs);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(c3.matrix()(i, j) == pn_autocorrelation(kPaper, std::abs(i - j) * kTs));
  CHECK((c3.matrix() - c3.matrix().transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("covariance is Toeplitz and factorizable up to n = 4096") {
  for (int n : {16, 257, 1024, 4096}) {
    const auto c = pn_covariance(kPaper, n, kTs);
    CHECK(c.size() == n);
    bool toeplitz = true;
    for (int i = 1; i < n; i += 97)
      for (int j = 1; j < n; j += 89) toeplitz &= c.matrix()(i, j) == c.matrix()(i - 1, j - 1);
    CHECK(toeplitz);
    CHECK(c.factor().diagonal().minCoeff() > 0.0);
  }
  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = 2.0;
  CHECK_THROWS_AS(PnCovariance(bad, 1.0), std::domain_error);
}

TEST_CASE("sampling the phase-noise process") {
  const PnCovariance zero(MatrixXd::Zero(5, 5), 1.0);
  CHECK(sample_phase_noise(zero, 3).cwiseAbs().maxCoeff() == 0.0);

  const PnCovariance one(MatrixXd::Constant(1, 1, 0.04), 1.0);
  double acc = 0.0;
  const int draws = 100000;
  for (int s = 0; s < draws; ++s) {
    const double x = sample_phase_noise(one, static_cast<std::uint64_t>(s))[0];
    acc += x * x;
  }
  CHECK(acc / draws == doctest::Approx(0.04).epsilon(0.03));

  const auto c = pn_covariance(kPaper, 64, kTs);
  Rng rng(99);
  double lag1 = 0.0;
  const int traces = 10000;
  for (int t = 0; t < traces; ++t) {
    const VectorXd x = sample_phase_noise(c, rng);
    for (int n = 0; n + 1 < 64; ++n) lag1 += x[n] * x[n + 1];
  }
  lag1 /= traces * 63.0;
  CHECK(lag1 == doctest::Approx(pn_autocorrelation(kPaper, kTs)).epsilon(0.10));

  CHECK(sample_phase_noise(c, 5) == sample_phase_noise(c, 5));
}

TEST_CASE("periodogram of sampled traces follows the PSD over [f_p/10, 10 f_p]") {
  // A coarser lattice than the link's so that the decade around f_p spans
  // many periodogram bins.
  const double fs = 50e6;
  const int n = 2048;
  const int traces = 300;
  const auto c = pn_covariance(kPaper, n, 1.0 / fs);
  Rng rng(2024);
  Eigen::FFT<double> fft;
  std::vector<double> window(n), avg(n, 0.0);
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2 * kPi * i / n);
    wsum += window[i] * window[i];
  }
  std::vector<cplx> in(n), out;
  for (int t = 0; t < traces; ++t) {
    const VectorXd x = sample_phase_noise(c, rng);
    for (int i = 0; i < n; ++i) in[i] = window[i] * x[i];
    fft.fwd(out, in);
    for (int i = 0; i < n; ++i) avg[i] += std::norm(out[i]) / (fs * wsum) / traces;
  }
  double worst = 0.0;
  for (int k = 1; k < n / 2; ++k) {
    const double f = k * fs / n;
    if (f < kPaper.f_p / 10 || f > 10 * kPaper.f_p) continue;
    worst = std::max(worst, std::abs(10 * std::log10(avg[k] / pn_psd(kPaper, f))));
  }
  CHECK(worst < 2.0);
}

TEST_CASE("impairment draws") {
  ImpairmentConfig cfg;
  cfg.num_samples = 100;
  const ImpairmentModel model(cfg);
  double largest = 0.0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto r = model.draw(s);
    largest = std::max(largest, std::abs(r.cfo));
    CHECK(r.n0 >= cfg.n0_min);
    CHECK(r.n0 <= cfg.n0_max);
    CHECK(r.pn.size() == 100);
  }
  CHECK(largest < 2.051e-4);
  CHECK(largest > 2.0e-4);

  cfg.max_cfo_hz = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) CHECK(draw_impairments(cfg, s).cfo == 0.0);

  const auto a = model.draw(77), b = model.draw(77);
  CHECK(a.n0 == b.n0);
  CHECK(a.cfo == b.cfo);
  CHECK(a.pn == b.pn);

  cfg.max_cfo_hz = cfg.sampling_rate;
  CHECK_THROWS_AS(ImpairmentModel{cfg}, std::invalid_argument);
}

TEST_CASE("PN scales with the square root of the level under a fixed seed") {
  ImpairmentConfig lo, hi;
  lo.num_samples = hi.num_samples = 50;
  lo.phase_noise.g_theta_dbc = -100;
  hi.phase_noise.g_theta_dbc = -80;
  const auto a = draw_impairments(lo, 4), b = draw_impairments(hi, 4);
  CHECK(a.n0 == b.n0);
  CHECK(a.cfo == b.cfo);
  CHECK((b.pn - 10.0 * a.pn).norm() < 1e-9 * b.pn.norm());
}

TEST_CASE("curve export and realization round trip") {
  std::ostringstream psd;
  write_psd_csv(psd, kPaper, {0.0, 1e6});
  CHECK(psd.str().rfind("f_hz,psd\n", 0) == 0);
  std::ostringstream ac;
  write_autocorrelation_csv(ac, kPaper, {0.0});
  CHECK(ac.str().rfind("tau_s,autocorrelation\n", 0) == 0);

  ImpairmentConfig cfg;
  cfg.num_samples = 17;
  const auto r = draw_impairments(cfg, 12);
  std::stringstream ss;
  write_impairments(ss, r);
  const auto q = read_impairments(ss);
  CHECK(q.n0 == r.n0);
  CHECK(q.cfo == r.cfo);
  CHECK(q.pn == r.pn);
}

}
