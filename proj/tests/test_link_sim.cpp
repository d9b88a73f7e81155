#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mmsync/link_sim.hpp"
#include "mmsync/training.hpp"
#include "oracles.hpp"

using namespace mmsync;

namespace {

MatrixXcd random_matrix(int rows, int cols, Rng& rng) {
  MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.complex_normal();
  return m;
}

ImpairmentRealization clean(int len) {
  ImpairmentRealization imp;
  imp.pn = VectorXd::Zero(len);
  return imp;
}

}  // namespace

TEST_SUITE("link-sim") {

TEST_CASE("whitening filter") {
  TrainingConfig c;
  const auto w = design_combiner(3, c, 1).analog;
  CHECK((whitening_from_combiner(w).factor - MatrixXcd::Identity(4, 4)).norm() < 1e-15);
  CHECK((whitening_from_combiner(2.0 * w).factor - 2.0 * MatrixXcd::Identity(4, 4)).norm() < 1e-14);

  Rng rng(5);
  const MatrixXcd wr = random_matrix(8, 3, rng);
  const auto f = whitening_from_combiner(wr);
  const MatrixXcd cw = wr.adjoint() * wr;
  CHECK((f.factor.adjoint() * f.factor - cw).norm() < 1e-12 * cw.norm());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < i; ++j) CHECK(f.factor(i, j) == cplx(0.0, 0.0));
  const MatrixXcd inv = f.factor.inverse();
  CHECK((inv.adjoint() * cw * inv - MatrixXcd::Identity(3, 3)).norm() < 1e-10);
  CHECK((f.whiten(cw) - inv.adjoint() * cw).norm() < 1e-12 * cw.norm());

  MatrixXcd deficient = MatrixXcd::Zero(8, 2);
  deficient(0, 0) = deficient(0, 1) = 1.0;
  CHECK_THROWS(whitening_from_combiner(deficient));
}

TEST_CASE("beamformed channel taps") {
  TrainingConfig c;
  Rng rng(8);
  MatrixList h(3);
  for (auto& hd : h) hd = random_matrix(c.num_rx, c.num_tx, rng);
  const auto f = design_precoder(5, c, 2);
  const auto w = design_combiner(5, c, 2);
  const auto g = beamformed_taps(h, f.analog, f.modulation, w.analog, whitening_from_combiner(w.analog), 64);
  REQUIRE(g.taps.rows() == 3);
  REQUIRE(g.taps.cols() == 4);
  const int kt = c.tx_subarray_size();
  const int kr = c.rx_subarray_size();
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 4; ++i) {
      // Selected antenna row of H[d] against the active subarray's ZC weights.
      const int row = i * kr + w.selected[i];
      oracle::cd acc = 0.0;
      for (int n = 0; n < kt; ++n) {
        const int col = f.active_subarray * kt + n;
        acc += h[d](row, col) * f.analog(col, f.active_subarray) * f.modulation[f.active_subarray];
      }
      CHECK(std::abs(g.taps(d, i) - acc) < 1e-13);
    }
  for (int k = 0; k < 64; ++k)
    for (int i = 0; i < 4; ++i) {
      oracle::cd acc = 0.0;
      for (int d = 0; d < 3; ++d) acc += g.taps(d, i) * oracle::expj(-2 * oracle::pi * k * d / 64.0);
      CHECK(std::abs(g.freq(k, i) - acc) < 1e-12);
    }

  MatrixList zero(3, MatrixXcd::Zero(c.num_rx, c.num_tx));
  CHECK(beamformed_taps(zero, f.analog, f.modulation, w.analog, whitening_from_combiner(w.analog), 64)
            .taps.norm() == 0.0);
  MatrixList scaled = h;
  for (auto& hd : scaled) hd *= cplx(0.5, -2.0);
  const auto gs = beamformed_taps(scaled, f.analog, f.modulation, w.analog, whitening_from_combiner(w.analog), 64);
  CHECK((gs.taps - cplx(0.5, -2.0) * g.taps).norm() < 1e-12);

  MatrixList wrong(3, MatrixXcd::Zero(c.num_rx + 1, c.num_tx));
  CHECK_THROWS(beamformed_taps(wrong, f.analog, f.modulation, w.analog, whitening_from_combiner(w.analog), 64));
}

TEST_CASE("received signal, trivial cases") {
  Rng rng(1);
  VectorXcd s(20);
  for (auto& v : s) v = rng.complex_normal();
  MatrixXcd g(1, 2);
  g << cplx(0.3, 1.0), cplx(-2.0, 0.1);
  const auto r = simulate_rx(s, g, clean(20), 0.0, rng);
  for (int n = 0; n < 20; ++n)
    for (int i = 0; i < 2; ++i) CHECK(r.samples(i, n) == g(0, i) * s[n]);

  auto tone = clean(50);
  tone.cfo = 0.01;
  const auto t = simulate_rx(VectorXcd::Ones(50), MatrixXcd::Ones(1, 1), tone, 0.0, rng);
  for (int n = 0; n < 50; ++n) CHECK(std::abs(t.samples(0, n) - oracle::expj(2 * oracle::pi * 0.01 * n)) < 1e-13);
}

TEST_CASE("received signal matches a brute-force evaluation") {
  Rng rng(77);
  const int lr = 2, d_len = 3, n_len = 16;
  VectorXcd s(n_len);
  for (auto& v : s) v = rng.complex_normal();
  const MatrixXcd g = random_matrix(d_len, lr, rng);
  ImpairmentRealization imp;
  imp.n0 = 2;
  imp.cfo = 0.0123;
  imp.pn = VectorXd::Random(received_length(n_len, d_len, imp.n0)) * 0.2;
  Rng noise(4);
  const auto r = simulate_rx(s, g, imp, 0.0, noise);
  REQUIRE(r.samples.cols() == imp.pn.size());
  for (int i = 0; i < lr; ++i)
    for (int n = 0; n < imp.pn.size(); ++n) {
      oracle::cd acc = 0.0;
      for (int d = 0; d < d_len; ++d) {
        const int idx = n - d - imp.n0;
        if (idx >= 0 && idx < n_len) acc += g(d, i) * s[idx];
      }
      acc *= oracle::expj(2 * oracle::pi * imp.cfo * n + imp.pn[n]);
      CHECK(std::abs(r.samples(i, n) - acc) < 1e-13);
    }
}

TEST_CASE("SNR definition") {
  MatrixXcd g = MatrixXcd::Zero(2, 2);
  g(0, 0) = 1.0;
  g(1, 1) = 1.0;
  CHECK(std::abs(snr_db(g, 1.0, 1.0)) < 1e-14);
  CHECK(snr_db(g, 0.5, 1.0) == doctest::Approx(10 * std::log10(2.0)));

  Rng rng(3);
  const MatrixXcd h = random_matrix(5, 3, rng);
  double energy = 0.0;
  for (int d = 0; d < 5; ++d)
    for (int i = 0; i < 3; ++i) energy += std::norm(h(d, i));
  const double expected = 10 * std::log10(energy / 3 * 0.25 / 0.07);
  CHECK(snr_db(h, 0.07, 0.25) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(snr_db(h, noise_variance_for_snr(h, 7.5, 0.25), 0.25) == doctest::Approx(7.5).epsilon(1e-13));
}

TEST_CASE("loopback demodulation recovers pilots times the channel") {
  TrainingConfig c;
  const auto plan = make_training_plan(c, 1, 11);
  const VectorXcd s = assemble_frame(plan, 0);
  Rng rng(12);
  const MatrixXcd g = random_matrix(6, c.rx_chains, rng);
  const int len = received_length(static_cast<int>(s.size()), 6, 0);
  const auto r = simulate_rx(s, g, clean(len), 0.0, rng);
  const MatrixXcd y = ofdm_demodulate(r.samples, 64, c.num_subcarriers, c.cyclic_prefix, c.num_symbols);
  const MatrixXcd gf = taps_to_freq(g, c.num_subcarriers);
  double err = 0.0, ref = 0.0;
  for (int i = 0; i < c.rx_chains; ++i)
    for (int t = 0; t < c.num_symbols; ++t)
      for (int k = 0; k < c.num_subcarriers; ++k) {
        const cplx expected = gf(k, i) * plan.frames[0].pilots(t, k);
        err += std::norm(y(k, i * c.num_symbols + t) - expected);
        ref += std::norm(expected);
      }
  CHECK(std::sqrt(err / ref) <= 1e-10);
}

TEST_CASE("CFO and phase noise commute") {
  Rng rng(19);
  VectorXcd s(40);
  for (auto& v : s) v = rng.complex_normal();
  const MatrixXcd g = random_matrix(2, 3, rng);
  auto imp = clean(45);
  imp.cfo = -1.3e-4;
  imp.pn = VectorXd::Random(45) * 0.1;
  Rng n1(1), n2(1);
  const auto joint = simulate_rx(s, g, imp, 0.0, n1);

  auto pn_only = imp;
  pn_only.cfo = 0.0;
  auto r_pn = simulate_rx(s, g, pn_only, 0.0, n2).samples;
  for (int n = 0; n < 45; ++n) r_pn.col(n) *= oracle::expj(2 * oracle::pi * imp.cfo * n);

  auto cfo_only = clean(45);
  cfo_only.cfo = imp.cfo;
  auto r_cfo = simulate_rx(s, g, cfo_only, 0.0, n2).samples;
  for (int n = 0; n < 45; ++n) r_cfo.col(n) *= oracle::expj(imp.pn[n]);

  CHECK((joint.samples - r_pn).norm() < 1e-12);
  CHECK((joint.samples - r_cfo).norm() < 1e-12);
}

TEST_CASE("noise-only frames have the requested variance") {
  Rng rng(2024);
  const double sigma2 = 0.37;
  const auto r = simulate_rx(VectorXcd::Zero(10), MatrixXcd::Zero(1, 1), clean(100000), sigma2, rng);
  const double var = r.samples.squaredNorm() / 100000.0;
  CHECK(std::abs(var / sigma2 - 1.0) < 0.02);
  CHECK(std::abs(r.samples.mean()) < 0.01);
}

TEST_CASE("received frame file round trip") {
  Rng rng(6);
  ReceivedFrame f;
  f.samples = random_matrix(3, 17, rng);
  f.snr_db = 12.5;
  f.noise_variance = 0.0123;
  f.truth.n0 = 7;
  f.truth.cfo = -1.234567e-5;
  f.truth.pn = VectorXd::Random(17);
  std::stringstream ss;
  write_received_frame(ss, f);
  const auto back = read_received_frame(ss);
  CHECK(back.samples == f.samples);
  CHECK(back.snr_db == f.snr_db);
  CHECK(back.noise_variance == f.noise_variance);
  CHECK(back.truth.n0 == 7);
  CHECK(back.truth.cfo == f.truth.cfo);
  CHECK(back.truth.pn == f.truth.pn);
  std::stringstream bad("MMXX");
  CHECK_THROWS(read_received_frame(bad));
}

}
