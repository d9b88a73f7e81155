#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mmsync/experiments.hpp"

namespace py = pybind11;
using namespace mmsync;

namespace {

// Keyword overrides go through the same parser as config files, so Python
// accepts exactly the documented keys.
SweepConfig make_config(const std::string& preset, const py::dict& overrides) {
  SweepConfig c = SweepConfig::preset(preset);
  KeyValueConfig kv;
  for (const auto& item : overrides) {
    const std::string key = py::str(item.first);
    std::string value;
    if (py::isinstance<py::list>(item.second) || py::isinstance<py::tuple>(item.second)) {
      for (const auto& v : item.second) value += (value.empty() ? "" : ",") + std::string(py::str(v));
    } else if (py::isinstance<py::bool_>(item.second)) {
      value = item.second.cast<bool>() ? "true" : "false";
    } else {
      value = py::str(item.second);
    }
    kv.set(key, value);
  }
  c.apply(kv);
  c.validate();
  return c;
}

py::dict metric_dict(const MetricRow& r) {
  py::dict d;
  d["snr_db"] = r.point.snr_db;
  d["g_theta_dbc"] = r.point.g_theta_dbc;
  d["rx_chains"] = r.point.rx_chains;
  d["trials"] = r.trials;
  d["failures"] = r.failures;
  d["p_detect"] = r.p_detect;
  d["p_detect_ci"] = r.p_detect_ci;
  d["nmse_g_db"] = r.nmse_g_db;
  d["nmse_cfo_db"] = r.nmse_cfo_db;
  d["nmse_h_db"] = r.nmse_h_db;
  d["se"] = r.se;
  d["se_ci"] = r.se_ci;
  d["se_with_overhead"] = r.se_with_overhead;
  return d;
}

py::dict estimate_dict(const EstimateRow& r) {
  py::dict d;
  d["trial"] = r.trial;
  d["frame"] = r.frame;
  d["snr_db"] = r.point.snr_db;
  d["g_theta_dbc"] = r.point.g_theta_dbc;
  d["rx_chains"] = r.point.rx_chains;
  d["n0_true"] = r.n0_true;
  d["n0_hat"] = r.n0_hat;
  d["cfo_true"] = r.cfo_true;
  d["cfo_hat"] = r.cfo_hat;
  d["pn_nmse_db"] = r.pn_nmse_db;
  d["g_nmse_db"] = r.g_nmse_db;
  d["noise_variance_true"] = r.noise_variance_true;
  d["noise_variance_hat"] = r.noise_variance_hat;
  return d;
}

// (count, rows, cols) complex array from a matrix list.
py::array_t<cplx> stack(const MatrixList& ms) {
  const auto n = static_cast<py::ssize_t>(ms.size());
  const py::ssize_t r = n ? ms[0].rows() : 0, c = n ? ms[0].cols() : 0;
  py::array_t<cplx> out({n, r, c});
  auto v = out.mutable_unchecked<3>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (py::ssize_t a = 0; a < r; ++a)
      for (py::ssize_t b = 0; b < c; ++b) v(i, a, b) = ms[i](a, b);
  return out;
}

MatrixList unstack(const py::array_t<cplx, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a (count, rows, cols) array");
  auto v = a.unchecked<3>();
  MatrixList out(v.shape(0), MatrixXcd(v.shape(1), v.shape(2)));
  for (py::ssize_t i = 0; i < v.shape(0); ++i)
    for (py::ssize_t r = 0; r < v.shape(1); ++r)
      for (py::ssize_t c = 0; c < v.shape(2); ++c) out[i](r, c) = v(i, r, c);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint timing, CFO, phase-noise and compressive channel estimation for hybrid MIMO-OFDM";

  py::class_<PhaseNoiseModel>(m, "PhaseNoiseModel")
      .def(py::init([](double g, double fz, double fp) { return PhaseNoiseModel{g, fz, fp}; }),
           py::arg("g_theta_dbc") = -85.0, py::arg("f_z") = 100e6, py::arg("f_p") = 1e6)
      .def_readwrite("g_theta_dbc", &PhaseNoiseModel::g_theta_dbc)
      .def_readwrite("f_z", &PhaseNoiseModel::f_z)
      .def_readwrite("f_p", &PhaseNoiseModel::f_p)
      .def("psd", [](const PhaseNoiseModel& p, double f) { return pn_psd(p, f); }, py::arg("f"))
      .def("autocorrelation", [](const PhaseNoiseModel& p, double tau) { return pn_autocorrelation(p, tau); },
           py::arg("tau"))
      .def(
          "sample",
          [](const PhaseNoiseModel& p, int n, double ts, std::uint64_t seed) {
            return sample_phase_noise(pn_covariance(p, n, ts), seed);
          },
          py::arg("n"), py::arg("sampling_interval") = 42e-6 / 81920.0, py::arg("seed") = 0,
          "Zero-mean Gaussian phase trace of n samples (radians)");

  m.def("zadoff_chu", [](int length, int root) { return zadoff_chu(length, root).values; }, py::arg("length"),
        py::arg("root") = 1);
  m.def(
      "golay_preamble",
      [](double boost_db) {
        const GolayPreamble g = golay_preamble(boost_db);
        return py::make_tuple(g.values, g.complementary, g.power_boost);
      },
      py::arg("boost_db") = 6.0, "(Ga64, Gb64, linear power boost)");

  m.def("nmse", py::overload_cast<const MatrixXcd&, const MatrixXcd&>(&nmse), py::arg("estimate"),
        py::arg("truth"));
  m.def(
      "spectral_efficiency",
      [](const py::array_t<cplx>& est, const py::array_t<cplx>& truth, double snr_db, int streams) {
        return spectral_efficiency(unstack(est), unstack(truth), db_to_linear(snr_db), streams);
      },
      py::arg("estimate"), py::arg("truth"), py::arg("snr_db"), py::arg("streams"));

  m.def(
      "channel",
      [](int trial, const std::string& domain, const std::string& preset, const py::kwargs& kw) {
        const SweepConfig c = make_config(preset, kw);
        const ChannelRealization chan = draw_trial_channel(c, trial);
        if (domain == "delay") return stack(chan.taps);
        if (domain == "frequency") return stack(frequency_response(chan, c.num_subcarriers));
        throw std::invalid_argument("domain must be delay or frequency");
      },
      py::arg("trial") = 0, py::arg("domain") = "delay", py::arg("preset") = "desk",
      "Channel realization of a sweep trial, shape (taps or subcarriers, N_r, N_t). "
      "Keyword arguments are config keys.");

  m.def(
      "sweep",
      [](const std::string& pipeline, bool estimates, const std::string& preset, const py::kwargs& kw) {
        const SweepConfig c = make_config(preset, kw);
        Pipeline p;
        if (pipeline == "full") p = Pipeline::full;
        else if (pipeline == "sync_only") p = Pipeline::sync_only;
        else throw std::invalid_argument("pipeline must be full or sync_only");
        std::vector<MetricRow> rows;
        std::vector<EstimateRow> est;
        {
          py::gil_scoped_release release;
          run_sweep(c, p, [&](const MetricRow& r) { rows.push_back(r); },
                    estimates ? EstimateSink([&](const EstimateRow& r) { est.push_back(r); }) : EstimateSink{});
        }
        py::list out_rows, out_est;
        for (const auto& r : rows) out_rows.append(metric_dict(r));
        if (!estimates) return py::object(out_rows);
        for (const auto& r : est) out_est.append(estimate_dict(r));
        return py::object(py::make_tuple(out_rows, out_est));
      },
      py::arg("pipeline") = "full", py::arg("estimates") = false, py::arg("preset") = "desk",
      "Monte-Carlo sweep; one dict per grid point (plus per-frame estimates when requested). "
      "Keyword arguments are config keys, lists for the swept ones.");
}
