#include "mmsync/channel_model.hpp"

#include "mmsync/binary_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mmsync {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

}  // namespace

void ArrayGeometry::validate() const {
  if (num_antennas < 1) throw std::invalid_argument("ArrayGeometry: num_antennas must be >= 1");
  if (!(element_spacing > 0.0))
    throw std::invalid_argument("ArrayGeometry: element_spacing must be positive");
}

void PulseShape::validate() const {
  if (!(rolloff >= 0.0 && rolloff <= 1.0))
    throw std::invalid_argument("PulseShape: rolloff must lie in [0, 1]");
  if (span < 1) throw std::invalid_argument("PulseShape: span must be >= 1");
  if (!(sampling_interval > 0.0))
    throw std::invalid_argument("PulseShape: sampling_interval must be positive");
}

int ClusterParams::total_rays() const {
  int n = 0;
  for (int r : rays_per_cluster) n += r;
  return n;
}

void ClusterParams::validate(int num_taps, double sampling_interval) const {
  for (int r : rays_per_cluster)
    if (r < 0) throw std::invalid_argument("ClusterParams: negative ray count");
  if (total_rays() != static_cast<int>(rays.size()))
    throw std::invalid_argument("ClusterParams: ray list length does not match rays_per_cluster");
  if (!(pathloss > 0.0)) throw std::invalid_argument("ClusterParams: pathloss must be positive");
  const double max_delay = num_taps * sampling_interval;
  for (const Ray& r : rays) {
    if (!(r.delay >= 0.0 && r.delay < max_delay))
      throw std::invalid_argument("ClusterParams: ray delay outside [0, D*T_s)");
    if (!std::isfinite(r.gain.real()) || !std::isfinite(r.gain.imag()))
      throw std::invalid_argument("ClusterParams: non-finite ray gain");
  }
}

VectorXcd steering_vector_sine(const ArrayGeometry& geometry, double sine) {
  geometry.validate();
  VectorXcd a(geometry.num_antennas);
  for (int n = 0; n < geometry.num_antennas; ++n)
    a[n] = std::polar(1.0, kTwoPi * geometry.element_spacing * n * sine);
  return a;
}

VectorXcd steering_vector(const ArrayGeometry& geometry, double angle) {
  return steering_vector_sine(geometry, std::sin(angle));
}

double pulse_eval(const PulseShape& pulse, double tau) {
  const double t = tau / pulse.sampling_interval;
  if (std::abs(t) > pulse.span) return 0.0;
  const double b = pulse.rolloff;
  if (b == 0.0) return sinc(t);
  const double denom = 1.0 - (2.0 * b * t) * (2.0 * b * t);
  // Removable singularity at |t| = 1/(2b).
  if (std::abs(denom) < 1e-10) return (kPi / 4.0) * sinc(1.0 / (2.0 * b));
  return sinc(t) * std::cos(kPi * b * t) / denom;
}

ChannelRealization generate_channel(const ClusterParams& params, const ArrayGeometry& tx,
                                    const ArrayGeometry& rx, const PulseShape& pulse,
                                    int num_taps) {
  tx.validate();
  rx.validate();
  pulse.validate();
  if (num_taps < 1) throw std::invalid_argument("generate_channel: D must be >= 1");
  params.validate(num_taps, pulse.sampling_interval);

  const int nr = rx.num_antennas;
  const int nt = tx.num_antennas;
  ChannelRealization out;
  out.params = params;
  out.sampling_interval = pulse.sampling_interval;
  out.taps.assign(num_taps, MatrixXcd::Zero(nr, nt));
  const int total = params.total_rays();
  if (total == 0) return out;

  const double scale = std::sqrt(static_cast<double>(nr) * nt / (params.pathloss * total));
  for (const Ray& ray : params.rays) {
    const MatrixXcd outer = steering_vector(rx, ray.aoa) * steering_vector(tx, ray.aod).adjoint();
    for (int d = 0; d < num_taps; ++d) {
      const double p = pulse_eval(pulse, d * pulse.sampling_interval - ray.delay);
      if (p != 0.0) out.taps[d] += (scale * p) * ray.gain * outer;
    }
  }
  return out;
}

MatrixList frequency_response(const MatrixList& taps, int num_subcarriers) {
  const int d_len = static_cast<int>(taps.size());
  if (d_len < 1) throw std::invalid_argument("frequency_response: no taps");
  if (num_subcarriers < d_len) throw std::invalid_argument("frequency_response: K < D");
  MatrixList out(num_subcarriers, MatrixXcd::Zero(taps[0].rows(), taps[0].cols()));
  for (int k = 0; k < num_subcarriers; ++k)
    for (int d = 0; d < d_len; ++d)
      out[k] += std::polar(1.0, -kTwoPi * static_cast<double>((static_cast<long>(k) * d) %
                                                              num_subcarriers) /
                                    num_subcarriers) *
                taps[d];
  return out;
}

MatrixList frequency_response(const ChannelRealization& chan, int num_subcarriers) {
  return frequency_response(chan.taps, num_subcarriers);
}

ArrayDictionary build_dictionary(const ArrayGeometry& geometry, int grid_size) {
  geometry.validate();
  if (grid_size < geometry.num_antennas)
    throw std::invalid_argument("build_dictionary: grid size smaller than array size");
  ArrayDictionary dict;
  dict.atoms.resize(geometry.num_antennas, grid_size);
  dict.sines.resize(grid_size);
  dict.angles.resize(grid_size);
  for (int g = 0; g < grid_size; ++g) {
    const double s = -1.0 + 2.0 * g / grid_size;
    dict.sines[g] = s;
    dict.angles[g] = std::asin(s);
    dict.atoms.col(g) = steering_vector_sine(geometry, s);
  }
  return dict;
}

AngularDictionary build_dictionaries(const ArrayGeometry& tx, const ArrayGeometry& rx,
                                     int tx_grid, int rx_grid) {
  return {build_dictionary(tx, tx_grid), build_dictionary(rx, rx_grid)};
}

void ClusterModel::validate() const {
  if (num_clusters < 0 || rays_per_cluster < 1)
    throw std::invalid_argument("ClusterModel: cluster and ray counts must be positive");
  if (num_clusters == 0 && !line_of_sight)
    throw std::invalid_argument("ClusterModel: channel has no paths");
  if (!(angular_spread_deg >= 0.0) || !(cluster_delay_mean >= 0.0) || !(ray_delay_mean >= 0.0))
    throw std::invalid_argument("ClusterModel: spreads must be non-negative");
  if (!(pathloss > 0.0)) throw std::invalid_argument("ClusterModel: pathloss must be positive");
}

ClusterParams draw_clusters(const ClusterModel& model, int num_taps, double sampling_interval,
                            Rng& rng) {
  model.validate();
  if (num_taps < 1) throw std::invalid_argument("draw_clusters: D must be >= 1");
  ClusterParams p;
  p.pathloss = model.pathloss;

  const double kfactor = db_to_linear(model.rician_factor_db);
  const double los_power = model.line_of_sight && model.num_clusters > 0
                               ? kfactor / (1.0 + kfactor)
                               : (model.line_of_sight ? 1.0 : 0.0);
  const double nlos_power = 1.0 - los_power;
  const double max_delay = (num_taps - 1) * sampling_interval;
  // Laplacian with standard deviation sigma has scale sigma / sqrt(2).
  const double lap_scale = model.angular_spread_deg * kPi / 180.0 / std::sqrt(2.0);
  auto laplace = [&]() {
    const double u = rng.uniform(-0.5, 0.5);
    return -lap_scale * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
  };

  std::vector<double> cluster_delay(model.num_clusters), cluster_weight(model.num_clusters);
  std::vector<double> cluster_aoa(model.num_clusters), cluster_aod(model.num_clusters);
  double weight_sum = 0.0;
  for (int c = 0; c < model.num_clusters; ++c) {
    cluster_delay[c] = rng.exponential(model.cluster_delay_mean) * sampling_interval;
    cluster_aoa[c] = rng.uniform(0.0, kTwoPi);
    cluster_aod[c] = rng.uniform(0.0, kTwoPi);
    cluster_weight[c] =
        model.cluster_delay_mean > 0.0
            ? std::exp(-cluster_delay[c] / (model.cluster_delay_mean * sampling_interval))
            : 1.0;
    weight_sum += cluster_weight[c];
  }

  // Gains are scaled so that the mean squared gain per ray is one; the
  // generator then splits that budget between the LOS ray and the clusters.
  const int total_rays = (model.line_of_sight ? 1 : 0) + model.num_clusters * model.rays_per_cluster;
  if (model.line_of_sight) {
    p.rays_per_cluster.push_back(1);
    Ray los;
    los.gain = std::polar(std::sqrt(los_power * total_rays), rng.uniform(0.0, kTwoPi));
    los.delay = 0.0;
    los.aoa = rng.uniform(0.0, kTwoPi);
    los.aod = rng.uniform(0.0, kTwoPi);
    p.rays.push_back(los);
  }
  for (int c = 0; c < model.num_clusters; ++c) {
    p.rays_per_cluster.push_back(model.rays_per_cluster);
    const double ray_power =
        nlos_power * cluster_weight[c] / weight_sum / model.rays_per_cluster * total_rays;
    for (int r = 0; r < model.rays_per_cluster; ++r) {
      Ray ray;
      ray.gain = rng.complex_normal(ray_power);
      ray.delay = std::min(cluster_delay[c] + rng.exponential(model.ray_delay_mean) * sampling_interval,
                           max_delay);
      ray.aoa = wrap_angle(cluster_aoa[c] + laplace());
      ray.aod = wrap_angle(cluster_aod[c] + laplace());
      p.rays.push_back(ray);
    }
  }
  return p;
}

ClusterParams on_grid_params(const std::vector<GridPath>& paths, const AngularDictionary& dict) {
  ClusterParams p;
  for (const GridPath& g : paths) {
    if (g.rx_index < 0 || g.rx_index >= dict.receive.size() || g.tx_index < 0 ||
        g.tx_index >= dict.transmit.size())
      throw std::out_of_range("on_grid_params: grid index out of range");
    Ray r;
    r.gain = g.gain;
    r.delay = g.delay;
    r.aoa = wrap_angle(dict.receive.angles[g.rx_index]);
    r.aod = wrap_angle(dict.transmit.angles[g.tx_index]);
    p.rays.push_back(r);
    p.rays_per_cluster.push_back(1);
  }
  return p;
}

namespace {

constexpr char kChannelMagic[4] = {'M', 'M', 'C', 'H'};
constexpr std::uint32_t kChannelVersion = 1;

}  // namespace

void write_channel(std::ostream& os, const ChannelFile& file) {
  if (file.matrices.empty()) throw std::invalid_argument("write_channel: no matrices");
  const auto nr = static_cast<std::uint32_t>(file.matrices[0].rows());
  const auto nt = static_cast<std::uint32_t>(file.matrices[0].cols());
  os.write(kChannelMagic, 4);
  binio::put<std::uint32_t>(os, kChannelVersion);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(file.domain));
  binio::put<std::uint32_t>(os, nt);
  binio::put<std::uint32_t>(os, nr);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(file.matrices.size()));
  binio::put<double>(os, file.sampling_interval);
  for (const MatrixXcd& m : file.matrices) {
    if (m.rows() != nr || m.cols() != nt)
      throw std::invalid_argument("write_channel: inconsistent matrix dimensions");
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) {
        binio::put<double>(os, m(r, c).real());
        binio::put<double>(os, m(r, c).imag());
      }
  }
  if (!os) throw std::runtime_error("write_channel: write failed");
}

ChannelFile read_channel(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kChannelMagic, 4) != 0)
    throw std::runtime_error("read_channel: bad magic");
  if (binio::get<std::uint32_t>(is) != kChannelVersion)
    throw std::runtime_error("read_channel: unsupported version");
  ChannelFile f;
  const auto domain = binio::get<std::uint32_t>(is);
  if (domain > 1) throw std::runtime_error("read_channel: unknown domain");
  f.domain = static_cast<ChannelDomain>(domain);
  const auto nt = binio::get<std::uint32_t>(is);
  const auto nr = binio::get<std::uint32_t>(is);
  const auto count = binio::get<std::uint32_t>(is);
  f.sampling_interval = binio::get<double>(is);
  f.matrices.assign(count, MatrixXcd(nr, nt));
  for (MatrixXcd& m : f.matrices)
    for (std::uint32_t r = 0; r < nr; ++r)
      for (std::uint32_t c = 0; c < nt; ++c) {
        const double re = binio::get<double>(is);
        const double im = binio::get<double>(is);
        m(r, c) = {re, im};
      }
  return f;
}

void write_channel(const std::string& path, const ChannelFile& file) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_channel: cannot open " + path);
  write_channel(os, file);
}

ChannelFile read_channel(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_channel: cannot open " + path);
  return read_channel(is);
}

}  // namespace mmsync
