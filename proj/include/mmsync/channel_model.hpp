#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmsync/rng.hpp"
#include "mmsync/types.hpp"

namespace mmsync {

// Uniform linear array; spacing in carrier wavelengths.
struct ArrayGeometry {
  int num_antennas = 1;
  double element_spacing = 0.5;

  void validate() const;
};

// Raised-cosine pulse truncated to |tau| <= span * T_s.
struct PulseShape {
  double rolloff = 0.25;
  int span = 4;
  double sampling_interval = 1.0;

  void validate() const;
};

struct Ray {
  cplx gain{1.0, 0.0};
  double delay = 0.0;  // seconds
  double aoa = 0.0;    // radians, [0, 2pi)
  double aod = 0.0;    // radians, [0, 2pi)
};

// Rays are stored cluster-major: the first rays_per_cluster[0] entries belong
// to cluster 0, and so on.
struct ClusterParams {
  std::vector<int> rays_per_cluster;
  std::vector<Ray> rays;
  double pathloss = 1.0;

  int num_clusters() const { return static_cast<int>(rays_per_cluster.size()); }
  int total_rays() const;
  void validate(int num_taps, double sampling_interval) const;
};

struct ChannelRealization {
  MatrixList taps;  // D matrices, N_r x N_t
  ClusterParams params;
  double sampling_interval = 1.0;

  int num_taps() const { return static_cast<int>(taps.size()); }
  int num_rx() const { return taps.empty() ? 0 : static_cast<int>(taps[0].rows()); }
  int num_tx() const { return taps.empty() ? 0 : static_cast<int>(taps[0].cols()); }
};

struct ArrayDictionary {
  MatrixXcd atoms;             // N x G
  std::vector<double> sines;   // grid in the sine domain, [-1, 1)
  std::vector<double> angles;  // asin of the grid, radians

  int size() const { return static_cast<int>(atoms.cols()); }
};

struct AngularDictionary {
  ArrayDictionary transmit;
  ArrayDictionary receive;
};

VectorXcd steering_vector(const ArrayGeometry& geometry, double angle);
VectorXcd steering_vector_sine(const ArrayGeometry& geometry, double sine);

double pulse_eval(const PulseShape& pulse, double tau);

ChannelRealization generate_channel(const ClusterParams& params, const ArrayGeometry& tx,
                                    const ArrayGeometry& rx, const PulseShape& pulse,
                                    int num_taps);

MatrixList frequency_response(const MatrixList& taps, int num_subcarriers);
MatrixList frequency_response(const ChannelRealization& chan, int num_subcarriers);

ArrayDictionary build_dictionary(const ArrayGeometry& geometry, int grid_size);
AngularDictionary build_dictionaries(const ArrayGeometry& tx, const ArrayGeometry& rx,
                                     int tx_grid, int rx_grid);

// Synthetic clustered generator standing in for measured channel traces.
// Delays are expressed in sample periods.
struct ClusterModel {
  int num_clusters = 4;
  int rays_per_cluster = 8;
  double angular_spread_deg = 5.0;
  double cluster_delay_mean = 2.0;
  double ray_delay_mean = 0.2;
  double rician_factor_db = 0.0;
  bool line_of_sight = true;
  double pathloss = 1.0;

  void validate() const;
};

ClusterParams draw_clusters(const ClusterModel& model, int num_taps, double sampling_interval,
                            Rng& rng);

// On-grid rays: each ray points exactly at a dictionary column. Useful for
// exact-recovery checks.
struct GridPath {
  int rx_index = 0;
  int tx_index = 0;
  cplx gain{1.0, 0.0};
  double delay = 0.0;  // seconds
};
ClusterParams on_grid_params(const std::vector<GridPath>& paths, const AngularDictionary& dict);

// Binary channel file. Header: magic "MMCH", u32 version, u32 domain
// (0 = delay taps, 1 = subcarriers), u32 N_t, u32 N_r, u32 count, f64 T_s.
// Body: `count` matrices, each row-major N_r x N_t with interleaved re/im f64.
enum class ChannelDomain : std::uint32_t { delay = 0, frequency = 1 };

struct ChannelFile {
  ChannelDomain domain = ChannelDomain::delay;
  double sampling_interval = 1.0;
  MatrixList matrices;
};

void write_channel(std::ostream& os, const ChannelFile& file);
ChannelFile read_channel(std::istream& is);
void write_channel(const std::string& path, const ChannelFile& file);
ChannelFile read_channel(const std::string& path);

}  // namespace mmsync
