#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace catte {

struct Observation {
  std::vector<double> index;  // one continuous index per mode
  double time = 0.0;
  double value = 0.0;
};

/// Affine map of one axis onto [0, 1].
struct AxisScale {
  double min = 0.0;
  double max = 1.0;

  double normalize(double x) const { return (x - min) / (max - min); }
  double denormalize(double u) const { return min + u * (max - min); }
};

struct Normalization {
  std::vector<AxisScale> modes;
  AxisScale time;

  static Normalization identity(int modes);
};

/// Immutable set of observed entries with per-mode sorted unique-index
/// tables and the sorted unique timestamps. Coordinates are normalized.
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(int modes, std::vector<Observation> records, Normalization normalization);

  int modes() const { return modes_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<Observation>& records() const { return records_; }
  const Observation& operator[](std::size_t n) const { return records_[n]; }
  const Normalization& normalization() const { return normalization_; }

  const std::vector<double>& unique_indexes(int mode) const { return unique_indexes_[mode]; }
  const std::vector<std::vector<double>>& unique_index_tables() const { return unique_indexes_; }
  const std::vector<double>& unique_times() const { return unique_times_; }

  std::vector<double> values() const;
  std::vector<double> times() const;
  /// Column of mode k indexes (length N).
  std::vector<double> index_column(int mode) const;

  ObservationSet subset(std::span<const std::size_t> rows) const;
  ObservationSet with_values(std::vector<double> values) const;

 private:
  int modes_ = 0;
  std::vector<Observation> records_;
  Normalization normalization_;
  std::vector<std::vector<double>> unique_indexes_;
  std::vector<double> unique_times_;
};

// -- synthetic generator ----------------------------------------------------

enum class Sampling {
  lattice,  // independent uniform draws per axis, full Cartesian product
  iid,      // every entry draws its own (i1, i2, t)
};

struct SyntheticConfig {
  int n1 = 25;
  int n2 = 25;
  int nt = 50;
  double noise_variance = 0.05;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::lattice;
};

/// y(i1, i2, t) = -cos^3(2 pi t + 2.5 pi i1) * sin(3 pi t + 3.5 pi i2)
double synthetic_truth(double i1, double i2, double t);

struct SyntheticData {
  ObservationSet noisy;
  std::vector<double> clean;  // aligned with noisy records
};

SyntheticData gen_synthetic(const SyntheticConfig& config);

// -- CSV ------------------------------------------------------------------

/// Reads `i_1,...,i_K,t,y`. Coordinates are min-max normalized using
/// `normalization` when given, else from the file itself (a constant column
/// is then a ParseError).
ObservationSet load_csv(const std::filesystem::path& path,
                        const std::optional<Normalization>& normalization = std::nullopt);

/// Writes in original units (denormalized), full precision.
void save_csv(const std::filesystem::path& path, const ObservationSet& set);

// -- splitting and noise ----------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  /// When set, train = {t <= cutoff} and test = {t > cutoff} (normalized t).
  std::optional<double> temporal_cutoff;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(const ObservationSet& set, const SplitSpec& spec);
std::pair<ObservationSet, ObservationSet> split(const ObservationSet& set, const SplitSpec& spec);

enum class NoiseLaw { gaussian, laplacian, poisson };

NoiseLaw parse_noise_law(const std::string& name);

/// Perturbs every value with zero-mean noise of the given variance.
/// Laplace noise uses scale sqrt(variance / 2). Poisson noise is centered
/// shot noise v * (P - 1/v) with P ~ Poisson(1/v), v = variance.
ObservationSet add_noise(const ObservationSet& set, NoiseLaw law, double variance,
                         std::uint64_t seed);

}  // namespace catte
