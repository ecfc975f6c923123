#include "catte/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "catte/errors.hpp"

namespace catte {

Normalization Normalization::identity(int modes) {
  Normalization n;
  n.modes.assign(static_cast<std::size_t>(modes), AxisScale{});
  return n;
}

namespace {

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

ObservationSet::ObservationSet(int modes, std::vector<Observation> records,
                               Normalization normalization)
    : modes_(modes), records_(std::move(records)), normalization_(std::move(normalization)) {
  if (modes < 1) throw StructuralError("an observation set needs at least one mode");
  if (normalization_.modes.size() != static_cast<std::size_t>(modes)) {
    throw StructuralError("normalization metadata does not match the mode count");
  }
  unique_indexes_.resize(static_cast<std::size_t>(modes));
  std::vector<double> times;
  times.reserve(records_.size());
  for (const Observation& r : records_) {
    if (r.index.size() != static_cast<std::size_t>(modes)) {
      throw StructuralError("observation arity " + std::to_string(r.index.size()) +
                            " does not match " + std::to_string(modes) + " modes");
    }
    for (int k = 0; k < modes; ++k) unique_indexes_[k].push_back(r.index[k]);
    times.push_back(r.time);
  }
  for (auto& table : unique_indexes_) table = sorted_unique(std::move(table));
  unique_times_ = sorted_unique(std::move(times));
}

std::vector<double> ObservationSet::values() const {
  std::vector<double> v;
  v.reserve(records_.size());
  for (const Observation& r : records_) v.push_back(r.value);
  return v;
}

std::vector<double> ObservationSet::times() const {
  std::vector<double> v;
  v.reserve(records_.size());
  for (const Observation& r : records_) v.push_back(r.time);
  return v;
}

std::vector<double> ObservationSet::index_column(int mode) const {
  std::vector<double> v;
  v.reserve(records_.size());
  for (const Observation& r : records_) v.push_back(r.index[mode]);
  return v;
}

ObservationSet ObservationSet::subset(std::span<const std::size_t> rows) const {
  std::vector<Observation> picked;
  picked.reserve(rows.size());
  for (std::size_t n : rows) picked.push_back(records_.at(n));
  return ObservationSet(modes_, std::move(picked), normalization_);
}

ObservationSet ObservationSet::with_values(std::vector<double> values) const {
  if (values.size() != records_.size()) throw StructuralError("value count mismatch");
  std::vector<Observation> copy = records_;
  for (std::size_t n = 0; n < copy.size(); ++n) copy[n].value = values[n];
  return ObservationSet(modes_, std::move(copy), normalization_);
}

double synthetic_truth(double i1, double i2, double t) {
  constexpr double pi = std::numbers::pi;
  const double c = std::cos(2.0 * pi * t + 2.5 * pi * i1);
  return -(c * c * c) * std::sin(3.0 * pi * t + 3.5 * pi * i2);
}

SyntheticData gen_synthetic(const SyntheticConfig& config) {
  if (config.n1 < 1 || config.n2 < 1 || config.nt < 1) {
    throw DomainError("synthetic dimensions must be >= 1");
  }
  if (!(config.noise_variance >= 0.0)) throw DomainError("noise variance must be >= 0");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Observation> records;
  const std::size_t total =
      static_cast<std::size_t>(config.n1) * config.n2 * static_cast<std::size_t>(config.nt);
  records.reserve(total);
  if (config.sampling == Sampling::lattice) {
    auto draw = [&](int n) {
      std::vector<double> v(static_cast<std::size_t>(n));
      for (double& x : v) x = unit(rng);
      std::sort(v.begin(), v.end());
      return v;
    };
    const auto a = draw(config.n1);
    const auto b = draw(config.n2);
    const auto ts = draw(config.nt);
    for (double t : ts) {
      for (double i1 : a) {
        for (double i2 : b) records.push_back({{i1, i2}, t, 0.0});
      }
    }
  } else {
    for (std::size_t n = 0; n < total; ++n) {
      const double i1 = unit(rng);
      const double i2 = unit(rng);
      records.push_back({{i1, i2}, unit(rng), 0.0});
    }
  }

  std::vector<double> clean;
  clean.reserve(total);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_variance));
  for (Observation& r : records) {
    const double y = synthetic_truth(r.index[0], r.index[1], r.time);
    clean.push_back(y);
    r.value = config.noise_variance > 0.0 ? y + noise(rng) : y;
  }
  return {ObservationSet(2, std::move(records), Normalization::identity(2)), std::move(clean)};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& field, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": '" + field + "' is not a number",
                     line);
  }
}

}  // namespace

ObservationSet load_csv(const std::filesystem::path& path,
                        const std::optional<Normalization>& normalization) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1);
  const auto header = split_fields(line);
  if (header.size() < 3 || header[header.size() - 2] != "t" || header.back() != "y") {
    throw ParseError("header must be i_1,...,i_K,t,y", 1);
  }
  const int modes = static_cast<int>(header.size()) - 2;
  for (int k = 0; k < modes; ++k) {
    if (header[k] != "i_" + std::to_string(k + 1)) {
      throw ParseError("header column " + std::to_string(k + 1) + " must be i_" +
                           std::to_string(k + 1),
                       1);
    }
  }

  std::vector<Observation> raw;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    }
    Observation o;
    for (int k = 0; k < modes; ++k) o.index.push_back(parse_number(fields[k], lineno));
    o.time = parse_number(fields[modes], lineno);
    o.value = parse_number(fields[modes + 1], lineno);
    raw.push_back(std::move(o));
  }
  if (raw.empty()) throw ParseError("no data rows in " + path.string(), lineno);

  Normalization norm;
  if (normalization) {
    if (normalization->modes.size() != static_cast<std::size_t>(modes)) {
      throw ParseError("file has " + std::to_string(modes) +
                           " modes but the normalization expects " +
                           std::to_string(normalization->modes.size()),
                       1);
    }
    norm = *normalization;
  } else {
    auto fit = [&](auto get, const std::string& column) {
      AxisScale s{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
      for (const Observation& o : raw) {
        s.min = std::min(s.min, get(o));
        s.max = std::max(s.max, get(o));
      }
      if (!(s.max > s.min)) {
        throw ParseError("column " + column + " is constant; cannot normalize", 1);
      }
      return s;
    };
    for (int k = 0; k < modes; ++k) {
      norm.modes.push_back(fit([k](const Observation& o) { return o.index[k]; }, header[k]));
    }
    norm.time = fit([](const Observation& o) { return o.time; }, "t");
  }
  for (Observation& o : raw) {
    for (int k = 0; k < modes; ++k) o.index[k] = norm.modes[k].normalize(o.index[k]);
    o.time = norm.time.normalize(o.time);
  }
  return ObservationSet(modes, std::move(raw), std::move(norm));
}

void save_csv(const std::filesystem::path& path, const ObservationSet& set) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int k = 0; k < set.modes(); ++k) out << "i_" << k + 1 << ',';
  out << "t,y\n";
  out << std::setprecision(17);
  const Normalization& norm = set.normalization();
  for (const Observation& o : set.records()) {
    for (int k = 0; k < set.modes(); ++k) out << norm.modes[k].denormalize(o.index[k]) << ',';
    out << norm.time.denormalize(o.time) << ',' << o.value << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

SplitIndices split_indices(const ObservationSet& set, const SplitSpec& spec) {
  if (set.size() < 2) throw DomainError("split needs at least 2 observations");
  SplitIndices out;
  if (spec.temporal_cutoff) {
    for (std::size_t n = 0; n < set.size(); ++n) {
      (set[n].time <= *spec.temporal_cutoff ? out.train : out.test).push_back(n);
    }
  } else {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
      throw DomainError("train fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> perm(set.size());
    for (std::size_t n = 0; n < perm.size(); ++n) perm[n] = n;
    std::mt19937_64 rng(spec.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(set.size())));
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  }
  if (out.train.empty() || out.test.empty()) {
    throw DomainError("split leaves an empty train or test set");
  }
  return out;
}

std::pair<ObservationSet, ObservationSet> split(const ObservationSet& set,
                                                const SplitSpec& spec) {
  const SplitIndices idx = split_indices(set, spec);
  return {set.subset(idx.train), set.subset(idx.test)};
}

NoiseLaw parse_noise_law(const std::string& name) {
  if (name == "gaussian") return NoiseLaw::gaussian;
  if (name == "laplacian") return NoiseLaw::laplacian;
  if (name == "poisson") return NoiseLaw::poisson;
  throw DomainError("unknown noise law '" + name + "'");
}

ObservationSet add_noise(const ObservationSet& set, NoiseLaw law, double variance,
                         std::uint64_t seed) {
  if (!(variance >= 0.0)) throw DomainError("noise variance must be >= 0");
  std::vector<double> values = set.values();
  if (variance == 0.0) return set.with_values(std::move(values));
  std::mt19937_64 rng(seed);
  switch (law) {
    case NoiseLaw::gaussian: {
      std::normal_distribution<double> d(0.0, std::sqrt(variance));
      for (double& y : values) y += d(rng);
      break;
    }
    case NoiseLaw::laplacian: {
      const double b = std::sqrt(variance / 2.0);
      std::exponential_distribution<double> e(1.0);
      std::bernoulli_distribution sign(0.5);
      for (double& y : values) {
        const double mag = b * e(rng);
        y += sign(rng) ? mag : -mag;
      }
      break;
    }
    case NoiseLaw::poisson: {
      const double rate = 1.0 / variance;
      std::poisson_distribution<long long> p(rate);
      for (double& y : values) y += variance * (static_cast<double>(p(rng)) - rate);
      break;
    }
  }
  return set.with_values(std::move(values));
}

}  // namespace catte
