#include "catte/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "catte/errors.hpp"

namespace catte {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'T', 'E', 'C', 'K', 'P'};

template <typename U>
void put_uint(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_uint(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw IoError("truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

void put_double(std::ostream& out, double d) { put_uint(out, std::bit_cast<std::uint64_t>(d)); }
double get_double(std::istream& in) { return std::bit_cast<double>(get_uint<std::uint64_t>(in)); }

void put_string(std::ostream& out, const std::string& s, bool wide) {
  if (wide) put_uint<std::uint64_t>(out, s.size());
  else put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, bool wide) {
  const std::uint64_t n = wide ? get_uint<std::uint64_t>(in) : get_uint<std::uint32_t>(in);
  if (n > (1ull << 32)) throw IoError("corrupt checkpoint string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("truncated checkpoint");
  return s;
}

void put_block(std::ostream& out, const std::string& name, const Matrix& m) {
  put_string(out, name, false);
  put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_double(out, m.data()[i]);
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

Matrix row_of(const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CatteModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const ModelConfig& c = model.config();

  std::ostringstream header;
  header.precision(17);
  header << "modes=" << c.modes << '\n'
         << "rank=" << c.shape.rank << '\n'
         << "latent_dim=" << c.shape.latent_dim << '\n'
         << "fourier_dim=" << c.shape.fourier_dim << '\n'
         << "encoder_hidden=" << join(c.shape.encoder_hidden) << '\n'
         << "dynamics_hidden=" << join(c.shape.dynamics_hidden) << '\n'
         << "decoder_hidden=" << join(c.shape.decoder_hidden) << '\n'
         << "solver=" << to_string(c.solver) << '\n'
         << "step=" << c.step << '\n'
         << "init_variational=" << c.init_variational << '\n'
         << "seed=" << c.seed << '\n'
         << "epochs_trained=" << model.epochs_trained << '\n';

  out.write(kMagic, sizeof kMagic);
  put_uint<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, header.str(), true);

  std::vector<std::pair<std::string, Matrix>> extra;
  extra.emplace_back("prior.a0", row_of(model.prior().a0));
  extra.emplace_back("prior.b0", row_of(model.prior().b0));
  extra.emplace_back("prior.cd", row_of({model.prior().c0, model.prior().d0}));
  extra.emplace_back("grid.times", row_of(model.grid().times));
  extra.emplace_back("grid.step", row_of({model.grid().step}));
  const Normalization& norm = model.normalization();
  Matrix axes(static_cast<Eigen::Index>(norm.modes.size()) + 1, 2);
  for (std::size_t k = 0; k < norm.modes.size(); ++k) {
    axes(static_cast<Eigen::Index>(k), 0) = norm.modes[k].min;
    axes(static_cast<Eigen::Index>(k), 1) = norm.modes[k].max;
  }
  axes(axes.rows() - 1, 0) = norm.time.min;
  axes(axes.rows() - 1, 1) = norm.time.max;
  extra.emplace_back("normalization", axes);

  const ParameterSet& p = model.params();
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(p.size() + extra.size()));
  for (const auto& [name, m] : extra) put_block(out, name, m);
  for (std::size_t i = 0; i < p.size(); ++i) put_block(out, p.name(i), p.value(i));
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

CatteModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  const auto version = get_uint<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, std::string> kv;
  {
    std::istringstream header(get_string(in, true));
    std::string line;
    while (std::getline(header, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto field = [&kv](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError("checkpoint header lacks '" + key + "'");
    return it->second;
  };

  std::map<std::string, Matrix> blocks;
  const auto count = get_uint<std::uint32_t>(in);
  for (std::uint32_t b = 0; b < count; ++b) {
    std::string name = get_string(in, false);
    const auto rows = get_uint<std::uint64_t>(in);
    const auto cols = get_uint<std::uint64_t>(in);
    if (rows * cols > (1ull << 32)) throw IoError("corrupt block size for " + name);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_double(in);
    blocks.emplace(std::move(name), std::move(m));
  }
  auto block = [&blocks](const std::string& name) -> const Matrix& {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw IoError("checkpoint lacks block '" + name + "'");
    return it->second;
  };

  ModelConfig c;
  c.modes = std::stoi(field("modes"));
  c.shape.rank = std::stoi(field("rank"));
  c.shape.latent_dim = std::stoi(field("latent_dim"));
  c.shape.fourier_dim = std::stoi(field("fourier_dim"));
  c.shape.encoder_hidden = split_ints(field("encoder_hidden"));
  c.shape.dynamics_hidden = split_ints(field("dynamics_hidden"));
  c.shape.decoder_hidden = split_ints(field("decoder_hidden"));
  c.solver = parse_solver(field("solver"));
  c.step = std::stod(field("step"));
  c.init_variational = std::stod(field("init_variational"));
  c.seed = std::stoull(field("seed"));

  PriorHyper prior;
  const Matrix& a0 = block("prior.a0");
  const Matrix& b0 = block("prior.b0");
  prior.a0.assign(a0.data(), a0.data() + a0.size());
  prior.b0.assign(b0.data(), b0.data() + b0.size());
  prior.c0 = block("prior.cd")(0, 0);
  prior.d0 = block("prior.cd")(0, 1);

  CatteModel model(c, prior);
  ParameterSet& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Matrix& m = block(p.name(i));
    if (m.rows() != p.value(i).rows() || m.cols() != p.value(i).cols()) {
      throw IoError("block '" + p.name(i) + "' has the wrong shape");
    }
    p.value(i) = m;
  }
  const Matrix& times = block("grid.times");
  TimeGrid grid;
  grid.times.assign(times.data(), times.data() + times.size());
  grid.step = block("grid.step")(0, 0);
  model.set_grid(std::move(grid));

  const Matrix& axes = block("normalization");
  if (axes.rows() != c.modes + 1) throw IoError("normalization block has the wrong shape");
  Normalization norm;
  for (int k = 0; k < c.modes; ++k) norm.modes.push_back({axes(k, 0), axes(k, 1)});
  norm.time = {axes(c.modes, 0), axes(c.modes, 1)};
  model.set_normalization(std::move(norm));
  model.epochs_trained = std::stoi(field("epochs_trained"));
  return model;
}

}  // namespace catte
