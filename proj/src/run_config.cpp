#include "catte/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "catte/errors.hpp"

namespace catte {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ParseError("bad value for " + key + ": '" + text + "'", 0);
  return v;
}

int parse_positive_int(const std::string& key, const std::string& text) {
  const int v = parse_number<int>(key, text);
  if (v <= 0) throw ParseError(key + " must be positive", 0);
  return v;
}

std::vector<int> parse_widths(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_positive_int(key, trim(item)));
  if (out.empty()) throw ParseError(key + " needs at least one width", 0);
  return out;
}

bool parse_switch(const std::string& key, const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ParseError("bad value for " + key + ": '" + text + "'", 0);
}

std::string widths(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "R" || key == "rank") rank = parse_positive_int(key, value);
  else if (key == "J" || key == "latent_dim") latent_dim = parse_positive_int(key, value);
  else if (key == "M" || key == "fourier_dim") fourier_dim = parse_positive_int(key, value);
  else if (key == "width") {
    const int w = parse_positive_int(key, value);
    for (auto* v : {&encoder_hidden, &dynamics_hidden, &decoder_hidden}) {
      for (int& x : *v) x = w;
    }
  }
  else if (key == "encoder_hidden") encoder_hidden = parse_widths(key, value);
  else if (key == "dynamics_hidden") dynamics_hidden = parse_widths(key, value);
  else if (key == "decoder_hidden") decoder_hidden = parse_widths(key, value);
  else if (key == "solver") {
    try {
      solver = parse_solver(value);
    } catch (const std::exception& e) {
      throw ParseError(e.what(), 0);
    }
  }
  else if (key == "step") step = parse_number<double>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "epochs") {
    epochs = parse_number<int>(key, value);
    if (epochs < 0) throw ParseError("epochs must be >= 0", 0);
  }
  else if (key == "batch") batch = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "a0") a0 = parse_number<double>(key, value);
  else if (key == "b0") b0 = parse_number<double>(key, value);
  else if (key == "c0") c0 = parse_number<double>(key, value);
  else if (key == "d0") d0 = parse_number<double>(key, value);
  else if (key == "fard") fard = parse_switch(key, value);
  else if (key == "prune_power") prune_power = parse_number<double>(key, value);
  else if (key == "prune_lambda") prune_lambda = parse_number<double>(key, value);
  else if (key == "init_variational") init_variational = parse_number<double>(key, value);
  else throw StructuralError("unknown config key '" + key + "'");
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ParseError("expected key=value, got '" + assignment + "'", 0);
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      set(t);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "rank=" << rank << '\n'
      << "latent_dim=" << latent_dim << '\n'
      << "fourier_dim=" << fourier_dim << '\n'
      << "encoder_hidden=" << widths(encoder_hidden) << '\n'
      << "dynamics_hidden=" << widths(dynamics_hidden) << '\n'
      << "decoder_hidden=" << widths(decoder_hidden) << '\n'
      << "solver=" << to_string(solver) << '\n'
      << "step=" << step << '\n'
      << "lr=" << lr << '\n'
      << "epochs=" << epochs << '\n'
      << "batch=" << batch << '\n'
      << "seed=" << seed << '\n'
      << "a0=" << a0 << '\n'
      << "b0=" << b0 << '\n'
      << "c0=" << c0 << '\n'
      << "d0=" << d0 << '\n'
      << "fard=" << (fard ? "on" : "off") << '\n'
      << "prune_power=" << prune_power << '\n'
      << "prune_lambda=" << prune_lambda << '\n'
      << "init_variational=" << init_variational << '\n';
  return out.str();
}

ModelConfig RunConfig::model_config(int modes) const {
  ModelConfig c;
  c.modes = modes;
  c.shape.rank = rank;
  c.shape.latent_dim = latent_dim;
  c.shape.fourier_dim = fourier_dim;
  c.shape.encoder_hidden = encoder_hidden;
  c.shape.dynamics_hidden = dynamics_hidden;
  c.shape.decoder_hidden = decoder_hidden;
  c.solver = solver;
  c.step = step;
  c.init_variational = init_variational;
  c.seed = seed;
  return c;
}

PriorHyper RunConfig::prior() const {
  PriorHyper p;
  p.a0.assign(static_cast<std::size_t>(rank), a0);
  p.b0.assign(static_cast<std::size_t>(rank), b0);
  p.c0 = c0;
  p.d0 = d0;
  return p;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = lr;
  t.batch_size = batch;
  t.seed = seed;
  t.objective = fard ? Objective::elbo : Objective::rmse_only;
  return t;
}

RankThresholds RunConfig::thresholds() const { return {prune_power, prune_lambda}; }

}  // namespace catte
