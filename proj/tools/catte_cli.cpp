// catte: command-line front end.
//
//   catte synth       --out DIR
//   catte train       --data train.csv --run NAME
//   catte rank-report --checkpoint runs/NAME/checkpoint --data train.csv
//   catte predict     --checkpoint ... --queries q.csv --out pred.csv
//   catte eval        --checkpoint ... --test test.csv

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catte/checkpoint.hpp"
#include "catte/errors.hpp"
#include "catte/predict.hpp"
#include "catte/rank.hpp"
#include "catte/run_config.hpp"
#include "catte/version.hpp"

namespace fs = std::filesystem;
using namespace catte;

namespace {

// Usage problems found after CLI11 parsing (bad dims, arity mismatch).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

std::string header_of(int modes) {
  std::string h;
  for (int k = 1; k <= modes; ++k) h += "i_" + std::to_string(k) + ",";
  return h + "t";
}

// -- synth --------------------------------------------------------------------

struct SynthArgs {
  fs::path out = "data";
  SyntheticConfig cfg;
  std::string sampling = "lattice";
  std::string noise_law = "gaussian";
  double train_fraction = 0.2;
};

void write_truth(const fs::path& path, const ObservationSet& set, const std::vector<double>& clean) {
  save_csv(path, set.with_values(clean));
}

int run_synth(const SynthArgs& a) {
  if (a.cfg.n1 <= 0 || a.cfg.n2 <= 0 || a.cfg.nt <= 0) {
    throw UsageError("synth: --n1, --n2 and --nt must be positive");
  }
  if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0)) {
    throw UsageError("synth: --train-fraction must lie in (0, 1)");
  }
  SyntheticConfig cfg = a.cfg;
  if (a.sampling == "lattice") cfg.sampling = Sampling::lattice;
  else if (a.sampling == "iid") cfg.sampling = Sampling::iid;
  else throw UsageError("synth: --sampling must be lattice or iid");

  const NoiseLaw law = parse_noise_law(a.noise_law);
  SyntheticData data;
  if (law == NoiseLaw::gaussian) {
    data = gen_synthetic(cfg);
  } else {
    cfg.noise_variance = 0.0;
    data = gen_synthetic(cfg);
    data.noisy = add_noise(data.noisy, law, a.cfg.noise_variance, cfg.seed + 1);
  }

  SplitSpec spec;
  spec.train_fraction = a.train_fraction;
  spec.seed = cfg.seed;
  const SplitIndices idx = split_indices(data.noisy, spec);
  std::vector<double> test_clean;
  for (std::size_t r : idx.test) test_clean.push_back(data.clean[r]);

  fs::create_directories(a.out);
  save_csv(a.out / "train.csv", data.noisy.subset(idx.train));
  save_csv(a.out / "test.csv", data.noisy.subset(idx.test));
  write_truth(a.out / "truth.csv", data.noisy, data.clean);
  write_truth(a.out / "test_truth.csv", data.noisy.subset(idx.test), test_clean);
  std::cout << "wrote " << idx.train.size() << " train and " << idx.test.size()
            << " test entries to " << a.out.string() << "\n";
  return 0;
}

// -- train --------------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  std::string run;
  fs::path runs_dir = "runs";
  fs::path config;
  fs::path resume;
  std::vector<std::string> sets;
  std::optional<int> epochs, rank, latent, fourier, width;
  std::optional<std::string> solver, objective;
  std::optional<double> lr, step;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  int checkpoint_every = 0;
  int log_every = 100;
};

int run_train(const TrainArgs& a) {
  require_file(a.data, "data file");
  RunConfig rc;
  if (!a.config.empty()) rc.load(a.config);
  for (const auto& s : a.sets) rc.set(s);
  if (a.epochs) rc.epochs = *a.epochs;
  if (a.rank) rc.set("rank", std::to_string(*a.rank));
  if (a.latent) rc.set("latent_dim", std::to_string(*a.latent));
  if (a.fourier) rc.set("fourier_dim", std::to_string(*a.fourier));
  if (a.width) rc.set("width", std::to_string(*a.width));
  if (a.solver) rc.set("solver", *a.solver);
  if (a.objective) rc.fard = parse_objective(*a.objective) == Objective::elbo;
  if (a.lr) rc.lr = *a.lr;
  if (a.step) rc.step = *a.step;
  if (a.batch) rc.batch = *a.batch;
  if (a.seed) rc.seed = *a.seed;

  std::optional<CatteModel> model;
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    model.emplace(load_checkpoint(a.resume));
  }
  const ObservationSet data = model ? load_csv(a.data, model->normalization()) : load_csv(a.data);
  if (!model) {
    model.emplace(rc.model_config(data.modes()), rc.prior());
    model->set_normalization(data.normalization());
  } else if (model->modes() != data.modes()) {
    throw UsageError("train: data has " + std::to_string(data.modes()) +
                     " modes, checkpoint expects " + std::to_string(model->modes()));
  }

  const fs::path dir = a.runs_dir / a.run;
  fs::create_directories(dir / "report");
  write_text(dir / "config", rc.to_text());
  write_text(dir / "seed", std::to_string(rc.seed) + "\n");
  write_text(dir / "version", std::string(version()) + "\n");

  TrainConfig tc = rc.train_config();
  const auto start = std::chrono::steady_clock::now();
  tc.on_epoch = [&](const CatteModel& m, const EpochRecord& r) {
    if (a.log_every > 0 && r.epoch % a.log_every == 0) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cerr << "epoch " << r.epoch << "  objective " << r.objective << "  elbo " << r.elbo
                << "  (" << std::fixed << std::setprecision(1) << secs << "s)\n"
                << std::defaultfloat;
    }
    if (a.checkpoint_every > 0 && r.epoch % a.checkpoint_every == 0) {
      save_checkpoint(dir / "checkpoint", m);
    }
  };
  const TrainHistory history = train(data, *model, tc);
  history.write_csv(dir / "history.csv");
  save_checkpoint(dir / "checkpoint", *model);

  const RankReport report = rank_report(*model, data, rc.thresholds());
  report.write_csv(dir / "report" / "rank.csv");
  std::cout << report.text();
  return 0;
}

// -- rank-report ----------------------------------------------------------------

struct RankArgs {
  fs::path checkpoint;
  fs::path data;
  fs::path out;
  RankThresholds thresholds;
};

int run_rank_report(const RankArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "data file");
  const CatteModel model = load_checkpoint(a.checkpoint);
  const ObservationSet data = load_csv(a.data, model.normalization());
  const RankReport report = rank_report(model, data, a.thresholds);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    report.write_csv(a.out / "rank.csv");
  }
  std::cout << report.text();
  return 0;
}

// -- predict --------------------------------------------------------------------

// Query file: header i_1..i_K,t with an optional trailing y column.
std::vector<Query> load_queries(const fs::path& path, const CatteModel& model) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty query file", 1);
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      cols.push_back(c);
    }
  }
  if (!cols.empty() && cols.back() == "y") cols.pop_back();
  if (cols.empty() || cols.back() != "t") throw ParseError("query header must end in t or t,y", 1);
  const int modes = static_cast<int>(cols.size()) - 1;
  if (modes != model.modes()) {
    throw UsageError("queries have " + std::to_string(modes) + " index columns, model has " +
                     std::to_string(model.modes()));
  }
  const Normalization& norm = model.normalization();
  std::vector<Query> queries;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ParseError("bad number '" + cell + "'", lineno);
      }
    }
    if (v.size() < static_cast<std::size_t>(modes) + 1) throw ParseError("too few columns", lineno);
    Query q;
    for (int k = 0; k < modes; ++k) q.index.push_back(norm.modes[k].normalize(v[k]));
    q.time = norm.time.normalize(v[modes]);
    queries.push_back(std::move(q));
  }
  return queries;
}

struct PredictArgs {
  fs::path checkpoint;
  fs::path queries;
  fs::path out;
  double level = 0.95;
};

int run_predict(const PredictArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.queries, "query file");
  if (!(a.level > 0.0 && a.level < 1.0)) throw UsageError("predict: --level must lie in (0, 1)");
  const CatteModel model = load_checkpoint(a.checkpoint);
  const std::vector<Query> queries = load_queries(a.queries, model);
  const std::vector<PredictiveLaw> laws = predict(model, queries);

  std::ofstream out(a.out);
  if (!out) throw IoError("cannot write " + a.out.string());
  out << std::setprecision(17) << header_of(model.modes()) << ",mean,scale,dof,lo,hi\n";
  const Normalization& norm = model.normalization();
  for (std::size_t n = 0; n < queries.size(); ++n) {
    const auto [lo, hi] = predict_interval(laws[n], a.level);
    for (int k = 0; k < model.modes(); ++k) out << norm.modes[k].denormalize(queries[n].index[k]) << ',';
    out << norm.time.denormalize(queries[n].time) << ',' << laws[n].mean << ','
        << 1.0 / std::sqrt(laws[n].precision) << ',' << laws[n].dof << ',' << lo << ',' << hi
        << '\n';
  }
  std::cout << "wrote " << queries.size() << " predictions to " << a.out.string() << "\n";
  return 0;
}

// -- eval -----------------------------------------------------------------------

struct EvalArgs {
  fs::path checkpoint;
  fs::path test;
};

int run_eval(const EvalArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.test, "test file");
  const CatteModel model = load_checkpoint(a.checkpoint);
  const ObservationSet test = load_csv(a.test, model.normalization());
  if (test.modes() != model.modes()) throw UsageError("eval: mode count mismatch");
  const Metrics m = evaluate(model, test);
  std::cout << std::setprecision(8) << "n,rmse,mae\n"
            << test.size() << ',' << m.rmse << ',' << m.mae << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-indexed temporal tensor decomposition with rank determination"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate the synthetic data set and ground truth");
  s->add_option("--out", synth.out, "output directory")->capture_default_str();
  s->add_option("--n1", synth.cfg.n1, "distinct mode-1 indexes")->capture_default_str();
  s->add_option("--n2", synth.cfg.n2, "distinct mode-2 indexes")->capture_default_str();
  s->add_option("--nt", synth.cfg.nt, "distinct timestamps")->capture_default_str();
  s->add_option("--noise", synth.cfg.noise_variance, "noise variance")->capture_default_str();
  s->add_option("--noise-law", synth.noise_law, "gaussian, laplacian or poisson")
      ->capture_default_str();
  s->add_option("--sampling", synth.sampling, "lattice or iid")->capture_default_str();
  s->add_option("--train-fraction", synth.train_fraction)->capture_default_str();
  s->add_option("--seed", synth.cfg.seed)->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "fit a model; writes runs/<name>/");
  t->add_option("--data", tr.data, "training CSV (i_1..i_K,t,y)")->required();
  t->add_option("--run", tr.run, "run name")->required();
  t->add_option("--runs-dir", tr.runs_dir)->capture_default_str();
  t->add_option("--config", tr.config, "key=value config file");
  t->add_option("--set", tr.sets, "config override key=value (repeatable)");
  t->add_option("--resume", tr.resume, "continue from a checkpoint");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--rank,-R", tr.rank);
  t->add_option("--latent-dim,-J", tr.latent);
  t->add_option("--fourier-dim,-M", tr.fourier);
  t->add_option("--width", tr.width, "width of every hidden layer");
  t->add_option("--solver", tr.solver, "euler or rk4");
  t->add_option("--objective", tr.objective, "elbo or rmse-only");
  t->add_option("--lr", tr.lr);
  t->add_option("--step", tr.step, "integration step (0: automatic)");
  t->add_option("--batch", tr.batch, "mini-batch size (0: full batch)");
  t->add_option("--seed", tr.seed);
  t->add_option("--checkpoint-every", tr.checkpoint_every)->capture_default_str();
  t->add_option("--log-every", tr.log_every)->capture_default_str();

  RankArgs rk;
  auto* r = app.add_subcommand("rank-report", "power and E[lambda] per component");
  r->add_option("--checkpoint", rk.checkpoint)->required();
  r->add_option("--data", rk.data, "data the powers are measured on")->required();
  r->add_option("--out", rk.out, "directory for rank.csv");
  r->add_option("--prune-power", rk.thresholds.power_ratio)->capture_default_str();
  r->add_option("--prune-lambda", rk.thresholds.lambda_ratio)->capture_default_str();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Student-t predictive at query coordinates");
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--queries", pr.queries, "CSV with i_1..i_K,t[,y]")->required();
  p->add_option("--out", pr.out)->required();
  p->add_option("--level", pr.level, "interval probability")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "RMSE and MAE of the predictive mean on a test file");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--test", ev.test)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(tr);
    if (*r) return run_rank_report(rk);
    if (*p) return run_predict(pr);
    if (*e) return run_eval(ev);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const ParseError& err) {
    std::cerr << "parse error";
    if (err.line() > 0) std::cerr << " (line " << err.line() << ")";
    std::cerr << ": " << err.what() << "\n";
    return 3;
  } catch (const IoError& err) {
    std::cerr << "io error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
