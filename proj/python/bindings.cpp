// Python bindings: data, model construction, training, rank analysis and
// prediction. Arrays cross the boundary as NumPy float64.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "catte/checkpoint.hpp"
#include "catte/errors.hpp"
#include "catte/predict.hpp"
#include "catte/rank.hpp"
#include "catte/run_config.hpp"
#include "catte/specialmath.hpp"
#include "catte/version.hpp"

namespace py = pybind11;
using namespace catte;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

ObservationSet from_arrays(Array indexes, Array times, Array values) {
  if (indexes.ndim() != 2) throw StructuralError("indexes must be an N x K array");
  const auto n = indexes.shape(0);
  const auto K = static_cast<int>(indexes.shape(1));
  if (times.ndim() != 1 || values.ndim() != 1 || times.shape(0) != n || values.shape(0) != n) {
    throw StructuralError("times and values must be length-N vectors");
  }
  auto ix = indexes.unchecked<2>();
  auto t = times.unchecked<1>();
  auto y = values.unchecked<1>();
  std::vector<Observation> obs(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    auto& o = obs[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) o.index.push_back(ix(i, k));
    o.time = t(i);
    o.value = y(i);
  }
  return ObservationSet(K, std::move(obs), Normalization::identity(K));
}

py::array_t<double> index_matrix(const ObservationSet& s) {
  py::array_t<double> a({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(s.modes())});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t n = 0; n < s.size(); ++n) {
    for (int k = 0; k < s.modes(); ++k) m(static_cast<py::ssize_t>(n), k) = s[n].index[k];
  }
  return a;
}

std::vector<Query> queries_from(Array indexes, Array times) {
  if (indexes.ndim() != 2 || times.ndim() != 1 || indexes.shape(0) != times.shape(0)) {
    throw StructuralError("queries need an N x K index array and N times");
  }
  auto ix = indexes.unchecked<2>();
  auto t = times.unchecked<1>();
  std::vector<Query> q(static_cast<std::size_t>(times.shape(0)));
  for (py::ssize_t i = 0; i < times.shape(0); ++i) {
    for (py::ssize_t k = 0; k < indexes.shape(1); ++k) q[static_cast<std::size_t>(i)].index.push_back(ix(i, k));
    q[static_cast<std::size_t>(i)].time = t(i);
  }
  return q;
}

// Keyword arguments are RunConfig keys; values are converted with str().
RunConfig config_from(const py::kwargs& kwargs) {
  RunConfig rc;
  for (const auto& [k, v] : kwargs) {
    std::string value;
    if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "on" : "off";
    else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& w : v) value += (value.empty() ? "" : ",") + py::str(w).cast<std::string>();
    } else value = py::str(v).cast<std::string>();
    rc.set(k.cast<std::string>(), value);
  }
  return rc;
}

py::dict history_dict(const TrainHistory& h) {
  std::vector<double> epoch, objective, elbo;
  const std::size_t R = h.epochs.empty() ? 0 : h.epochs.front().power.size();
  py::array_t<double> lam({static_cast<py::ssize_t>(h.epochs.size()), static_cast<py::ssize_t>(R)});
  py::array_t<double> pow({static_cast<py::ssize_t>(h.epochs.size()), static_cast<py::ssize_t>(R)});
  auto l = lam.mutable_unchecked<2>();
  auto p = pow.mutable_unchecked<2>();
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    epoch.push_back(h.epochs[e].epoch);
    objective.push_back(h.epochs[e].objective);
    elbo.push_back(h.epochs[e].elbo);
    for (std::size_t r = 0; r < R; ++r) {
      l(static_cast<py::ssize_t>(e), static_cast<py::ssize_t>(r)) = h.epochs[e].expected_lambda[r];
      p(static_cast<py::ssize_t>(e), static_cast<py::ssize_t>(r)) = h.epochs[e].power[r];
    }
  }
  py::dict d;
  d["epoch"] = to_array(epoch);
  d["objective"] = to_array(objective);
  d["elbo"] = to_array(elbo);
  d["expected_lambda"] = lam;
  d["power"] = pow;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Continuous-indexed temporal tensor decomposition with rank determination";
  m.attr("__version__") = std::string(version());

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_ArithmeticError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // special functions
  m.def("log_gamma", &log_gamma, py::arg("x"));
  m.def("digamma", &digamma, py::arg("x"));
  m.def("trigamma", &trigamma, py::arg("x"));
  m.def("kl_gaussian", [](double m1, double v1, double m2, double v2) {
    return kl_gaussian({m1, v1}, {m2, v2});
  }, py::arg("mean1"), py::arg("var1"), py::arg("mean2"), py::arg("var2"));
  m.def("kl_gamma", [](double a1, double b1, double a2, double b2) {
    return kl_gamma({a1, b1}, {a2, b2});
  }, py::arg("shape1"), py::arg("rate1"), py::arg("shape2"), py::arg("rate2"));

  // data
  py::class_<ObservationSet>(m, "ObservationSet")
      .def(py::init(&from_arrays), py::arg("indexes"), py::arg("times"), py::arg("values"),
           "Coordinates are taken as already normalized to [0, 1].")
      .def_property_readonly("modes", &ObservationSet::modes)
      .def("__len__", &ObservationSet::size)
      .def_property_readonly("indexes", &index_matrix)
      .def_property_readonly("times", [](const ObservationSet& s) { return to_array(s.times()); })
      .def_property_readonly("values", [](const ObservationSet& s) { return to_array(s.values()); })
      .def("unique_indexes", [](const ObservationSet& s, int k) {
        if (k < 0 || k >= s.modes()) throw StructuralError("mode out of range");
        return to_array(s.unique_indexes(k));
      })
      .def_property_readonly("unique_times", [](const ObservationSet& s) { return to_array(s.unique_times()); })
      .def("subset", [](const ObservationSet& s, std::vector<std::size_t> rows) {
        for (std::size_t r : rows) {
          if (r >= s.size()) throw StructuralError("row out of range");
        }
        return s.subset(rows);
      });

  m.def("load_csv", [](const std::filesystem::path& p) { return load_csv(p); }, py::arg("path"));
  m.def("save_csv", &save_csv, py::arg("path"), py::arg("data"));
  m.def("gen_synthetic", [](int n1, int n2, int nt, double noise, std::uint64_t seed,
                            const std::string& sampling) {
    SyntheticConfig c{n1, n2, nt, noise, seed, Sampling::lattice};
    if (sampling == "iid") c.sampling = Sampling::iid;
    else if (sampling != "lattice") throw DomainError("sampling must be lattice or iid");
    SyntheticData d = gen_synthetic(c);
    return py::make_tuple(std::move(d.noisy), to_array(d.clean));
  }, py::arg("n1") = 25, py::arg("n2") = 25, py::arg("nt") = 50, py::arg("noise") = 0.05,
     py::arg("seed") = 0, py::arg("sampling") = "lattice",
     "Returns (observations, clean values).");
  m.def("split", [](const ObservationSet& s, double fraction, std::uint64_t seed) {
    const SplitIndices idx = split_indices(s, {fraction, seed, std::nullopt});
    return py::make_tuple(idx.train, idx.test);
  }, py::arg("data"), py::arg("train_fraction") = 0.8, py::arg("seed") = 0,
     "Returns (train rows, test rows).");
  m.def("add_noise", [](const ObservationSet& s, const std::string& law, double variance,
                        std::uint64_t seed) {
    return add_noise(s, parse_noise_law(law), variance, seed);
  }, py::arg("data"), py::arg("law"), py::arg("variance"), py::arg("seed") = 0);

  // model
  py::class_<CatteModel>(m, "Model")
      .def(py::init([](int modes, const py::kwargs& kwargs) {
             const RunConfig rc = config_from(kwargs);
             return CatteModel(rc.model_config(modes), rc.prior());
           }), py::arg("modes"),
           "Keyword arguments are run-config keys (rank, latent_dim, fourier_dim, width, "
           "solver, step, seed, a0, b0, c0, d0, init_variational, ...).")
      .def_property_readonly("rank", &CatteModel::rank)
      .def_property_readonly("modes", &CatteModel::modes)
      .def_readonly("epochs_trained", &CatteModel::epochs_trained)
      .def_property_readonly("variational", [](const CatteModel& mdl) {
        const VariationalState vs = mdl.variational();
        py::dict d;
        d["alpha"] = to_array(vs.alpha);
        d["beta"] = to_array(vs.beta);
        d["sigma2"] = vs.sigma2;
        d["rho"] = vs.rho;
        d["iota"] = vs.iota;
        return d;
      })
      .def("parameter_names", [](const CatteModel& mdl) {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < mdl.params().size(); ++i) names.push_back(mdl.params().name(i));
        return names;
      })
      .def("copy", [](const CatteModel& mdl) { return CatteModel(mdl); });

  m.def("train", [](const ObservationSet& data, CatteModel& model, int epochs, double lr,
                    std::size_t batch, std::uint64_t seed, const std::string& objective,
                    int kl_hold, int kl_ramp, bool conjugate_updates) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.learning_rate = lr;
    tc.batch_size = batch;
    tc.seed = seed;
    tc.objective = parse_objective(objective);
    tc.kl_hold = kl_hold;
    tc.kl_ramp = kl_ramp;
    tc.conjugate_updates = conjugate_updates;
    TrainHistory h;
    {
      py::gil_scoped_release release;
      h = train(data, model, tc);
    }
    return history_dict(h);
  }, py::arg("data"), py::arg("model"), py::arg("epochs") = 2000, py::arg("lr") = 5e-3,
     py::arg("batch") = 0, py::arg("seed") = 0, py::arg("objective") = "elbo",
     py::arg("kl_hold") = 0, py::arg("kl_ramp") = 0, py::arg("conjugate_updates") = false,
     "Trains in place; returns the per-epoch history.");
  m.def("elbo", &catte::elbo, py::arg("data"), py::arg("model"));
  m.def("component_power", [](const CatteModel& mdl, const ObservationSet& d) {
    return to_array(component_power(mdl, d));
  }, py::arg("model"), py::arg("data"));
  m.def("rank_report", [](const CatteModel& mdl, const ObservationSet& d, double power_ratio,
                          double lambda_ratio) {
    const RankReport r = rank_report(mdl, d, {power_ratio, lambda_ratio});
    std::vector<double> lam, power;
    for (const RankEntry& e : r.ranks) {
      lam.push_back(e.expected_lambda);
      power.push_back(e.power);
    }
    py::dict out;
    out["revealed_rank"] = r.revealed_rank;
    out["active"] = r.active;
    out["expected_lambda"] = to_array(lam);
    out["power"] = to_array(power);
    out["text"] = r.text();
    return out;
  }, py::arg("model"), py::arg("data"), py::arg("power_ratio") = 1e-2,
     py::arg("lambda_ratio") = 10.0);
  m.def("prune", [](const CatteModel& mdl, const std::vector<int>& active) {
    return prune(mdl, active);
  }, py::arg("model"), py::arg("active"));

  m.def("predict", [](const CatteModel& mdl, Array indexes, Array times) {
    const auto laws = predict(mdl, queries_from(indexes, times));
    std::vector<double> mean, precision, dof;
    for (const PredictiveLaw& l : laws) {
      mean.push_back(l.mean);
      precision.push_back(l.precision);
      dof.push_back(l.dof);
    }
    return py::make_tuple(to_array(mean), to_array(precision), to_array(dof));
  }, py::arg("model"), py::arg("indexes"), py::arg("times"),
     "Student-t predictive laws; returns (mean, precision, dof) arrays.");
  m.def("predict_interval", [](double mean, double precision, double dof, double level) {
    const auto [lo, hi] = predict_interval({mean, precision, dof}, level);
    return py::make_tuple(lo, hi);
  }, py::arg("mean"), py::arg("precision"), py::arg("dof"), py::arg("level") = 0.95);
  m.def("evaluate", [](const CatteModel& mdl, const ObservationSet& test) {
    const Metrics r = evaluate(mdl, test);
    return py::make_tuple(r.rmse, r.mae);
  }, py::arg("model"), py::arg("test"), "Returns (rmse, mae) of the predictive mean.");

  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("model"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
}
