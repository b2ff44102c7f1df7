// Python bindings for the main operations: model building and I/O, spectral
// analysis, kernels, tensor algebra, counting identities, path simulation,
// moment formulas and the variational machinery.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iml/acceptance.hpp"
#include "iml/counting.hpp"
#include "iml/examples.hpp"
#include "iml/ldp.hpp"
#include "iml/moments.hpp"
#include "iml/path.hpp"
#include "iml/zoo.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

iml::SymmetricMarkovModel make_model(const Eigen::VectorXd& m, const Eigen::MatrixXd& L,
                                     std::optional<Eigen::MatrixXd> metric,
                                     const std::string& label) {
    iml::ModelSpec spec;
    spec.measure = m;
    spec.generator = L;
    spec.metric = std::move(metric);
    spec.label = label;
    return iml::build_model(spec);
}

std::vector<const iml::SpectralDecomposition*> spec_ptrs(
    const std::vector<iml::SpectralDecomposition>& specs) {
    std::vector<const iml::SpectralDecomposition*> out;
    out.reserve(specs.size());
    for (const auto& spec : specs) out.push_back(&spec);
    return out;
}

iml::CountingInstance make_instance(int alphabet_size, int p, std::vector<int> s1,
                                    std::vector<int> s2,
                                    std::vector<std::vector<int>> f_prime,
                                    std::map<int, std::vector<int>> labels,
                                    const std::map<std::vector<int>, long long>& a_mass,
                                    const std::map<std::vector<int>, long long>& r_mass) {
    iml::CountingInstance inst;
    inst.alphabet_size = alphabet_size;
    inst.p = p;
    inst.s1_star = std::move(s1);
    inst.s2_star = std::move(s2);
    inst.f_prime = std::move(f_prime);
    inst.labels = std::move(labels);
    for (const auto& [point, count] : a_mass) inst.a_measure.add(point, count);
    for (const auto& [point, count] : r_mass) inst.r_measure.add(point, count);
    inst.validate();
    return inst;
}

} // namespace

PYBIND11_MODULE(_iml, module) {
    module.doc() = "finite-space lab for symmetric Markov semigroups, intersection "
                   "measures and their large-deviation functionals";

    py::register_exception<iml::Error>(module, "ImlError");

    py::class_<iml::SymmetricMarkovModel>(module, "Model")
        .def(py::init(&make_model), "m"_a, "L"_a, "metric"_a = py::none(), "label"_a = "")
        .def_readonly("measure", &iml::SymmetricMarkovModel::measure)
        .def_readonly("generator", &iml::SymmetricMarkovModel::generator)
        .def_readonly("states", &iml::SymmetricMarkovModel::states)
        .def_readonly("label", &iml::SymmetricMarkovModel::label)
        .def_property_readonly("metric",
                               [](const iml::SymmetricMarkovModel& model) {
                                   return model.metric ? py::cast(*model.metric)
                                                       : py::none().cast<py::object>();
                               })
        .def("size", &iml::SymmetricMarkovModel::size)
        .def("killing_rate", &iml::SymmetricMarkovModel::killing_rate, "x"_a)
        .def("conservative", &iml::SymmetricMarkovModel::conservative, "tol"_a = 1e-12)
        .def("to_json", &iml::model_to_json, "indent"_a = 2)
        .def("save", &iml::save_model, "path"_a)
        .def_static("from_json", &iml::model_from_json, "text"_a)
        .def_static("load", &iml::load_model, "path"_a);

    py::class_<iml::SpectralDecomposition>(module, "Spectral")
        .def(py::init(&iml::spectral_decompose), "model"_a)
        .def_readonly("eigenvalues", &iml::SpectralDecomposition::eigenvalues)
        .def_readonly("eigenfunctions", &iml::SpectralDecomposition::eigenfunctions)
        .def_readonly("model", &iml::SpectralDecomposition::model)
        .def("lambda1", &iml::SpectralDecomposition::lambda1)
        .def("heat_kernel",
             [](const iml::SpectralDecomposition& spec, double t) {
                 return iml::heat_kernel(spec, t).values;
             },
             "t"_a)
        .def("resolvent_kernel",
             [](const iml::SpectralDecomposition& spec) {
                 return iml::resolvent_kernel(spec).values;
             })
        .def("truncated_resolvent_kernel",
             [](const iml::SpectralDecomposition& spec, double delta) {
                 return iml::truncated_resolvent_kernel(spec, delta).values;
             },
             "delta"_a)
        .def("survival_probability", &iml::survival_probability, "x0"_a, "t"_a)
        .def("log_survival_probability", &iml::log_survival_probability, "x0"_a, "t"_a)
        .def("apply_semigroup", &iml::apply_semigroup, "t"_a, "f"_a);

    module.def("spectral_decompose", &iml::spectral_decompose, "model"_a);
    module.def("dirichlet_energy", &iml::dirichlet_energy, "model"_a, "f"_a);

    // Zoo builders and fits.
    module.def("build_gasket_graph", &iml::build_gasket_graph, "level"_a);
    module.def(
        "build_grid",
        [](const std::vector<int>& dims, const std::string& boundary) {
            return iml::build_grid(dims, boundary == "absorbing"
                                             ? iml::Boundary::Absorbing
                                             : iml::Boundary::Reflecting);
        },
        "dims"_a, "boundary"_a = "reflecting");
    module.def("build_long_range_torus", &iml::build_long_range_torus, "n"_a, "alpha"_a);
    module.def(
        "fit_trace_exponent",
        [](const iml::SpectralDecomposition& spec, double t_min, double t_max, int samples) {
            const auto fit = iml::fit_trace_exponent(spec, t_min, t_max, samples);
            return py::make_tuple(fit.exponent_hat, fit.residual, fit.flat_window);
        },
        "spec"_a, "t_min"_a, "t_max"_a, "samples"_a = 12);
    module.def(
        "fit_ultracontractivity",
        [](const iml::SpectralDecomposition& spec, double t_min, double t_max, int samples) {
            const auto fit = iml::fit_ultracontractivity(spec, t_min, t_max, samples);
            return py::make_tuple(fit.exponent_hat, fit.residual, fit.flat_window);
        },
        "spec"_a, "t_min"_a, "t_max"_a, "samples"_a = 12);
    module.def(
        "suggested_fit_window",
        [](const iml::SpectralDecomposition& spec, double d_w) {
            return iml::suggested_fit_window(spec, d_w);
        },
        "spec"_a, "d_w_nominal"_a);
    module.def(
        "admissible_p",
        [](double d_f, double d_w) {
            const auto p = iml::admissible_p(d_f, d_w);
            return p.value_or_inf();
        },
        "d_f"_a, "d_w"_a);

    // Tensor algebra (kernels in the m-weighted convention).
    py::class_<iml::DenseTensor>(module, "DenseTensor")
        .def(py::init<int, int>(), "order"_a, "extent"_a)
        .def("order", &iml::DenseTensor::order)
        .def("extent", &iml::DenseTensor::extent)
        .def("__getitem__",
             [](const iml::DenseTensor& t, const std::vector<int>& idx) { return t.at(idx); })
        .def("__setitem__", [](iml::DenseTensor& t, const std::vector<int>& idx,
                               double v) { t.at(idx) = v; })
        .def("values", [](const iml::DenseTensor& t) { return t.values(); })
        .def("save", &iml::DenseTensor::save, "path"_a)
        .def_static("load", &iml::DenseTensor::load, "path"_a);

    module.def(
        "tensor_product_apply",
        [](const std::vector<Eigen::MatrixXd>& ops, const Eigen::VectorXd& m,
           const iml::DenseTensor& tensor) { return iml::tensor_product_apply(ops, m, tensor); },
        "ops"_a, "m"_a, "tensor"_a);
    module.def(
        "permuted_tensor_apply",
        [](const std::vector<Eigen::MatrixXd>& ops, const std::vector<int>& sigma,
           const Eigen::VectorXd& m, const iml::DenseTensor& tensor) {
            return iml::permuted_tensor_apply(ops, iml::Permutation{sigma}, m, tensor);
        },
        "ops"_a, "sigma"_a, "m"_a, "tensor"_a);
    module.def(
        "mixed_permuted_apply",
        [](int m_id, const Eigen::MatrixXd& smoother, const std::vector<int>& sigma,
           const Eigen::VectorXd& m, const iml::DenseTensor& tensor) {
            return iml::mixed_permuted_apply(m_id, smoother, iml::Permutation{sigma}, m,
                                             tensor);
        },
        "m_id"_a, "smoother"_a, "sigma"_a, "m"_a, "tensor"_a);
    module.def("markov_interpolation_check", &iml::markov_interpolation_check, "kernel"_a,
               "m"_a, "f"_a, "g"_a, "p"_a);
    module.def("lp_contraction_check", &iml::lp_contraction_check, "spec"_a, "t"_a, "p"_a,
               "trials"_a, "seed"_a);
    module.def("lp_norm", &iml::lp_norm, "f"_a, "m"_a, "p"_a);

    // Counting identities (values as python ints via strings are unnecessary:
    // counts at the guarded sizes fit in long long, checked on conversion).
    module.def(
        "count_psi_closed_form",
        [](int alphabet_size, int p, std::vector<int> s1, std::vector<int> s2,
           std::vector<std::vector<int>> f_prime, std::map<int, std::vector<int>> labels,
           const std::map<std::vector<int>, long long>& a,
           const std::map<std::vector<int>, long long>& r) {
            const auto inst = make_instance(alphabet_size, p, std::move(s1), std::move(s2),
                                            std::move(f_prime), std::move(labels), a, r);
            return iml::count_psi_closed_form(inst).convert_to<long long>();
        },
        "alphabet_size"_a, "p"_a, "s1_star"_a, "s2_star"_a, "f_prime"_a, "labels"_a, "A"_a,
        "r"_a);
    module.def(
        "enumerate_psi_bruteforce",
        [](int alphabet_size, int p, std::vector<int> s1, std::vector<int> s2,
           std::vector<std::vector<int>> f_prime, std::map<int, std::vector<int>> labels,
           const std::map<std::vector<int>, long long>& a,
           const std::map<std::vector<int>, long long>& r) {
            const auto inst = make_instance(alphabet_size, p, std::move(s1), std::move(s2),
                                            std::move(f_prime), std::move(labels), a, r);
            const auto result = iml::enumerate_psi_bruteforce(inst);
            return py::make_tuple(result.count.convert_to<long long>(), result.witnesses);
        },
        "alphabet_size"_a, "p"_a, "s1_star"_a, "s2_star"_a, "f_prime"_a, "labels"_a, "A"_a,
        "r"_a);

    // Path simulation and intersection measures.
    py::class_<iml::PathSample>(module, "PathSample")
        .def_readonly("states", &iml::PathSample::states)
        .def_readonly("sojourns", &iml::PathSample::sojourns)
        .def_readonly("horizon", &iml::PathSample::horizon)
        .def_readonly("survived", &iml::PathSample::survived);

    module.def(
        "sample_path",
        [](const iml::SymmetricMarkovModel& model, int x0, double t, std::uint64_t seed,
           std::uint64_t stream) {
            iml::RngStream rng(seed, stream);
            return iml::sample_path(model, x0, t, rng);
        },
        "model"_a, "x0"_a, "t"_a, "seed"_a, "stream"_a = 0);
    module.def(
        "occupation_measure",
        [](const iml::PathSample& path, int n_states) {
            return iml::occupation_measure(path, n_states).masses;
        },
        "path"_a, "n_states"_a);
    module.def("smoothed_occupation_density", &iml::smoothed_occupation_density, "path"_a,
               "spec"_a, "eps"_a);
    module.def(
        "sample_surviving_tuples",
        [](const std::vector<iml::SymmetricMarkovModel>& models, const std::vector<int>& x0s,
           double t, std::int64_t n, std::uint64_t seed, int threads) {
            std::vector<const iml::SymmetricMarkovModel*> ptrs;
            for (const auto& model : models) ptrs.push_back(&model);
            auto ensemble = iml::sample_surviving_tuples(ptrs, x0s, t, n, seed, threads);
            return py::make_tuple(ensemble.tuples, ensemble.stats.acceptance_rate);
        },
        "models"_a, "x0s"_a, "t"_a, "n"_a, "seed"_a, "threads"_a = 0);
    module.def(
        "intersection_measure_exact",
        [](const std::vector<iml::PathSample>& paths, const Eigen::VectorXd& m) {
            return iml::intersection_measure_exact(paths, m).masses;
        },
        "paths"_a, "m"_a);
    module.def(
        "intersection_measure_smoothed",
        [](const std::vector<iml::PathSample>& paths,
           const std::vector<iml::SpectralDecomposition>& specs, double eps) {
            return iml::intersection_measure_smoothed(paths, spec_ptrs(specs), eps).masses;
        },
        "paths"_a, "specs"_a, "eps"_a);

    // Moment machinery.
    module.def("simplex_exp_integral", &iml::simplex_exp_integral, "lambdas"_a, "t"_a);
    module.def("h_t_tensor", &iml::h_t_tensor, "spec"_a, "x0"_a, "t"_a, "k"_a);
    module.def(
        "mixed_moment_formula",
        [](const std::vector<iml::SpectralDecomposition>& specs, const std::vector<int>& x0s,
           const Eigen::VectorXd& f, double t, int k, int m, double eps) {
            return iml::mixed_moment_formula(spec_ptrs(specs), x0s, f, t, k, m, eps);
        },
        "specs"_a, "x0s"_a, "f"_a, "t"_a, "k"_a, "m"_a, "eps"_a);
    module.def(
        "alternating_moment_formula",
        [](const std::vector<iml::SpectralDecomposition>& specs, const std::vector<int>& x0s,
           const Eigen::VectorXd& f, double t, int k, double eps) {
            return iml::alternating_moment_formula(spec_ptrs(specs), x0s, f, t, k, eps);
        },
        "specs"_a, "x0s"_a, "f"_a, "t"_a, "k"_a, "eps"_a);

    // Rate functions and the variational machinery.
    module.def("rate_I", &iml::rate_I, "model"_a, "mu"_a);
    module.def("rate_J", &iml::rate_J, "spec"_a, "mu"_a);
    module.def(
        "rate_bold_J",
        [](const std::vector<iml::SpectralDecomposition>& specs, const Eigen::VectorXd& mu,
           const std::vector<Eigen::VectorXd>& mus) {
            return iml::rate_bold_J(spec_ptrs(specs), mu, mus).value_or_inf();
        },
        "specs"_a, "mu"_a, "mus"_a);
    module.def(
        "rate_J_eps",
        [](const iml::SpectralDecomposition& spec, const Eigen::VectorXd& nu, double eps) {
            return iml::rate_J_eps(spec, nu, eps).value_or_inf();
        },
        "spec"_a, "nu"_a, "eps"_a);
    module.def(
        "variational_N",
        [](const iml::SpectralDecomposition& spec, double theta, double eps,
           const Eigen::VectorXd& h, int p, bool certify) {
            const auto result = iml::variational_N(spec, theta, eps, h, p, certify);
            py::dict out;
            out["value"] = result.value;
            out["argmax"] = result.argmax;
            out["starts"] = result.trace.starts;
            if (result.certificate_gap) out["certificate_gap"] = *result.certificate_gap;
            return out;
        },
        "spec"_a, "theta"_a, "eps"_a, "h"_a, "p"_a, "certify"_a = false);
    module.def(
        "mgf_rhs",
        [](const std::vector<iml::SpectralDecomposition>& specs, double theta,
           const Eigen::VectorXd& h, int p) {
            return iml::mgf_rhs(spec_ptrs(specs), theta, h, p);
        },
        "specs"_a, "theta"_a, "h"_a, "p"_a);
    module.def("tilted_principal_eigenvalue", &iml::tilted_principal_eigenvalue, "model"_a,
               "V"_a);
    module.def(
        "occupation_varadhan_check",
        [](const iml::SpectralDecomposition& spec, const Eigen::VectorXd& f, double theta,
           double eps) {
            const auto check = iml::occupation_varadhan_check(spec, f, theta, eps);
            return py::make_tuple(check.lhs, check.rhs, check.gap);
        },
        "spec"_a, "f"_a, "theta"_a, "eps"_a);

    // Example instances and the acceptance battery.
    module.def("example_two_state_killed", &iml::example_two_state_killed);
    module.def("example_two_state_conservative", &iml::example_two_state_conservative);
    module.def("example_birth_death_killed", &iml::example_birth_death_killed);
    module.def("example_birth_death_conservative", &iml::example_birth_death_conservative);
    module.def(
        "run_acceptance",
        [](const std::vector<std::string>& only, int threads) {
            const auto summary = iml::run_acceptance(only, threads, nullptr);
            return iml::acceptance_summary_json(summary).dump();
        },
        "only"_a = std::vector<std::string>{}, "threads"_a = 0);
}
