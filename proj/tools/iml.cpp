// Command-line front end: model builders, spectral reports, counting fuzz,
// path simulation, moment cross-checks, variational solves, the MGF smoke
// test and the acceptance battery. One manifest = one process.

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>

#include "iml/acceptance.hpp"
#include "iml/artifact.hpp"
#include "iml/counting.hpp"
#include "iml/examples.hpp"
#include "iml/ldp.hpp"
#include "iml/moments.hpp"
#include "iml/path.hpp"
#include "iml/rng.hpp"
#include "iml/zoo.hpp"

namespace {

using iml::Manifest;
using nlohmann::json;

constexpr int kExitContractFailure = 1;
constexpr int kExitSchemaError = 2;
constexpr int kExitRuntimeFailure = 3;

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool has_seed = false;
    int threads = 0;
    std::string out;
    bool quiet = false;
};

Eigen::VectorXd load_vector(const std::string& path, int expected_size) {
    std::ifstream in(path);
    if (!in) iml::fail("SchemaError", "cannot open " + path);
    json doc = json::parse(in, nullptr, true);
    const json& arr = doc.is_object() && doc.contains("values") ? doc["values"] : doc;
    if (!arr.is_array()) iml::fail("SchemaError", "expected an array of values in " + path);
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    if (expected_size >= 0 && v.size() != expected_size)
        iml::fail("SchemaError", "vector length in " + path + " does not match the model");
    return v;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char c : text) {
        if (c == ',') {
            out.push_back(item);
            item.clear();
        } else {
            item += c;
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_int_list(const json& value) {
    std::vector<int> out;
    for (const auto& entry : value) out.push_back(entry.get<int>());
    return out;
}

void write_varint(std::ostream& out, std::uint64_t value) {
    while (value >= 0x80) {
        out.put(static_cast<char>((value & 0x7F) | 0x80));
        value >>= 7;
    }
    out.put(static_cast<char>(value));
}

// ---------------------------------------------------------------------------
// Manifest handlers (shared by direct subcommands and `iml run`)
// ---------------------------------------------------------------------------

struct RunOutcome {
    json artifact;
    bool contracts_pass = true;
};

RunOutcome handle_spectral(const Manifest& manifest, int) {
    if (manifest.models.size() != 1)
        iml::fail("SchemaError", "spectral needs exactly one model");
    const auto model = iml::load_model(manifest.models.front());
    const auto spec = iml::spectral_decompose(model);

    iml::ArtifactBuilder artifact(manifest);
    std::vector<double> eigenvalues(spec.eigenvalues.data(),
                                    spec.eigenvalues.data() + spec.size());
    artifact.metric_exact("eigenvalues", json(eigenvalues));
    artifact.metric_exact("lambda1", spec.lambda1());
    artifact.metric_exact("conservative", model.conservative());

    double ortho = 0.0, residual = 0.0;
    for (int a = 0; a < spec.size(); ++a) {
        for (int b = 0; b < spec.size(); ++b) {
            const double dot = (spec.eigenfunctions.col(a).array() *
                                spec.eigenfunctions.col(b).array() * model.measure.array())
                                   .sum();
            ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
        }
        const Eigen::VectorXd r = (-model.generator) * spec.eigenfunctions.col(a) -
                                  spec.eigenvalues(a) * spec.eigenfunctions.col(a);
        residual = std::max(residual,
                            r.cwiseAbs().maxCoeff() / std::max(1.0, spec.eigenvalues(a)));
    }
    artifact.metric_exact("max_orthonormality_error", ortho);
    artifact.metric_exact("max_eigen_residual", residual);
    artifact.verdict("orthonormal_within_1e-10", ortho <= 1e-10);
    artifact.verdict("eigen_residual_within_1e-9", residual <= 1e-9);

    RunOutcome outcome;
    outcome.contracts_pass = artifact.all_verdicts_pass();
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_zoo_build(const Manifest& manifest, int) {
    const std::string family = manifest.params.at("family").get<std::string>();
    iml::SymmetricMarkovModel model;
    if (family == "gasket") {
        model = iml::build_gasket_graph(manifest.params.at("level").get<int>());
    } else if (family == "grid") {
        const auto dims = parse_int_list(manifest.params.at("dims"));
        const auto boundary = manifest.params.value("boundary", "reflecting");
        model = iml::build_grid(dims, boundary == "absorbing" ? iml::Boundary::Absorbing
                                                              : iml::Boundary::Reflecting);
    } else if (family == "torus") {
        model = iml::build_long_range_torus(manifest.params.at("n").get<int>(),
                                            manifest.params.at("alpha").get<double>());
    } else {
        iml::fail("SchemaError", "unknown family: " + family);
    }

    const std::string out = manifest.params.value("model_out", manifest.out_path);
    if (out.empty()) iml::fail("SchemaError", "zoo-build needs an output path");
    iml::save_model(model, out);

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("states", model.size());
    artifact.metric_exact("label", json(model.label));
    artifact.metric_exact("model_path", json(out));
    RunOutcome outcome;
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_zoo_check(const Manifest& manifest, int) {
    if (manifest.models.size() != 1)
        iml::fail("SchemaError", "zoo-check needs exactly one model");
    const auto model = iml::load_model(manifest.models.front());
    const auto spec = iml::spectral_decompose(model);
    const int p = manifest.params.value("p", 2);
    const auto report = iml::check_assumptions(spec, p, manifest.has_seed ? manifest.seed : 1);

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("p", p);
    artifact.metric_exact("green_sup", report.green_sup);
    json curve = json::array();
    for (const auto& [delta, sup] : report.green_delta_curve)
        curve.push_back({{"delta", delta}, {"sup", sup}});
    artifact.metric_exact("green_delta_curve", curve);
    artifact.metric_fitted("trace_exponent", report.trace_fit.exponent_hat,
                           report.trace_fit.residual);
    artifact.metric_fitted("ultracontractivity_exponent",
                           report.ultracontractivity_fit.exponent_hat,
                           report.ultracontractivity_fit.residual);
    artifact.metric_exact("fit_window", json({{"t_min", report.trace_fit.t_min},
                                              {"t_max", report.trace_fit.t_max}}));
    json tightness = json::array();
    for (const auto& point : report.tightness_profile)
        tightness.push_back({{"kept_mass_fraction", point.kept_mass_fraction},
                             {"sup_outside", point.sup_outside}});
    artifact.metric_exact("tightness_profile", tightness);
    artifact.metric_exact("sobolev_c_delta1", report.sobolev_c_1);
    artifact.metric_exact("sobolev_c_delta01", report.sobolev_c_01);
    artifact.metric_exact("eigen_growth_c", report.eigen_growth_c);
    artifact.metric_exact("a2_modulus", report.a2_modulus);

    bool delta_monotone = true;
    for (std::size_t i = 1; i < report.green_delta_curve.size(); ++i)
        if (report.green_delta_curve[i].second >
            report.green_delta_curve[i - 1].second + 1e-12)
            delta_monotone = false;
    artifact.verdict("green_delta_curve_nonincreasing", delta_monotone);
    artifact.verdict("tightness_reaches_zero",
                     report.tightness_profile.empty() ||
                         report.tightness_profile.back().sup_outside <= 1e-12);

    RunOutcome outcome;
    outcome.contracts_pass = artifact.all_verdicts_pass();
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_counting_fuzz(const Manifest& manifest, int) {
    const int trials = manifest.params.value("trials", 1000);
    const int p_max = manifest.params.value("pmax", 3);
    const int s_max = manifest.params.value("sstar_max", 4);
    iml::RngStream rng(manifest.seed, 0);

    int nonempty = 0, mismatches = 0, empty = 0;
    for (int trial = 0; trial < trials; ++trial) {
        iml::CountingInstance inst;
        inst.p = 1 + rng.uniform_int(p_max);
        inst.alphabet_size = 1 + rng.uniform_int(3);
        const int s_size = 1 + rng.uniform_int(s_max);
        const int t_size = s_size + rng.uniform_int(3);

        std::vector<int> universe(t_size);
        for (int j = 0; j < t_size; ++j) universe[j] = j;
        std::vector<int> s_star(universe.begin(), universe.begin() + s_size);
        const int s1_size = rng.uniform_int(s_size + 1);
        inst.s1_star.assign(s_star.begin(), s_star.begin() + s1_size);
        inst.s2_star.assign(s_star.begin() + s1_size, s_star.end());
        for (int j = 0; j < t_size; ++j) {
            std::vector<int> label(inst.p);
            for (int i = 0; i < inst.p; ++i) label[i] = rng.uniform_int(inst.alphabet_size);
            inst.labels[j] = label;
        }
        inst.f_prime.resize(inst.p);
        for (int i = 0; i < inst.p; ++i) {
            std::vector<int> pool = universe;
            for (int j = t_size - 1; j > 0; --j)
                std::swap(pool[j], pool[rng.uniform_int(j + 1)]);
            inst.f_prime[i].assign(pool.begin(), pool.begin() + s_size);
        }

        if (rng.uniform() < 0.5) {
            std::vector<std::vector<int>> images(inst.p);
            for (int i = 0; i < inst.p; ++i) {
                images[i] = inst.f_prime[i];
                for (int j = s_size - 1; j > 0; --j)
                    std::swap(images[i][j], images[i][rng.uniform_int(j + 1)]);
            }
            for (int a = 0; a < s_size; ++a) {
                std::vector<int> point(inst.p);
                for (int i = 0; i < inst.p; ++i) point[i] = inst.labels[images[i][a]][i];
                inst.a_measure.add(point);
                if (a < s1_size) inst.r_measure.add(point);
            }
        } else {
            std::vector<std::vector<int>> atoms;
            for (int a = 0; a < s_size; ++a) {
                std::vector<int> point(inst.p);
                for (int i = 0; i < inst.p; ++i) point[i] = rng.uniform_int(inst.alphabet_size);
                inst.a_measure.add(point);
                atoms.push_back(point);
            }
            for (int a = 0; a < s1_size; ++a) inst.r_measure.add(atoms[a]);
        }

        const auto brute = iml::enumerate_psi_bruteforce(inst);
        if (brute.count == 0) {
            ++empty;
            continue;
        }
        ++nonempty;
        if (iml::count_psi_closed_form(inst) != brute.count) ++mismatches;
    }

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("trials", trials);
    artifact.metric_exact("nonempty", nonempty);
    artifact.metric_exact("empty", empty);
    artifact.metric_exact("mismatches", mismatches);
    artifact.verdict("closed_form_matches_bruteforce", mismatches == 0);
    RunOutcome outcome;
    outcome.contracts_pass = artifact.all_verdicts_pass();
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_simulate(const Manifest& manifest, int threads) {
    std::vector<iml::SymmetricMarkovModel> models;
    for (const auto& path : manifest.models) models.push_back(iml::load_model(path));
    if (models.empty()) iml::fail("SchemaError", "simulate needs at least one model");
    std::vector<const iml::SymmetricMarkovModel*> model_ptrs;
    for (const auto& model : models) model_ptrs.push_back(&model);

    const auto x0s = parse_int_list(manifest.params.at("x0"));
    const double t = manifest.params.at("t").get<double>();
    const std::int64_t n = manifest.params.value("n", 10000);
    const std::string dump_path = manifest.params.value("dump", "");
    const int n_states = models.front().size();
    const int p = static_cast<int>(models.size());

    std::vector<double> occupation(static_cast<std::size_t>(n) * p * n_states, 0.0);
    std::vector<std::vector<iml::PathSample>> stored;
    if (!dump_path.empty()) stored.resize(n);

    const auto stats = iml::for_each_surviving_tuple(
        model_ptrs, x0s, t, n, manifest.seed,
        [&](std::int64_t index, const std::vector<iml::PathSample>& paths) {
            for (int i = 0; i < p; ++i) {
                const auto occ = iml::occupation_measure(paths[i], n_states);
                for (int x = 0; x < n_states; ++x)
                    occupation[(static_cast<std::size_t>(index) * p + i) * n_states + x] =
                        occ.masses(x);
            }
            if (!dump_path.empty()) stored[index] = paths;
        },
        threads);

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("acceptance_rate", stats.acceptance_rate);
    artifact.metric_exact("attempts", stats.attempts);

    json per_state = json::array();
    for (int i = 0; i < p; ++i) {
        json means = json::array(), ses = json::array();
        for (int x = 0; x < n_states; ++x) {
            long double sum = 0.0L, sum_sq = 0.0L;
            for (std::int64_t j = 0; j < n; ++j) {
                const double v =
                    occupation[(static_cast<std::size_t>(j) * p + i) * n_states + x];
                sum += v;
                sum_sq += static_cast<long double>(v) * v;
            }
            const double mean = static_cast<double>(sum / n);
            const double var =
                std::max(0.0L, sum_sq / n - static_cast<long double>(mean) * mean);
            means.push_back(mean);
            ses.push_back(std::sqrt(static_cast<double>(var) / n));
        }
        per_state.push_back({{"process", i}, {"mean", means}, {"se", ses}});
    }
    artifact.metric_exact("occupation_mean_per_state", per_state);

    if (!dump_path.empty()) {
        std::ofstream out(dump_path, std::ios::binary);
        if (!out) iml::fail("IoError", "cannot open " + dump_path);
        for (const auto& tuple : stored)
            for (const auto& path : tuple) {
                write_varint(out, path.states.size());
                out.put(path.survived ? 1 : 0);
                for (std::size_t j = 0; j < path.states.size(); ++j) {
                    write_varint(out, static_cast<std::uint64_t>(path.states[j]));
                    const double s = path.sojourns[j];
                    out.write(reinterpret_cast<const char*>(&s), sizeof(double));
                }
            }
    }

    RunOutcome outcome;
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_moments(const Manifest& manifest, int threads) {
    std::vector<iml::SymmetricMarkovModel> models;
    for (const auto& path : manifest.models) models.push_back(iml::load_model(path));
    if (models.empty()) iml::fail("SchemaError", "moments needs at least one model");
    std::vector<iml::SpectralDecomposition> specs;
    for (const auto& model : models) specs.push_back(iml::spectral_decompose(model));
    std::vector<const iml::SpectralDecomposition*> spec_ptrs;
    std::vector<const iml::SymmetricMarkovModel*> model_ptrs;
    for (std::size_t i = 0; i < models.size(); ++i) {
        spec_ptrs.push_back(&specs[i]);
        model_ptrs.push_back(&models[i]);
    }

    const auto x0s = parse_int_list(manifest.params.at("x0"));
    const Eigen::VectorXd f =
        load_vector(manifest.params.at("f").get<std::string>(), models.front().size());
    const double t = manifest.params.at("t").get<double>();
    const int k = manifest.params.at("k").get<int>();
    const int m_exact = manifest.params.value("m", k);
    const double eps = manifest.params.value("eps", 0.25);
    const std::int64_t n = manifest.params.value("n", 100000);

    const double formula =
        iml::mixed_moment_formula(spec_ptrs, x0s, f, t, k, m_exact, eps);

    double joint_survival = 1.0;
    for (std::size_t i = 0; i < specs.size(); ++i)
        joint_survival *= iml::survival_probability(specs[i], x0s[i], t);

    std::vector<double> values(n, 0.0);
    iml::for_each_surviving_tuple(
        model_ptrs, x0s, t, n, manifest.seed,
        [&](std::int64_t index, const std::vector<iml::PathSample>& paths) {
            double v = 1.0;
            if (m_exact > 0) {
                const double exact =
                    f.dot(iml::intersection_measure_exact(paths, models.front().measure)
                              .masses);
                for (int a = 0; a < m_exact; ++a) v *= exact;
            }
            if (m_exact < k) {
                const double smooth =
                    f.dot(iml::intersection_measure_smoothed(paths, spec_ptrs, eps).masses);
                for (int a = m_exact; a < k; ++a) v *= smooth;
            }
            values[index] = v;
        },
        threads);

    long double sum = 0.0L, sum_sq = 0.0L;
    for (double v : values) {
        sum += v;
        sum_sq += static_cast<long double>(v) * v;
    }
    const double mean = static_cast<double>(sum / n);
    const double var = std::max(0.0L, sum_sq / n - static_cast<long double>(mean) * mean);
    const double mc = mean * joint_survival;
    const double se = std::sqrt(static_cast<double>(var) / n) * joint_survival;
    const double z = se > 0.0 ? std::abs(formula - mc) / se : 0.0;

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("formula", formula);
    artifact.metric_mc("monte_carlo", mc, se);
    artifact.metric_exact("z_score", z);
    artifact.verdict("within_3_se", z <= 3.0);

    RunOutcome outcome;
    outcome.contracts_pass = artifact.all_verdicts_pass();
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_ldp_varsolve(const Manifest& manifest, int) {
    if (manifest.models.size() != 1)
        iml::fail("SchemaError", "ldp-varsolve needs exactly one model");
    const auto model = iml::load_model(manifest.models.front());
    const auto spec = iml::spectral_decompose(model);
    const double theta = manifest.params.at("theta").get<double>();
    const double eps = manifest.params.value("eps", 0.0);
    const int p = manifest.params.value("p", 2);
    const bool certify = manifest.params.value("certify", false);
    Eigen::VectorXd h;
    if (manifest.params.contains("h"))
        h = load_vector(manifest.params["h"].get<std::string>(), model.size());
    else
        h = Eigen::VectorXd::Ones(model.size());

    const auto result = iml::variational_N(spec, theta, eps, h, p, certify);

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("value", result.value);
    std::vector<double> argmax(result.argmax.data(), result.argmax.data() + model.size());
    artifact.metric_exact("argmax", json(argmax));
    artifact.metric_exact("starts", result.trace.starts);
    if (result.certificate_gap) {
        artifact.metric_exact("certificate_gap", *result.certificate_gap);
        artifact.verdict("certified_within_1e-6", *result.certificate_gap <= 1e-6);
    }

    RunOutcome outcome;
    outcome.contracts_pass = artifact.all_verdicts_pass();
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_mgf(const Manifest& manifest, int threads) {
    std::vector<iml::SymmetricMarkovModel> models;
    for (const auto& path : manifest.models) models.push_back(iml::load_model(path));
    if (models.empty()) iml::fail("SchemaError", "mgf needs at least one model");
    std::vector<iml::SpectralDecomposition> specs;
    for (const auto& model : models) specs.push_back(iml::spectral_decompose(model));
    std::vector<const iml::SpectralDecomposition*> spec_ptrs;
    for (const auto& spec : specs) spec_ptrs.push_back(&spec);

    const double theta = manifest.params.at("theta").get<double>();
    const int p = static_cast<int>(models.size());
    const double eps = manifest.params.value("eps", 0.0);
    std::vector<int> x0s(p, 0);
    if (manifest.params.contains("x0")) x0s = parse_int_list(manifest.params["x0"]);
    Eigen::VectorXd h;
    if (manifest.params.contains("h"))
        h = load_vector(manifest.params["h"].get<std::string>(), models.front().size());
    else
        h = Eigen::VectorXd::Ones(models.front().size());
    std::vector<double> times;
    for (const auto& entry : manifest.params.at("times")) times.push_back(entry.get<double>());
    const std::int64_t n = manifest.params.value("n", 100000);

    const auto mgf =
        iml::mc_log_mgf_slope(spec_ptrs, x0s, theta, h, p, eps, times, n, manifest.seed,
                              threads);

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("slope", mgf.slope);
    artifact.metric_exact("rhs", mgf.rhs_exact);
    if (eps > 0.0) artifact.metric_exact("rhs_smoothed", mgf.rhs_smoothed);
    artifact.metric_exact("heavy_tail_warning", mgf.heavy_tail);
    json points = json::array();
    for (const auto& point : mgf.points)
        points.push_back({{"t", point.t}, {"estimate", point.estimate},
                          {"se", point.std_error}, {"heavy_tail", point.heavy_tail}});
    artifact.metric_exact("points", points);

    // Plot-ready CSV next to the artifact when requested.
    const std::string csv = manifest.params.value("csv", "");
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) iml::fail("IoError", "cannot open " + csv);
        out << "t,estimate,se,rhs,gap\n";
        for (const auto& point : mgf.points)
            out << point.t << "," << point.estimate << "," << point.std_error << ","
                << mgf.rhs_exact << "," << (point.estimate - mgf.rhs_exact) << "\n";
    }

    RunOutcome outcome;
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome handle_acceptance(const Manifest& manifest, int threads, bool quiet) {
    std::vector<std::string> only;
    if (manifest.params.contains("only"))
        for (const auto& entry : manifest.params["only"]) only.push_back(entry.get<std::string>());
    const auto summary = iml::run_acceptance(only, threads, quiet ? nullptr : &std::cout);

    iml::ArtifactBuilder artifact(manifest);
    artifact.metric_exact("summary", iml::acceptance_summary_json(summary));
    for (const auto& criterion : summary.criteria)
        artifact.verdict(criterion.name, criterion.status != "fail");

    RunOutcome outcome;
    outcome.contracts_pass = summary.all_pass;
    outcome.artifact = artifact.finish(0.0);
    return outcome;
}

RunOutcome dispatch(const Manifest& manifest, int threads, bool quiet) {
    if (manifest.kind == "spectral") return handle_spectral(manifest, threads);
    if (manifest.kind == "zoo-build") return handle_zoo_build(manifest, threads);
    if (manifest.kind == "zoo-check") return handle_zoo_check(manifest, threads);
    if (manifest.kind == "counting-fuzz") return handle_counting_fuzz(manifest, threads);
    if (manifest.kind == "simulate") return handle_simulate(manifest, threads);
    if (manifest.kind == "moments") return handle_moments(manifest, threads);
    if (manifest.kind == "ldp-varsolve") return handle_ldp_varsolve(manifest, threads);
    if (manifest.kind == "mgf") return handle_mgf(manifest, threads);
    if (manifest.kind == "acceptance") return handle_acceptance(manifest, threads, quiet);
    iml::fail("SchemaError", "unknown kind " + manifest.kind);
}

int run_and_write(const Manifest& manifest, const GlobalOptions& global) {
    const auto start = std::chrono::steady_clock::now();
    RunOutcome outcome;
    try {
        outcome = dispatch(manifest, global.threads, global.quiet);
    } catch (const iml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == "SchemaError" ? kExitSchemaError : kExitRuntimeFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeFailure;
    }
    outcome.artifact["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string out = !global.out.empty() ? global.out : manifest.out_path;
    if (!out.empty()) iml::write_json_atomic(outcome.artifact, out);
    if (!global.quiet) {
        json display = outcome.artifact;
        if (manifest.kind == "acceptance") display["metrics"].erase("summary");
        std::cout << display.dump(2) << std::endl;
    }
    return outcome.contracts_pass ? 0 : kExitContractFailure;
}

Manifest make_manifest(const std::string& kind, const GlobalOptions& global,
                       const std::vector<std::string>& models, json params) {
    Manifest manifest;
    manifest.kind = kind;
    manifest.models = models;
    manifest.params = std::move(params);
    manifest.seed = global.seed;
    manifest.has_seed = true;
    manifest.out_path = global.out;
    return manifest;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-space laboratory for symmetric Markov semigroups, "
                 "intersection measures and their large deviation functionals"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "master RNG seed")->envname("IML_SEED");
    app.add_option("--threads", global.threads, "worker threads (0 = auto, env IML_THREADS)");
    app.add_option("--out", global.out, "artifact output path");
    app.add_flag("--quiet", global.quiet, "suppress stdout reports");

    // --- zoo ---------------------------------------------------------------
    auto* zoo = app.add_subcommand("zoo", "model builders and assumption checks");
    zoo->require_subcommand(1);
    auto* zoo_build = zoo->add_subcommand("build", "build a model family instance");
    std::string family = "gasket", boundary = "reflecting", dims_text = "8", model_out;
    int level = 2, torus_n = 16;
    double alpha = 1.0;
    zoo_build->add_option("--family", family, "gasket | grid | torus")->required();
    zoo_build->add_option("--level", level, "gasket level");
    zoo_build->add_option("--dims", dims_text, "grid dims, e.g. 8x8");
    zoo_build->add_option("--boundary", boundary, "reflecting | absorbing");
    zoo_build->add_option("--n", torus_n, "torus size");
    zoo_build->add_option("--alpha", alpha, "torus jump exponent in (0,2)");
    zoo_build->add_option("--model-out", model_out, "model JSON path (defaults to --out)");

    auto* zoo_check = zoo->add_subcommand("check", "assumption battery for a model");
    std::string check_model, report_path;
    int green_p = 2;
    zoo_check->add_option("--model", check_model)->required();
    zoo_check->add_option("--p", green_p, "Green-condition exponent");
    zoo_check->add_option("--report", report_path, "report JSON path");

    // --- spectral ----------------------------------------------------------
    auto* spectral = app.add_subcommand("spectral", "eigensystem report for a model");
    std::string spectral_model;
    spectral->add_option("--model", spectral_model)->required();

    // --- counting ----------------------------------------------------------
    auto* counting = app.add_subcommand("counting", "combinatorial identities");
    counting->require_subcommand(1);
    auto* fuzz = counting->add_subcommand("fuzz", "closed form vs brute force");
    int fuzz_pmax = 3, fuzz_smax = 4, fuzz_trials = 1000;
    fuzz->add_option("--pmax", fuzz_pmax);
    fuzz->add_option("--sstar-max", fuzz_smax);
    fuzz->add_option("--trials", fuzz_trials);

    // --- simulate ----------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "surviving-tuple path ensembles");
    std::string sim_models, sim_x0 = "0", sim_dump;
    double sim_t = 1.0;
    std::int64_t sim_n = 10000;
    simulate->add_option("--models", sim_models, "comma-separated model JSON paths")
        ->required();
    simulate->add_option("--x0", sim_x0, "comma-separated starting states");
    simulate->add_option("--t", sim_t)->required();
    simulate->add_option("--n", sim_n, "number of surviving tuples");
    simulate->add_option("--dump", sim_dump, "binary path dump file");

    // --- moments -----------------------------------------------------------
    auto* moments = app.add_subcommand("moments", "moment formula vs Monte Carlo");
    std::string mom_models, mom_x0 = "0", mom_f;
    double mom_t = 1.0, mom_eps = 0.25;
    int mom_k = 1, mom_m = -1;
    std::int64_t mom_n = 100000;
    moments->add_option("--models", mom_models)->required();
    moments->add_option("--x0", mom_x0);
    moments->add_option("--f", mom_f, "functional JSON (array of values)")->required();
    moments->add_option("--t", mom_t);
    moments->add_option("--k", mom_k);
    moments->add_option("--m", mom_m, "exact-coordinate count (default k)");
    moments->add_option("--eps", mom_eps);
    moments->add_option("--n", mom_n);

    // --- ldp ---------------------------------------------------------------
    auto* ldp = app.add_subcommand("ldp", "rate functions and MGF asymptotics");
    ldp->require_subcommand(1);
    auto* varsolve = ldp->add_subcommand("varsolve", "variational N(theta, eps, h)");
    std::string var_model, var_h;
    double var_theta = 1.0, var_eps = 0.0;
    int var_p = 2;
    bool var_certify = false;
    varsolve->add_option("--model", var_model)->required();
    varsolve->add_option("--theta", var_theta)->required();
    varsolve->add_option("--eps", var_eps);
    varsolve->add_option("--h", var_h, "weight JSON (default all-ones)");
    varsolve->add_option("--p", var_p);
    varsolve->add_flag("--certify", var_certify, "grid certificate (N <= 3)");

    auto* mgf = ldp->add_subcommand("mgf", "Monte Carlo log-MGF slope vs variational RHS");
    std::string mgf_models, mgf_h, mgf_times = "10,20,40", mgf_x0, mgf_csv;
    double mgf_theta = 0.5, mgf_eps = 0.0;
    std::int64_t mgf_n = 200000;
    mgf->add_option("--models", mgf_models)->required();
    mgf->add_option("--theta", mgf_theta)->required();
    mgf->add_option("--h", mgf_h);
    mgf->add_option("--x0", mgf_x0);
    mgf->add_option("--eps", mgf_eps);
    mgf->add_option("--times", mgf_times);
    mgf->add_option("--n", mgf_n);
    mgf->add_option("--csv", mgf_csv, "plot-ready CSV path");

    // --- acceptance / run ----------------------------------------------------
    auto* acceptance = app.add_subcommand("acceptance", "run the acceptance battery");
    std::vector<std::string> only;
    acceptance->add_option("--only", only, "restrict to criteria matching these keys");

    auto* run = app.add_subcommand("run", "execute an experiment manifest");
    std::string manifest_path;
    run->add_option("manifest", manifest_path, "manifest JSON or TOML")->required();

    CLI11_PARSE(app, argc, argv);
    global.has_seed = app.count("--seed") > 0;

    try {
        if (zoo_build->parsed()) {
            json params = {{"family", family}};
            if (family == "gasket") params["level"] = level;
            if (family == "grid") {
                // accept both 8x8 and 8,8
                std::vector<int> dims;
                std::string token;
                for (char c : dims_text + "x") {
                    if (c == 'x' || c == ',') {
                        if (!token.empty()) dims.push_back(std::stoi(token));
                        token.clear();
                    } else {
                        token += c;
                    }
                }
                params["dims"] = dims;
                params["boundary"] = boundary;
            }
            if (family == "torus") {
                params["n"] = torus_n;
                params["alpha"] = alpha;
            }
            if (!model_out.empty()) params["model_out"] = model_out;
            return run_and_write(make_manifest("zoo-build", global, {}, params), global);
        }
        if (zoo_check->parsed()) {
            GlobalOptions g = global;
            if (!report_path.empty()) g.out = report_path;
            return run_and_write(
                make_manifest("zoo-check", g, {check_model}, {{"p", green_p}}), g);
        }
        if (spectral->parsed())
            return run_and_write(make_manifest("spectral", global, {spectral_model}, {}),
                                 global);
        if (fuzz->parsed())
            return run_and_write(
                make_manifest("counting-fuzz", global, {},
                              {{"pmax", fuzz_pmax},
                               {"sstar_max", fuzz_smax},
                               {"trials", fuzz_trials}}),
                global);
        if (simulate->parsed()) {
            json params = {{"t", sim_t}, {"n", sim_n}};
            std::vector<int> x0s;
            for (const auto& part : split_csv(sim_x0)) x0s.push_back(std::stoi(part));
            params["x0"] = x0s;
            if (!sim_dump.empty()) params["dump"] = sim_dump;
            return run_and_write(
                make_manifest("simulate", global, split_csv(sim_models), params), global);
        }
        if (moments->parsed()) {
            json params = {{"f", mom_f}, {"t", mom_t}, {"k", mom_k}, {"eps", mom_eps},
                           {"n", mom_n}};
            params["m"] = mom_m < 0 ? mom_k : mom_m;
            std::vector<int> x0s;
            for (const auto& part : split_csv(mom_x0)) x0s.push_back(std::stoi(part));
            params["x0"] = x0s;
            return run_and_write(
                make_manifest("moments", global, split_csv(mom_models), params), global);
        }
        if (varsolve->parsed()) {
            json params = {{"theta", var_theta}, {"eps", var_eps}, {"p", var_p},
                           {"certify", var_certify}};
            if (!var_h.empty()) params["h"] = var_h;
            return run_and_write(
                make_manifest("ldp-varsolve", global, {var_model}, params), global);
        }
        if (mgf->parsed()) {
            json params = {{"theta", mgf_theta}, {"eps", mgf_eps}, {"n", mgf_n}};
            json times = json::array();
            for (const auto& part : split_csv(mgf_times)) times.push_back(std::stod(part));
            params["times"] = times;
            if (!mgf_h.empty()) params["h"] = mgf_h;
            if (!mgf_x0.empty()) {
                std::vector<int> x0s;
                for (const auto& part : split_csv(mgf_x0)) x0s.push_back(std::stoi(part));
                params["x0"] = x0s;
            }
            if (!mgf_csv.empty()) params["csv"] = mgf_csv;
            return run_and_write(make_manifest("mgf", global, split_csv(mgf_models), params),
                                 global);
        }
        if (acceptance->parsed()) {
            json params = json::object();
            if (!only.empty()) params["only"] = only;
            return run_and_write(make_manifest("acceptance", global, {}, params), global);
        }
        if (run->parsed()) {
            Manifest manifest = iml::load_manifest(manifest_path);
            if (global.has_seed) {
                manifest.seed = global.seed;
                manifest.has_seed = true;
            }
            return run_and_write(manifest, global);
        }
    } catch (const iml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == "SchemaError" ? kExitSchemaError : kExitRuntimeFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeFailure;
    }
    return 0;
}
