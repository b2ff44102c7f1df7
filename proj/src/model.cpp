#include "iml/model.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iml {

namespace {

using nlohmann::json;

constexpr double kSymmetryTol = 1e-9;

// Union-find over the graph of nonzero off-diagonal rates.
class DisjointSet {
public:
    explicit DisjointSet(int n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(int a, int b) { parent_[find(a)] = find(b); }

private:
    std::vector<int> parent_;
};

void check_metric(const Eigen::MatrixXd& d, int n) {
    if (d.rows() != n || d.cols() != n)
        fail("BadMetric", "metric dimensions do not match state count");
    for (int i = 0; i < n; ++i) {
        if (d(i, i) != 0.0)
            fail("BadMetric", "metric diagonal must be zero");
        for (int j = 0; j < n; ++j) {
            if (d(i, j) < 0.0) fail("BadMetric", "metric entries must be nonnegative");
            if (std::abs(d(i, j) - d(j, i)) > 1e-12)
                fail("BadMetric", "metric must be symmetric");
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (d(i, j) > d(i, k) + d(k, j) + 1e-12)
                    fail("BadMetric", "metric violates the triangle inequality");
}

json matrix_to_json(const Eigen::MatrixXd& a) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty())
        fail("BadInput", "expected a nonempty array of rows");
    const auto n = rows.size();
    const auto m = rows.front().size();
    Eigen::MatrixXd a(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != m) fail("BadInput", "ragged matrix rows");
        for (std::size_t j = 0; j < m; ++j) a(i, j) = rows[i][j].get<double>();
    }
    return a;
}

} // namespace

double SymmetricMarkovModel::killing_rate(int x) const {
    return -generator.row(x).sum();
}

bool SymmetricMarkovModel::conservative(double tol) const {
    for (int x = 0; x < size(); ++x)
        if (killing_rate(x) > tol) return false;
    return true;
}

SymmetricMarkovModel build_model(const ModelSpec& spec) {
    const int n = static_cast<int>(spec.measure.size());
    if (n == 0) fail("BadInput", "empty state space");
    if (spec.generator.rows() != n || spec.generator.cols() != n)
        fail("BadInput", "rate matrix dimensions do not match the measure");
    if (!spec.states.empty() && static_cast<int>(spec.states.size()) != n)
        fail("BadInput", "state label count does not match the measure");

    for (int x = 0; x < n; ++x)
        if (!(spec.measure(x) > 0.0))
            fail("BadInput", "reference measure must be strictly positive");

    const Eigen::MatrixXd& L = spec.generator;
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            if (x != y && L(x, y) < 0.0)
                fail("NegativeRate", "off-diagonal rate L[" + std::to_string(x) + "," +
                                         std::to_string(y) + "] is negative");
        }
        if (L.row(x).sum() > kSymmetryTol)
            fail("NegativeRate", "row " + std::to_string(x) +
                                     " has positive sum (negative killing rate)");
    }

    // Detailed balance m(x) L[x,y] = m(y) L[y,x], relative to the rate scale.
    double scale = 0.0;
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            scale = std::max(scale, std::abs(spec.measure(x) * L(x, y)));
    if (scale == 0.0) scale = 1.0;
    for (int x = 0; x < n; ++x)
        for (int y = x + 1; y < n; ++y) {
            const double lhs = spec.measure(x) * L(x, y);
            const double rhs = spec.measure(y) * L(y, x);
            if (std::abs(lhs - rhs) > kSymmetryTol * scale)
                fail("SymmetryViolation",
                     "detailed balance fails at (" + std::to_string(x) + "," +
                         std::to_string(y) + "): " + std::to_string(lhs) +
                         " != " + std::to_string(rhs));
        }

    DisjointSet ds(n);
    for (int x = 0; x < n; ++x)
        for (int y = x + 1; y < n; ++y)
            if (L(x, y) != 0.0) ds.unite(x, y);
    for (int x = 1; x < n; ++x)
        if (ds.find(x) != ds.find(0))
            fail("Disconnected", "the chain is not irreducible");

    if (spec.metric) check_metric(*spec.metric, n);

    SymmetricMarkovModel model;
    model.states = spec.states;
    if (model.states.empty()) {
        model.states.resize(n);
        for (int x = 0; x < n; ++x) model.states[x] = std::to_string(x);
    }
    model.measure = spec.measure;
    model.generator = spec.generator;
    model.metric = spec.metric;
    model.label = spec.label;
    return model;
}

std::string model_to_json(const SymmetricMarkovModel& model, int indent) {
    json doc;
    doc["states"] = model.states;
    doc["m"] = std::vector<double>(model.measure.data(),
                                   model.measure.data() + model.measure.size());
    doc["L"] = matrix_to_json(model.generator);
    if (model.metric) doc["metric"] = matrix_to_json(*model.metric);
    doc["label"] = model.label;
    return doc.dump(indent);
}

SymmetricMarkovModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("BadInput", std::string("model JSON parse error: ") + e.what());
    }
    ModelSpec spec;
    if (doc.contains("states")) spec.states = doc["states"].get<std::vector<std::string>>();
    const auto m = doc.at("m").get<std::vector<double>>();
    spec.measure = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    spec.generator = matrix_from_json(doc.at("L"));
    if (doc.contains("metric") && !doc["metric"].is_null())
        spec.metric = matrix_from_json(doc["metric"]);
    if (doc.contains("label")) spec.label = doc["label"].get<std::string>();
    return build_model(spec);
}

void save_model(const SymmetricMarkovModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot open " + path + " for writing");
    out << model_to_json(model) << "\n";
}

SymmetricMarkovModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

} // namespace iml
