#include "iml/artifact.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iml/common.hpp"

namespace iml {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

json parse_toml_value(const std::string& raw) {
    const std::string text = trim(raw);
    if (text.empty()) fail("SchemaError", "empty TOML value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"')
            fail("SchemaError", "unterminated TOML string: " + text);
        return text.substr(1, text.size() - 2);
    }
    if (text.front() == '[') {
        if (text.back() != ']') fail("SchemaError", "unterminated TOML array: " + text);
        json arr = json::array();
        std::string inner = text.substr(1, text.size() - 2);
        int depth = 0;
        std::string item;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (!in_string) {
                if (c == '[') ++depth;
                if (c == ']') --depth;
                if (c == ',' && depth == 0) {
                    if (!trim(item).empty()) arr.push_back(parse_toml_value(item));
                    item.clear();
                    continue;
                }
            }
            item += c;
        }
        if (!trim(item).empty()) arr.push_back(parse_toml_value(item));
        return arr;
    }
    if (text == "true") return true;
    if (text == "false") return false;
    // Number: integer when it round-trips as one.
    try {
        std::size_t used = 0;
        if (text.find_first_of(".eE") == std::string::npos) {
            const long long v = std::stoll(text, &used);
            if (used == text.size()) return v;
        }
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (...) {
    }
    fail("SchemaError", "cannot parse TOML value: " + text);
}

} // namespace

nlohmann::json parse_toml_subset(const std::string& text) {
    json root = json::object();
    json* section = &root;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Strip comments outside strings.
        bool in_string = false;
        std::string code;
        for (char c : line) {
            if (c == '"') in_string = !in_string;
            if (c == '#' && !in_string) break;
            code += c;
        }
        code = trim(code);
        if (code.empty()) continue;

        if (code.front() == '[') {
            if (code.back() != ']')
                fail("SchemaError", "bad TOML section at line " + std::to_string(line_no));
            std::string name = trim(code.substr(1, code.size() - 2));
            section = &root;
            std::size_t start = 0;
            while (start <= name.size()) {
                const auto dot = name.find('.', start);
                const std::string part =
                    trim(name.substr(start, dot == std::string::npos ? dot : dot - start));
                if (part.empty())
                    fail("SchemaError", "empty TOML section name at line " +
                                            std::to_string(line_no));
                section = &(*section)[part];
                if (section->is_null()) *section = json::object();
                if (dot == std::string::npos) break;
                start = dot + 1;
            }
            continue;
        }

        const auto eq = code.find('=');
        if (eq == std::string::npos)
            fail("SchemaError", "expected key = value at line " + std::to_string(line_no));
        const std::string key = trim(code.substr(0, eq));
        if (key.empty())
            fail("SchemaError", "empty TOML key at line " + std::to_string(line_no));
        (*section)[key] = parse_toml_value(code.substr(eq + 1));
    }
    return root;
}

const std::vector<std::string>& Manifest::known_kinds() {
    static const std::vector<std::string> kinds = {
        "spectral", "zoo-build", "zoo-check", "counting-fuzz", "simulate",
        "moments",  "ldp-varsolve", "mgf",    "acceptance"};
    return kinds;
}

namespace {

bool kind_is_stochastic(const std::string& kind) {
    return kind == "counting-fuzz" || kind == "simulate" || kind == "moments" ||
           kind == "mgf" || kind == "acceptance";
}

} // namespace

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("SchemaError", "cannot open manifest " + path);
    std::stringstream buf;
    buf << in.rdbuf();

    json doc;
    const bool toml = path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
    if (toml) {
        doc = parse_toml_subset(buf.str());
    } else {
        try {
            doc = json::parse(buf.str());
        } catch (const json::parse_error& e) {
            fail("SchemaError", std::string("manifest JSON parse error: ") + e.what());
        }
    }
    if (!doc.is_object()) fail("SchemaError", "manifest must be an object");

    Manifest manifest;
    if (!doc.contains("kind") || !doc["kind"].is_string())
        fail("SchemaError", "manifest needs a string 'kind'");
    manifest.kind = doc["kind"].get<std::string>();
    const auto& kinds = Manifest::known_kinds();
    if (std::find(kinds.begin(), kinds.end(), manifest.kind) == kinds.end())
        fail("SchemaError", "unknown manifest kind: " + manifest.kind);

    if (doc.contains("models")) {
        if (!doc["models"].is_array()) fail("SchemaError", "'models' must be an array");
        for (const auto& entry : doc["models"]) {
            const auto model_path = entry.get<std::string>();
            if (!std::filesystem::exists(model_path))
                fail("SchemaError", "referenced model does not exist: " + model_path);
            manifest.models.push_back(model_path);
        }
    }
    manifest.params = doc.value("params", json::object());
    if (!manifest.params.is_object()) fail("SchemaError", "'params' must be an object");
    for (const auto& [key, value] : manifest.params.items()) {
        // File-valued params must exist at validation time.
        if (value.is_string()) {
            const auto text = value.get<std::string>();
            if (text.size() > 5 && text.substr(text.size() - 5) == ".json" &&
                (key == "f" || key == "h" || key == "model"))
                if (!std::filesystem::exists(text))
                    fail("SchemaError", "referenced file does not exist: " + text);
        }
    }
    if (doc.contains("seed")) {
        manifest.seed = doc["seed"].get<std::uint64_t>();
        manifest.has_seed = true;
    } else if (kind_is_stochastic(manifest.kind)) {
        fail("SchemaError", "kind '" + manifest.kind + "' requires a seed");
    }
    manifest.out_path = doc.value("out", "");
    return manifest;
}

nlohmann::json manifest_echo(const Manifest& manifest) {
    json echo;
    echo["kind"] = manifest.kind;
    echo["models"] = manifest.models;
    echo["params"] = manifest.params;
    if (manifest.has_seed) echo["seed"] = manifest.seed;
    echo["out"] = manifest.out_path;
    return echo;
}

ArtifactBuilder::ArtifactBuilder(const Manifest& manifest) {
    doc_["manifest"] = manifest_echo(manifest);
    doc_["tool_version"] = kToolVersion;
    doc_["metrics"] = json::object();
    doc_["verdicts"] = json::object();
}

void ArtifactBuilder::metric_exact(const std::string& name, double value) {
    doc_["metrics"][name] = {{"value", value}, {"provenance", "exact"}};
}

void ArtifactBuilder::metric_exact(const std::string& name, const nlohmann::json& value) {
    doc_["metrics"][name] = {{"value", value}, {"provenance", "exact"}};
}

void ArtifactBuilder::metric_mc(const std::string& name, double value, double std_error) {
    doc_["metrics"][name] = {{"value", value}, {"se", std_error}, {"provenance", "mc"}};
}

void ArtifactBuilder::metric_fitted(const std::string& name, double value, double residual) {
    doc_["metrics"][name] = {{"value", value}, {"residual", residual}, {"provenance", "fitted"}};
}

void ArtifactBuilder::verdict(const std::string& name, bool pass) {
    doc_["verdicts"][name] = pass;
}

bool ArtifactBuilder::all_verdicts_pass() const {
    for (const auto& [name, pass] : doc_.at("verdicts").items()) {
        (void)name;
        if (!pass.get<bool>()) return false;
    }
    return true;
}

nlohmann::json ArtifactBuilder::finish(double wall_seconds) {
    doc_["wall_time_seconds"] = wall_seconds;
    return doc_;
}

void write_json_atomic(const nlohmann::json& doc, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) fail("IoError", "cannot open " + tmp + " for writing");
        out << doc.dump(2) << "\n";
        if (!out) fail("IoError", "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace iml
