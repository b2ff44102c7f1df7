#pragma once

#include <nlohmann/json.hpp>
#include <string>

namespace iml {

inline constexpr const char* kToolVersion = "0.1.0";

/// Experiment manifest: kind, referenced models, per-kind parameters, seed.
struct Manifest {
    std::string kind;
    std::vector<std::string> models;
    nlohmann::json params; // object, typed per kind
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::string out_path;

    static const std::vector<std::string>& known_kinds();
};

/// Loads a manifest from JSON or TOML (by extension) and validates the
/// schema: known kind, referenced files exist, seed present for stochastic
/// kinds. Throws SchemaError.
Manifest load_manifest(const std::string& path);

/// Parses the TOML subset used by manifests: [section] headers, key = value
/// with strings, numbers, booleans and flat arrays, # comments.
nlohmann::json parse_toml_subset(const std::string& text);

nlohmann::json manifest_echo(const Manifest& manifest);

/// Artifact = manifest echo + tool version + wall time + metrics + verdicts.
/// Metric entries carry provenance ("exact", "mc" with se, "fitted" with
/// residual). Serialized with sorted keys so dumps are byte-stable.
class ArtifactBuilder {
public:
    explicit ArtifactBuilder(const Manifest& manifest);

    void metric_exact(const std::string& name, double value);
    void metric_exact(const std::string& name, const nlohmann::json& value);
    void metric_mc(const std::string& name, double value, double std_error);
    void metric_fitted(const std::string& name, double value, double residual);
    void verdict(const std::string& name, bool pass);

    bool all_verdicts_pass() const;
    /// Finalizes wall time and returns the document.
    nlohmann::json finish(double wall_seconds);
    const nlohmann::json& metrics() const { return doc_.at("metrics"); }

private:
    nlohmann::json doc_;
};

/// Writes via a temp file + rename; partial artifacts never appear.
void write_json_atomic(const nlohmann::json& doc, const std::string& path);

} // namespace iml
