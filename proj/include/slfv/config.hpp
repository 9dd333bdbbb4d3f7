#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slfv/driftload.hpp"
#include "slfv/grid.hpp"
#include "slfv/model.hpp"
#include "slfv/scaling.hpp"

namespace slfv {

struct ConfigIssue {
    std::string key;
    std::string reason;
};

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

  private:
    static std::string render(const std::vector<ConfigIssue>& issues);
    std::vector<ConfigIssue> issues_;
};

// Flat "key = value" document with '#' comments. Duplicate keys are
// rejected (both line numbers reported); keys not consumed by a schema are
// rejected as unknown.
class KeyValueDoc {
  public:
    static KeyValueDoc parse(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, std::optional<std::string> fallback = {}) const;
    double get_double(const std::string& key, std::optional<double> fallback = {}) const;
    long get_int(const std::string& key, std::optional<long> fallback = {}) const;
    bool get_bool(const std::string& key, std::optional<bool> fallback = {}) const;
    std::vector<double> get_double_list(const std::string& key,
                                        std::optional<std::vector<double>> fallback = {}) const;

    // Keys present in the document but never requested by any getter.
    std::vector<std::string> unconsumed() const;

  private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };
    std::map<std::string, Entry> entries_;
};

// Spatial profile used for initial conditions and test functions.
//   constant:v            v everywhere
//   bump:center,width[,height]   raised cosine in the first coordinate's
//                                torus distance; height defaults to 1
//   cosine:base,amp,periods      base + amp cos(2 pi periods x_1 / L)
struct ProfileSpec {
    enum class Kind { constant, bump, cosine } kind = Kind::constant;
    double a = 0.5, b = 0.0, c = 0.0;

    static ProfileSpec parse(const std::string& text);
};

Field make_profile(const TorusGrid& grid, const ProfileSpec& spec);
// Bump profile normalized to unit discrete L1 norm (a test function).
Field make_test_bump(const TorusGrid& grid, double center, double width);

enum class ExperimentKind {
    trajectory,
    martingale_check,
    clt_fluctuations,
    drift_load,
    operator_tests,
};

struct TrajectorySetup {
    TorusGrid grid;
    SelectionModel model = SelectionModel::genic();
    EventLaw law;
    ProfileSpec w0;
    double horizon = 1.0;
    int samples = 17;
    bool log_events = false;
};

struct MartingaleSetup {
    TorusGrid grid;
    SelectionModel model = SelectionModel::genic();
    EventLaw law;
    double w0 = 0.5;
    double phi_center = 0.0, phi_width = 1.0;
    double window = 1.0;
    std::size_t replicates = 200;
};

struct CltSetup {
    TorusGrid grid;  // rescaled grid (side length = delta * raw side)
    SelectionModel model = SelectionModel::genic();
    ScalingParams scaling;
    ProfileSpec w0;
    double horizon = 0.5;  // rescaled time
    double phi_center = 0.0, phi_width = 1.0;
    std::size_t replicates = 400;
    double stable_r_max = 0.0;  // raw-units Pareto truncation (0: L_raw/4)
};

struct OperatorTestsSetup {
    TorusGrid grid;
    std::vector<double> radii;   // for the local operator order table
    std::vector<double> deltas;  // for the stable operator order table
    double alpha = 0.5;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::trajectory;
    std::string kind_name;
    std::string text;          // canonical original text (hashed, embedded in logs)
    std::uint64_t hash = 0;
    std::optional<std::uint64_t> seed;  // stochastic kinds require one (here or via CLI)

    TrajectorySetup trajectory;
    MartingaleSetup martingale;
    CltSetup clt;
    DriftLoadConfig drift_load;
    OperatorTestsSetup operator_tests;

    bool stochastic() const { return kind != ExperimentKind::operator_tests; }
};

// Parses and validates against every module precondition it can check
// statically. Collects all issues before throwing.
ExperimentConfig parse_config(const std::string& text);

}  // namespace slfv
