#include "slfv/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "slfv/util.hpp"

namespace slfv {

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(render(issues)), issues_(std::move(issues)) {}

std::string ConfigError::render(const std::vector<ConfigIssue>& issues) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& issue : issues) os << "\n  " << issue.key << ": " << issue.reason;
    return os.str();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& key, const std::string& reason) {
    throw ConfigError({{key, reason}});
}

}  // namespace

KeyValueDoc KeyValueDoc::parse(const std::string& text) {
    KeyValueDoc doc;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::vector<ConfigIssue> issues;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            issues.push_back({"line " + std::to_string(lineno), "expected key = value"});
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            issues.push_back({"line " + std::to_string(lineno), "empty key"});
            continue;
        }
        auto it = doc.entries_.find(key);
        if (it != doc.entries_.end()) {
            issues.push_back({key, "duplicate key (lines " + std::to_string(it->second.line) +
                                       " and " + std::to_string(lineno) + ")"});
            continue;
        }
        doc.entries_[key] = Entry{value, lineno, false};
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return doc;
}

bool KeyValueDoc::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueDoc::get_string(const std::string& key,
                                    std::optional<std::string> fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        if (fallback) return *fallback;
        fail(key, "required key is missing");
    }
    it->second.consumed = true;
    return it->second.value;
}

double KeyValueDoc::get_double(const std::string& key, std::optional<double> fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        if (fallback) return *fallback;
        fail(key, "required key is missing");
    }
    it->second.consumed = true;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second.value, &used);
        if (used != it->second.value.size()) fail(key, "trailing characters after number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        fail(key, "not a number: '" + it->second.value + "'");
    }
}

long KeyValueDoc::get_int(const std::string& key, std::optional<long> fallback) const {
    double v = fallback ? get_double(key, static_cast<double>(*fallback)) : get_double(key);
    long l = static_cast<long>(v);
    if (static_cast<double>(l) != v) fail(key, "expected an integer");
    return l;
}

bool KeyValueDoc::get_bool(const std::string& key, std::optional<bool> fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        if (fallback) return *fallback;
        fail(key, "required key is missing");
    }
    it->second.consumed = true;
    if (it->second.value == "true") return true;
    if (it->second.value == "false") return false;
    fail(key, "expected true or false");
}

std::vector<double> KeyValueDoc::get_double_list(
    const std::string& key, std::optional<std::vector<double>> fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        if (fallback) return *fallback;
        fail(key, "required key is missing");
    }
    it->second.consumed = true;
    std::vector<double> out;
    std::istringstream is(it->second.value);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(key, "empty list entry");
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            fail(key, "not a number: '" + item + "'");
        }
    }
    if (out.empty()) fail(key, "empty list");
    return out;
}

std::vector<std::string> KeyValueDoc::unconsumed() const {
    std::vector<std::string> keys;
    for (const auto& [key, entry] : entries_)
        if (!entry.consumed) keys.push_back(key + " (line " + std::to_string(entry.line) + ")");
    return keys;
}

ProfileSpec ProfileSpec::parse(const std::string& text) {
    auto colon = text.find(':');
    std::string name = colon == std::string::npos ? text : text.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::istringstream is(text.substr(colon + 1));
        std::string item;
        while (std::getline(is, item, ',')) args.push_back(std::stod(item));
    }
    ProfileSpec spec;
    if (name == "constant") {
        if (args.size() != 1) fail("profile", "constant takes one argument");
        spec.kind = Kind::constant;
        spec.a = args[0];
    } else if (name == "bump") {
        if (args.size() != 2 && args.size() != 3) fail("profile", "bump takes center,width[,height]");
        spec.kind = Kind::bump;
        spec.a = args[0];
        spec.b = args[1];
        spec.c = args.size() == 3 ? args[2] : 1.0;
    } else if (name == "cosine") {
        if (args.size() != 3) fail("profile", "cosine takes base,amp,periods");
        spec.kind = Kind::cosine;
        spec.a = args[0];
        spec.b = args[1];
        spec.c = args[2];
    } else {
        fail("profile", "unknown profile '" + name + "'");
    }
    return spec;
}

Field make_profile(const TorusGrid& grid, const ProfileSpec& spec) {
    Field f(grid);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double x = grid.cell_center(i)[0];
        switch (spec.kind) {
            case ProfileSpec::Kind::constant: f.v[i] = spec.a; break;
            case ProfileSpec::Kind::bump: {
                double rho = std::abs(grid.torus_delta(x, spec.a));
                double val = 0.0;
                if (rho < spec.b) {
                    double c = std::cos(pi * rho / (2.0 * spec.b));
                    val = spec.c * c * c;
                }
                f.v[i] = val;
                break;
            }
            case ProfileSpec::Kind::cosine:
                f.v[i] = spec.a + spec.b * std::cos(2.0 * pi * spec.c * x / grid.length);
                break;
        }
    }
    return f;
}

Field make_test_bump(const TorusGrid& grid, double center, double width) {
    ProfileSpec spec;
    spec.kind = ProfileSpec::Kind::bump;
    spec.a = center;
    spec.b = width;
    spec.c = 1.0;
    Field f = make_profile(grid, spec);
    double l1 = f.norm_l1();
    if (!(l1 > 0.0)) fail("phi", "test bump has empty support on this grid");
    for (double& x : f.v) x /= l1;
    return f;
}

namespace {

TorusGrid read_grid(const KeyValueDoc& doc, std::vector<ConfigIssue>& issues) {
    int d = static_cast<int>(doc.get_int("dimension", 1));
    int n = static_cast<int>(doc.get_int("grid.cells", 256));
    double length = doc.get_double("grid.length", 10.0);
    try {
        return TorusGrid(d, n, length);
    } catch (const std::exception& e) {
        issues.push_back({"grid", e.what()});
        return TorusGrid(1, 4, 1.0);
    }
}

RadiusLaw read_radius(const KeyValueDoc& doc, const TorusGrid& grid,
                      std::vector<ConfigIssue>& issues) {
    std::string kind = doc.get_string("radius.law", std::string("fixed"));
    RadiusLaw law;
    if (kind == "fixed") {
        law = RadiusLaw::fixed(doc.get_double("radius.R", 1.0));
    } else if (kind == "stable") {
        double alpha = doc.get_double("radius.alpha", 0.5);
        double r_max = doc.get_double("radius.rmax", 0.25 * grid.length);
        law = RadiusLaw::stable(alpha, r_max);
    } else {
        issues.push_back({"radius.law", "must be fixed or stable"});
        return law;
    }
    try {
        law.validate(grid.d);
    } catch (const std::exception& e) {
        std::string what = e.what();
        if (law.kind == RadiusKind::stable_pareto && what.find("alpha") != std::string::npos)
            issues.push_back({"radius.alpha", "alpha must lie in (0, min(2,d))"});
        else
            issues.push_back({"radius.law", what});
    }
    if (2.0 * law.max_radius() >= grid.length)
        issues.push_back({"radius.law", "ball diameter reaches across the torus"});
    return law;
}

SelectionModel read_model(const KeyValueDoc& doc, std::vector<ConfigIssue>& issues) {
    std::string name = doc.get_string("model", std::string("genic"));
    try {
        if (name == "genic") return SelectionModel::genic();
        if (name == "overdominance") {
            OverdominanceSelection sel;
            sel.s1 = doc.get_double("model.s1");
            sel.s2 = doc.get_double("model.s2");
            sel.nu1 = doc.get_double("model.nu1", 0.0);
            sel.nu2 = doc.get_double("model.nu2", 0.0);
            return SelectionModel::overdominance(sel);
        }
        if (name == "general-f") {
            int m = static_cast<int>(doc.get_int("model.m"));
            std::vector<double> p = doc.get_double_list("model.p");
            return SelectionModel::general_f(GeneralFSelection::from_p_table(m, std::move(p)));
        }
        issues.push_back({"model", "must be genic, general-f or overdominance"});
    } catch (const ConfigError& e) {
        for (const auto& issue : e.issues()) issues.push_back(issue);
    } catch (const std::exception& e) {
        issues.push_back({"model", e.what()});
    }
    return SelectionModel::genic();
}

EventLaw read_law(const KeyValueDoc& doc, const TorusGrid& grid, const SelectionModel& model,
                  std::vector<ConfigIssue>& issues) {
    RadiusLaw radius = read_radius(doc, grid, issues);
    double u = doc.get_double("impact", 0.1);
    EventLaw law;
    try {
        if (model.diploid()) {
            const auto& dip = model.diploid_params();
            double scale = doc.get_double("selection.scale", 1.0);
            law = EventLaw::diploid_law(u, scale * dip.s1, scale * dip.s2, scale * dip.nu1,
                                        scale * dip.nu2, radius);
        } else {
            law = EventLaw::haploid(u, doc.get_double("selection.s", 0.0), radius);
        }
        law.validate(grid.d);
    } catch (const std::exception& e) {
        issues.push_back({"impact", e.what()});
    }
    if (radius.kind == RadiusKind::fixed && radius.R < 8.0 * grid.h)
        issues.push_back({"radius.R", "resolution contract r/h >= 8 violated"});
    return law;
}

void check_profile_in_unit(const TorusGrid& grid, const ProfileSpec& spec, const char* key,
                           std::vector<ConfigIssue>& issues) {
    Field f = make_profile(grid, spec);
    if (!f.in_unit_interval()) issues.push_back({key, "initial profile leaves [0,1]"});
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    KeyValueDoc doc = KeyValueDoc::parse(text);
    ExperimentConfig cfg;
    cfg.text = text;
    cfg.hash = fnv1a64(text);

    std::vector<ConfigIssue> issues;
    cfg.kind_name = doc.get_string("kind");
    if (cfg.kind_name == "trajectory")
        cfg.kind = ExperimentKind::trajectory;
    else if (cfg.kind_name == "martingale-check")
        cfg.kind = ExperimentKind::martingale_check;
    else if (cfg.kind_name == "clt-fluctuations")
        cfg.kind = ExperimentKind::clt_fluctuations;
    else if (cfg.kind_name == "drift-load")
        cfg.kind = ExperimentKind::drift_load;
    else if (cfg.kind_name == "operator-tests")
        cfg.kind = ExperimentKind::operator_tests;
    else
        throw ConfigError({{"kind", "unknown experiment kind '" + cfg.kind_name + "'"}});

    if (doc.has("seed")) cfg.seed = static_cast<std::uint64_t>(doc.get_int("seed"));

    switch (cfg.kind) {
        case ExperimentKind::trajectory: {
            auto& t = cfg.trajectory;
            t.grid = read_grid(doc, issues);
            t.model = read_model(doc, issues);
            t.law = read_law(doc, t.grid, t.model, issues);
            t.horizon = doc.get_double("horizon", 1.0);
            if (!(t.horizon > 0.0)) issues.push_back({"horizon", "must be positive"});
            t.samples = static_cast<int>(doc.get_int("samples", 17));
            t.log_events = doc.get_bool("log.events", false);
            try {
                t.w0 = ProfileSpec::parse(doc.get_string("w0", std::string("constant:0.5")));
                check_profile_in_unit(t.grid, t.w0, "w0", issues);
            } catch (const ConfigError& e) {
                for (const auto& issue : e.issues()) issues.push_back({"w0", issue.reason});
            }
            break;
        }
        case ExperimentKind::martingale_check: {
            auto& m = cfg.martingale;
            m.grid = read_grid(doc, issues);
            m.model = read_model(doc, issues);
            m.law = read_law(doc, m.grid, m.model, issues);
            m.w0 = doc.get_double("w0.constant", 0.5);
            if (m.w0 < 0.0 || m.w0 > 1.0) issues.push_back({"w0.constant", "must be in [0,1]"});
            m.phi_center = doc.get_double("phi.center", 0.5 * m.grid.length);
            m.phi_width = doc.get_double("phi.width", 0.1 * m.grid.length);
            m.window = doc.get_double("window", 1.0);
            m.replicates = static_cast<std::size_t>(doc.get_int("replicates", 200));
            if (m.replicates < 100) issues.push_back({"replicates", "need at least 100"});
            if (m.law.radius.kind != RadiusKind::fixed)
                issues.push_back({"radius.law", "martingale-check uses fixed-radius laws"});
            break;
        }
        case ExperimentKind::clt_fluctuations: {
            auto& c = cfg.clt;
            c.grid = read_grid(doc, issues);
            c.model = read_model(doc, issues);
            c.scaling.regime =
                doc.get_string("regime", std::string("brownian")) == "stable" ? Regime::stable
                                                                              : Regime::brownian;
            c.scaling.eps = doc.get_double("scaling.eps");
            c.scaling.delta = doc.get_double("scaling.delta");
            c.scaling.u = doc.get_double("impact", 0.5);
            c.scaling.s = doc.get_double("selection.s", 0.5);
            c.scaling.R = doc.get_double("radius.R", 1.0);
            c.scaling.alpha = doc.get_double("radius.alpha", 0.5);
            c.stable_r_max = doc.get_double("radius.rmax", 0.0);
            try {
                c.scaling.validate(c.grid.d);
            } catch (const std::exception& e) {
                issues.push_back({"scaling", e.what()});
            }
            c.horizon = doc.get_double("horizon", 0.5);
            c.replicates = static_cast<std::size_t>(doc.get_int("replicates", 400));
            c.phi_center = doc.get_double("phi.center", 0.5 * c.grid.length);
            c.phi_width = doc.get_double("phi.width", 0.1 * c.grid.length);
            try {
                c.w0 = ProfileSpec::parse(doc.get_string("w0", std::string("constant:0.5")));
                check_profile_in_unit(c.grid, c.w0, "w0", issues);
            } catch (const ConfigError& e) {
                for (const auto& issue : e.issues()) issues.push_back({"w0", issue.reason});
            }
            if (c.scaling.regime == Regime::brownian &&
                c.scaling.r_N() < 8.0 * c.grid.h)
                issues.push_back({"scaling.delta", "rescaled radius violates r/h >= 8"});
            break;
        }
        case ExperimentKind::drift_load: {
            auto& dl = cfg.drift_load;
            dl.d = static_cast<int>(doc.get_int("dimension", 1));
            dl.deltas = doc.get_double_list("deltas");
            dl.sweep_exponent = doc.get_double("sweep.exponent", 4.2);
            dl.u = doc.get_double("impact", 1.0);
            dl.R = doc.get_double("radius.R", 1.0);
            dl.s1 = doc.get_double("model.s1", 0.5);
            dl.s2 = doc.get_double("model.s2", 0.45);
            dl.nu1 = doc.get_double("model.nu1", 5e-3);
            dl.nu2 = doc.get_double("model.nu2", 5e-3);
            dl.horizon_relaxations = doc.get_double("horizon.relaxations", 14.0);
            dl.burn_in_relaxations = doc.get_double("burnin.relaxations", 4.0);
            dl.samples_per_relaxation = doc.get_double("samples.per.relaxation", 2.0);
            dl.replicates = static_cast<std::size_t>(doc.get_int("replicates", 8));
            dl.probes = static_cast<int>(doc.get_int("probes", 8));
            dl.cells_per_R = doc.get_double("cells.per.R", 8.0);
            dl.domain_corr_lengths = doc.get_double("domain.corr.lengths", 3.0);
            try {
                dl.validate();
            } catch (const std::exception& e) {
                issues.push_back({"drift-load", e.what()});
            }
            break;
        }
        case ExperimentKind::operator_tests: {
            auto& ot = cfg.operator_tests;
            ot.grid = read_grid(doc, issues);
            ot.radii = doc.get_double_list("radii", std::vector<double>{0.5, 0.25, 0.125});
            ot.deltas = doc.get_double_list("deltas", std::vector<double>{0.4, 0.2, 0.1});
            ot.alpha = doc.get_double("radius.alpha", 0.5);
            double amax = std::min(2.0, static_cast<double>(ot.grid.d));
            if (!(ot.alpha > 0.0) || !(ot.alpha < amax))
                issues.push_back({"radius.alpha", "alpha must lie in (0, min(2,d))"});
            for (double r : ot.radii)
                if (r < 8.0 * ot.grid.h)
                    issues.push_back({"radii", "radius below the resolution contract r/h >= 8"});
            break;
        }
    }

    for (const std::string& key : doc.unconsumed()) issues.push_back({key, "unknown key"});
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

}  // namespace slfv
