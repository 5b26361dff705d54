#pragma once

#include "gmsde/examples.hpp"
#include "gmsde/solver.hpp"
#include "gmsde/types.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gmsde {

// Flat key=value run configuration. '#' starts a comment; blank lines are
// ignored; later assignments win.

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "example.name",
        "surface.kind", "surface.center", "surface.radius", "surface.normal", "surface.offset",
        "surface.points", "surface.reach",
        "transform.c", "transform.kappa", "transform.safety_factor", "transform.inverse_tol",
        "dividend.beta", "dividend.ubar", "dividend.alphas", "dividend.b_intercept", "dividend.b_slope",
        "sim.x0", "sim.T", "sim.levels", "sim.paths", "sim.seed", "sim.methods", "sim.threads",
        "sim.terminal_only",
        "convergence.slope_min", "convergence.slope_max",
        "check.c0",
    };
    return keys;
}

inline const std::vector<std::string>& example_names() {
    static const std::vector<std::string> names = {"unit-circle", "1d-jump", "dividend", "unit-circle-smooth",
                                                   "unit-circle-sigma0"};
    return names;
}

class Config {
public:
    /// Parses configuration text; `origin` names the source in messages.
    static Config parse(std::string_view text, const std::string& origin = "config") {
        Config cfg;
        std::istringstream in{std::string(text)};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (trim(line).empty()) continue;
            try {
                cfg.assign(line);
            } catch (const Error& e) {
                throw Error(ErrorCode::configuration, origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::configuration, "cannot read configuration file " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        return parse(buf.str(), path);
    }

    /// Applies one "key=value" assignment.
    void assign(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::configuration, "expected key=value, got '" + std::string(assignment) + "'");
        set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }

    void set(const std::string& key, const std::string& value) {
        const auto& keys = known_config_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw Error(ErrorCode::configuration, "unknown configuration key '" + key + "'");
        values_[key] = value;
    }

    /// Entries of `other` replace ours.
    void merge(const Config& other) {
        for (const auto& [k, v] : other.values_) values_[k] = v;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    static std::string trim(std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return std::string(s.substr(b, e - b + 1));
    }

private:
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

inline double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        throw Error(ErrorCode::configuration, key + ": '" + text + "' is not a finite number");
    return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
    std::int64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error(ErrorCode::configuration, key + ": '" + text + "' is not an integer");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw Error(ErrorCode::configuration, key + ": '" + text + "' is not a boolean");
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = Config::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
    if (out.empty()) throw Error(ErrorCode::configuration, key + ": empty list");
    return out;
}

inline Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

/// 17 significant digits round-trip any double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_list(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Resolution against an example
// ---------------------------------------------------------------------------

/// Everything a command needs, after defaults, file and overrides are merged.
struct RunSettings {
    ExampleBundle bundle;
    double c = 0.0;
    int levels = 10;
    std::size_t paths = 1024;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::vector<Method> methods{Method::gm, Method::em};
    bool terminal_only = false;
    double slope_min = 0.35;
    double slope_max = 0.70;
    /// key -> final value, for audit headers.
    std::map<std::string, std::string> resolved;
};

inline std::vector<Method> parse_methods(const std::string& key, const std::string& text) {
    std::vector<Method> out;
    for (auto item : split_list(text)) {
        std::transform(item.begin(), item.end(), item.begin(), [](unsigned char ch) { return std::tolower(ch); });
        Method m;
        if (item == "gm") m = Method::gm;
        else if (item == "em") m = Method::em;
        else throw Error(ErrorCode::configuration, key + ": unknown method '" + item + "'");
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) throw Error(ErrorCode::configuration, key + ": no method given");
    return out;
}

inline ExampleBundle build_example(const std::string& name) {
    if (name == "unit-circle") return build_unit_circle();
    if (name == "unit-circle-smooth") return build_unit_circle(UnitCircleVariant::smooth);
    if (name == "unit-circle-sigma0") return build_unit_circle(UnitCircleVariant::zero_diffusion);
    if (name == "1d-jump") return build_1d_reference();
    if (name == "dividend") return build_dividend();
    std::string known;
    for (const auto& n : example_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::configuration, "unknown example '" + name + "' (known: " + known + ")");
}

namespace detail {

inline void require_kind(const Config& cfg, const std::string& key, SurfaceKind kind, const std::string& example) {
    if (cfg.has(key))
        throw Error(ErrorCode::configuration,
                    key + " does not apply to example '" + example + "' (surface kind " + to_string(kind) + ")");
}

/// Applies surface.* keys. The shipped examples fix the surface family, so
/// only the parameters of that family can change.
inline ExampleBundle apply_surface_keys(ExampleBundle b, const Config& cfg) {
    const SurfaceKind kind = b.problem->surface.kind();
    if (auto k = cfg.get("surface.kind"); k && *k != to_string(kind))
        throw Error(ErrorCode::configuration,
                    "surface.kind '" + *k + "' does not match example '" + b.name + "' (" + to_string(kind) + ")");
    if (kind != SurfaceKind::sphere) {
        require_kind(cfg, "surface.center", kind, b.name);
        require_kind(cfg, "surface.radius", kind, b.name);
    }
    if (kind != SurfaceKind::point_set_1d) require_kind(cfg, "surface.points", kind, b.name);
    if (kind != SurfaceKind::graph) require_kind(cfg, "surface.reach", kind, b.name);
    require_kind(cfg, "surface.normal", kind, b.name);
    require_kind(cfg, "surface.offset", kind, b.name);

    if (kind == SurfaceKind::sphere && (cfg.has("surface.center") || cfg.has("surface.radius"))) {
        const auto* ball = b.problem->surface.as_sphere();
        Vector center = ball->center;
        double radius = ball->radius;
        if (auto v = cfg.get("surface.center")) center = to_vector(parse_doubles("surface.center", *v));
        if (auto v = cfg.get("surface.radius")) radius = parse_double("surface.radius", *v);
        if (center.size() != b.problem->dim) throw Error(ErrorCode::configuration, "surface.center has wrong dimension");
        if (!(radius > 0.0)) throw Error(ErrorCode::configuration, "surface.radius must be positive");
        SdeProblem p = *b.problem;
        p.surface = Hypersurface::sphere(center, radius);
        // The closed-form alpha derivative belongs to the unit circle at 0.
        p.alpha_derivative = nullptr;
        b.problem = std::make_shared<const SdeProblem>(std::move(p));
    }
    if (kind == SurfaceKind::point_set_1d) {
        if (auto v = cfg.get("surface.points")) {
            // Drift +1 left of the first jump, alternating sign afterwards.
            std::vector<double> points = parse_doubles("surface.points", *v);
            std::sort(points.begin(), points.end());
            std::vector<ScalarFn> pieces;
            for (std::size_t k = 0; k <= points.size(); ++k) {
                const double sign = k % 2 == 0 ? 1.0 : -1.0;
                pieces.push_back([sign](double) { return sign; });
            }
            try {
                b = build_1d_jump(pieces, points, [](double) { return 1.0; });
            } catch (const Error& e) {
                throw Error(ErrorCode::configuration, std::string("surface.points: ") + e.what());
            }
        }
    }
    if (kind == SurfaceKind::graph) {
        if (auto v = cfg.get("surface.reach")) {
            const double reach = parse_double("surface.reach", *v);
            if (!(reach > 0.0)) throw Error(ErrorCode::configuration, "surface.reach must be positive");
            const auto* gr = b.problem->surface.as_graph();
            SdeProblem p = *b.problem;
            p.surface = Hypersurface::graph(p.dim, gr->coordinate, gr->g, reach, gr->parameter_sampler);
            b.problem = std::make_shared<const SdeProblem>(std::move(p));
        }
    }
    return b;
}

inline ExampleBundle apply_dividend_keys(ExampleBundle b, const Config& cfg) {
    bool any = false;
    for (const auto& [k, v] : cfg.values()) any = any || k.rfind("dividend.", 0) == 0;
    if (!any) return b;
    if (b.name != "dividend") throw Error(ErrorCode::configuration, "dividend.* keys need example.name = dividend");
    DividendParams params = DividendParams::defaults();
    if (auto v = cfg.get("dividend.alphas")) {
        params.alphas = parse_doubles("dividend.alphas", *v);
        params.intensity = DividendParams::default_intensity(static_cast<int>(params.alphas.size()));
    }
    if (auto v = cfg.get("dividend.beta")) params.beta = parse_double("dividend.beta", *v);
    if (auto v = cfg.get("dividend.ubar")) params.ubar = parse_double("dividend.ubar", *v);
    if (auto v = cfg.get("dividend.b_intercept")) params.b_intercept = parse_double("dividend.b_intercept", *v);
    if (auto v = cfg.get("dividend.b_slope")) params.b_slope = parse_double("dividend.b_slope", *v);
    try {
        return build_dividend(params);
    } catch (const Error& e) {
        throw Error(ErrorCode::configuration, e.what());
    }
}

} // namespace detail

/// Builds the example named by example.name and applies every other key.
/// Throws Error(configuration) on any invalid or inapplicable entry.
inline RunSettings resolve(const Config& cfg) {
    const auto name = cfg.get("example.name");
    if (!name || name->empty()) throw Error(ErrorCode::configuration, "no example given");

    RunSettings s;
    s.bundle = build_example(*name);
    s.bundle = detail::apply_dividend_keys(std::move(s.bundle), cfg);
    s.bundle = detail::apply_surface_keys(std::move(s.bundle), cfg);
    s.bundle.name = *name;

    SdeProblem p = *s.bundle.problem;
    if (auto v = cfg.get("sim.x0")) {
        p.x0 = to_vector(parse_doubles("sim.x0", *v));
        if (p.x0.size() != p.dim)
            throw Error(ErrorCode::configuration, "sim.x0 needs " + std::to_string(p.dim) + " entries");
    }
    if (auto v = cfg.get("sim.T")) {
        p.horizon = parse_double("sim.T", *v);
        if (!(p.horizon > 0.0)) throw Error(ErrorCode::configuration, "sim.T must be positive");
    }
    if (auto v = cfg.get("check.c0")) {
        p.nonparallel_tol = parse_double("check.c0", *v);
        if (!(p.nonparallel_tol > 0.0)) throw Error(ErrorCode::configuration, "check.c0 must be positive");
    }
    s.bundle.problem = std::make_shared<const SdeProblem>(std::move(p));

    auto& opt = s.bundle.transform_options;
    if (auto v = cfg.get("transform.kappa")) opt.kappa = parse_double("transform.kappa", *v);
    if (auto v = cfg.get("transform.safety_factor")) opt.safety_factor = parse_double("transform.safety_factor", *v);
    if (auto v = cfg.get("transform.inverse_tol")) opt.inverse_tol = parse_double("transform.inverse_tol", *v);
    if (!(opt.kappa > 1.0)) throw Error(ErrorCode::configuration, "transform.kappa must exceed 1");
    if (!(opt.safety_factor > 0.0 && opt.safety_factor <= 1.0))
        throw Error(ErrorCode::configuration, "transform.safety_factor must lie in (0, 1]");
    if (!(opt.inverse_tol > 0.0)) throw Error(ErrorCode::configuration, "transform.inverse_tol must be positive");
    if (auto v = cfg.get("transform.c")) {
        s.bundle.c = parse_double("transform.c", *v);
        if (!(*s.bundle.c > 0.0)) throw Error(ErrorCode::configuration, "transform.c must be positive");
    }

    s.levels = s.bundle.sim.levels;
    s.paths = s.bundle.sim.paths;
    s.seed = s.bundle.sim.seed;
    s.slope_min = s.bundle.sim.slope_min;
    s.slope_max = s.bundle.sim.slope_max;
    if (auto v = cfg.get("sim.levels")) s.levels = static_cast<int>(parse_int("sim.levels", *v));
    if (auto v = cfg.get("sim.paths")) {
        const auto n = parse_int("sim.paths", *v);
        if (n < 1) throw Error(ErrorCode::configuration, "sim.paths must be at least 1");
        s.paths = static_cast<std::size_t>(n);
    }
    if (auto v = cfg.get("sim.seed")) {
        const auto n = parse_int("sim.seed", *v);
        if (n < 0) throw Error(ErrorCode::configuration, "sim.seed must be nonnegative");
        s.seed = static_cast<std::uint64_t>(n);
    }
    if (auto v = cfg.get("sim.threads")) {
        const auto n = parse_int("sim.threads", *v);
        if (n < 0) throw Error(ErrorCode::configuration, "sim.threads must be nonnegative");
        s.threads = static_cast<unsigned>(n);
    }
    if (auto v = cfg.get("sim.methods")) s.methods = parse_methods("sim.methods", *v);
    if (auto v = cfg.get("sim.terminal_only")) s.terminal_only = parse_bool("sim.terminal_only", *v);
    if (auto v = cfg.get("convergence.slope_min")) s.slope_min = parse_double("convergence.slope_min", *v);
    if (auto v = cfg.get("convergence.slope_max")) s.slope_max = parse_double("convergence.slope_max", *v);
    if (s.levels < 1 || s.levels > 24) throw Error(ErrorCode::configuration, "sim.levels must lie in [1, 24]");
    if (!(s.slope_min <= s.slope_max)) throw Error(ErrorCode::configuration, "slope band is empty");

    try {
        s.c = bundle_c(s.bundle);
    } catch (const Error& e) {
        throw Error(ErrorCode::configuration, std::string("cannot choose the bump radius: ") + e.what());
    }

    const auto& prob = *s.bundle.problem;
    std::string methods;
    for (Method m : s.methods) methods += (methods.empty() ? "" : ",") + to_string(m);
    s.resolved = {
        {"example.name", s.bundle.name},
        {"surface.kind", to_string(prob.surface.kind())},
        {"surface.reach", format_double(prob.surface.reach())},
        {"transform.c", format_double(s.c)},
        {"transform.kappa", format_double(opt.kappa)},
        {"transform.safety_factor", format_double(opt.safety_factor)},
        {"transform.inverse_tol", format_double(opt.inverse_tol)},
        {"sim.x0", format_list(prob.x0)},
        {"sim.T", format_double(prob.horizon)},
        {"sim.levels", std::to_string(s.levels)},
        {"sim.paths", std::to_string(s.paths)},
        {"sim.seed", std::to_string(s.seed)},
        {"sim.methods", methods},
        {"sim.terminal_only", s.terminal_only ? "true" : "false"},
        {"convergence.slope_min", format_double(s.slope_min)},
        {"convergence.slope_max", format_double(s.slope_max)},
        {"check.c0", format_double(prob.nonparallel_tol)},
    };
    if (const auto* ball = prob.surface.as_sphere()) {
        s.resolved["surface.center"] = format_list(ball->center);
        s.resolved["surface.radius"] = format_double(ball->radius);
    }
    if (const auto* ps = prob.surface.as_point_set()) s.resolved["surface.points"] = format_list(to_vector(ps->points));
    for (const auto& [k, v] : cfg.values())
        if (k.rfind("dividend.", 0) == 0) s.resolved[k] = v;
    return s;
}

} // namespace gmsde
