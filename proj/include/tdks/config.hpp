#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdks/fixedpoint.hpp"
#include "tdks/potentials.hpp"
#include "tdks/spectral.hpp"

namespace tdks {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat sectioned key=value configuration. Unknown sections or keys are
// errors (typo guard); every value is kept verbatim for hashing.
class RunConfig {
public:
    static RunConfig parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config: cannot open " + path);
        std::stringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    static RunConfig parse(const std::string& text) {
        RunConfig cfg;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (known_keys().find(section) == known_keys().end())
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": unknown section [" + section + "]");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": key outside section");
            const auto& allowed = known_keys().at(section);
            if (allowed.find(key) == allowed.end())
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "' in [" + section + "]");
            cfg.values_[section + "." + key] = value;
        }
        cfg.validate();
        return cfg;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        const auto it = known_keys().find(section);
        if (it == known_keys().end() || it->second.find(key) == it->second.end())
            throw ConfigError("config: unknown key " + section + "." + key);
        values_[section + "." + key] = value;
        validate();
    }

    bool has(const std::string& dotted) const { return values_.count(dotted) > 0; }

    std::string str(const std::string& dotted, const std::string& fallback = "") const {
        const auto it = values_.find(dotted);
        return it == values_.end() ? fallback : it->second;
    }

    double num(const std::string& dotted, std::optional<double> fallback = std::nullopt) const {
        const auto it = values_.find(dotted);
        if (it == values_.end()) {
            if (fallback) return *fallback;
            throw ConfigError("config: missing required key " + dotted);
        }
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key " + dotted + " is not a number: '" + it->second + "'");
        }
    }

    long integer(const std::string& dotted, std::optional<long> fallback = std::nullopt) const {
        const double v = num(dotted, fallback ? std::optional<double>(double(*fallback))
                                              : std::nullopt);
        const long n = long(v);
        if (double(n) != v) throw ConfigError("config: key " + dotted + " must be an integer");
        return n;
    }

    // canonical text: sorted dotted keys, one per line; the output location
    // is not part of the problem identity
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_)
            if (k.rfind("output.", 0) != 0) out += k + "=" + v + "\n";
        return out;
    }

    std::uint64_t hash() const {  // FNV-1a 64
        std::uint64_t h = 1469598103934665603ULL;
        for (const char ch : canonical()) {
            h ^= std::uint64_t(static_cast<unsigned char>(ch));
            h *= 1099511628211ULL;
        }
        return h;
    }

    // ---- typed accessors -------------------------------------------------

    BoxDomain domain() const {
        const int dim = int(integer("spectral.dim"));
        const auto lens = parse_list(str("spectral.lengths"));
        const auto gps = parse_list(str("spectral.grid_points"));
        if (int(lens.size()) != dim || int(gps.size()) != dim)
            throw ConfigError("config: lengths/grid_points must list one value per axis");
        std::array<double, 3> L{0, 0, 0};
        std::array<int, 3> N{0, 0, 0};
        for (int a = 0; a < dim; ++a) {
            L[a] = lens[std::size_t(a)];
            N[a] = int(gps[std::size_t(a)]);
        }
        try {
            return BoxDomain(dim, L, N);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }

    int modes() const { return int(integer("spectral.modes")); }
    double horizon() const { return num("galerkin.T"); }
    double dt() const { return num("galerkin.dt"); }
    std::uint64_t seed() const { return std::uint64_t(integer("sampling.seed", 42)); }
    std::string output_dir() const { return str("output.directory", "out"); }

    std::optional<double> mollifier_epsilon() const {
        if (!has("mollifier.epsilon")) return std::nullopt;
        return num("mollifier.epsilon");
    }

    ProblemSpec problem_spec() const {
        ProblemSpec spec;
        const BoxDomain dom = domain();
        try {
            spec.basis = Basis::create(dom, modes());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        spec.potentials.V0 = make_field(dom, str("potentials.V0", "none"));
        spec.potentials.Vu = make_field(dom, str("potentials.Vu", "none"));
        spec.potentials.u = make_control(str("potentials.u", "0:0"));
        spec.potentials.softening = num("potentials.softening", 0.25);
        spec.potentials.horizon = horizon();
        if (has("rough.W0") || has("rough.Wu")) {
            spec.potentials.has_rough = true;
            spec.potentials.W0 = make_field(dom, str("rough.W0", "none"));
            spec.potentials.Wu = make_field(dom, str("rough.Wu", "none"));
            spec.potentials.w = make_control(str("rough.w", "0:0"));
        } else {
            spec.potentials.W0 = make_zero_potential(dom);
            spec.potentials.Wu = make_zero_potential(dom);
        }
        spec.potentials.finalize();
        spec.xc = make_xc("xc");
        spec.rough_xc = make_xc("rough_xc");
        spec.hartree_on = str("hartree.enabled", "true") == "true";
        return spec;
    }

    SolveOptions solve_options(std::uint64_t config_hash) const {
        SolveOptions o;
        o.T = horizon();
        o.dt = dt();
        o.tol = num("fixedpoint.tol", 1e-10);
        o.max_iter = int(integer("fixedpoint.max_iter", 40));
        const std::string mode = str("fixedpoint.mode", "certified");
        if (mode == "certified")
            o.mode = SolveOptions::Mode::certified;
        else if (mode == "practical")
            o.mode = SolveOptions::Mode::practical;
        else
            throw ConfigError("config: fixedpoint.mode must be certified or practical");
        o.practical_target = num("fixedpoint.practical_target", 0.5);
        o.policy.B = num("fixedpoint.B", 1.0);
        o.policy.c = num("fixedpoint.c", 1.0);
        o.config_hash = config_hash;
        if (!(o.dt > 0.0)) throw ConfigError("config: galerkin.dt must be positive");
        if (!(o.T > 0.0)) throw ConfigError("config: galerkin.T must be positive");
        if (o.dt > o.T) throw ConfigError("config: galerkin.dt must not exceed T");
        if (!(o.tol > 0.0)) throw ConfigError("config: fixedpoint.tol must be positive");
        return o;
    }

    NonlinearityConstants nonlinearity_constants() const {
        NonlinearityConstants nl;
        nl.C_b = num("energy.C_b", 1.0);
        nl.C_c = num("energy.C_c", 1.0);
        const XcModel xc = make_xc("xc");
        nl.K_tilde = xc.K_tilde;
        nl.provenance = has("energy.C_b") || has("energy.C_c")
                            ? "config-declared"
                            : "calibrated defaults (lipschitz study)";
        return nl;
    }

    // complex grid samples of the configured initial state
    Eigen::ArrayXcd initial_grid(const BoxDomain& dom) const {
        const std::string s = str("initial.psi0", "mode:1");
        const double scale = num("initial.scale", 1.0);
        const auto [kind, args] = split_head(s);
        if (kind == "mode") {
            const int j = args.empty() ? 1 : int(parse_list(args)[0]);
            if (j < 1) throw ConfigError("config: initial mode index must be >= 1");
            ModeIndex idx;
            idx.j = {j, 1, 1};
            for (int a = 1; a < dom.dim; ++a) idx.j[a] = 1;
            EigenFunction f{dom, idx};
            return scale * sample_complex(dom, [&](const std::array<double, 3>& x) {
                       return std::complex<double>(f(x), 0.0);
                   });
        }
        if (kind == "gaussian") {
            const auto p = parse_list(args.empty() ? "1.0,0.5" : args);
            if (p.size() != 2) throw ConfigError("config: initial gaussian needs amp,sigma");
            const double amp = p[0], sigma = p[1];
            return scale * sample_complex(dom, [&](const std::array<double, 3>& x) {
                       double r2 = 0.0;
                       for (int a = 0; a < dom.dim; ++a) {
                           const double d = x[a] - 0.5 * dom.lengths[a];
                           r2 += d * d;
                       }
                       double taper = 1.0;  // force the Dirichlet boundary value
                       for (int a = 0; a < dom.dim; ++a)
                           taper *= std::sin(M_PI * x[a] / dom.lengths[a]);
                       return std::complex<double>(
                           amp * std::exp(-r2 / (2.0 * sigma * sigma)) * taper, 0.0);
                   });
        }
        if (kind == "smooth-odd") {
            // amp * sin(pi x/L) exp(cos(2 pi x/L)): odd-periodic analytic, so
            // its sine coefficients decay faster than any power
            const double amp = args.empty() ? 1.0 : parse_list(args)[0];
            return scale * sample_complex(dom, [&](const std::array<double, 3>& x) {
                       double v = amp;
                       for (int a = 0; a < dom.dim; ++a)
                           v *= std::sin(M_PI * x[a] / dom.lengths[a]) *
                                std::exp(std::cos(2.0 * M_PI * x[a] / dom.lengths[a]));
                       return std::complex<double>(v, 0.0);
                   });
        }
        if (kind == "tent") {
            const double amp = args.empty() ? 1.0 : parse_list(args)[0];
            return scale * sample_complex(dom, [&](const std::array<double, 3>& x) {
                       double v = amp;
                       for (int a = 0; a < dom.dim; ++a)
                           v *= 2.0 / dom.lengths[a] * std::min(x[a], dom.lengths[a] - x[a]);
                       return std::complex<double>(v, 0.0);
                   });
        }
        if (kind == "coeffs") {
            // re:im pairs over the first modes of the configured basis
            auto basis = Basis::create(dom, modes());
            Eigen::VectorXcd c = Eigen::VectorXcd::Zero(modes());
            std::istringstream is(args);
            std::string item;
            int q = 0;
            while (std::getline(is, item, ',')) {
                if (q >= modes()) throw ConfigError("config: more coefficients than modes");
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("config: coeffs entries must be re:im");
                c[q++] = std::complex<double>(std::stod(item.substr(0, colon)),
                                              std::stod(item.substr(colon + 1)));
            }
            return scale * basis->synthesize(c);
        }
        throw ConfigError("config: unknown initial.psi0 kind '" + kind + "'");
    }

private:
    static const std::map<std::string, std::set<std::string>>& known_keys() {
        static const std::map<std::string, std::set<std::string>> k = {
            {"spectral", {"dim", "lengths", "grid_points", "modes"}},
            {"galerkin", {"T", "dt"}},
            {"potentials", {"V0", "Vu", "u", "softening"}},
            {"rough", {"W0", "Wu", "w"}},
            {"xc", {"model", "c", "K", "K_tilde", "K1", "K2", "table"}},
            {"rough_xc", {"model", "c", "K", "K_tilde", "K1", "K2", "table"}},
            {"hartree", {"enabled"}},
            {"mollifier", {"epsilon"}},
            {"fixedpoint", {"mode", "tol", "max_iter", "B", "c", "practical_target"}},
            {"energy", {"C_b", "C_c"}},
            {"initial", {"psi0", "scale"}},
            {"output", {"directory"}},
            {"sampling", {"seed", "trials"}},
        };
        return k;
    }

    // structural validation happens lazily in the typed accessors, which all
    // raise ConfigError; parse only enforces the key registry
    void validate() const {}

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    static std::vector<double> parse_list(const std::string& s) {
        std::vector<double> out;
        std::istringstream is(s);
        std::string item;
        while (std::getline(is, item, ',')) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("config: bad numeric list entry '" + item + "'");
            }
        }
        if (out.empty()) throw ConfigError("config: empty numeric list");
        return out;
    }

    static std::pair<std::string, std::string> split_head(const std::string& s) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) return {s, ""};
        return {s.substr(0, colon), s.substr(colon + 1)};
    }

    ScalarField make_field(const BoxDomain& dom, const std::string& s) const {
        const auto [kind, args] = split_head(s);
        if (kind == "none" || kind == "zero") return make_zero_potential(dom);
        if (kind == "constant") return make_constant_potential(dom, std::stod(args));
        if (kind == "harmonic") return make_harmonic_potential(dom, std::stod(args));
        if (kind == "gaussian-well") {
            const auto p = parse_list(args);
            if (p.size() != 2) throw ConfigError("config: gaussian-well needs amp,sigma");
            return make_gaussian_well_potential(dom, p[0], p[1]);
        }
        if (kind == "cosine") {
            // amp * cos(2 pi k x_1 / L_1): even-periodic profile, keeps the
            // odd-smooth solution class of the sine basis
            const auto p = parse_list(args);
            const double amp = p[0];
            const double kk = p.size() > 1 ? p[1] : 1.0;
            const double w = 2.0 * M_PI * kk / dom.lengths[0];
            return make_potential_from_function(
                dom,
                [=](const std::array<double, 3>& x) { return amp * std::cos(w * x[0]); },
                [=](const std::array<double, 3>& x) {
                    return std::abs(amp * w * std::sin(w * x[0]));
                },
                [=](const std::array<double, 3>& x) {
                    return -amp * w * w * std::cos(w * x[0]);
                });
        }
        if (kind == "abs-well") {
            // Lipschitz but not C^1 profile for the rough path: amp * |x - L/2|
            const double amp = std::stod(args);
            return make_potential_from_grid(
                dom, sample_real(dom, [&](const std::array<double, 3>& x) {
                    double v = 0.0;
                    for (int a = 0; a < dom.dim; ++a)
                        v += std::abs(x[a] - 0.5 * dom.lengths[a]);
                    return amp * v;
                }));
        }
        if (kind == "csv") {
            std::ifstream is(args);
            if (!is) throw ConfigError("config: cannot open potential file " + args);
            std::vector<double> vals;
            std::string line;
            while (std::getline(is, line)) {
                line = trim(line);
                if (line.empty()) continue;
                vals.push_back(std::stod(line));
            }
            if (vals.size() != dom.total_nodes())
                throw ConfigError("config: potential file node count mismatch");
            Eigen::ArrayXd arr(long(vals.size()));
            for (std::size_t i = 0; i < vals.size(); ++i) arr[long(i)] = vals[i];
            return make_potential_from_grid(dom, arr);
        }
        throw ConfigError("config: unknown potential kind '" + kind + "'");
    }

    ControlSignal make_control(const std::string& s) const {
        const auto [head, rest] = split_head(s);
        ControlSignal sig;
        if (head == "csv") {
            std::ifstream is(rest);
            if (!is) throw ConfigError("config: cannot open control file " + rest);
            std::string line;
            while (std::getline(is, line)) {
                line = trim(line);
                if (line.empty()) continue;
                const auto comma = line.find(',');
                if (comma == std::string::npos)
                    throw ConfigError("config: control rows must be breakpoint,value");
                sig.times.push_back(std::stod(line.substr(0, comma)));
                sig.values.push_back(std::stod(line.substr(comma + 1)));
            }
        } else {
            // inline t0:v0,t1:v1,...
            std::istringstream is(s);
            std::string item;
            while (std::getline(is, item, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("config: control entries must be t:value");
                sig.times.push_back(std::stod(item.substr(0, colon)));
                sig.values.push_back(std::stod(item.substr(colon + 1)));
            }
        }
        try {
            sig.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        return sig;
    }

    XcModel make_xc(const std::string& section) const {
        const std::string model = str(section + ".model", "none");
        if (model == "none") return XcModel::none();
        if (model == "saturating-density") {
            XcModel xc = XcModel::saturating(num(section + ".c", 1.0));
            if (has(section + ".K")) xc.K = num(section + ".K");
            if (has(section + ".K_tilde")) xc.K_tilde = num(section + ".K_tilde");
            if (has(section + ".K1")) xc.K1 = num(section + ".K1");
            if (has(section + ".K2")) xc.K2 = num(section + ".K2");
            return xc;
        }
        if (model == "table") {
            XcModel xc;
            xc.kind = XcModel::Kind::table;
            // rho0:v0,rho1:v1,...
            std::istringstream is(str(section + ".table"));
            std::string item;
            while (std::getline(is, item, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("config: xc table entries must be rho:value");
                xc.table_rho.push_back(std::stod(item.substr(0, colon)));
                xc.table_value.push_back(std::stod(item.substr(colon + 1)));
            }
            if (has(section + ".K")) xc.K = num(section + ".K");
            if (has(section + ".K_tilde")) xc.K_tilde = num(section + ".K_tilde");
            if (has(section + ".K1")) xc.K1 = num(section + ".K1");
            if (has(section + ".K2")) xc.K2 = num(section + ".K2");
            return xc;
        }
        throw ConfigError("config: unknown xc model '" + model + "'");
    }

    std::map<std::string, std::string> values_;
};

}  // namespace tdks
