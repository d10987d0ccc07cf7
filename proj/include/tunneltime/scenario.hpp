#pragma once

// Scenario configuration (JSON), task orchestration and flat-file output for
// the command-line front end.

#include "tunneltime/barriers.hpp"
#include "tunneltime/quadrature.hpp"
#include "tunneltime/toa_kernel.hpp"
#include "tunneltime/traversal.hpp"
#include "tunneltime/wavepacket.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tunneltime
{
    using json = nlohmann::json;

    inline const std::vector<std::string> &known_tasks()
    {
        static const std::vector<std::string> tasks{"traverse", "dwell", "decompose", "scan", "oracle", "classify"};
        return tasks;
    }

    struct PacketConfig
    {
        std::string kind = "gaussian";
        double q0 = 0.0;
        double sigma = 1.0;
        double k0 = 1.0;
        std::optional<std::array<double, 2>> truncation;
        double n_sigmas = 8.0;
        double norm_tail_eps = 1e-12;

        bool operator==(const PacketConfig &) const = default;
    };

    struct StackConfig
    {
        std::vector<Segment> segments;
        double b = 1.0;

        bool operator==(const StackConfig &) const = default;
    };

    struct SmoothConfig
    {
        /// Named profile ("gaussian", "cosine", "constant"); empty when sampled.
        std::string name;
        double height = 0.0;
        double width = 1.0;
        std::vector<std::pair<double, double>> samples;
        std::array<double, 2> support{0.0, 0.0};

        bool operator==(const SmoothConfig &) const = default;
    };

    using BarrierConfig = std::variant<StackConfig, SmoothConfig, AttoclockBarrier>;

    struct ScanConfig
    {
        std::string param;
        double from = 0.0;
        double to = 0.0;
        int steps = 1;

        std::vector<double> values() const
        {
            std::vector<double> out;
            for (int i = 0; i < steps; ++i)
                out.push_back(steps == 1 ? from : from + (to - from) * i / (steps - 1));
            return out;
        }

        bool operator==(const ScanConfig &) const = default;
    };

    struct ComputeConfig
    {
        std::vector<std::string> tasks;
        QuadSpec quad;
        std::optional<ScanConfig> scan;

        bool has(std::string_view task) const
        {
            return std::find(tasks.begin(), tasks.end(), task) != tasks.end();
        }

        bool operator==(const ComputeConfig &) const = default;
    };

    struct ScenarioConfig
    {
        std::string name = "scenario";
        UnitSystem units;
        PacketConfig packet;
        BarrierConfig barrier;
        ComputeConfig compute;

        bool operator==(const ScenarioConfig &) const = default;
    };

    struct ParseResult
    {
        std::optional<ScenarioConfig> config;
        std::vector<std::string> errors;

        bool ok() const { return config.has_value() && errors.empty(); }
    };

    namespace detail
    {
        // Collects every validation error with its key path.
        class ConfigReader
        {
        public:
            std::vector<std::string> errors;

            void fail(const std::string &path, const std::string &msg) { errors.push_back(path + ": " + msg); }

            bool expect_object(const json &j, const std::string &path)
            {
                if (!j.is_object()) {
                    fail(path, "expected an object");
                    return false;
                }
                return true;
            }

            void only_keys(const json &j, const std::string &path, std::initializer_list<const char *> allowed)
            {
                for (const auto &[key, value] : j.items()) {
                    if (std::none_of(allowed.begin(), allowed.end(), [&](const char *a) { return key == a; }))
                        fail(join(path, key), "unknown key");
                }
            }

            std::optional<double> number(const json &j, const std::string &path, const char *key, bool required)
            {
                const std::string p = join(path, key);
                if (!j.contains(key)) {
                    if (required)
                        fail(p, "missing required field");
                    return std::nullopt;
                }
                const json &v = j.at(key);
                if (!v.is_number()) {
                    fail(p, "expected a number");
                    return std::nullopt;
                }
                const double x = v.get<double>();
                if (!std::isfinite(x)) {
                    fail(p, "must be finite");
                    return std::nullopt;
                }
                return x;
            }

            double positive(const json &j, const std::string &path, const char *key, bool required, double fallback)
            {
                const auto v = number(j, path, key, required);
                if (!v)
                    return fallback;
                if (!(*v > 0.0))
                    fail(join(path, key), "must be > 0");
                return *v;
            }

            std::optional<std::string> string(const json &j, const std::string &path, const char *key, bool required)
            {
                const std::string p = join(path, key);
                if (!j.contains(key)) {
                    if (required)
                        fail(p, "missing required field");
                    return std::nullopt;
                }
                if (!j.at(key).is_string()) {
                    fail(p, "expected a string");
                    return std::nullopt;
                }
                return j.at(key).get<std::string>();
            }

            std::optional<std::array<double, 2>> pair(const json &j, const std::string &path, const char *key,
                                                      bool required)
            {
                const std::string p = join(path, key);
                if (!j.contains(key)) {
                    if (required)
                        fail(p, "missing required field");
                    return std::nullopt;
                }
                const json &v = j.at(key);
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                    fail(p, "expected [lo, hi]");
                    return std::nullopt;
                }
                return std::array<double, 2>{v[0].get<double>(), v[1].get<double>()};
            }

            static std::string join(const std::string &path, const std::string &key)
            {
                return path.empty() ? key : path + "." + key;
            }
        };

        inline PacketConfig read_packet(ConfigReader &r, const json &j)
        {
            PacketConfig p;
            const std::string path = "packet";
            if (!r.expect_object(j, path))
                return p;
            r.only_keys(j, path, {"kind", "q0", "sigma", "k0", "truncation", "n_sigmas", "norm_tail_eps"});
            if (auto kind = r.string(j, path, "kind", false)) {
                p.kind = *kind;
                if (p.kind != "gaussian")
                    r.fail("packet.kind", "only \"gaussian\" is supported");
            }
            if (auto q0 = r.number(j, path, "q0", true))
                p.q0 = *q0;
            p.sigma = r.positive(j, path, "sigma", true, p.sigma);
            p.k0 = r.positive(j, path, "k0", true, p.k0);
            p.n_sigmas = r.positive(j, path, "n_sigmas", false, p.n_sigmas);
            if (auto eps = r.number(j, path, "norm_tail_eps", false)) {
                p.norm_tail_eps = *eps;
                if (!(*eps > 0.0 && *eps < 1.0))
                    r.fail("packet.norm_tail_eps", "must lie in (0, 1)");
            }
            if (auto band = r.pair(j, path, "truncation", false)) {
                p.truncation = band;
                if (!((*band)[0] >= 0.0 && (*band)[1] > (*band)[0]))
                    r.fail("packet.truncation", "requires 0 <= k_min < k_max");
            }
            return p;
        }

        inline BarrierConfig read_barrier(ConfigReader &r, const json &j)
        {
            const std::string path = "barrier";
            if (!r.expect_object(j, path))
                return StackConfig{};
            const auto kind = r.string(j, path, "kind", true).value_or("");
            if (kind == "stack") {
                r.only_keys(j, path, {"kind", "segments", "b"});
                StackConfig s;
                s.b = r.positive(j, path, "b", true, s.b);
                if (!j.contains("segments") || !j.at("segments").is_array() || j.at("segments").empty()) {
                    r.fail("barrier.segments", "expected a non-empty array of {V, w}");
                } else {
                    const json &segs = j.at("segments");
                    for (std::size_t i = 0; i < segs.size(); ++i) {
                        const std::string sp = "barrier.segments[" + std::to_string(i) + "]";
                        Segment seg;
                        if (!r.expect_object(segs[i], sp))
                            continue;
                        r.only_keys(segs[i], sp, {"V", "w"});
                        if (auto v = r.number(segs[i], sp, "V", true)) {
                            seg.height = *v;
                            if (*v < 0.0)
                                r.fail(sp + ".V", "must be >= 0");
                        }
                        seg.width = r.positive(segs[i], sp, "w", true, 1.0);
                        s.segments.push_back(seg);
                    }
                }
                return s;
            }
            if (kind == "smooth") {
                r.only_keys(j, path, {"kind", "profile", "support"});
                SmoothConfig s;
                if (auto sup = r.pair(j, path, "support", true)) {
                    s.support = *sup;
                    if (!((*sup)[0] > 0.0 && (*sup)[1] > (*sup)[0]))
                        r.fail("barrier.support", "requires 0 < b < a");
                }
                if (!j.contains("profile") || !j.at("profile").is_object()) {
                    r.fail("barrier.profile", "expected an object");
                    return s;
                }
                const json &prof = j.at("profile");
                const std::string pp = "barrier.profile";
                if (prof.contains("samples")) {
                    r.only_keys(prof, pp, {"samples"});
                    const json &smp = prof.at("samples");
                    if (!smp.is_array() || smp.size() < 2) {
                        r.fail(pp + ".samples", "expected at least two [x, V] pairs");
                    } else {
                        for (std::size_t i = 0; i < smp.size(); ++i) {
                            const json &e = smp[i];
                            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                                r.fail(pp + ".samples[" + std::to_string(i) + "]", "expected [x, V]");
                                continue;
                            }
                            if (e[1].get<double>() < 0.0)
                                r.fail(pp + ".samples[" + std::to_string(i) + "]", "V must be >= 0");
                            s.samples.emplace_back(e[0].get<double>(), e[1].get<double>());
                        }
                    }
                } else {
                    r.only_keys(prof, pp, {"name", "height", "width"});
                    s.name = r.string(prof, pp, "name", true).value_or("");
                    if (!s.name.empty() && s.name != "gaussian" && s.name != "cosine" && s.name != "constant")
                        r.fail(pp + ".name", "unknown profile (gaussian, cosine, constant)");
                    if (auto h = r.number(prof, pp, "height", true)) {
                        s.height = *h;
                        if (*h < 0.0)
                            r.fail(pp + ".height", "must be >= 0");
                    }
                    if (s.name == "gaussian")
                        s.width = r.positive(prof, pp, "width", true, s.width);
                    else if (prof.contains("width"))
                        r.fail(pp + ".width", "only used by the gaussian profile");
                }
                return s;
            }
            if (kind == "attoclock") {
                r.only_keys(j, path, {"kind", "z_eff", "i_p", "field"});
                AttoclockBarrier a;
                a.z_eff = r.positive(j, path, "z_eff", true, a.z_eff);
                a.i_p = r.positive(j, path, "i_p", true, a.i_p);
                a.field = r.positive(j, path, "field", true, a.field);
                return a;
            }
            if (!kind.empty())
                r.fail("barrier.kind", "expected one of stack, smooth, attoclock");
            return StackConfig{};
        }

        inline ComputeConfig read_compute(ConfigReader &r, const json &j, const BarrierConfig &barrier)
        {
            ComputeConfig c;
            const std::string path = "compute";
            if (!r.expect_object(j, path))
                return c;
            r.only_keys(j, path, {"tasks", "quad", "scan"});
            if (!j.contains("tasks") || !j.at("tasks").is_array() || j.at("tasks").empty()) {
                r.fail("compute.tasks", "expected a non-empty array of task names");
            } else {
                for (const auto &t : j.at("tasks")) {
                    if (!t.is_string()) {
                        r.fail("compute.tasks", "task names must be strings");
                        continue;
                    }
                    const auto name = t.get<std::string>();
                    if (std::find(known_tasks().begin(), known_tasks().end(), name) == known_tasks().end())
                        r.fail("compute.tasks", "unknown task \"" + name + "\"");
                    else if (!c.has(name))
                        c.tasks.push_back(name);
                }
            }
            if (j.contains("quad")) {
                const json &q = j.at("quad");
                const std::string qp = "compute.quad";
                if (r.expect_object(q, qp)) {
                    r.only_keys(q, qp, {"rel_tol", "abs_tol", "max_subdivisions", "tail_eps"});
                    c.quad.rel_tol = r.positive(q, qp, "rel_tol", false, c.quad.rel_tol);
                    c.quad.abs_tol = r.positive(q, qp, "abs_tol", false, c.quad.abs_tol);
                    if (auto m = r.number(q, qp, "max_subdivisions", false)) {
                        if (*m < 1.0 || *m != std::floor(*m))
                            r.fail(qp + ".max_subdivisions", "must be an integer >= 1");
                        else
                            c.quad.max_subdivisions = static_cast<int>(*m);
                    }
                    if (auto t = r.number(q, qp, "tail_eps", false)) {
                        c.quad.tail_eps = *t;
                        if (!(*t > 0.0 && *t < 1.0))
                            r.fail(qp + ".tail_eps", "must lie in (0, 1)");
                    }
                }
            }
            if (j.contains("scan")) {
                const json &s = j.at("scan");
                const std::string sp = "compute.scan";
                if (r.expect_object(s, sp)) {
                    r.only_keys(s, sp, {"param", "from", "to", "steps"});
                    ScanConfig scan;
                    scan.param = r.string(s, sp, "param", true).value_or("");
                    if (!scan.param.empty() && scan.param != "field" && scan.param != "k0" && scan.param != "sigma")
                        r.fail(sp + ".param", "expected one of field, k0, sigma");
                    if (scan.param == "field" && !std::holds_alternative<AttoclockBarrier>(barrier))
                        r.fail(sp + ".param", "field scans need an attoclock barrier");
                    scan.from = r.positive(s, sp, "from", true, 0.0);
                    scan.to = r.positive(s, sp, "to", true, 0.0);
                    if (auto n = r.number(s, sp, "steps", true)) {
                        if (*n < 1.0 || *n != std::floor(*n))
                            r.fail(sp + ".steps", "must be an integer >= 1");
                        else
                            scan.steps = static_cast<int>(*n);
                    }
                    c.scan = scan;
                }
            }
            if (c.has("scan") && !c.scan)
                r.fail("compute.scan", "required when the scan task is requested");
            if (!c.has("scan") && c.scan)
                r.fail("compute.scan", "present but the scan task is not requested");
            return c;
        }
    }

    /// Validates a parsed JSON document against the scenario schema. Every
    /// problem is reported, each prefixed with its key path.
    inline ParseResult parse_config(const json &doc)
    {
        detail::ConfigReader r;
        ParseResult out;
        if (!r.expect_object(doc, "<root>")) {
            out.errors = std::move(r.errors);
            return out;
        }
        r.only_keys(doc, "", {"name", "units", "packet", "barrier", "compute"});
        ScenarioConfig cfg;
        if (auto name = r.string(doc, "", "name", false))
            cfg.name = *name;
        if (doc.contains("units")) {
            const json &u = doc.at("units");
            if (r.expect_object(u, "units")) {
                r.only_keys(u, "units", {"hbar", "mass"});
                cfg.units.hbar = r.positive(u, "units", "hbar", false, cfg.units.hbar);
                cfg.units.mass = r.positive(u, "units", "mass", false, cfg.units.mass);
            }
        }
        for (const char *key : {"packet", "barrier", "compute"})
            if (!doc.contains(key))
                r.fail(key, "missing required section");
        if (doc.contains("packet"))
            cfg.packet = detail::read_packet(r, doc.at("packet"));
        if (doc.contains("barrier"))
            cfg.barrier = detail::read_barrier(r, doc.at("barrier"));
        if (doc.contains("compute"))
            cfg.compute = detail::read_compute(r, doc.at("compute"), cfg.barrier);
        out.errors = std::move(r.errors);
        if (out.errors.empty())
            out.config = std::move(cfg);
        return out;
    }

    inline ParseResult parse_config(std::string_view text)
    {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error &e) {
            return {std::nullopt, {std::string("<document>: ") + e.what()}};
        }
        return parse_config(doc);
    }

    inline json to_json(const ScenarioConfig &cfg)
    {
        json doc;
        doc["name"] = cfg.name;
        doc["units"] = {{"hbar", cfg.units.hbar}, {"mass", cfg.units.mass}};
        json packet = {{"kind", cfg.packet.kind},         {"q0", cfg.packet.q0},
                       {"sigma", cfg.packet.sigma},       {"k0", cfg.packet.k0},
                       {"n_sigmas", cfg.packet.n_sigmas}, {"norm_tail_eps", cfg.packet.norm_tail_eps}};
        if (cfg.packet.truncation)
            packet["truncation"] = {(*cfg.packet.truncation)[0], (*cfg.packet.truncation)[1]};
        doc["packet"] = packet;

        std::visit(
            [&doc](const auto &b) {
                using B = std::decay_t<decltype(b)>;
                json out;
                if constexpr (std::is_same_v<B, StackConfig>) {
                    out["kind"] = "stack";
                    out["b"] = b.b;
                    out["segments"] = json::array();
                    for (const auto &s : b.segments)
                        out["segments"].push_back({{"V", s.height}, {"w", s.width}});
                } else if constexpr (std::is_same_v<B, SmoothConfig>) {
                    out["kind"] = "smooth";
                    out["support"] = {b.support[0], b.support[1]};
                    if (b.samples.empty()) {
                        out["profile"] = {{"name", b.name}, {"height", b.height}};
                        if (b.name == "gaussian")
                            out["profile"]["width"] = b.width;
                    } else {
                        json samples = json::array();
                        for (const auto &[x, v] : b.samples)
                            samples.push_back({x, v});
                        out["profile"] = {{"samples", samples}};
                    }
                } else {
                    out = {{"kind", "attoclock"}, {"z_eff", b.z_eff}, {"i_p", b.i_p}, {"field", b.field}};
                }
                doc["barrier"] = out;
            },
            cfg.barrier);

        json compute;
        compute["tasks"] = cfg.compute.tasks;
        compute["quad"] = {{"rel_tol", cfg.compute.quad.rel_tol},
                           {"abs_tol", cfg.compute.quad.abs_tol},
                           {"max_subdivisions", cfg.compute.quad.max_subdivisions},
                           {"tail_eps", cfg.compute.quad.tail_eps}};
        if (cfg.compute.scan)
            compute["scan"] = {{"param", cfg.compute.scan->param},
                               {"from", cfg.compute.scan->from},
                               {"to", cfg.compute.scan->to},
                               {"steps", cfg.compute.scan->steps}};
        doc["compute"] = compute;
        return doc;
    }

    inline std::string emit_config(const ScenarioConfig &cfg) { return to_json(cfg).dump(2); }

    struct ResultRow
    {
        std::string scenario;
        std::string regime;
        double tau_trav = 0.0;
        double tau_part = 0.0;
        double tau_non = 0.0;
        double tau_tun = 0.0;
        double tau_dwell = 0.0;
        double err_est = 0.0;
        double wall_ms = 0.0;
        bool converged = true;
        /// Set when the row could not be computed (e.g. over-barrier field).
        std::string error;
    };

    inline const char *csv_header() { return "scenario,regime,tau_trav,tau_part,tau_non,tau_tun,tau_dwell,err_est,wall_ms"; }

    /// 15 significant digits.
    inline std::string format_number(double x)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.15g", x);
        return buf;
    }

    inline std::string format_row(const ResultRow &row)
    {
        std::string out = row.scenario + "," + row.regime;
        for (double x : {row.tau_trav, row.tau_part, row.tau_non, row.tau_tun, row.tau_dwell, row.err_est, row.wall_ms})
            out += "," + format_number(x);
        return out;
    }

    struct Series
    {
        std::string param;
        std::string quantity;
        std::vector<std::pair<double, double>> points;
    };

    struct RunOutput
    {
        std::vector<ResultRow> rows;
        std::vector<Series> series;
        std::string oracle_report;
        std::vector<std::string> messages;
        /// 0 ok, 1 invalid scenario (including impossible geometry), 2 non-convergence.
        int exit_code = 0;
    };

    inline MomentumDensity make_density(const PacketConfig &p)
    {
        const GaussianPacket packet(p.q0, p.sigma, p.k0);
        MomentumDensity density = MomentumDensity::from_packet(packet, p.norm_tail_eps);
        if (p.truncation)
            return truncate(density, {(*p.truncation)[0], (*p.truncation)[1]}).density;
        return density;
    }

    inline SmoothBarrier make_smooth(const SmoothConfig &s, const UnitSystem &units)
    {
        const Interval support{s.support[0], s.support[1]};
        if (!s.samples.empty())
            return SmoothBarrier(profiles::sampled(s.samples), support, units);
        if (s.name == "gaussian")
            return SmoothBarrier(profiles::gaussian_bump(s.height, support, s.width), support, units);
        if (s.name == "cosine")
            return SmoothBarrier(profiles::cosine_bump(s.height, support), support, units);
        return SmoothBarrier(profiles::constant(s.height), support, units);
    }

    /// Far edge a of the configured barrier, for the left-of-barrier check.
    inline double far_edge(const ScenarioConfig &cfg)
    {
        return std::visit(
            [&cfg](const auto &b) -> double {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, StackConfig>) {
                    double a = b.b;
                    for (const auto &s : b.segments)
                        a += s.width;
                    return a;
                } else if constexpr (std::is_same_v<B, SmoothConfig>) {
                    return b.support[1];
                } else {
                    return attoclock_geometry(b).d_plus;
                }
            },
            cfg.barrier);
    }

    /// Full traversal report for the configured density and barrier.
    inline TraversalReport evaluate(const ScenarioConfig &cfg)
    {
        const MomentumDensity density = make_density(cfg.packet);
        const QuadSpec &spec = cfg.compute.quad;
        TraversalReport report = std::visit(
            [&](const auto &b) -> TraversalReport {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, StackConfig>)
                    return traversal_time(density, BarrierStack(b.segments, b.b, cfg.units), spec);
                else if constexpr (std::is_same_v<B, SmoothConfig>)
                    return traversal_time_smooth(density, make_smooth(b, cfg.units), spec);
                else
                    return traversal_time_smooth(density, attoclock_to_smooth(b, cfg.units), spec);
            },
            cfg.barrier);
        const GaussianPacket packet(cfg.packet.q0, cfg.packet.sigma, cfg.packet.k0);
        if (!packet.left_of(far_edge(cfg), cfg.packet.n_sigmas))
            report.diagnostics.warnings.push_back("packet support reaches the barrier (q0 + n_sigmas sigma >= -a)");
        return report;
    }

    inline ResultRow make_row(const std::string &id, const ScenarioConfig &cfg)
    {
        const auto start = std::chrono::steady_clock::now();
        ResultRow row;
        row.scenario = id;
        try {
            const TraversalReport r = evaluate(cfg);
            row.regime = std::string(to_string(r.regime));
            row.tau_trav = r.tau_trav;
            row.tau_part = r.tau_part;
            row.tau_non = r.tau_non;
            row.tau_tun = r.tau_tun;
            row.tau_dwell = r.tau_dwell;
            row.err_est = r.diagnostics.combined_error() + r.diagnostics.err_dwell;
            row.converged = r.diagnostics.converged;
        } catch (const Error &e) {
            row.regime = "error";
            row.error = e.what();
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return row;
    }

    inline ScenarioConfig with_scan_value(ScenarioConfig cfg, const std::string &param, double value)
    {
        if (param == "field")
            std::get<AttoclockBarrier>(cfg.barrier).field = value;
        else if (param == "k0")
            cfg.packet.k0 = value;
        else if (param == "sigma")
            cfg.packet.sigma = value;
        return cfg;
    }

    /// Cross-checks the k-space results against the zeta-space and kernel
    /// routes and returns a plain-text report. Smooth barriers are replaced by
    /// a 256-segment midpoint stack.
    inline std::string oracle_report(const ScenarioConfig &cfg, bool &converged)
    {
        std::ostringstream os;
        os.precision(12);
        const QuadSpec &spec = cfg.compute.quad;
        const GaussianPacket packet(cfg.packet.q0, cfg.packet.sigma, cfg.packet.k0);
        const MomentumDensity density = MomentumDensity::from_packet(packet, cfg.packet.norm_tail_eps);
        const BarrierStack stack = std::visit(
            [&](const auto &b) -> BarrierStack {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, StackConfig>)
                    return BarrierStack(b.segments, b.b, cfg.units);
                else if constexpr (std::is_same_v<B, SmoothConfig>)
                    return discretize(make_smooth(b, cfg.units), 256);
                else
                    return discretize(attoclock_to_smooth(b, cfg.units), 256);
            },
            cfg.barrier);

        os << "oracle report: " << cfg.name << "\n";
        if (!std::holds_alternative<StackConfig>(cfg.barrier))
            os << "barrier discretized to " << stack.size() << " midpoint segments\n";
        if (cfg.packet.truncation)
            os << "note: zeta-space route uses the untruncated Gaussian packet\n";

        const DeltaTauBreakdown dt = delta_tau_zeta(packet, stack, spec, cfg.packet.n_sigmas);
        const QuadResult dwell = dwell_time(density, stack, spec);
        converged = dt.converged && dwell.converged;
        const double rel = std::abs(dt.tau_barrier_part - dwell.value) / std::max(std::abs(dwell.value), 1e-300);
        os << "\n[zeta-space arrival-time difference]\n";
        os << "Im Q* = " << dt.q_star.imag() << "\n";
        for (std::size_t n = 0; n < dt.r_star.size() && n < 16; ++n)
            os << "Im R*[" << n << "] = " << dt.r_star[n].imag() << "\n";
        if (dt.r_star.size() > 16)
            os << "... (" << dt.r_star.size() - 16 << " more segments)\n";
        os << "free part (L/v0) Im Q* = " << dt.tau_free_part << "\n";
        os << "barrier part sum (w_n/v0) Im R_n* = " << dt.tau_barrier_part << "\n";
        os << "delta tau = " << dt.delta_tau << "\n";
        for (const auto &w : dt.warnings)
            os << "warning: " << w << "\n";

        os << "\n[path equivalence: zeta-space barrier term vs k-space dwell time]\n";
        os << "k-space dwell time = " << dwell.value << "\n";
        os << "max relative deviation = " << rel << "\n";

        os << "\n[free time-of-arrival operator]\n";
        if (packet.q0() < 0.0) {
            const FreeToaResult ft = free_toa_expectation(packet, cfg.units);
            os << "grid expectation = " << ft.value << " (+- " << ft.error_estimate << ", " << ft.grid_points
               << " points)\n";
            os << "zeta-space value = " << free_toa_zeta(packet, cfg.units, spec) << "\n";
            os << "classical |q0|/v0 = " << -packet.q0() / cfg.units.speed(packet.k0()) << "\n";
        } else {
            os << "skipped: requires q0 < 0\n";
        }

        const TraversalReport rep = traversal_time(density, stack, spec);
        const ClassicalNonReport cn = tau_non_classical_form(density, stack, spec);
        os << "\n[above-barrier time, classical form]\n";
        os << "tau_non (decomposition) = " << rep.tau_non << "\n";
        os << "tau_non (density-averaged classical time) = " << cn.tau_non.value << "\n";
        os << "speed-weighted variant = " << cn.speed_weighted_variant << " (relative discrepancy "
           << cn.relative_discrepancy << ")\n";

        if (stack.size() == 2) {
            const RegionMap map = region_map_calibration(stack, spec);
            os << "\n[kernel region calibration]\n";
            for (const auto &row : map.rows) {
                os << row.interval << ": " << row.best.label() << " (deviation " << row.best_deviation << ")";
                if (!row.reference_match)
                    os << "  no reference piece matches";
                if (row.ambiguous)
                    os << "  AMBIGUOUS";
                os << "\n";
                for (const auto &[label, dev] : row.reference_deviations)
                    os << "    " << label << ": " << dev << "\n";
            }
            double worst = 0.0;
            const double lo = -stack.left_edge() - 1.0;
            const double hi = 0.5;
            for (int i = 0; i < 50; ++i) {
                const double eta = lo + (i + 0.5) / 50.0 * (hi - lo);
                for (int j = 0; j < 50; ++j) {
                    const double zeta = 3.0 * j / 49.0;
                    const double num = weyl_tkf_numeric(stack, eta, zeta, spec).value;
                    worst = std::max(worst, std::abs(num - map.eval(eta, zeta)) / (1.0 + std::abs(num)));
                }
            }
            os << "50x50 lattice max |numeric - calibrated| / (1 + |numeric|) = " << worst << "\n";
        }
        return os.str();
    }

    /// Runs every requested task. Scan points are evaluated concurrently and
    /// reported in input order.
    inline RunOutput run(const ScenarioConfig &cfg)
    {
        RunOutput out;
        const auto &c = cfg.compute;
        bool geometry_error = false;
        bool non_converged = false;

        auto record = [&](ResultRow row) {
            if (!row.error.empty()) {
                geometry_error = true;
                out.messages.push_back(row.scenario + ": " + row.error);
            } else if (!row.converged) {
                non_converged = true;
                out.messages.push_back(row.scenario + ": quadrature did not converge");
            }
            out.rows.push_back(std::move(row));
        };

        if (c.has("traverse") || c.has("dwell") || c.has("decompose") || c.has("classify"))
            record(make_row(cfg.name, cfg));

        if (c.has("scan") && c.scan) {
            const auto values = c.scan->values();
            std::vector<std::future<ResultRow>> jobs;
            for (double v : values) {
                jobs.push_back(std::async(std::launch::async, [&cfg, &c, v] {
                    return make_row(cfg.name + "[" + c.scan->param + "=" + format_number(v) + "]",
                                    with_scan_value(cfg, c.scan->param, v));
                }));
            }
            Series series{c.scan->param, "tau_part", {}};
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                ResultRow row = jobs[i].get();
                if (row.error.empty())
                    series.points.emplace_back(values[i], row.tau_part);
                record(std::move(row));
            }
            if (c.scan->param == "field") {
                bool decreasing = true;
                for (std::size_t i = 1; i < series.points.size(); ++i)
                    if (!(series.points[i].second < series.points[i - 1].second))
                        decreasing = false;
                out.messages.push_back(std::string("field scan: tau_part ")
                                       + (decreasing ? "strictly decreasing" : "NOT strictly decreasing")
                                       + " in field strength");
            }
            out.series.push_back(std::move(series));
        }

        if (c.has("oracle")) {
            try {
                bool ok = true;
                out.oracle_report = oracle_report(cfg, ok);
                if (!ok) {
                    non_converged = true;
                    out.messages.push_back("oracle: quadrature did not converge");
                }
            } catch (const Error &e) {
                geometry_error = true;
                out.messages.push_back(std::string("oracle: ") + e.what());
                out.oracle_report = std::string("oracle failed: ") + e.what() + "\n";
            }
        }

        out.exit_code = geometry_error ? 1 : (non_converged ? 2 : 0);
        return out;
    }

    /// Writes results.csv, scan_<param>.dat and oracle_report.txt into dir.
    inline void write_outputs(const RunOutput &out, const std::filesystem::path &dir)
    {
        std::filesystem::create_directories(dir);
        {
            std::ofstream csv(dir / "results.csv");
            csv << csv_header() << "\n";
            for (const auto &row : out.rows)
                csv << format_row(row) << "\n";
        }
        for (const auto &s : out.series) {
            std::ofstream dat(dir / ("scan_" + s.param + ".dat"));
            dat << "# " << s.param << " " << s.quantity << "\n";
            for (const auto &[x, y] : s.points)
                dat << format_number(x) << " " << format_number(y) << "\n";
        }
        if (!out.oracle_report.empty()) {
            std::ofstream rep(dir / "oracle_report.txt");
            rep << out.oracle_report;
        }
    }
}
