// Command-line front door for the Bell-experiment toolkit: run simulations
// and sweeps, evaluate the inequalities, scan marginals for signaling,
// check the non-local translation, and drive the wire harness. Emits CSV
// or JSON; numeric output uses the shortest representation that
// round-trips double precision.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bellsim/bellsim.hpp"

using nlohmann::json;
using namespace bellsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

/// Parses "pi", "pi/8", "3pi/8", "3*pi/4", "-pi/4", or plain radians.
double parse_angle_expr(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.empty()) throw std::invalid_argument("empty angle");

    std::size_t pos = s.find("pi");
    if (pos == std::string::npos) {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("malformed angle: " + text);
        return v;
    }

    double coeff = 1.0;
    std::string prefix = s.substr(0, pos);
    if (!prefix.empty() && prefix.back() == '*') prefix.pop_back();
    if (prefix == "-")
        coeff = -1.0;
    else if (!prefix.empty() && prefix != "+") {
        std::size_t used = 0;
        coeff = std::stod(prefix, &used);
        if (used != prefix.size()) throw std::invalid_argument("malformed angle: " + text);
    }

    double denom = 1.0;
    std::string suffix = s.substr(pos + 2);
    if (!suffix.empty()) {
        if (suffix[0] != '/') throw std::invalid_argument("malformed angle: " + text);
        std::size_t used = 0;
        denom = std::stod(suffix.substr(1), &used);
        if (used != suffix.size() - 1 || denom == 0.0)
            throw std::invalid_argument("malformed angle: " + text);
    }
    return coeff * kPi / denom;
}

Angle parse_angle(const std::string& text) {
    return Angle::from_radians(parse_angle_expr(text));
}

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// "start:stop:count" with angle syntax, endpoints inclusive.
std::vector<double> parse_grid(const std::string& text) {
    auto first = text.find(':');
    auto last = text.rfind(':');
    if (first == std::string::npos || first == last)
        throw std::invalid_argument("grid must be start:stop:count");
    double start = parse_angle_expr(text.substr(0, first));
    double stop = parse_angle_expr(text.substr(first + 1, last - first - 1));
    long count = std::stol(text.substr(last + 1));
    if (count < 1) throw std::invalid_argument("grid count must be >= 1");
    std::vector<double> points;
    if (count == 1) return {start};
    for (long i = 0; i < count; ++i)
        points.push_back(start + (stop - start) * static_cast<double>(i) /
                                     static_cast<double>(count - 1));
    return points;
}

void write_text(const std::string& path, const std::string& body) {
    if (path.empty()) {
        std::cout << body;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output path: " + path);
    out << body;
}

std::string trials_csv(const TrialSet& trials, bool with_lambda) {
    std::string out = with_lambda ? "index,a,b,A,B,lambda\n" : "index,a,b,A,B\n";
    for (const auto& t : trials) {
        out += std::to_string(t.index);
        out += ',';
        out += format_double(t.a.radians());
        out += ',';
        out += format_double(t.b.radians());
        out += ',';
        out += std::to_string(t.outcome_a.value());
        out += ',';
        out += std::to_string(t.outcome_b.value());
        if (with_lambda) {
            out += ',';
            if (const Angle* lam = std::get_if<Angle>(&t.hidden))
                out += format_double(lam->radians());
            else if (const int* n = std::get_if<int>(&t.hidden))
                out += std::to_string(*n);
        }
        out += '\n';
    }
    return out;
}

json trials_json(const TrialSet& trials, bool with_lambda) {
    json arr = json::array();
    for (const auto& t : trials) {
        json row = {{"index", t.index},
                    {"a", t.a.radians()},
                    {"b", t.b.radians()},
                    {"A", t.outcome_a.value()},
                    {"B", t.outcome_b.value()}};
        if (with_lambda) {
            if (const Angle* lam = std::get_if<Angle>(&t.hidden))
                row["lambda"] = lam->radians();
            else if (const int* n = std::get_if<int>(&t.hidden))
                row["lambda"] = *n;
        }
        arr.push_back(std::move(row));
    }
    return arr;
}

struct CommonOptions {
    std::string model = "qm";
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string format = "json";
    std::string output;
};

int run(int argc, char** argv) {
    CLI::App app{"Two-photon Bell experiment simulator and verifier"};
    app.require_subcommand(1);

    // --- simulate ---------------------------------------------------------
    CommonOptions sim;
    std::string sim_a = "0", sim_b = "0";
    bool sim_record_lambda = false;
    auto* simulate = app.add_subcommand("simulate", "Sample trials at fixed settings");
    simulate->add_option("--model", sim.model, "Model id (see list-models)");
    simulate->add_option("--a", sim_a, "Left setting (radians or pi/N form)");
    simulate->add_option("--b", sim_b, "Right setting");
    simulate->add_option("--trials", sim.trials)->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--workers", sim.workers);
    simulate->add_flag("--record-lambda", sim_record_lambda, "Record the hidden variable");
    simulate->add_option("--format", sim.format)->check(CLI::IsMember({"csv", "json"}));
    simulate->add_option("--output", sim.output, "Output path (default stdout)");

    // --- sweep ------------------------------------------------------------
    CommonOptions swp;
    swp.format = "csv";
    std::string swp_grid = "0:pi/2:9";
    auto* sweep_cmd = app.add_subcommand("sweep", "Correlator vs angular separation");
    sweep_cmd->add_option("--model", swp.model);
    sweep_cmd->add_option("--grid", swp_grid, "Separations start:stop:count");
    sweep_cmd->add_option("--trials", swp.trials)->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--seed", swp.seed);
    sweep_cmd->add_option("--workers", swp.workers);
    sweep_cmd->add_option("--format", swp.format)->check(CLI::IsMember({"csv", "json"}));
    sweep_cmd->add_option("--output", swp.output);

    // --- bell1964 ---------------------------------------------------------
    std::string b_model = "qm", b_a = "0", b_b = "pi/6", b_c = "pi/3", b_output;
    auto* bell_cmd = app.add_subcommand("bell1964", "Evaluate the three-setting inequality");
    bell_cmd->add_option("--model", b_model);
    bell_cmd->add_option("--a", b_a);
    bell_cmd->add_option("--b", b_b);
    bell_cmd->add_option("--c", b_c);
    bell_cmd->add_option("--output", b_output);

    // --- chsh -------------------------------------------------------------
    std::string c_model = "qm", c_a = "0", c_a2 = "pi/4", c_b = "pi/8", c_b2 = "3pi/8",
                c_output;
    auto* chsh_cmd = app.add_subcommand("chsh", "Evaluate the four-setting expression");
    chsh_cmd->add_option("--model", c_model);
    chsh_cmd->add_option("--a", c_a);
    chsh_cmd->add_option("--a2", c_a2);
    chsh_cmd->add_option("--b", c_b);
    chsh_cmd->add_option("--b2", c_b2);
    chsh_cmd->add_option("--output", c_output);

    // --- nosignal ---------------------------------------------------------
    CommonOptions ns;
    ns.trials = 1000000;
    std::string ns_fix = "right", ns_fixed_angle = "0";
    unsigned ns_scan_points = 8;
    double ns_threshold = 5.0;
    auto* nosignal_cmd =
        app.add_subcommand("nosignal", "Marginal scan across the distant setting");
    nosignal_cmd->add_option("--model", ns.model);
    nosignal_cmd->add_option("--fix", ns_fix)->check(CLI::IsMember({"left", "right"}));
    nosignal_cmd->add_option("--fixed-angle", ns_fixed_angle);
    nosignal_cmd->add_option("--scan-points", ns_scan_points, "Scan points over [0, pi)");
    nosignal_cmd->add_option("--trials", ns.trials)->check(CLI::PositiveNumber);
    nosignal_cmd->add_option("--seed", ns.seed);
    nosignal_cmd->add_option("--workers", ns.workers);
    nosignal_cmd->add_option("--threshold", ns_threshold, "Max |z| allowed");
    nosignal_cmd->add_option("--output", ns.output);

    // --- leak -------------------------------------------------------------
    std::string lk_a0 = "0", lk_a1 = "pi/4", lk_b = "pi/3", lk_output;
    auto* leak_cmd =
        app.add_subcommand("leak", "Exact setting-distinguishing advantage from lambda");
    leak_cmd->add_option("--a0", lk_a0);
    leak_cmd->add_option("--a1", lk_a1);
    leak_cmd->add_option("--b", lk_b);
    leak_cmd->add_option("--output", lk_output);

    // --- translate-check --------------------------------------------------
    std::string tc_output;
    auto* translate_cmd = app.add_subcommand(
        "translate-check", "Compare retro and integer-n translated joint laws");
    translate_cmd->add_option("--output", tc_output);

    // --- wire -------------------------------------------------------------
    std::string w_mode = "retro", w_a = "0", w_b = "pi/8", w_source, w_transcript,
                w_trials_out, w_output, w_audit;
    std::uint64_t w_n = 10000, w_seed = 0;
    auto* wire_cmd = app.add_subcommand("wire", "Run the three-endpoint harness");
    wire_cmd->add_option("--mode", w_mode)->check(CLI::IsMember({"causal", "retro"}));
    wire_cmd->add_option("--a", w_a);
    wire_cmd->add_option("--b", w_b);
    wire_cmd->add_option("--trials", w_n);
    wire_cmd->add_option("--seed", w_seed);
    wire_cmd->add_option("--source-atoms", w_source,
                         "CAUSAL source law as angle:weight,... (default uniform)");
    wire_cmd->add_option("--transcript", w_transcript, "Persist transcript to this path");
    wire_cmd->add_option("--trials-output", w_trials_out, "Write trials CSV here");
    wire_cmd->add_option("--output", w_output, "Summary JSON path (default stdout)");
    wire_cmd->add_option("--audit", w_audit,
                         "Audit an existing transcript file instead of running");

    // --- list-models ------------------------------------------------------
    app.add_subcommand("list-models", "Print the known model ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (simulate->parsed()) {
        auto model = make_model(sim.model);
        auto result = run_experiment(*model, parse_angle(sim_a), parse_angle(sim_b),
                                     sim.trials, sim.seed, sim_record_lambda, sim.workers);
        if (sim.format == "csv") {
            write_text(sim.output, trials_csv(result.trials, sim_record_lambda));
        } else {
            json out = {{"model", sim.model},
                        {"a", parse_angle(sim_a).radians()},
                        {"b", parse_angle(sim_b).radians()},
                        {"trials", sim.trials},
                        {"seed", sim.seed},
                        {"mean_A", result.mean_a},
                        {"mean_B", result.mean_b},
                        {"correlator",
                         {{"mean", result.correlator.mean},
                          {"stderr", result.correlator.stderror},
                          {"n", result.correlator.n}}},
                        {"data", trials_json(result.trials, sim_record_lambda)}};
            write_text(sim.output, out.dump(2) + "\n");
        }
        return kExitOk;
    }

    if (sweep_cmd->parsed()) {
        auto model = make_model(swp.model);
        auto grid = parse_grid(swp_grid);
        auto result = sweep(*model, grid, swp.trials, swp.seed, swp.workers);
        if (swp.format == "csv") {
            std::string out = "delta,mean,stderr,exact,z\n";
            for (const auto& p : result.points) {
                out += format_double(p.separation) + ',' + format_double(p.estimate.mean) +
                       ',' + format_double(p.estimate.stderror) + ',' +
                       format_double(p.exact) + ',' + format_double(p.z) + '\n';
            }
            write_text(swp.output, out);
        } else {
            json points = json::array();
            for (const auto& p : result.points)
                points.push_back({{"delta", p.separation},
                                  {"mean", p.estimate.mean},
                                  {"stderr", p.estimate.stderror},
                                  {"exact", p.exact},
                                  {"z", p.z}});
            json out = {{"model", swp.model},
                        {"trials_per_point", swp.trials},
                        {"seed", swp.seed},
                        {"points", points}};
            write_text(swp.output, out.dump(2) + "\n");
        }
        return kExitOk;
    }

    if (bell_cmd->parsed()) {
        auto model = make_model(b_model);
        Correlator correlator = [&](Angle x, Angle y) {
            return exact_correlator(*model, x, y);
        };
        auto triple =
            bell1964(correlator, parse_angle(b_a), parse_angle(b_b), parse_angle(b_c));
        json out = {{"model", b_model},       {"a", triple.a.radians()},
                    {"b", triple.b.radians()}, {"c", triple.c.radians()},
                    {"lhs", triple.lhs},       {"rhs", triple.rhs},
                    {"violated", triple.violated}};
        write_text(b_output, out.dump(2) + "\n");
        return kExitOk;
    }

    if (chsh_cmd->parsed()) {
        auto model = make_model(c_model);
        Correlator correlator = [&](Angle x, Angle y) {
            return exact_correlator(*model, x, y);
        };
        auto quad = chsh(correlator, parse_angle(c_a), parse_angle(c_a2), parse_angle(c_b),
                         parse_angle(c_b2));
        json out = {{"model", c_model},
                    {"a", quad.a.radians()},
                    {"a2", quad.a2.radians()},
                    {"b", quad.b.radians()},
                    {"b2", quad.b2.radians()},
                    {"S", quad.s},
                    {"local_bound", chsh_local_bound().max_s}};
        write_text(c_output, out.dump(2) + "\n");
        return kExitOk;
    }

    if (nosignal_cmd->parsed()) {
        auto model = make_model(ns.model);
        std::vector<Angle> scan;
        for (unsigned i = 0; i < ns_scan_points; ++i)
            scan.push_back(Angle::from_radians(i * kPi / ns_scan_points));
        auto result = nosignal_scan(*model, ns_fix == "left" ? Side::left : Side::right,
                                    parse_angle(ns_fixed_angle), scan, ns.trials, ns.seed,
                                    ns.workers);
        json points = json::array();
        for (const auto& p : result.points)
            points.push_back({{"scanned", p.scanned.radians()},
                              {"mean", p.mean},
                              {"stderr", p.stderror},
                              {"z", p.z}});
        bool pass = result.max_abs_z < ns_threshold;
        json out = {{"model", ns.model},
                    {"fixed_side", ns_fix},
                    {"fixed_angle", parse_angle(ns_fixed_angle).radians()},
                    {"trials_per_point", ns.trials},
                    {"pooled_mean", result.pooled_mean},
                    {"max_abs_z", result.max_abs_z},
                    {"threshold", ns_threshold},
                    {"pass", pass},
                    {"points", points}};
        write_text(ns.output, out.dump(2) + "\n");
        return pass ? kExitOk : kExitCheckFailed;
    }

    if (leak_cmd->parsed()) {
        RetroModel retro(RetroVariant::symmetric);
        auto report =
            lambda_leak(retro, parse_angle(lk_a0), parse_angle(lk_a1), parse_angle(lk_b));
        json out = {{"a0", parse_angle(lk_a0).radians()},
                    {"a1", parse_angle(lk_a1).radians()},
                    {"b", parse_angle(lk_b).radians()},
                    {"advantage_given_lambda", report.advantage_given_lambda},
                    {"advantage_given_b_only", report.advantage_given_b_only}};
        write_text(lk_output, out.dump(2) + "\n");
        return kExitOk;
    }

    if (translate_cmd->parsed()) {
        RetroModel retro(RetroVariant::symmetric);
        auto translated = nonlocalize(retro);
        double max_tv = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                Angle a = Angle::from_radians(i * kPi / 10.0 + 0.02);
                Angle b = Angle::from_radians(j * kPi / 10.0 + 0.07);
                max_tv = std::max(max_tv,
                                  retro.joint(a, b).total_variation(translated.joint(a, b)));
            }
        bool pass = max_tv <= kTol;
        json out = {{"max_total_variation", max_tv}, {"tolerance", kTol}, {"pass", pass}};
        write_text(tc_output, out.dump(2) + "\n");
        return pass ? kExitOk : kExitCheckFailed;
    }

    if (wire_cmd->parsed()) {
        if (!w_audit.empty()) {
            auto records = load_transcript(w_audit);
            Wiring verdict = transcript_audit(records);
            json out = {{"transcript", w_audit},
                        {"verdict", std::string(wiring_name(verdict))}};
            write_text(w_output, out.dump(2) + "\n");
            return kExitOk;
        }
        Wiring mode = w_mode == "retro" ? Wiring::retro : Wiring::causal;
        SourceLaw law = uniform_source_law();
        if (!w_source.empty()) {
            law.uniform = false;
            std::stringstream ss(w_source);
            std::string item;
            while (std::getline(ss, item, ',')) {
                auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw std::invalid_argument("source atom must be angle:weight");
                law.atoms.push_back({parse_angle(item.substr(0, colon)),
                                     std::stod(item.substr(colon + 1))});
            }
        }
        SettingsSchedule schedule(w_n, {parse_angle(w_a), parse_angle(w_b)});
        // stream straight into the auditor unless a transcript file was
        // requested; a million-trial transcript has no business in memory
        struct AuditSink final : TranscriptSink {
            TranscriptAuditor auditor;
            void on_record(const TranscriptRecord& r) override { auditor.feed(r); }
        };
        std::unique_ptr<FileTranscript> file_sink;
        AuditSink audit_sink;
        TranscriptSink* sink = &audit_sink;
        if (!w_transcript.empty()) {
            file_sink = std::make_unique<FileTranscript>(w_transcript);
            sink = file_sink.get();
        }
        TrialSet trials = run_wire_experiment(mode, law, schedule, w_seed, sink);
        file_sink.reset();

        std::int64_t sum_ab = 0;
        for (const auto& t : trials) sum_ab += t.product();
        json out = {{"mode", std::string(wiring_name(mode))},
                    {"trials", trials.size()},
                    {"seed", w_seed}};
        if (!trials.empty()) {
            auto est = correlator_estimate_from_sum(sum_ab, trials.size());
            out["correlator"] = {{"mean", est.mean}, {"stderr", est.stderror}};
        }
        Wiring verdict = w_transcript.empty()
                             ? audit_sink.auditor.finish()
                             : transcript_audit(load_transcript(w_transcript));
        bool match = verdict == mode;
        out["audit_verdict"] = std::string(wiring_name(verdict));
        out["audit_match"] = match;
        if (!w_trials_out.empty()) write_text(w_trials_out, trials_csv(trials, true));
        write_text(w_output, out.dump(2) + "\n");
        return match ? kExitOk : kExitCheckFailed;
    }

    // list-models
    for (const auto& id : known_model_ids()) std::cout << id << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
