#include "agemix/cli.hpp"

#include "agemix/data_io.hpp"
#include "agemix/deheap.hpp"
#include "agemix/experiments.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef AGEMIX_VERSION
#define AGEMIX_VERSION "unknown"
#endif

namespace agemix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects outputs and writes the manifest sidecar last.
class Manifest {
public:
    Manifest(std::string command, fs::path path, std::uint64_t seed)
        : command_(std::move(command)), path_(std::move(path)), seed_(seed),
          start_(std::chrono::steady_clock::now()), started_at_(utc_now())
    {
    }

    std::string preamble() const { return "manifest=" + path_.filename().string() + " seed=" + std::to_string(seed_); }
    std::string header() const { return "# " + preamble() + "\n"; }

    void write_records(const fs::path& p, std::span<const PartnershipRecord> records)
    {
        write_file(p, to_csv(records, std::vector<std::string>{preamble()}));
        outputs_.push_back(p.string());
    }

    void input(const fs::path& p) { inputs_.push_back(p.string()); }
    void options(json o) { options_ = std::move(o); }
    void config_bytes(const std::string& bytes) { config_hash_ = fnv1a(bytes); }

    void write_report(const fs::path& p, const std::string& body)
    {
        write_file(p, header() + body);
        outputs_.push_back(p.string());
    }

    void write_json(const fs::path& p, json body)
    {
        body["manifest"] = path_.filename().string();
        write_file(p, body.dump(2) + "\n");
        outputs_.push_back(p.string());
    }

    void failure(std::string what) { failures_.push_back(std::move(what)); }
    bool ok() const { return failures_.empty(); }

    void finish()
    {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json j{{"command", command_},
               {"config_hash", hex(config_hash_)},
               {"seed", seed_},
               {"inputs", inputs_},
               {"outputs", outputs_},
               {"options", options_},
               {"version", AGEMIX_VERSION},
               {"started_at", started_at_},
               {"wall_clock_seconds", seconds},
               {"status", failures_.empty() ? "ok" : "failed"},
               {"failures", failures_}};
        write_file(path_, j.dump(2) + "\n");
    }

private:
    std::string command_;
    fs::path path_;
    std::uint64_t seed_;
    std::chrono::steady_clock::time_point start_;
    std::string started_at_;
    std::uint64_t config_hash_ = 0;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
    json options_ = json::object();
    std::vector<std::string> failures_;
};

json options_json(const RunOptions& o)
{
    return json{{"seed", o.seed},         {"elpd", to_string(o.elpd)}, {"draws", o.draws},
                {"folds", o.folds},       {"qq_samples", o.qq_samples}, {"knots", o.knots},
                {"bandwidth", o.bandwidth}};
}

ExperimentOptions experiment_options(const RunOptions& o)
{
    ExperimentOptions e;
    e.seed = o.seed;
    e.jobs = o.jobs;
    e.elpd = o.elpd;
    e.n_draws = o.draws;
    e.kfold_folds = o.folds;
    e.qq_samples = o.qq_samples;
    e.interior_knots = o.knots;
    return e;
}

std::vector<PartnershipRecord> load_data(const fs::path& data) { return load_csv(data, LoadMode::Strict).records; }

template <class F>
int guarded(const char* command, F&& body)
{
    try {
        return body();
    } catch (const std::exception& e) {
        std::cerr << "agemix " << command << ": " << e.what() << "\n";
        return kExitFailure;
    }
}

std::string options_hash_source(const RunOptions& o)
{
    std::string bytes = options_json(o).dump();
    if (!o.config.empty()) bytes += read_file(o.config);
    return bytes;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

int cmd_compare_distributions(const fs::path& data, const fs::path& out_dir, const RunOptions& opts)
{
    return guarded("compare-distributions", [&] {
        const auto records = load_data(data);
        Manifest manifest("compare-distributions", out_dir / "compare_distributions.manifest.json", opts.seed);
        manifest.input(data);
        manifest.options(options_json(opts));
        manifest.config_bytes(options_hash_source(opts));
        const auto result = compare_distributions(records, experiment_options(opts));
        for (const auto& s : result.subsets) {
            for (const auto& c : s.combinations) {
                if (!c.ok) {
                    manifest.failure(s.key.label() + " " + std::string(to_string(c.family)) + "/" +
                                     std::string(to_string(c.transform)) + ": " + c.error);
                }
            }
        }
        manifest.write_report(out_dir / "distribution_rankings.csv", rankings_csv(result));
        manifest.write_report(out_dir / "distribution_combinations.csv", combinations_csv(result));
        manifest.write_report(out_dir / "transform_shares.csv", transform_share_csv(result));
        manifest.finish();
        return manifest.ok() ? 0 : kExitFailure;
    });
}

int cmd_compare_models(const fs::path& data, const fs::path& out_dir, const RunOptions& opts)
{
    return guarded("compare-models", [&] {
        const auto records = load_data(data);
        Manifest manifest("compare-models", out_dir / "compare_models.manifest.json", opts.seed);
        manifest.input(data);
        manifest.options(options_json(opts));
        manifest.config_bytes(options_hash_source(opts));
        const ExperimentOptions eopts = experiment_options(opts);
        const auto result = compare_models(records, eopts);
        json fits = json::array();
        for (const auto& m : result.models) {
            if (!m.ok) manifest.failure(std::string(display_name(m.tag)) + ": " + m.error);
            json entry{{"model", display_name(m.tag)}, {"ok", m.ok}, {"error", m.error}};
            if (m.ok) {
                entry["fit"] = m.fit;
                entry["flagged_records"] = m.elpd.flagged.size();
            }
            fits.push_back(entry);
        }
        manifest.write_report(out_dir / "model_comparison.csv", to_csv(result.report));
        manifest.write_report(out_dir / "parameter_curves.csv", parameter_curves_csv(result));
        manifest.write_report(out_dir / "predictive_histograms.csv",
                              predictive_histogram_csv(result, records, eopts));
        manifest.write_json(out_dir / "model_fits.json", json{{"models", fits}});
        manifest.finish();
        return manifest.ok() ? 0 : kExitFailure;
    });
}

int cmd_deheap(const fs::path& data, const fs::path& out, const RunOptions& opts)
{
    return guarded("deheap", [&] {
        const auto records = load_data(data);
        const fs::path stem = out.parent_path() / out.stem();
        Manifest manifest("deheap", fs::path(stem.string() + ".manifest.json"), opts.seed);
        manifest.input(data);
        manifest.options(options_json(opts));
        manifest.config_bytes(options_hash_source(opts));
        const DeheapResult result = deheap(records, opts.bandwidth, opts.seed);

        std::string detail = "sex,respondent_age,n,status,partner_age,observed,expected,excess,moved_m2,moved_m1,"
                             "moved_p1,moved_p2\n";
        for (const auto& g : result.report.groups) {
            const std::string prefix =
                std::string(to_string(g.sex)) + "," + std::to_string(g.respondent_age) + "," + std::to_string(g.n);
            if (g.skipped) {
                detail += prefix + ",skipped,NA,NA,NA,NA,0,0,0,0\n";
                continue;
            }
            for (const auto& h : g.heaped) {
                char buf[128];
                std::snprintf(buf, sizeof buf, ",ok,%ld,%ld,%.6f,%.6f,%ld,%ld,%ld,%ld\n", h.partner_age,
                              h.observed, h.expected, h.excess, h.moved[0], h.moved[1], h.moved[3], h.moved[4]);
                detail += prefix + buf;
            }
        }
        manifest.write_records(out, result.records);
        json report = result.report;
        manifest.write_json(fs::path(stem.string() + ".heap_report.json"), report);
        manifest.write_report(fs::path(stem.string() + ".heap_detail.csv"), detail);
        manifest.finish();
        return 0;
    });
}

int cmd_simulate(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed)
{
    return guarded("simulate", [&] {
        const std::string bytes = read_file(config);
        GeneratorConfig cfg = json::parse(bytes).get<GeneratorConfig>();
        if (seed) cfg.seed = *seed;
        const auto records = simulate(cfg);
        const fs::path stem = out.parent_path() / out.stem();
        Manifest manifest("simulate", fs::path(stem.string() + ".manifest.json"), cfg.seed);
        manifest.input(config);
        manifest.config_bytes(bytes);
        manifest.options(json{{"generator", cfg}});
        manifest.write_records(out, records);
        manifest.finish();
        return 0;
    });
}

int cmd_moments(const fs::path& data, const fs::path& out)
{
    return guarded("moments", [&] {
        const auto records = load_data(data);
        const fs::path stem = out.parent_path() / out.stem();
        Manifest manifest("moments", fs::path(stem.string() + ".manifest.json"), 0);
        manifest.input(data);
        manifest.write_report(out, moments_csv(records));
        manifest.finish();
        return 0;
    });
}

namespace {

void apply_config_file(RunOptions& o, const CLI::App& sub)
{
    if (o.config.empty()) return;
    const json j = json::parse(read_file(o.config));
    const auto unset = [&](const char* flag) { return sub.count(flag) == 0; };
    if (j.contains("seed") && unset("--seed")) o.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs") && unset("--jobs")) o.jobs = j.at("jobs").get<int>();
    if (j.contains("elpd") && unset("--elpd")) o.elpd = elpd_method_from_string(j.at("elpd").get<std::string>());
    if (j.contains("draws") && unset("--draws")) o.draws = j.at("draws").get<int>();
    if (j.contains("folds") && unset("--folds")) o.folds = j.at("folds").get<int>();
    if (j.contains("qq_samples") && unset("--qq-samples")) o.qq_samples = j.at("qq_samples").get<std::size_t>();
    if (j.contains("knots") && unset("--knots")) o.knots = j.at("knots").get<int>();
    if (j.contains("bandwidth") && unset("--bandwidth")) o.bandwidth = j.at("bandwidth").get<double>();
}

}  // namespace

int run(int argc, char** argv)
{
    CLI::App app{"Distributional regression of partner ages"};
    app.set_version_flag("--version", std::string(AGEMIX_VERSION));
    app.require_subcommand(1);

    RunOptions opts;
    opts.jobs = default_jobs();
    std::string elpd = "psis";
    std::string data;
    std::string out;

    const auto add_common = [&](CLI::App* sub, bool experiment) {
        sub->add_option("--seed", opts.seed, "Random seed");
        sub->add_option("--out", out, "Output path")->required();
        sub->add_option("--config", opts.config, "JSON options file");
        if (experiment) {
            sub->add_option("--jobs", opts.jobs, "Parallel fits")->check(CLI::PositiveNumber);
            sub->add_option("--elpd", elpd, "ELPD method")->check(CLI::IsMember({"psis", "kfold"}));
            sub->add_option("--draws", opts.draws, "Laplace draws per fit")->check(CLI::PositiveNumber);
            sub->add_option("--folds", opts.folds, "Folds for kfold")->check(CLI::PositiveNumber);
            sub->add_option("--qq-samples", opts.qq_samples, "Predictive samples per QQ group");
            sub->add_option("--knots", opts.knots, "Interior spline knots");
        }
    };

    auto* cd = app.add_subcommand("compare-distributions", "Rank the five families within each subset");
    cd->add_option("data", data, "Partnership CSV")->required();
    add_common(cd, true);
    auto* cm = app.add_subcommand("compare-models", "Compare the five regression specifications");
    cm->add_option("data", data, "Partnership CSV")->required();
    add_common(cm, true);
    auto* dh = app.add_subcommand("deheap", "Redistribute heaped partner ages");
    dh->add_option("data", data, "Partnership CSV")->required();
    add_common(dh, false);
    dh->add_option("--bandwidth", opts.bandwidth, "Kernel bandwidth in years")->check(CLI::PositiveNumber);
    auto* sim = app.add_subcommand("simulate", "Generate synthetic partnership data");
    add_common(sim, false);
    sim->get_option("--config")->required();
    auto* mo = app.add_subcommand("moments", "Empirical moments of partner age by subset");
    mo->add_option("data", data, "Partnership CSV")->required();
    add_common(mo, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        opts.elpd = elpd_method_from_string(elpd);
        if (sim->parsed()) {
            std::optional<std::uint64_t> seed;
            if (sim->count("--seed") > 0) seed = opts.seed;
            return cmd_simulate(opts.config, out, seed);
        }
        for (CLI::App* sub : {cd, cm, dh, mo}) {
            if (sub->parsed()) apply_config_file(opts, *sub);
        }
    } catch (const std::exception& e) {
        std::cerr << "agemix: " << e.what() << "\n";
        return kExitUsage;
    }
    if (cd->parsed()) return cmd_compare_distributions(data, out, opts);
    if (cm->parsed()) return cmd_compare_models(data, out, opts);
    if (dh->parsed()) return cmd_deheap(data, out, opts);
    return cmd_moments(data, out);
}

}  // namespace agemix::cli
