#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "obcl/bench.hpp"
#include "obcl/checkpoint.hpp"
#include "obcl/errors.hpp"
#include "obcl/metrics.hpp"
#include "obcl/suites.hpp"
#include "obcl/synthdata.hpp"
#include "obcl/trainer.hpp"

namespace fs = std::filesystem;
using obcl::ConfigError;

namespace {

constexpr const char* kVersion = "obcl 0.1.0";

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestWriter {
    nlohmann::json j;
    fs::path out_dir;

    ManifestWriter(const std::string& command, const fs::path& dir) : out_dir(dir) {
        j["command"] = command;
        j["version"] = kVersion;
        j["started"] = timestamp_utc();
        j["artifacts"] = nlohmann::json::array();
        fs::create_directories(dir);
    }
    void config(const std::string& path) { j["config"] = path; }
    void seed(uint64_t s) { j["seed"] = s; }
    void artifact(const fs::path& p) { j["artifacts"].push_back(p.string()); }
    void finish() {
        j["finished"] = timestamp_utc();
        std::ofstream f(out_dir / "manifest.json");
        if (!f) throw obcl::Error("cannot write manifest in " + out_dir.string());
        f << j.dump(2) << "\n";
    }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    if (!f) throw obcl::Error("cannot write " + p.string());
    f << text;
}

int cmd_gen_data(const std::string& config_path, const std::string& out, int64_t count) {
    obcl::GeneratorConfig cfg = obcl::load_generator_config_json(config_path);
    ManifestWriter man("gen-data", out);
    man.config(config_path);
    man.seed(cfg.seed);
    obcl::PairBatch batch = obcl::generate(cfg, count);
    fs::path data = fs::path(out) / "dataset.csv";
    fs::path side = fs::path(out) / "dataset.config.json";
    obcl::save_pairbatch_csv(data.string(), batch);
    obcl::save_generator_config_json(side.string(), cfg);
    man.artifact(data);
    man.artifact(side);
    man.finish();
    std::cout << "wrote " << batch.size() << " pairs to " << data.string() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out, int64_t steps_override) {
    obcl::ExperimentConfig cfg = obcl::load_experiment_config_json(config_path);
    if (steps_override >= 0) cfg.steps = steps_override;
    ManifestWriter man("train", out);
    man.config(config_path);
    man.seed(cfg.seed);

    obcl::TrainResult r = obcl::train(cfg);

    fs::path log = fs::path(out) / "train_log.csv";
    fs::path ckpt = fs::path(out) / "checkpoint.txt";
    fs::path dists = fs::path(out) / "distances.csv";
    obcl::save_train_log_csv(log.string(), r.log);
    obcl::save_checkpoint(ckpt.string(), r.checkpoint);
    {
        obcl::DistanceHistograms h = obcl::distance_histograms(
            r.eval_image_emb, r.eval_text_emb, cfg.distance, cfg.n, cfg.m);
        std::ostringstream os;
        os << "series,value\n";
        auto dump = [&](const char* name, const obcl::Histogram& hist) {
            char buf[40];
            for (double v : hist.values) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                os << name << "," << buf << "\n";
            }
        };
        dump("positive", h.positive);
        dump("cross_neg", h.cross_neg);
        dump("image_image", h.image_image);
        dump("text_text", h.text_text);
        write_text(dists, os.str());
    }
    man.artifact(log);
    man.artifact(ckpt);
    man.artifact(dists);
    man.finish();
    std::printf("trained %lld steps: recall@1 i2t %.4f t2i %.4f, tau %.4f\n",
                static_cast<long long>(cfg.steps), r.final_recall.i2t, r.final_recall.t2i,
                r.final_tau);
    return 0;
}

int cmd_grid(const std::string& configs_dir, const std::string& out) {
    std::vector<std::string> paths;
    if (!fs::is_directory(configs_dir))
        throw ConfigError("grid: not a directory: " + configs_dir);
    for (const auto& e : fs::directory_iterator(configs_dir))
        if (e.path().extension() == ".json") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("grid: no .json configs in " + configs_dir);

    std::vector<obcl::ExperimentConfig> cfgs;
    for (const auto& p : paths) cfgs.push_back(obcl::load_experiment_config_json(p));

    ManifestWriter man("grid", out);
    man.config(configs_dir);
    std::vector<obcl::GridRow> rows = obcl::run_grid(cfgs);
    fs::path csv = fs::path(out) / "grid.csv";
    write_text(csv, obcl::grid_to_csv(rows));
    man.artifact(csv);
    man.finish();
    std::cout << obcl::grid_to_csv(rows);
    for (const auto& r : rows)
        if (r.failed) std::cerr << "cell '" << r.name << "' failed: " << r.error << "\n";
    return 0;
}

int cmd_gradcheck(uint64_t seed, int64_t trials) {
    obcl::SuiteResult r = obcl::gradcheck_suite(seed, trials);
    std::printf("gradcheck: %lld checks, %lld failures, max relative error %.3g\n",
                static_cast<long long>(r.checks), static_cast<long long>(r.failures),
                r.max_error);
    for (const auto& msg : r.messages) std::cerr << "  " << msg << "\n";
    return r.passed() ? 0 : 1;
}

int cmd_bench(const std::string& out, uint64_t seed) {
    std::vector<obcl::StorageReport> sweep = obcl::default_sweep(seed);
    std::cout << obcl::report_text(sweep);

    auto pick = [&](obcl::DistanceKind kind, bool vary_m) {
        std::vector<obcl::StorageReport> v;
        for (const auto& r : sweep)
            if (r.kind == kind && (vary_m ? r.d == 8 * r.m : (r.m == 1 || r.m == 4)))
                v.push_back(r);
        return v;
    };
    std::printf("fitted d-exponent: sphere_neg_inner %.3f, euclidean_l2 %.3f, "
                "oblique_neg_trace %.3f\n",
                obcl::fitted_exponent(pick(obcl::DistanceKind::SphereNegInner, false), 'd'),
                obcl::fitted_exponent(pick(obcl::DistanceKind::EuclideanL2, false), 'd'),
                obcl::fitted_exponent(pick(obcl::DistanceKind::ObliqueNegTrace, false), 'd'));
    std::printf("fitted m-exponent: oblique_geodesic %.3f\n",
                obcl::fitted_exponent(pick(obcl::DistanceKind::ObliqueGeodesic, true), 'm'));

    if (!out.empty()) {
        fs::path dir = fs::path(out);
        ManifestWriter man("bench", dir);
        man.seed(seed);
        fs::path csv = dir / "storage.csv";
        write_text(csv, obcl::report_csv(sweep));
        man.artifact(csv);
        man.finish();
    }
    return 0;
}

int cmd_props(const std::string& suite, uint64_t seed) {
    std::vector<obcl::SuiteResult> results = obcl::run_suites(suite, seed);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-12s %7lld checks  %lld failures\n", r.name.c_str(),
                    static_cast<long long>(r.checks), static_cast<long long>(r.failures));
        for (const auto& msg : r.messages) std::cerr << "  " << msg << "\n";
        ok = ok && r.passed();
    }
    return ok ? 0 : 1;
}

int cmd_plotdata(const std::string& log_path, const std::string& what, const std::string& out) {
    if (what == "temperature") {
        obcl::TrainLog log = obcl::load_train_log_csv(log_path);
        std::ostringstream os;
        os << "step,tau\n";
        char buf[40];
        for (const auto& r : log.rows) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.tau);
            os << r.step << "," << buf << "\n";
        }
        write_text(out, os.str());
        return 0;
    }
    if (what == "histograms") {
        // bins the per-series raw distances train writes next to the log
        fs::path dists = fs::path(log_path).parent_path() / "distances.csv";
        std::ifstream f(dists);
        if (!f) throw obcl::Error("plotdata: missing " + dists.string() +
                                  " (produced by the train subcommand)");
        std::string line;
        std::getline(f, line);
        std::map<std::string, std::vector<double>> series;
        while (std::getline(f, line)) {
            auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            series[line.substr(0, comma)].push_back(std::stod(line.substr(comma + 1)));
        }
        std::ostringstream os;
        os << "series,bin_center,count\n";
        const int64_t bins = 32;
        for (auto& [name, vals] : series) {
            auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
            double lo = *lo_it, span = *hi_it > *lo_it ? *hi_it - *lo_it : 1.0;
            std::vector<int64_t> counts(bins, 0);
            for (double v : vals) {
                auto b = static_cast<int64_t>((v - lo) / span * bins);
                ++counts[static_cast<size_t>(std::min(b, bins - 1))];
            }
            char buf[40];
            for (int64_t b = 0; b < bins; ++b) {
                double center = lo + (static_cast<double>(b) + 0.5) / bins * span;
                std::snprintf(buf, sizeof(buf), "%.17g", center);
                os << name << "," << buf << "," << counts[static_cast<size_t>(b)] << "\n";
            }
        }
        write_text(out, os.str());
        return 0;
    }
    throw ConfigError("plotdata: unknown --what '" + what +
                      "' (valid: temperature, histograms)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oblique-manifold contrastive alignment toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, suite = "all", what, log_path;
    int64_t count = 1024, trials = 100, steps_override = -1;
    uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic paired dataset");
    gen->add_option("--config", config_path, "generator config JSON")->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--count", count, "number of pairs");

    auto* train = app.add_subcommand("train", "run one training experiment");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--steps", steps_override, "override config step count");

    auto* grid = app.add_subcommand("grid", "run every config in a directory");
    grid->add_option("--configs", config_path, "directory of experiment configs")->required();
    grid->add_option("--out", out_dir, "output directory")->required();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gc->add_option("--seed", seed, "root seed");
    gc->add_option("--trials", trials, "random instances");

    auto* bench = app.add_subcommand("bench", "backward-storage sweep");
    bench->add_option("--out", out_dir, "output directory for storage.csv");
    bench->add_option("--seed", seed, "root seed");

    auto* props = app.add_subcommand("props", "run a property suite");
    props->add_option("--suite", suite, "geometry | distance | loss | gradcheck | all");
    props->add_option("--seed", seed, "root seed");

    auto* plot = app.add_subcommand("plotdata", "emit tidy CSV for plotting");
    plot->add_option("--log", log_path, "train_log.csv from a finished run")->required();
    plot->add_option("--what", what, "temperature | histograms")->required();
    plot->add_option("--out", config_path, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir, count);
        if (train->parsed()) return cmd_train(config_path, out_dir, steps_override);
        if (grid->parsed()) return cmd_grid(config_path, out_dir);
        if (gc->parsed()) return cmd_gradcheck(seed, trials);
        if (bench->parsed()) return cmd_bench(out_dir, seed);
        if (props->parsed()) return cmd_props(suite, seed);
        if (plot->parsed()) return cmd_plotdata(log_path, what, config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
