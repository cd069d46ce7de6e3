// Command-line front end for the cell graph pipeline: synthetic data,
// feature extraction, graph building, training, evaluation, ablation
// sweeps and graph inspection. Logs go to stderr, data to declared files.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellgraph/ablation.hpp"
#include "cellgraph/checkpoint.hpp"
#include "cellgraph/config.hpp"
#include "cellgraph/errors.hpp"
#include "cellgraph/features.hpp"
#include "cellgraph/graph.hpp"
#include "cellgraph/graph_io.hpp"
#include "cellgraph/manifest.hpp"
#include "cellgraph/mask.hpp"
#include "cellgraph/model.hpp"
#include "cellgraph/parallel.hpp"
#include "cellgraph/rng.hpp"
#include "cellgraph/sampler.hpp"
#include "cellgraph/synth.hpp"
#include "cellgraph/trainer.hpp"

namespace fs = std::filesystem;
using namespace cellgraph;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += " ";
        s += argv[i];
    }
    return s;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw FormatError("bad integer list entry '" + tok + "'");
        }
    }
    return out;
}

// grade count ranges, e.g. "40:60,130:170,360:440"
std::array<std::pair<int, int>, 3> parse_count_ranges(const std::string& text) {
    std::array<std::pair<int, int>, 3> out;
    std::istringstream is(text);
    std::string tok;
    int i = 0;
    while (std::getline(is, tok, ',')) {
        if (i >= 3) throw FormatError("expected exactly 3 grade count ranges");
        auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw FormatError("bad count range '" + tok + "', expected lo:hi");
        out[i] = {std::stoi(tok.substr(0, colon)), std::stoi(tok.substr(colon + 1))};
        ++i;
    }
    if (i != 3) throw FormatError("expected exactly 3 grade count ranges");
    return out;
}

std::vector<fs::path> dataset_csvs(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw FormatError("dataset: no feature CSV files in " + dir);
    return files;
}

std::string sample_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04d", i);
    return buf;
}

// content-addressed graph cache: a key over the feature file bytes and every
// parameter that shapes the graph, so training never rebuilds a graph it has
// already seen
std::string graph_cache_key(const fs::path& csv, const AugmentParams& aug, int dim,
                            std::uint64_t selection_seed) {
    std::ostringstream os;
    os << hex64(fnv1a_file(csv.string())) << "|" << detail::format_double(aug.alpha) << "|"
       << detail::format_double(aug.beta) << "|" << aug.grid_d << "|" << aug.nodes << "|"
       << dim << "|" << selection_seed;
    return hex64(fnv1a_string(os.str()));
}

train::Dataset load_or_build_dataset(const std::vector<fs::path>& csvs,
                                     const PipelineConfig& cfg, const fs::path& cache_dir,
                                     int jobs, bool* all_cached = nullptr) {
    fs::create_directories(cache_dir);
    std::uint64_t dataset_seed = substream(cfg.train.seed, "dataset");
    bool cached = true;
    auto samples = parallel_map(csvs.size(), jobs, [&](std::size_t i) {
        auto key = graph_cache_key(csvs[i], cfg.aug, cfg.feature_dim,
                                   substream(dataset_seed, "selection", i));
        auto cache_file = cache_dir / (key + ".cgph");
        train::GraphSample sample;
        int width, height;
        if (fs::exists(cache_file)) {
            auto gf = load_graph(cache_file.string());
            sample.graph = std::move(gf.graph);
            width = gf.width;
            height = gf.height;
        } else {
            cached = false;
            auto set = load_features(csvs[i].string());
            if (!set.label)
                throw DegenerateDatasetError("dataset: " + csvs[i].string() +
                                             " carries no grade label");
            auto narrowed =
                cfg.feature_dim == set.dim ? set : prefix_features(set, cfg.feature_dim);
            sample.graph =
                augment_to_graph(narrowed, cfg.aug, substream(dataset_seed, "selection", i));
            width = set.width;
            height = set.height;
            GraphFile gf;
            gf.graph = sample.graph;
            gf.width = width;
            gf.height = height;
            gf.params = cfg.aug;
            gf.patched = cfg.patched;
            save_graph(gf, cache_file.string());
        }
        if (!sample.graph.label)
            throw DegenerateDatasetError("dataset: cached graph for " + csvs[i].string() +
                                         " carries no grade label");
        sample.patched = split_patches(sample.graph, width, height);
        sample.label = *sample.graph.label;
        return sample;
    });
    if (all_cached) *all_cached = cached;
    train::Dataset ds;
    ds.samples = std::move(samples);
    return ds;
}

void write_train_metrics(std::ostream& os, const std::string& run_id,
                         const std::vector<train::FoldReport>& reports) {
    train::write_metrics_header(os);
    for (const auto& report : reports)
        train::write_fold_rows(os, run_id, "train", "-", report, /*full=*/true);
    double mean = 0;
    for (const auto& r : reports) mean += r.final_accuracy;
    mean /= static_cast<double>(reports.size());
    double var = 0;
    for (const auto& r : reports) var += (r.final_accuracy - mean) * (r.final_accuracy - mean);
    var /= static_cast<double>(reports.size());
    train::write_summary_row(os, run_id, "train", "-", mean * 100.0,
                             std::sqrt(var) * 100.0);
}

gnn::ModelParams params_from_checkpoint(const ad::Checkpoint& ck, const PipelineConfig& cfg) {
    auto params = gnn::init_params(cfg.feature_dim, cfg.hp, 0);
    for (auto& [name, tensor] : params.named()) {
        const auto& loaded = ck.find(name);
        if (loaded->shape != tensor->shape)
            throw FormatError("checkpoint: shape mismatch for " + name);
        tensor->values = loaded->values;
    }
    return params;
}

// ---- subcommand payloads ----

struct SynthArgs {
    int samples = 30;
    std::uint64_t seed = 0;
    std::string out_dir;
    int width = 512, height = 512;
    int dim = 16;
    std::string counts;
    bool skip_masks = false;
};

int cmd_synth(const SynthArgs& a, const std::string& cmdline) {
    fs::create_directories(a.out_dir);
    RunManifest manifest;
    manifest.command_line = cmdline;
    Timer timer;

    SynthSpec base;
    base.width = a.width;
    base.height = a.height;
    if (!a.counts.empty()) base.cells_per_grade = parse_count_ranges(a.counts);

    for (int i = 0; i < a.samples; ++i) {
        SynthSpec spec = base;
        spec.forced_grade = i % 3;  // balanced classes
        auto [mask, grade] = generate_synthetic_tissue(spec, substream(a.seed, "synth", i));
        auto stem = fs::path(a.out_dir) / sample_name(i);
        auto set = compute_features(mask, extract_cells(mask), a.dim);
        set.label = grade;
        save_features(set, stem.string() + ".csv");
        manifest.artifacts.push_back(stem.string() + ".csv");
        if (!a.skip_masks) {
            save_mask_pgm(mask, stem.string() + ".pgm");
            save_mask_ppm(mask, stem.string() + ".ppm");
            manifest.artifacts.push_back(stem.string() + ".pgm");
            manifest.artifacts.push_back(stem.string() + ".ppm");
        }
    }
    manifest.resolved_config = "samples=" + std::to_string(a.samples) +
                               " seed=" + std::to_string(a.seed) +
                               " dim=" + std::to_string(a.dim);
    manifest.timings_sec["synth"] = timer.seconds();
    manifest.finalize_run_id();
    manifest.save((fs::path(a.out_dir) / "manifest.json").string());
    std::cerr << "wrote " << a.samples << " samples to " << a.out_dir << "\n";
    return 0;
}

struct ExtractArgs {
    std::string mask_path;
    std::string image_path;
    int dim = 16;
    int label = -1;
    std::string out;
};

int cmd_extract(const ExtractArgs& a, const std::string& cmdline) {
    auto mask = load_mask_pgm(a.mask_path);
    if (!a.image_path.empty()) load_mask_ppm(mask, a.image_path);
    auto set = compute_features(mask, extract_cells(mask), a.dim);
    if (a.label >= 0) set.label = a.label;
    save_features(set, a.out);

    RunManifest manifest;
    manifest.command_line = cmdline;
    manifest.add_input(a.mask_path);
    if (!a.image_path.empty()) manifest.add_input(a.image_path);
    manifest.resolved_config = "dim=" + std::to_string(a.dim);
    manifest.artifacts.push_back(a.out);
    manifest.finalize_run_id();
    manifest.save(a.out + ".manifest.json");
    std::cerr << "extracted " << set.cells.size() << " cells to " << a.out << "\n";
    return 0;
}

struct BuildGraphArgs {
    std::string features;
    std::string out;
    double alpha = 0.5, beta = 0.5;
    int grid_d = 32;
    int nodes = 200;
    bool patched = false;
    std::string format = "binary";
    std::uint64_t seed = 0;
    int jobs = 1;
};

int cmd_build_graph(const BuildGraphArgs& a, const std::string& cmdline) {
    AugmentParams aug;
    aug.alpha = a.alpha;
    aug.beta = a.beta;
    aug.grid_d = a.grid_d;
    aug.nodes = a.nodes;
    bool text = a.format == "text";
    if (a.format != "text" && a.format != "binary")
        throw FormatError("build-graph: --format must be text or binary");

    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    if (fs::is_directory(a.features)) {
        inputs = dataset_csvs(a.features);
        fs::create_directories(a.out);
        for (const auto& in : inputs)
            outputs.push_back(fs::path(a.out) / (in.stem().string() + ".cgph"));
    } else {
        inputs = {fs::path(a.features)};
        outputs = {fs::path(a.out.empty() ? fs::path(a.features).replace_extension(".cgph")
                                                .string()
                                          : a.out)};
    }

    RunManifest manifest;
    manifest.command_line = cmdline;
    Timer timer;
    parallel_map(inputs.size(), a.jobs, [&](std::size_t i) {
        auto set = load_features(inputs[i].string());
        GraphFile gf;
        gf.graph = augment_to_graph(set, aug, substream(a.seed, "selection", i));
        gf.width = set.width;
        gf.height = set.height;
        gf.params = aug;
        gf.patched = a.patched;
        save_graph(gf, outputs[i].string(), text);
        return 0;
    });
    for (const auto& in : inputs) manifest.add_input(in.string());
    for (const auto& out : outputs) manifest.artifacts.push_back(out.string());
    PipelineConfig echo;
    echo.aug = aug;
    echo.patched = a.patched;
    manifest.resolved_config = echo.to_string();
    manifest.timings_sec["build"] = timer.seconds();
    manifest.finalize_run_id();
    manifest.save(outputs.size() == 1 ? outputs[0].string() + ".manifest.json"
                                      : (fs::path(a.out) / "manifest.json").string());
    std::cerr << "built " << outputs.size() << " graph file(s)\n";
    return 0;
}

struct TrainArgs {
    std::string dataset;
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "run";
    int jobs = 1;
    // direct overrides, applied when the flag was given
    CLI::Option* seed_opt = nullptr;
    std::uint64_t seed = 0;
    CLI::Option* single_opt = nullptr;
};

PipelineConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& sets) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw FormatError("--set expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int cmd_train(const TrainArgs& a, const std::string& cmdline) {
    auto cfg = resolve_config(a.config_path, a.sets);
    if (a.seed_opt && a.seed_opt->count()) cfg.train.seed = a.seed;
    if (a.single_opt && a.single_opt->count()) cfg.patched = false;

    fs::create_directories(a.out_dir);
    RunManifest manifest;
    manifest.command_line = cmdline;
    manifest.resolved_config = cfg.to_string();
    if (!a.config_path.empty()) manifest.add_input(a.config_path);

    auto csvs = dataset_csvs(a.dataset);
    for (const auto& csv : csvs) manifest.add_input(csv.string());

    Timer build_timer;
    bool all_cached = false;
    auto ds =
        load_or_build_dataset(csvs, cfg, fs::path(a.out_dir) / "cache", a.jobs, &all_cached);
    manifest.timings_sec["build_graphs"] = build_timer.seconds();
    std::cerr << (all_cached ? "graphs loaded from cache\n" : "graphs built\n");

    Timer train_timer;
    std::vector<gnn::ModelParams> trained;
    auto reports = train::train_cv(ds, cfg.patched, cfg.train, cfg.hp, &trained);
    manifest.timings_sec["train"] = train_timer.seconds();

    manifest.finalize_run_id();
    auto metrics_path = fs::path(a.out_dir) / "metrics.csv";
    {
        std::ofstream os(metrics_path);
        write_train_metrics(os, manifest.run_id, reports);
    }
    manifest.artifacts.push_back(metrics_path.string());
    for (std::size_t f = 0; f < trained.size(); ++f) {
        auto ck_path = fs::path(a.out_dir) / ("fold_" + std::to_string(f) + ".ckpt");
        ad::save_checkpoint(ck_path.string(), trained[f].named(), cfg.to_string());
        manifest.artifacts.push_back(ck_path.string());
    }
    manifest.save((fs::path(a.out_dir) / "manifest.json").string());

    for (const auto& r : reports)
        std::cerr << "fold " << r.fold_id << ": final accuracy " << r.final_accuracy << "\n";
    if (reports.size() == 3) {
        auto [mean, stddev] = train::evaluate_cv(reports);
        std::cerr << "cv accuracy: " << mean << " +- " << stddev << " (percent)\n";
    }
    return 0;
}

struct EvaluateArgs {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    int jobs = 1;
};

int cmd_evaluate(const EvaluateArgs& a, const std::string& cmdline) {
    auto ck = ad::load_checkpoint(a.checkpoint);
    auto cfg = PipelineConfig::from_string(ck.config);
    auto params = params_from_checkpoint(ck, cfg);

    auto csvs = dataset_csvs(a.dataset);
    auto tmp_cache = fs::temp_directory_path() / "cellgraph_eval_cache";
    auto ds = load_or_build_dataset(csvs, cfg, tmp_cache, a.jobs);

    int correct = 0;
    std::array<int, 3> per_class_total{0, 0, 0}, per_class_correct{0, 0, 0};
    std::ostringstream report;
    report << "sample,label,prediction,grade\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        double pred = cfg.patched ? gnn::predict(s.patched, params, cfg.hp)
                                  : gnn::predict_single(s.graph, params, cfg.hp);
        int grade = train::classify(pred);
        correct += grade == s.label;
        per_class_total[s.label] += 1;
        per_class_correct[s.label] += grade == s.label;
        report << csvs[i].filename().string() << "," << s.label << ","
               << detail::format_double(pred) << "," << grade << "\n";
    }
    double acc = static_cast<double>(correct) / static_cast<double>(ds.samples.size());
    std::cout << "accuracy " << acc * 100.0 << " percent (" << correct << "/"
              << ds.samples.size() << ")\n";
    for (int g = 0; g < 3; ++g)
        if (per_class_total[g])
            std::cout << "grade " << g << ": " << per_class_correct[g] << "/"
                      << per_class_total[g] << "\n";
    if (!a.out.empty()) {
        std::ofstream os(a.out);
        os << report.str();
        RunManifest manifest;
        manifest.command_line = cmdline;
        manifest.add_input(a.checkpoint);
        manifest.resolved_config = ck.config;
        manifest.artifacts.push_back(a.out);
        manifest.finalize_run_id();
        manifest.save(a.out + ".manifest.json");
    }
    return 0;
}

struct AblateArgs {
    std::string kind;
    std::string dataset;
    std::string values;  // nodes or dims depending on kind
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "ablation";
    int jobs = 1;
};

int cmd_ablate(const AblateArgs& a, const std::string& cmdline) {
    auto cfg = resolve_config(a.config_path, a.sets);
    auto kind = train::parse_ablation_kind(a.kind);

    std::vector<int> values;
    if (!a.values.empty())
        values = parse_int_list(a.values);
    else if (kind == train::AblationKind::feature_dim)
        values = {8, 12, 16};
    else
        values = {100, 200, 400};

    auto csvs = dataset_csvs(a.dataset);
    std::vector<CellFeatureSet> sets;
    sets.reserve(csvs.size());
    for (const auto& csv : csvs) sets.push_back(load_features(csv.string()));

    auto grid = train::make_grid(kind, values, cfg.patched, cfg.aug.nodes, cfg.feature_dim);
    RunManifest manifest;
    manifest.command_line = cmdline;
    manifest.resolved_config = cfg.to_string();
    if (!a.config_path.empty()) manifest.add_input(a.config_path);
    for (const auto& csv : csvs) manifest.add_input(csv.string());
    manifest.finalize_run_id();

    Timer timer;
    auto outcomes = train::run_ablation(kind, grid, sets, cfg.aug, cfg.train, cfg.hp, a.jobs);
    manifest.timings_sec["ablate"] = timer.seconds();

    fs::create_directories(a.out_dir);
    auto csv_path = fs::path(a.out_dir) / "sweep.csv";
    {
        std::ofstream os(csv_path);
        train::write_ablation_csv(os, manifest.run_id, kind, outcomes);
    }
    manifest.artifacts.push_back(csv_path.string());
    manifest.save((fs::path(a.out_dir) / "manifest.json").string());

    for (const auto& cell : outcomes) {
        if (!cell.error.empty())
            std::cerr << cell.point.name << ": FAILED (" << cell.error << ")\n";
        else
            std::cerr << cell.point.name << ": " << cell.summary->first << " +- "
                      << cell.summary->second << "\n";
    }
    return 0;
}

struct InspectArgs {
    std::string graph;
};

int cmd_inspect(const InspectArgs& a, const std::string&) {
    auto gf = load_graph(a.graph);
    const auto& g = gf.graph;
    std::cout << "graph " << a.graph << "\n";
    std::cout << "  nodes " << g.n << ", features " << g.f << ", image " << gf.width << "x"
              << gf.height << "\n";
    std::cout << "  label " << (g.label ? std::to_string(*g.label) : std::string("none"))
              << ", alpha " << gf.params.alpha << ", beta " << gf.params.beta << ", grid_d "
              << gf.params.grid_d << ", nodes budget " << gf.params.nodes << ", patched "
              << (gf.patched ? "yes" : "no") << "\n";
    if (g.n == 0) return 0;

    // weighted degree = row sum without the diagonal
    double dmin = 0, dmax = 0, dsum = 0;
    for (int i = 0; i < g.n; ++i) {
        double s = 0;
        for (int j = 0; j < g.n; ++j)
            if (j != i) s += g.adj(i, j);
        if (i == 0) dmin = dmax = s;
        dmin = std::min(dmin, s);
        dmax = std::max(dmax, s);
        dsum += s;
    }
    std::cout << "  degree min " << dmin << ", mean " << dsum / g.n << ", max " << dmax
              << "\n";

    double amin = g.adjacency[0], amax = g.adjacency[0];
    for (double v : g.adjacency) {
        amin = std::min(amin, v);
        amax = std::max(amax, v);
    }
    std::cout << "  edge weight histogram [" << amin << ", " << amax << "]\n";
    std::array<std::size_t, 10> bins{};
    double span = amax > amin ? amax - amin : 1.0;
    for (double v : g.adjacency) {
        auto b = static_cast<std::size_t>((v - amin) / span * 10.0);
        bins[std::min<std::size_t>(b, 9)] += 1;
    }
    for (int b = 0; b < 10; ++b) {
        std::cout << "  [" << amin + b * span / 10 << ", " << amin + (b + 1) * span / 10
                  << ") " << bins[b] << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"density-weighted cell graphs and a GraphSAGE/DiffPool grade classifier"};
    app.require_subcommand(1);
    std::string cmdline = join_args(argc, argv);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic tissue dataset");
    synth_cmd->add_option("--samples", synth.samples, "number of images");
    synth_cmd->add_option("--seed", synth.seed, "master seed");
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
    synth_cmd->add_option("--width", synth.width);
    synth_cmd->add_option("--height", synth.height);
    synth_cmd->add_option("--dim", synth.dim, "feature dimension (8, 12 or 16)");
    synth_cmd->add_option("--counts", synth.counts, "per-grade cell count ranges lo:hi,lo:hi,lo:hi");
    synth_cmd->add_flag("--skip-masks", synth.skip_masks, "write only feature CSVs");

    ExtractArgs extract;
    auto* extract_cmd =
        app.add_subcommand("extract-features", "mask (+image) to feature CSV");
    extract_cmd->add_option("--mask", extract.mask_path, "16-bit PGM label mask")->required();
    extract_cmd->add_option("--image", extract.image_path, "PPM color image");
    extract_cmd->add_option("--dim", extract.dim, "feature dimension (8, 12 or 16)");
    extract_cmd->add_option("--label", extract.label, "grade label 0..2");
    extract_cmd->add_option("-o,--out", extract.out, "output CSV")->required();

    BuildGraphArgs build;
    auto* build_cmd = app.add_subcommand("build-graph", "feature CSV to graph container");
    build_cmd->add_option("--features", build.features, "feature CSV or dataset directory")
        ->required();
    build_cmd->add_option("-o,--out", build.out, "output file or directory");
    build_cmd->add_option("--alpha", build.alpha, "density-sum weight");
    build_cmd->add_option("--beta", build.beta, "density-contrast weight");
    build_cmd->add_option("--grid-d", build.grid_d, "distribution grid dimension");
    build_cmd->add_option("--nodes", build.nodes, "node budget M");
    build_cmd->add_flag("--patched", build.patched, "mark the file for patched training");
    build_cmd->add_option("--format", build.format, "text|binary");
    build_cmd->add_option("--seed", build.seed, "selection seed");
    build_cmd->add_option("--jobs", build.jobs, "parallel workers for directories");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "3-fold cross-validated training");
    train_cmd->add_option("--dataset", train_args.dataset, "feature CSV directory")
        ->required();
    train_cmd->add_option("--config", train_args.config_path, "key=value config file");
    train_cmd->add_option("--set", train_args.sets, "override, e.g. --set lr0=0.001");
    train_cmd->add_option("--out", train_args.out_dir, "run directory");
    train_cmd->add_option("--jobs", train_args.jobs, "parallel graph building");
    train_args.seed_opt = train_cmd->add_option("--seed", train_args.seed, "master seed");
    train_args.single_opt =
        train_cmd->add_flag("--single", "train on whole graphs instead of patches");

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "accuracy of a checkpoint on a dataset");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "fold checkpoint")->required();
    eval_cmd->add_option("--dataset", eval_args.dataset, "feature CSV directory")->required();
    eval_cmd->add_option("--out", eval_args.out, "per-sample prediction CSV");
    eval_cmd->add_option("--jobs", eval_args.jobs, "parallel graph building");

    AblateArgs ablate_args;
    auto* ablate_cmd = app.add_subcommand("ablate", "configuration sweeps with 3-fold CV");
    ablate_cmd
        ->add_option("kind", ablate_args.kind, "patching | feature-dim | graph-size")
        ->required();
    ablate_cmd->add_option("--dataset", ablate_args.dataset, "feature CSV directory")
        ->required();
    ablate_cmd->add_option("--values", ablate_args.values,
                           "grid values (node budgets, or dims for feature-dim)");
    ablate_cmd->add_option("--dims", ablate_args.values, "alias for --values");
    ablate_cmd->add_option("--nodes", ablate_args.values, "alias for --values");
    ablate_cmd->add_option("--config", ablate_args.config_path, "key=value config file");
    ablate_cmd->add_option("--set", ablate_args.sets, "override, e.g. --set epochs=100");
    ablate_cmd->add_option("--out", ablate_args.out_dir, "sweep directory");
    ablate_cmd->add_option("--jobs", ablate_args.jobs, "parallel grid cells");

    InspectArgs inspect_args;
    auto* inspect_cmd = app.add_subcommand("inspect", "text summary of a graph file");
    inspect_cmd->add_option("graph", inspect_args.graph, "graph file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth, cmdline);
        if (extract_cmd->parsed()) return cmd_extract(extract, cmdline);
        if (build_cmd->parsed()) return cmd_build_graph(build, cmdline);
        if (train_cmd->parsed()) return cmd_train(train_args, cmdline);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_args, cmdline);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, cmdline);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_args, cmdline);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
