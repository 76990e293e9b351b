// Command line front end: simulated benchmarks, graph comparison, timing,
// synthetic data and the labeling service.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "hse/commands.hpp"
#include "hse/error.hpp"
#include "hse/service.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

struct Common {
    std::string dataset;
    std::string label_column = "label";
    hse::SessionConfig config;
    std::string graph = "perplexity";
    std::string out;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

void add_dataset_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--dataset", c.dataset, "CSV file with numeric feature columns")->required();
    cmd->add_option("--label-column", c.label_column, "Column holding ground-truth class ids");
    cmd->add_option("--out", c.out, "Write JSON here instead of stdout");
}

void add_protocol_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--k", c.config.k, "Nearest neighbours per point")->capture_default_str();
    cmd->add_option("--perplexity", c.config.perplexity, "Target perplexity")->capture_default_str();
    cmd->add_option("--queries", c.config.query_budget, "Oracle queries per run")->capture_default_str();
    cmd->add_option("--subquery-factor", c.config.subquery_factor, "Subquery budget factor")->capture_default_str();
    cmd->add_option("--log-base", c.config.log_base, "Budget logarithm base (0 = natural)")->capture_default_str();
    cmd->add_option("--initial", c.config.initial_queries, "Initial queries")->capture_default_str();
}

std::shared_ptr<const hse::Dataset> load(const Common& c) {
    hse::CsvOptions opts;
    opts.label_column = c.label_column;
    auto ds = hse::load_csv(c.dataset, opts);
    const std::string sidecar = c.dataset.substr(0, c.dataset.rfind('.')) + ".json";
    if (std::ifstream(sidecar)) hse::load_sidecar(ds, sidecar);
    return std::make_shared<const hse::Dataset>(std::move(ds));
}

void emit(const hse::Json& doc, const std::string& path) {
    if (path.empty()) {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
    if (!out) throw hse::UsageError("cannot write " + path);
}

hse::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical subquery evaluation for graph-based active learning"};
    app.require_subcommand(1);

    Common run_c, eval_c, time_c;
    std::string strategies = "hse", time_strategies = "hse,eer_full", graphs = "mean,binary,knn,perplexity";
    int seeds = 1, eval_seeds = 10;
    std::uint64_t first_seed = 0;
    bool timings = false;

    auto* run = app.add_subcommand("run", "Simulated active-learning runs against ground truth");
    add_dataset_flags(run, run_c);
    add_protocol_flags(run, run_c);
    run->add_option("--strategy", strategies, "Comma-separated strategies")->capture_default_str();
    run->add_option("--graph", run_c.graph, "Graph kind")->capture_default_str();
    run->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();
    run->add_option("--first-seed", first_seed, "First seed")->capture_default_str();
    run->add_flag("--with-timings", timings, "Include per-query wall times (not reproducible)");
    run->add_option("--jobs", run_c.jobs, "Parallel runs");

    auto* eval = app.add_subcommand("graph-eval", "Compare graph constructions under full EER");
    add_dataset_flags(eval, eval_c);
    add_protocol_flags(eval, eval_c);
    eval->add_option("--graphs", graphs, "Comma-separated graph kinds")->capture_default_str();
    eval->add_option("--seeds", eval_seeds, "Number of seeds")->capture_default_str();
    eval->add_option("--jobs", eval_c.jobs, "Parallel runs");

    auto* timing = app.add_subcommand("timing", "Mean per-query selection time per strategy");
    add_dataset_flags(timing, time_c);
    add_protocol_flags(timing, time_c);
    timing->add_option("--strategies", time_strategies, "Comma-separated strategies")->capture_default_str();
    timing->add_option("--graph", time_c.graph, "Graph kind")->capture_default_str();

    std::string host = "127.0.0.1", dataset_dir = ".", snapshot_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the labeling service");
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--dataset-dir", dataset_dir, "Directory of <name>.csv datasets")->capture_default_str();
    serve->add_option("--snapshot-dir", snapshot_dir, "Persist sessions here and restore them on start");

    hse::BlobSpec blobs;
    std::string sizes = "100,100,100,100", gen_out;
    auto* gen = app.add_subcommand("gen", "Write a synthetic Gaussian-blob dataset");
    gen->add_option("--sizes", sizes, "Points per class")->capture_default_str();
    gen->add_option("--dims", blobs.dims)->capture_default_str();
    gen->add_option("--separation", blobs.separation, "Distance between neighbouring centres")->capture_default_str();
    gen->add_option("--seed", blobs.seed)->capture_default_str();
    gen->add_option("--out", gen_out, "Output CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUser;
    }

    try {
        if (*run) {
            hse::RunOptions o;
            o.config = run_c.config;
            o.config.graph_kind = hse::graph_kind_from_string(run_c.graph);
            o.strategies.clear();
            for (const auto& s : split_list(strategies)) o.strategies.push_back(hse::strategy_from_string(s));
            o.seeds = seeds;
            o.first_seed = first_seed;
            o.with_timings = timings;
            o.jobs = run_c.jobs;
            emit(hse::cmd_run(load(run_c), o), run_c.out);
        } else if (*eval) {
            hse::GraphEvalOptions o;
            o.config = eval_c.config;
            o.graphs.clear();
            for (const auto& g : split_list(graphs)) o.graphs.push_back(hse::graph_kind_from_string(g));
            o.seeds = eval_seeds;
            o.jobs = eval_c.jobs;
            emit(hse::cmd_graph_eval(load(eval_c), o), eval_c.out);
        } else if (*timing) {
            hse::TimingOptions o;
            o.config = time_c.config;
            o.config.graph_kind = hse::graph_kind_from_string(time_c.graph);
            o.strategies.clear();
            for (const auto& s : split_list(time_strategies)) o.strategies.push_back(hse::strategy_from_string(s));
            emit(hse::cmd_timing(load(time_c), o), time_c.out);
        } else if (*serve) {
            hse::ServiceOptions so;
            so.dataset_dir = dataset_dir;
            if (!snapshot_dir.empty()) so.snapshot_dir = snapshot_dir;
            hse::LabelingService service(so);
            const std::size_t restored = service.restore();
            hse::HttpServer server(service);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "restored " << restored << " session(s); listening on " << host << ":" << port << "\n";
            server.run(host, port);
            g_server = nullptr;
        } else if (*gen) {
            blobs.sizes.clear();
            for (const auto& s : split_list(sizes)) blobs.sizes.push_back(std::stoul(s));
            const std::string csv = hse::to_csv(hse::make_gaussian_blobs(blobs));
            if (gen_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(gen_out);
                out << csv;
                if (!out) throw hse::UsageError("cannot write " + gen_out);
            }
        }
    } catch (const hse::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const hse::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUser;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: bad number: " << e.what() << "\n";
        return kExitUser;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}
