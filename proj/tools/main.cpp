// Command-line front end for the disruption-identification pipeline.
//
// Subcommands mirror the pipeline stages (synth, ingest, group, featurize,
// pca, cluster, score, report) plus an all-in-one `run`. Every stage reads
// its predecessor's files from the output directory, so any stage can be
// re-run in isolation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "airdisrupt/pipeline.hpp"

namespace {

using namespace airdisrupt;

std::vector<std::string> group_order_from_columns(const std::vector<ColumnKey>& columns) {
    std::vector<std::string> order;
    for (const auto& c : columns) {
        if (order.empty() || order.back() != c.group_id) order.push_back(c.group_id);
    }
    return order;
}

int dispatch(const std::string& command, const PipelineConfig& cfg) {
    if (command == "synth") {
        stage_synth(cfg);
        std::cout << "wrote " << out_path(cfg, "flights.csv") << ", airports.csv, labels.csv\n";
    } else if (command == "ingest") {
        json summary = stage_ingest(cfg, nullptr);
        ensure_out_dir(cfg);
        std::ofstream(out_path(cfg, "ingest.json")) << summary.dump(2) << '\n';
        std::cout << summary.dump(2) << '\n';
    } else if (command == "group") {
        auto groups = stage_group(cfg);
        std::cout << "wrote " << out_path(cfg, "groups.csv") << " (" << groups.size()
                  << " groups)\n";
    } else if (command == "featurize") {
        std::vector<FlightRecord> flights;
        stage_ingest(cfg, &flights);
        auto groups = read_groups(out_path(cfg, "groups.csv"));
        auto feat = stage_featurize(cfg, flights, groups);
        std::cout << "wrote features for " << feat.days.size() << " days x "
                  << feat.table.group_order.size() << " groups\n";
    } else if (command == "pca") {
        FeatureMatrix raw = read_matrix_csv(out_path(cfg, "matrix.csv"));
        auto res = stage_pca(cfg, raw, group_order_from_columns(raw.columns));
        std::cout << "selected " << res.model.n_selected << " components ("
                  << csv::format_double(100.0 * res.model.selected_cumulative_ratio)
                  << "% variance)\n";
    } else if (command == "cluster") {
        DayScores scores = read_scores_csv(out_path(cfg, "scores.csv"));
        auto res = stage_cluster(cfg, scores.days, scores.scores);
        std::cout << "k=" << res.model.k << " inertia=" << csv::format_double(res.model.inertia)
                  << "\n";
    } else if (command == "score") {
        DayScores scores = read_scores_csv(out_path(cfg, "scores.csv"));
        stage_score(cfg, scores.days, scores.scores);
        std::cout << "wrote " << out_path(cfg, "anomaly.csv") << '\n';
    } else if (command == "report") {
        ReportInputs in = load_report_inputs(cfg);
        auto res = stage_report(cfg, in);
        std::cout << "wrote report for " << res.records.size() << " days, "
                  << res.disrupted.size() << " disrupted cluster(s)\n";
    } else if (command == "run") {
        run_pipeline(cfg);
        std::cout << "pipeline complete: " << cfg.paths.out << '\n';
    } else {
        throw ConfigError("unknown command: " + command);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Disruption identification for days of airline operations"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "Output directory (overrides config)");
    app.add_option("--threads", threads, "Worker threads (overrides config)");
    app.add_option("--set", overrides, "Config override key=value (repeatable)");

    app.add_subcommand("synth", "Generate a synthetic corpus with planted disruptions");
    app.add_subcommand("ingest", "Parse and validate the flights file");
    app.add_subcommand("group", "Partition airports into airport groups");
    app.add_subcommand("featurize", "Aggregate daily per-group features");
    app.add_subcommand("pca", "Fit PCA and project day vectors");
    app.add_subcommand("cluster", "K-means day typologies plus k sweep");
    app.add_subcommand("score", "Isolation-forest anomaly scores");
    app.add_subcommand("report", "Comparison, trend, and share reports");
    app.add_subcommand("run", "Full pipeline end to end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        PipelineConfig cfg = load_config(config_path, overrides, out_dir, threads);
        return dispatch(app.get_subcommands().front()->get_name(), cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
