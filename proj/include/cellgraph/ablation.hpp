#pragma once

#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/parallel.hpp"
#include "cellgraph/trainer.hpp"

namespace cellgraph::train {

enum class AblationKind { patching, feature_dim, graph_size };

inline std::string to_string(AblationKind kind) {
    switch (kind) {
        case AblationKind::patching: return "patching";
        case AblationKind::feature_dim: return "feature-dim";
        case AblationKind::graph_size: return "graph-size";
    }
    return "?";
}

inline AblationKind parse_ablation_kind(const std::string& s) {
    if (s == "patching") return AblationKind::patching;
    if (s == "feature-dim" || s == "feature_dim") return AblationKind::feature_dim;
    if (s == "graph-size" || s == "graph_size") return AblationKind::graph_size;
    throw FormatError("ablate: unknown kind '" + s + "'");
}

// One sweep cell: a named configuration delta on top of the base run.
struct GridPoint {
    std::string name;
    bool patched = true;
    int nodes = 200;
    int dim = 16;
};

inline std::vector<GridPoint> make_grid(AblationKind kind, const std::vector<int>& values,
                                        bool base_patched, int base_nodes, int base_dim) {
    std::vector<GridPoint> grid;
    switch (kind) {
        case AblationKind::patching:
            for (const char* mode : {"single", "patched"})
                for (int m : values)
                    grid.push_back({std::string(mode) + "_M" + std::to_string(m),
                                    std::string(mode) == "patched", m, base_dim});
            break;
        case AblationKind::feature_dim:
            for (int d : values)
                grid.push_back({"dim" + std::to_string(d), base_patched, base_nodes, d});
            break;
        case AblationKind::graph_size:
            for (int m : values)
                grid.push_back({"M" + std::to_string(m), base_patched, m, base_dim});
            break;
    }
    if (grid.empty()) throw FormatError("ablate: empty grid");
    return grid;
}

struct CellOutcome {
    GridPoint point;
    std::vector<FoldReport> reports;
    std::optional<std::pair<double, double>> summary;  // mean, std (percent)
    std::string error;  // non-empty when the cell failed
};

// Full cross-validation per grid point. A failing cell is recorded and the
// sweep continues. Cells are independent, so they may run on several
// threads; outcomes always come back in grid order.
inline std::vector<CellOutcome> run_ablation(AblationKind kind,
                                             const std::vector<GridPoint>& grid,
                                             const std::vector<CellFeatureSet>& sets,
                                             const AugmentParams& base_aug,
                                             const TrainConfig& cfg,
                                             const gnn::HyperParams& hp, int jobs = 1) {
    (void)kind;
    return parallel_map(grid.size(), jobs, [&](std::size_t i) {
        CellOutcome out;
        out.point = grid[i];
        try {
            AugmentParams aug = base_aug;
            aug.nodes = grid[i].nodes;
            auto data = build_dataset(sets, aug, grid[i].dim, substream(cfg.seed, "dataset"));
            out.reports = train_cv(data, grid[i].patched, cfg, hp);
            out.summary = evaluate_cv(out.reports);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        return out;
    });
}

// ---- metrics CSV ----
// data rows:    run_id,kind,grid_point,fold,epoch,train_loss,val_acc,lr
// summary rows: run_id,kind,grid_point,SUMMARY,mean_acc,std_acc
// failed cells: run_id,kind,grid_point,FAILED,<message>
// All floats are shortest-round-trip decimals, so equal runs give equal bytes.

inline std::string sanitize_csv_field(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

inline void write_metrics_header(std::ostream& os) {
    os << "run_id,kind,grid_point,fold,epoch,train_loss,val_acc,lr\n";
}

// Every epoch when full is set (training runs), otherwise only each fold's
// final epoch (sweeps).
inline void write_fold_rows(std::ostream& os, const std::string& run_id,
                            const std::string& kind, const std::string& grid_point,
                            const FoldReport& report, bool full) {
    std::size_t first = full ? 0 : (report.epochs.empty() ? 0 : report.epochs.size() - 1);
    for (std::size_t e = first; e < report.epochs.size(); ++e) {
        const auto& ep = report.epochs[e];
        os << run_id << "," << kind << "," << grid_point << "," << report.fold_id << ","
           << (e + 1) << "," << detail::format_double(ep.train_loss) << ","
           << detail::format_double(ep.val_accuracy) << "," << detail::format_double(ep.lr)
           << "\n";
    }
}

inline void write_summary_row(std::ostream& os, const std::string& run_id,
                              const std::string& kind, const std::string& grid_point,
                              double mean_acc, double std_acc) {
    os << run_id << "," << kind << "," << grid_point << ",SUMMARY,"
       << detail::format_double(mean_acc) << "," << detail::format_double(std_acc) << "\n";
}

inline void write_failed_row(std::ostream& os, const std::string& run_id,
                             const std::string& kind, const std::string& grid_point,
                             const std::string& message) {
    os << run_id << "," << kind << "," << grid_point << ",FAILED,"
       << sanitize_csv_field(message) << "\n";
}

inline void write_ablation_csv(std::ostream& os, const std::string& run_id, AblationKind kind,
                               const std::vector<CellOutcome>& outcomes) {
    write_metrics_header(os);
    std::string k = to_string(kind);
    for (const auto& cell : outcomes) {
        if (!cell.error.empty()) {
            write_failed_row(os, run_id, k, cell.point.name, cell.error);
            continue;
        }
        for (const auto& report : cell.reports)
            write_fold_rows(os, run_id, k, cell.point.name, report, /*full=*/false);
    }
    for (const auto& cell : outcomes)
        if (cell.summary)
            write_summary_row(os, run_id, k, cell.point.name, cell.summary->first,
                              cell.summary->second);
}

}  // namespace cellgraph::train
