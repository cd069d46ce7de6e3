#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/graph.hpp"
#include "cellgraph/model.hpp"
#include "cellgraph/trainer.hpp"

namespace cellgraph {

// Flat key=value run configuration. Every augmentation, model and training
// field is addressable by name; CLI flags override file values.
struct PipelineConfig {
    AugmentParams aug;
    gnn::HyperParams hp;
    train::TrainConfig train;
    int feature_dim = 16;
    bool patched = true;

    void apply(const std::string& key, const std::string& value) {
        try {
            if (key == "alpha")
                aug.alpha = std::stod(value);
            else if (key == "beta")
                aug.beta = std::stod(value);
            else if (key == "grid_d")
                aug.grid_d = std::stoi(value);
            else if (key == "nodes")
                aug.nodes = std::stoi(value);
            else if (key == "embed_dim")
                hp.embed_dim = std::stoi(value);
            else if (key == "renorm_p")
                hp.renorm_p = std::stod(value);
            else if (key == "pool_sizes")
                hp.pool_sizes = parse_int_list(value);
            else if (key == "literal_renorm")
                hp.literal_renorm = parse_bool(value);
            else if (key == "lr0")
                train.lr0 = std::stod(value);
            else if (key == "epochs")
                train.epochs = std::stoi(value);
            else if (key == "folds")
                train.folds = std::stoi(value);
            else if (key == "seed")
                train.seed = std::stoull(value);
            else if (key == "plateau_factor")
                train.plateau_factor = std::stod(value);
            else if (key == "plateau_patience")
                train.plateau_patience = std::stoi(value);
            else if (key == "min_lr")
                train.min_lr = std::stod(value);
            else if (key == "huber_delta")
                train.huber_delta = std::stod(value);
            else if (key == "feature_dim")
                feature_dim = std::stoi(value);
            else if (key == "patched")
                patched = parse_bool(value);
            else
                throw FormatError("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw FormatError("config: bad value '" + value + "' for key '" + key + "'");
        } catch (const std::out_of_range&) {
            throw FormatError("config: value out of range for key '" + key + "'");
        }
    }

    void load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw FormatError("config: cannot open: " + path);
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto trimmed = trim(line);
            if (trimmed.empty()) continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw FormatError("config: missing '=' at line " + std::to_string(line_no) +
                                  " in " + path);
            apply(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
        }
    }

    // Resolved configuration, echoed into manifests and checkpoints.
    std::string to_string() const {
        std::ostringstream os;
        os << "alpha=" << detail::format_double(aug.alpha) << "\n"
           << "beta=" << detail::format_double(aug.beta) << "\n"
           << "grid_d=" << aug.grid_d << "\n"
           << "nodes=" << aug.nodes << "\n"
           << "embed_dim=" << hp.embed_dim << "\n"
           << "renorm_p=" << detail::format_double(hp.renorm_p) << "\n"
           << "pool_sizes=" << join(hp.pool_sizes) << "\n"
           << "literal_renorm=" << (hp.literal_renorm ? 1 : 0) << "\n"
           << "lr0=" << detail::format_double(train.lr0) << "\n"
           << "epochs=" << train.epochs << "\n"
           << "folds=" << train.folds << "\n"
           << "seed=" << train.seed << "\n"
           << "plateau_factor=" << detail::format_double(train.plateau_factor) << "\n"
           << "plateau_patience=" << train.plateau_patience << "\n"
           << "min_lr=" << detail::format_double(train.min_lr) << "\n"
           << "huber_delta=" << detail::format_double(train.huber_delta) << "\n"
           << "feature_dim=" << feature_dim << "\n"
           << "patched=" << (patched ? 1 : 0) << "\n";
        return os.str();
    }

    static PipelineConfig from_string(const std::string& text) {
        PipelineConfig cfg;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            auto trimmed = trim(line);
            if (trimmed.empty()) continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos) throw FormatError("config: malformed embedded config");
            cfg.apply(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
        }
        return cfg;
    }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static bool parse_bool(const std::string& v) {
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw FormatError("config: bad boolean '" + v + "'");
    }

    static std::vector<int> parse_int_list(const std::string& v) {
        std::vector<int> out;
        std::istringstream is(v);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
        return out;
    }

    static std::string join(const std::vector<int>& v) {
        std::ostringstream os;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) os << ",";
            os << v[i];
        }
        return os.str();
    }
};

}  // namespace cellgraph
