#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repsim/analysis.hpp"

namespace repsim {

/// Parameters of a full study run over one activation store.
struct RunSpec {
    std::filesystem::path store_root;
    /// Empty means every language in the store.
    std::vector<std::string> languages;
    /// Empty means the store's layer order.
    std::vector<std::string> layers;
    std::vector<Modality> modalities{Modality::text, Modality::speech};
    SvccaConfig svcca;
    std::filesystem::path output_dir;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    std::optional<std::size_t> cap_crossmodal;
    std::optional<std::size_t> cap_crosslingual;
    /// Layer for the gap report; defaults to the last layer.
    std::optional<std::string> gap_layer;
    std::size_t baseline_trials = 10;
    /// Language metadata for resource grouping; falls back to <store>/languages.json.
    std::optional<std::filesystem::path> language_meta;

    void validate() const;
};

struct StudySummary {
    std::size_t crossmodal_records = 0;
    std::size_t crosslingual_records = 0;
    std::vector<std::string> files;
};

/// Writes curves.csv, matrix_<modality>_<layer>.csv, gaps.csv,
/// baselines.csv, records.csv and summary.json into spec.output_dir.
/// Output bytes depend only on the store and the RunSpec, never on the worker count.
StudySummary run_study(const RunSpec& spec);

}  // namespace repsim
