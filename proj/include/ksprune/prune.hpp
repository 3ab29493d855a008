#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksprune/index.hpp"

namespace ksprune {

struct PruneParams {
  std::size_t k1 = 50;        // top-K per source row and metric
  double k2_ratio = 0.006;    // K2 = ceil(k2_ratio * |target|)
  double alpha1 = 0.4;        // weight of normalized hit frequency
  double alpha2 = 0.1;        // weight of normalized max score
  bool respect_protected = true;

  /// Throws ConfigError on k1 == 0, k2_ratio outside (0, 1), negative
  /// weights, or alpha1 + alpha2 == 0.
  void validate() const;
  /// ceil(k2_ratio * rows); 0.006 * 1000 gives 6, not 7.
  std::size_t k2_for(std::size_t rows) const;

  nlohmann::json to_json() const;
  static PruneParams from_json(const nlohmann::json& j);
};

/// One appearance of a target row in a source row's top-K list.
struct HitRecord {
  std::uint32_t target_row = 0;
  std::uint32_t source_row = 0;
  std::uint16_t source_dataset = 0;  // registry position
  Metric metric = Metric::kJaccard;
  std::uint16_t rank = 0;            // 1-based
  double score = 0.0;
};

struct RowStats {
  std::uint32_t row = 0;
  std::uint32_t frequency = 0;
  double max_score = 0.0;
  Metric max_metric = Metric::kJaccard;
};

/// High-similarity groups of one (source, target) dataset pair.
struct HsGroup {
  std::size_t source = 0;  // registry positions
  std::size_t target = 0;
  std::size_t k2 = 0;
  /// Every target row hit at least once, ascending row.
  std::vector<RowStats> stats;
  /// Top-K2 by frequency desc, max_score desc, row asc.
  std::vector<RowStats> g_hf;
  /// Top-K2 by max_score desc, row asc.
  std::vector<RowStats> g_hv;
  /// All hits of this pair, sorted by (target_row, source_row, metric).
  std::vector<HitRecord> hits;

  const RowStats* find(std::uint32_t row) const;
};

HsGroup compute_hs_groups(const CorpusIndex& index, std::size_t source, std::size_t target,
                          const PruneParams& params, std::size_t workers = 1);

struct Selection {
  std::uint32_t row = 0;
  std::uint32_t frequency = 0;  // pooled over sources and metrics
  double max_score = 0.0;       // pooled maximum
  double fused = 0.0;
};

/// Fuses the groups of one target (from every source) and returns the rows to
/// delete, best first. Candidates are the union of all g_hf and g_hv rows;
/// each gets alpha1 * freq/max_freq + alpha2 * score/max_score with both
/// quantities pooled over all groups. At most k2_for(target_rows) rows.
std::vector<Selection> select_deletions(std::span<const HsGroup> groups, std::size_t target_rows,
                                        const PruneParams& params, bool target_protected = false);

struct DeletedRow {
  Selection selection;
  std::vector<HitRecord> evidence;  // every hit on this row, all sources
};

struct DatasetOutcome {
  std::string id;
  std::size_t original_rows = 0;
  bool is_protected = false;
  std::vector<DeletedRow> deleted;     // ascending row
  std::vector<std::int64_t> index_map; // old row -> new row, -1 when deleted
  double reduction = 0.0;

  std::vector<std::uint32_t> deleted_rows() const;
};

struct PairSummary {
  std::string source;
  std::string target;
  std::size_t k2 = 0;
  std::vector<RowStats> g_hf;
  std::vector<RowStats> g_hv;
};

struct PruneReport {
  PruneParams params;
  std::vector<PairSummary> pairs;
  std::vector<DatasetOutcome> datasets;  // manifest order
  nlohmann::json config;                 // caller-supplied run config echo

  const DatasetOutcome& outcome(std::string_view id) const;
  nlohmann::ordered_json to_json() const;
  static PruneReport from_json(const nlohmann::json& j);
};

/// Runs every ordered (source, target) pair and selects deletions per target.
/// Throws ConfigError with fewer than two datasets.
PruneReport compute_r_all(const CorpusIndex& index, const PruneParams& params, std::size_t workers = 1);

struct ApplyResult {
  std::filesystem::path manifest;
  std::filesystem::path report;
  std::vector<std::size_t> surviving_rows;
};

/// Writes survivors of every dataset to `out_dir` (same file names, original
/// relative order, raw bytes preserved), plus `prune_report.json` and a
/// `manifest.json` pointing at the pruned files. Datasets without deletions
/// are copied byte for byte. On failure every file written so far is removed.
ApplyResult apply_prune(const DatasetRegistry& registry, const PruneReport& report,
                        const std::filesystem::path& out_dir);

}  // namespace ksprune
