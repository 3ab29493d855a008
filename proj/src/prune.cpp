#include "ksprune/prune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

#include "ksprune/errors.hpp"
#include "ksprune/parallel.hpp"

namespace ksprune {

namespace {

bool hf_before(const RowStats& a, const RowStats& b) {
  if (a.frequency != b.frequency) return a.frequency > b.frequency;
  if (a.max_score != b.max_score) return a.max_score > b.max_score;
  return a.row < b.row;
}

bool hv_before(const RowStats& a, const RowStats& b) {
  if (a.max_score != b.max_score) return a.max_score > b.max_score;
  return a.row < b.row;
}

std::vector<RowStats> top_by(std::vector<RowStats> rows, std::size_t k, bool (*before)(const RowStats&, const RowStats&)) {
  if (rows.size() > k) {
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end(), before);
    rows.resize(k);
  } else {
    std::sort(rows.begin(), rows.end(), before);
  }
  return rows;
}

nlohmann::ordered_json stats_json(const RowStats& s, bool with_metric) {
  nlohmann::ordered_json j;
  j["row"] = s.row;
  j["frequency"] = s.frequency;
  j["max_score"] = s.max_score;
  if (with_metric) j["metric"] = metric_name(s.max_metric);
  return j;
}

RowStats stats_from_json(const nlohmann::json& j) {
  RowStats s;
  s.row = j.at("row").get<std::uint32_t>();
  s.frequency = j.at("frequency").get<std::uint32_t>();
  s.max_score = j.at("max_score").get<double>();
  if (j.contains("metric")) s.max_metric = parse_metric(j["metric"].get<std::string>());
  return s;
}

}  // namespace

void PruneParams::validate() const {
  if (k1 == 0) throw ConfigError("k1 must be >= 1");
  if (!(k2_ratio > 0.0 && k2_ratio < 1.0)) throw ConfigError("k2-ratio must lie in (0, 1)");
  if (alpha1 < 0.0 || alpha2 < 0.0) throw ConfigError("alpha1 and alpha2 must be >= 0");
  if (!(alpha1 + alpha2 > 0.0)) throw ConfigError("alpha1 + alpha2 must be > 0");
}

std::size_t PruneParams::k2_for(std::size_t rows) const {
  const double x = k2_ratio * static_cast<double>(rows);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

nlohmann::json PruneParams::to_json() const {
  return {{"k1", k1}, {"k2_ratio", k2_ratio}, {"alpha1", alpha1}, {"alpha2", alpha2},
          {"respect_protected", respect_protected}};
}

PruneParams PruneParams::from_json(const nlohmann::json& j) {
  PruneParams p;
  p.k1 = j.at("k1").get<std::size_t>();
  p.k2_ratio = j.at("k2_ratio").get<double>();
  p.alpha1 = j.at("alpha1").get<double>();
  p.alpha2 = j.at("alpha2").get<double>();
  p.respect_protected = j.at("respect_protected").get<bool>();
  return p;
}

const RowStats* HsGroup::find(std::uint32_t row) const {
  auto it = std::lower_bound(stats.begin(), stats.end(), row, [](const RowStats& s, std::uint32_t r) { return s.row < r; });
  return (it != stats.end() && it->row == row) ? &*it : nullptr;
}

HsGroup compute_hs_groups(const CorpusIndex& index, std::size_t source, std::size_t target,
                          const PruneParams& params, std::size_t workers) {
  params.validate();
  if (source == target) throw ConfigError("high-similarity groups need two different datasets");
  const auto& registry = index.registry();
  const std::size_t source_rows = registry.dataset_at(source).size();
  const std::size_t target_rows = registry.dataset_at(target).size();

  HsGroup group;
  group.source = source;
  group.target = target;
  group.k2 = params.k2_for(target_rows);

  struct RowLists {
    std::vector<ScoredRow> jaccard;
    std::vector<ScoredRow> tfidf;
  };
  std::vector<RowLists> lists(source_rows);
  parallel_for(source_rows, workers, [&](std::size_t r) {
    const QueryRep q = index.row_query(source, r);
    lists[r].jaccard = index.topk(q, target, Metric::kJaccard, params.k1);
    lists[r].tfidf = index.topk(q, target, Metric::kTfIdf, params.k1);
  });

  std::vector<RowStats> dense(target_rows);
  std::size_t total_hits = 0;
  for (const auto& l : lists) total_hits += l.jaccard.size() + l.tfidf.size();
  group.hits.reserve(total_hits);

  for (std::size_t r = 0; r < source_rows; ++r) {
    for (Metric metric : {Metric::kJaccard, Metric::kTfIdf}) {
      const auto& list = metric == Metric::kJaccard ? lists[r].jaccard : lists[r].tfidf;
      for (std::size_t rank = 0; rank < list.size(); ++rank) {
        const auto& hit = list[rank];
        RowStats& s = dense[hit.row];
        s.row = hit.row;
        ++s.frequency;
        if (hit.score > s.max_score) {
          s.max_score = hit.score;
          s.max_metric = metric;
        }
        group.hits.push_back({hit.row, static_cast<std::uint32_t>(r), static_cast<std::uint16_t>(source), metric,
                              static_cast<std::uint16_t>(rank + 1), hit.score});
      }
    }
  }
  std::stable_sort(group.hits.begin(), group.hits.end(),
                   [](const HitRecord& a, const HitRecord& b) { return a.target_row < b.target_row; });

  for (auto& s : dense) {
    if (s.frequency > 0) group.stats.push_back(s);
  }
  group.g_hf = top_by(group.stats, group.k2, hf_before);
  group.g_hv = top_by(group.stats, group.k2, hv_before);
  return group;
}

std::vector<Selection> select_deletions(std::span<const HsGroup> groups, std::size_t target_rows,
                                        const PruneParams& params, bool target_protected) {
  params.validate();
  if (target_protected && params.respect_protected) return {};

  std::map<std::uint32_t, Selection> pooled;
  for (const auto& g : groups) {
    for (const auto* list : {&g.g_hf, &g.g_hv}) {
      for (const auto& s : *list) pooled.try_emplace(s.row, Selection{s.row, 0, 0.0, 0.0});
    }
  }
  if (pooled.empty()) return {};

  for (auto& [row, sel] : pooled) {
    for (const auto& g : groups) {
      if (const RowStats* s = g.find(row)) {
        sel.frequency += s->frequency;
        sel.max_score = std::max(sel.max_score, s->max_score);
      }
    }
  }
  std::uint32_t max_freq = 0;
  double max_score = 0.0;
  for (const auto& [row, sel] : pooled) {
    max_freq = std::max(max_freq, sel.frequency);
    max_score = std::max(max_score, sel.max_score);
  }

  std::vector<Selection> ranked;
  ranked.reserve(pooled.size());
  for (auto& [row, sel] : pooled) {
    const double f = static_cast<double>(sel.frequency) / static_cast<double>(max_freq);
    const double v = max_score > 0.0 ? sel.max_score / max_score : 0.0;
    sel.fused = params.alpha1 * f + params.alpha2 * v;
    ranked.push_back(sel);
  }
  std::sort(ranked.begin(), ranked.end(), [](const Selection& a, const Selection& b) {
    if (a.fused != b.fused) return a.fused > b.fused;
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    if (a.max_score != b.max_score) return a.max_score > b.max_score;
    return a.row < b.row;
  });
  const std::size_t k2 = params.k2_for(target_rows);
  if (ranked.size() > k2) ranked.resize(k2);
  return ranked;
}

std::vector<std::uint32_t> DatasetOutcome::deleted_rows() const {
  std::vector<std::uint32_t> rows;
  rows.reserve(deleted.size());
  for (const auto& d : deleted) rows.push_back(d.selection.row);
  return rows;
}

const DatasetOutcome& PruneReport::outcome(std::string_view id) const {
  for (const auto& d : datasets) {
    if (d.id == id) return d;
  }
  throw LookupError("prune report has no dataset \"" + std::string(id) + "\"");
}

PruneReport compute_r_all(const CorpusIndex& index, const PruneParams& params, std::size_t workers) {
  params.validate();
  const auto& registry = index.registry();
  const std::size_t n = registry.dataset_count();
  if (n < 2) throw ConfigError("pruning needs cross-dataset pairs (at least two datasets)");
  if (n > 65535) throw ConfigError("too many datasets");

  PruneReport report;
  report.params = params;
  report.datasets.resize(n);

  for (std::size_t target = 0; target < n; ++target) {
    const Dataset& ds = registry.dataset_at(target);
    DatasetOutcome& outcome = report.datasets[target];
    outcome.id = ds.info.id;
    outcome.original_rows = ds.size();
    outcome.is_protected = ds.info.is_protected;

    std::vector<HsGroup> groups;
    if (!(ds.info.is_protected && params.respect_protected) && ds.size() > 0) {
      for (std::size_t source = 0; source < n; ++source) {
        if (source == target) continue;
        groups.push_back(compute_hs_groups(index, source, target, params, workers));
        const HsGroup& g = groups.back();
        report.pairs.push_back({registry.dataset_at(source).info.id, ds.info.id, g.k2, g.g_hf, g.g_hv});
        spdlog::debug("pair {} -> {}: {} rows hit, |G_HF|={}, |G_HV|={}", registry.dataset_at(source).info.id,
                      ds.info.id, g.stats.size(), g.g_hf.size(), g.g_hv.size());
      }
    }

    auto selected = select_deletions(groups, ds.size(), params, ds.info.is_protected);
    std::sort(selected.begin(), selected.end(), [](const Selection& a, const Selection& b) { return a.row < b.row; });
    for (const auto& sel : selected) {
      DeletedRow del{sel, {}};
      for (const auto& g : groups) {
        auto range = std::equal_range(g.hits.begin(), g.hits.end(), HitRecord{sel.row},
                                      [](const HitRecord& a, const HitRecord& b) { return a.target_row < b.target_row; });
        del.evidence.insert(del.evidence.end(), range.first, range.second);
      }
      outcome.deleted.push_back(std::move(del));
    }

    outcome.index_map.assign(ds.size(), -1);
    std::size_t next = 0;
    std::size_t d = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (d < outcome.deleted.size() && outcome.deleted[d].selection.row == r) {
        ++d;
        continue;
      }
      outcome.index_map[r] = static_cast<std::int64_t>(next++);
    }
    outcome.reduction = ds.size() ? static_cast<double>(outcome.deleted.size()) / static_cast<double>(ds.size()) : 0.0;
    spdlog::info("{}: deleting {} of {} rows ({:.3f}%)", ds.info.id, outcome.deleted.size(), ds.size(),
                 100.0 * outcome.reduction);
  }
  return report;
}

nlohmann::ordered_json PruneReport::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config;
  j["params"] = params.to_json();

  auto& datasets_json = j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& d : datasets) {
    datasets_json.push_back({{"id", d.id}, {"rows", d.original_rows}, {"protected", d.is_protected}});
  }

  auto& pairs_json = j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    nlohmann::ordered_json pj;
    pj["source"] = p.source;
    pj["target"] = p.target;
    pj["k2"] = p.k2;
    pj["g_hf"] = nlohmann::ordered_json::array();
    for (const auto& s : p.g_hf) pj["g_hf"].push_back(stats_json(s, false));
    pj["g_hv"] = nlohmann::ordered_json::array();
    for (const auto& s : p.g_hv) pj["g_hv"].push_back(stats_json(s, true));
    pairs_json.push_back(std::move(pj));
  }

  auto& deletions = j["deletions"] = nlohmann::ordered_json::object();
  auto& maps = j["index_maps"] = nlohmann::ordered_json::object();
  auto& reductions = j["reductions"] = nlohmann::ordered_json::object();
  auto& provenance = j["provenance"] = nlohmann::ordered_json::object();
  for (const auto& d : datasets) {
    deletions[d.id] = d.deleted_rows();
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (std::size_t r = 0; r < d.index_map.size(); ++r) {
      if (d.index_map[r] >= 0) m[std::to_string(r)] = d.index_map[r];
    }
    maps[d.id] = std::move(m);
    reductions[d.id] = d.reduction;

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& del : d.deleted) {
      nlohmann::ordered_json rj;
      rj["row"] = del.selection.row;
      rj["frequency"] = del.selection.frequency;
      rj["max_score"] = del.selection.max_score;
      rj["fused_score"] = del.selection.fused;
      rj["hits"] = nlohmann::ordered_json::array();
      for (const auto& h : del.evidence) {
        rj["hits"].push_back({{"source", datasets.at(h.source_dataset).id},
                              {"source_row", h.source_row},
                              {"metric", metric_name(h.metric)},
                              {"score", h.score},
                              {"rank", h.rank}});
      }
      rows.push_back(std::move(rj));
    }
    provenance[d.id] = std::move(rows);
  }
  return j;
}

PruneReport PruneReport::from_json(const nlohmann::json& j) {
  PruneReport report;
  report.params = PruneParams::from_json(j.at("params"));
  if (j.contains("config")) report.config = j["config"];
  std::map<std::string, std::uint16_t> positions;
  for (const auto& dj : j.at("datasets")) {
    DatasetOutcome d;
    d.id = dj.at("id").get<std::string>();
    d.original_rows = dj.at("rows").get<std::size_t>();
    d.is_protected = dj.at("protected").get<bool>();
    positions[d.id] = static_cast<std::uint16_t>(report.datasets.size());
    report.datasets.push_back(std::move(d));
  }
  for (const auto& pj : j.at("pairs")) {
    PairSummary p;
    p.source = pj.at("source").get<std::string>();
    p.target = pj.at("target").get<std::string>();
    p.k2 = pj.at("k2").get<std::size_t>();
    for (const auto& s : pj.at("g_hf")) p.g_hf.push_back(stats_from_json(s));
    for (const auto& s : pj.at("g_hv")) p.g_hv.push_back(stats_from_json(s));
    report.pairs.push_back(std::move(p));
  }
  for (auto& d : report.datasets) {
    const auto& prov = j.at("provenance").at(d.id);
    for (const auto& rj : prov) {
      DeletedRow del;
      del.selection.row = rj.at("row").get<std::uint32_t>();
      del.selection.frequency = rj.at("frequency").get<std::uint32_t>();
      del.selection.max_score = rj.at("max_score").get<double>();
      del.selection.fused = rj.at("fused_score").get<double>();
      for (const auto& h : rj.at("hits")) {
        del.evidence.push_back({del.selection.row, h.at("source_row").get<std::uint32_t>(),
                                positions.at(h.at("source").get<std::string>()),
                                parse_metric(h.at("metric").get<std::string>()), h.at("rank").get<std::uint16_t>(),
                                h.at("score").get<double>()});
      }
      d.deleted.push_back(std::move(del));
    }
    const auto rows = j.at("deletions").at(d.id).get<std::vector<std::uint32_t>>();
    if (rows != d.deleted_rows()) throw ConsistencyError("prune report: deletions and provenance disagree for " + d.id);
    d.index_map.assign(d.original_rows, -1);
    for (const auto& [old_row, new_row] : j.at("index_maps").at(d.id).items()) {
      const auto r = std::stoull(old_row);
      if (r >= d.original_rows) throw ConsistencyError("prune report: index map row out of range for " + d.id);
      d.index_map[r] = new_row.get<std::int64_t>();
    }
    d.reduction = j.at("reductions").at(d.id).get<double>();
  }
  return report;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

ApplyResult apply_prune(const DatasetRegistry& registry, const PruneReport& report,
                        const std::filesystem::path& out_dir) {
  if (report.datasets.size() != registry.dataset_count()) {
    throw ConsistencyError("prune report lists " + std::to_string(report.datasets.size()) + " datasets, registry has " +
                           std::to_string(registry.dataset_count()));
  }
  std::map<std::string, int> file_names;
  for (std::size_t i = 0; i < registry.dataset_count(); ++i) {
    const Dataset& ds = registry.dataset_at(i);
    const DatasetOutcome& d = report.datasets[i];
    if (d.id != ds.info.id || d.original_rows != ds.size()) {
      throw ConsistencyError("prune report does not match registry at dataset \"" + ds.info.id + "\"");
    }
    for (const auto& del : d.deleted) {
      if (del.selection.row >= ds.size()) throw ConsistencyError("prune report deletes a row outside " + ds.info.id);
    }
    if (++file_names[ds.info.path.filename().string()] > 1) {
      throw ConfigError("two datasets share the file name " + ds.info.path.filename().string());
    }
  }

  std::vector<std::filesystem::path> written;
  const bool created_dir = !std::filesystem::exists(out_dir);
  ApplyResult result;
  try {
    std::filesystem::create_directories(out_dir);
    nlohmann::ordered_json manifest;
    manifest["datasets"] = nlohmann::ordered_json::array();

    for (std::size_t i = 0; i < registry.dataset_count(); ++i) {
      const Dataset& ds = registry.dataset_at(i);
      const DatasetOutcome& d = report.datasets[i];
      const auto target = out_dir / ds.info.path.filename();
      if (std::filesystem::exists(target) && std::filesystem::equivalent(target, ds.info.path)) {
        throw ConfigError("output would overwrite input " + ds.info.path.string());
      }
      written.push_back(target);
      if (d.deleted.empty()) {
        std::filesystem::copy_file(ds.info.path, target, std::filesystem::copy_options::overwrite_existing);
        result.surviving_rows.push_back(ds.size());
      } else {
        std::string text;
        if (ds.info.format == DataFormat::kCsv) text += ds.csv_header + "\n";
        std::size_t del = 0;
        std::size_t kept = 0;
        for (std::size_t r = 0; r < ds.size(); ++r) {
          if (del < d.deleted.size() && d.deleted[del].selection.row == r) {
            ++del;
            continue;
          }
          text += ds.raw_rows[r];
          text += '\n';
          ++kept;
        }
        write_text(target, text);
        result.surviving_rows.push_back(kept);
      }
      manifest["datasets"].push_back({{"id", ds.info.id},
                                      {"category", ds.info.category},
                                      {"path", ds.info.path.filename().string()},
                                      {"format", format_name(ds.info.format)},
                                      {"protected", ds.info.is_protected}});
    }

    result.report = out_dir / "prune_report.json";
    written.push_back(result.report);
    write_text(result.report, report.to_json().dump(2) + "\n");
    result.manifest = out_dir / "manifest.json";
    written.push_back(result.manifest);
    write_text(result.manifest, manifest.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    if (created_dir) std::filesystem::remove(out_dir, ec);
    throw;
  }
  return result;
}

}  // namespace ksprune
