#include "ksprune/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ksprune/corpus.hpp"
#include "ksprune/detect.hpp"
#include "ksprune/embedding.hpp"
#include "ksprune/errors.hpp"
#include "ksprune/evaluate.hpp"
#include "ksprune/generator.hpp"
#include "ksprune/hashing.hpp"
#include "ksprune/index.hpp"
#include "ksprune/parallel.hpp"
#include "ksprune/prune.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace ksprune {
namespace {

constexpr const char* kModelFile = "tfidf_model.json";
constexpr const char* kEmbedCacheFile = "embeddings.ksev";

struct CommonOpts {
  std::string manifest;
  std::size_t workers = 0;
  std::string stopwords;
  std::string index_dir;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct EmbedOpts {
  std::string backend;  // "", file, http
  std::string file;
  std::string url = "http://127.0.0.1:8080";
  std::string cache;
};

void add_embed_options(CLI::App* cmd, EmbedOpts& e) {
  cmd->add_option("--embed-backend", e.backend, "Embedding backend")->check(CLI::IsMember({"file", "http"}));
  cmd->add_option("--embed-file", e.file, "KSEV vector file for the file backend");
  cmd->add_option("--embed-url", e.url, "Base URL of the /embed service")->capture_default_str();
  cmd->add_option("--embed-cache", e.cache, "Persistent embedding cache (KSEV)");
}

std::shared_ptr<EmbeddingProvider> make_provider(const EmbedOpts& e) {
  std::shared_ptr<EmbeddingProvider> p;
  if (e.backend.empty()) return p;
  if (e.backend == "file") {
    if (e.file.empty()) throw ConfigError("--embed-backend file needs --embed-file");
    if (!fs::exists(e.file)) throw ConfigError("embedding file not found: " + e.file);
    p = std::make_shared<VectorFileProvider>(fs::path(e.file));
  } else {
    HttpEmbeddingOptions o;
    o.base_url = e.url;
    p = std::make_shared<HttpEmbeddingProvider>(o);
  }
  if (!e.cache.empty()) p = std::make_shared<CachedEmbeddingProvider>(p, e.cache);
  return p;
}

void save_cache(const std::shared_ptr<EmbeddingProvider>& p) {
  if (auto* c = dynamic_cast<CachedEmbeddingProvider*>(p.get())) c->save();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("failed writing " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::shared_ptr<const StopwordList> load_stopwords(const std::string& path) {
  if (path.empty()) return nullptr;
  if (!fs::exists(path)) throw ConfigError("stopword file not found: " + path);
  return std::make_shared<StopwordList>(StopwordList::from_file(path));
}

std::string manifest_digest(const fs::path& manifest, const DatasetRegistry& registry) {
  std::string acc = hex_digest(read_file(manifest));
  for (const auto& ds : registry.datasets()) acc += ds.info.id + ":" + hex_digest(read_file(ds.info.path));
  return hex_digest(acc);
}

std::optional<TfIdfModel> cached_model(const std::string& index_dir, const std::string& digest) {
  if (index_dir.empty()) return std::nullopt;
  const fs::path p = fs::path(index_dir) / kModelFile;
  if (!fs::exists(p)) {
    spdlog::warn("no index at {}; fitting from scratch", p.string());
    return std::nullopt;
  }
  try {
    const auto j = nlohmann::json::parse(read_file(p));
    if (j.at("manifest_hash").get<std::string>() != digest) {
      spdlog::warn("index {} was built for different data; fitting from scratch", p.string());
      return std::nullopt;
    }
    return TfIdfModel::from_json(j.at("model"));
  } catch (const nlohmann::json::exception& e) {
    spdlog::warn("unreadable index {} ({}); fitting from scratch", p.string(), e.what());
    return std::nullopt;
  }
}

std::unique_ptr<CorpusIndex> build_index(const DatasetRegistry& registry, const CommonOpts& c,
                                         std::shared_ptr<const StopwordList> stopwords) {
  CorpusIndex::Options o;
  o.workers = c.workers;
  o.stopwords = std::move(stopwords);
  if (!c.index_dir.empty()) o.model = cached_model(c.index_dir, manifest_digest(c.manifest, registry));
  return std::make_unique<CorpusIndex>(registry, std::move(o));
}

// Echoed into reports. Worker count and output location are not included.
ojson base_config(std::string_view command, const CommonOpts& c) {
  ojson j;
  j["version"] = KSPRUNE_VERSION;
  j["command"] = command;
  if (!c.manifest.empty()) j["manifest"] = c.manifest;
  j["stopwords"] = c.stopwords.empty() ? ojson("builtin") : ojson(c.stopwords);
  j["seed"] = c.seed ? ojson(*c.seed) : ojson(nullptr);
  return j;
}

void seal_config(ojson& config) { config["config_hash"] = hex_digest(config.dump()); }

// ---------------------------------------------------------------------------

int cmd_prune(const CommonOpts& c, PruneParams params) {
  params.validate();
  const auto registry = load_manifest(c.manifest);
  const auto index = build_index(registry, c, load_stopwords(c.stopwords));

  PruneReport report = compute_r_all(*index, params, c.workers);
  ojson config = base_config("prune", c);
  config["params"] = params.to_json();
  seal_config(config);
  report.config = nlohmann::json::parse(config.dump());

  apply_prune(registry, report, c.out);
  for (const auto& d : report.datasets) {
    std::printf("%s\t%zu rows\t%zu deleted\t%.3f%%%s\n", d.id.c_str(), d.original_rows, d.deleted.size(),
                100.0 * d.reduction, d.is_protected ? "\tprotected" : "");
  }
  return 0;
}

std::vector<GenerationRequest> read_queries(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open query file " + path.string());
  std::vector<GenerationRequest> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (collapse_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GenerationRequest q;
      q.dataset_id = j.value("dataset_id", "");
      if (j.contains("row_index") && !j["row_index"].is_null()) q.row_index = j["row_index"].get<std::size_t>();
      q.context = j.at("context").get<std::string>();
      q.question = j.at("question").get<std::string>();
      q.correct_answer = j.value("correct_answer", "");
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

struct GeneratorOpts {
  std::string fixtures;
  std::string url;
  std::string model = "default";
  std::string prompt_template = kDefaultPromptTemplate;
  double rps = 0.0;
  SamplingConfig sampling;
};

int cmd_detect(const CommonOpts& c, DetectParams params, const GeneratorOpts& g, const EmbedOpts& e,
               const std::string& queries_file, const std::string& metric) {
  params.self_check.sim_metric = parse_metric(metric);
  params.self_check.sampling = g.sampling;
  params.self_check.sampling.seed = c.seed;
  params.validate();
  if (c.out.empty()) throw ConfigError("--out is required");

  std::shared_ptr<AnswerGenerator> generator;
  std::vector<GenerationRequest> queries;
  if (!g.fixtures.empty()) {
    if (!fs::exists(g.fixtures)) throw ConfigError("fixture file not found: " + g.fixtures);
    auto fixture = std::make_shared<FixtureGenerator>(fs::path(g.fixtures));
    if (queries_file.empty()) {
      for (const auto& b : fixture->bundles()) queries.push_back(b.query);
    }
    generator = fixture;
  } else if (!g.url.empty()) {
    ChatGeneratorOptions o;
    o.base_url = g.url;
    o.model = g.model;
    o.prompt_template = g.prompt_template;
    o.sampling = params.self_check.sampling;
    o.requests_per_second = g.rps;
    if (const char* key = std::getenv("KSPRUNE_API_KEY")) o.api_key = key;
    generator = std::make_shared<ChatCompletionGenerator>(o);
    if (queries_file.empty()) throw ConfigError("--generator-url needs --queries");
  } else {
    throw ConfigError("detect needs --fixtures or --generator-url");
  }
  if (!queries_file.empty()) queries = read_queries(queries_file);

  const auto registry = load_manifest(c.manifest);
  const auto index = build_index(registry, c, load_stopwords(c.stopwords));
  const auto provider = make_provider(e);
  const AnswerSimilarity sim = make_answer_similarity(params.self_check.sim_metric, *index, provider.get());

  std::vector<ojson> records(queries.size());
  std::vector<int> outcome(queries.size(), -1);  // classification index, -1 = error
  parallel_for(queries.size(), c.workers, [&](std::size_t i) {
    GenerationBundle bundle;
    try {
      bundle = generate_bundle(*generator, queries[i], params.self_check.m, params.self_check.sampling);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      spdlog::error("query {}: generation failed: {}", i, err.what());
      records[i] = error_record(queries[i], err.what());
      return;
    }
    const DetectionVerdict v = classify(*index, bundle, params, sim);
    records[i] = v.to_json();
    outcome[i] = static_cast<int>(v.classification);
  });
  save_cache(provider);

  KsCounts counts;
  std::string body;
  for (std::size_t i = 0; i < records.size(); ++i) {
    body += records[i].dump();
    body += '\n';
    switch (outcome[i]) {
      case static_cast<int>(Classification::kKsHallucination): ++counts.ks; break;
      case static_cast<int>(Classification::kOtherHallucination): ++counts.other; break;
      case static_cast<int>(Classification::kNotFlagged): ++counts.not_flagged; break;
      default: ++counts.errors;
    }
  }
  ojson config = base_config("detect", c);
  config["params"] = params.to_json();
  config["generator"] = g.fixtures.empty() ? ojson{{"backend", "http"}, {"url", g.url}, {"model", g.model}}
                                           : ojson{{"backend", "fixture"}, {"fixtures", g.fixtures}};
  seal_config(config);
  ojson summary;
  summary["config"] = config;
  summary["queries"] = queries.size();
  summary["ks_hallucination"] = counts.ks;
  summary["other_hallucination"] = counts.other;
  summary["not_flagged"] = counts.not_flagged;
  summary["errors"] = counts.errors;

  const fs::path out(c.out);
  try {
    write_atomic(out / "verdicts.jsonl", body);
    write_atomic(out / "summary.json", summary.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    fs::remove(out / "verdicts.jsonl", ec);
    fs::remove(out / "summary.json", ec);
    throw;
  }
  std::printf("ks_hallucination\t%zu\nother_hallucination\t%zu\nnot_flagged\t%zu\nerrors\t%zu\n", counts.ks,
              counts.other, counts.not_flagged, counts.errors);
  return counts.errors > 0 ? 1 : 0;
}

int cmd_evaluate(const CommonOpts& c, const std::string& generations, const std::string& baseline,
                 const std::string& verdicts, bool no_embed, const EmbedOpts& e) {
  if (!fs::exists(generations)) throw ConfigError("generation file not found: " + generations);
  if (!baseline.empty() && !fs::exists(baseline)) throw ConfigError("baseline file not found: " + baseline);
  std::shared_ptr<EmbeddingProvider> provider;
  if (!no_embed) {
    provider = make_provider(e);
    if (!provider) throw ConfigError("evaluate needs an --embed-backend or --no-embed");
  }
  const auto sw = load_stopwords(c.stopwords);
  const TextNormalizer norm = sw ? TextNormalizer(sw) : TextNormalizer();

  const GenerationFile gen = read_generation_file(generations);
  if (gen.rows.empty()) throw ConfigError("generation file has no usable rows");
  const auto rows = score_generations(gen.rows, provider.get(), norm, c.workers);

  EvalReport report;
  report.total_rows = rows.size();
  report.malformed_rows = gen.malformed;
  report.coarse = coarse_metrics(rows);
  if (!baseline.empty()) {
    const GenerationFile base = read_generation_file(baseline);
    report.labels = label_against_baseline(score_generations(base.rows, provider.get(), norm, c.workers), rows);
  }
  if (!verdicts.empty()) report.ks = count_ks(verdicts);
  save_cache(provider);

  for (const auto& [m, cell] : report.coarse) std::printf("%s\t%s\n", metric_name(m).data(), format_cell(cell).c_str());
  if (report.labels) {
    for (const auto& [m, h] : report.labels->histogram) {
      std::printf("%s\tmore %zu\tless %zu\tequal %zu\n", metric_name(m).data(), h.more, h.less, h.equal);
    }
  }
  if (report.ks) {
    std::printf("ks_hallucination\t%zu\nother_hallucination\t%zu\nnot_flagged\t%zu\n", report.ks->ks, report.ks->other,
                report.ks->not_flagged);
  }

  if (!c.out.empty()) {
    ojson config = base_config("evaluate", c);
    config["generations"] = generations;
    config["baseline"] = baseline.empty() ? ojson(nullptr) : ojson(baseline);
    config["embed"] = !no_embed;
    seal_config(config);
    ojson j = report.to_json();
    j["config"] = config;
    const fs::path out(c.out);
    write_atomic(out / "eval_report.json", j.dump(2) + "\n");
    write_scores_csv(rows, out / "scores.csv");
  }
  return 0;
}

int cmd_sim(const CommonOpts& c, const std::string& a, const std::string& b, const std::string& metric,
            const std::string& corpus, const EmbedOpts& e) {
  const auto sw = load_stopwords(c.stopwords);
  const TextNormalizer norm = sw ? TextNormalizer(sw) : TextNormalizer();
  const bool all = metric == "all";

  if (all || metric == "jaccard") std::printf("jaccard\t%.10f\n", jaccard_sim(norm.content(a), norm.content(b)));
  if (all || metric == "tfidf") {
    double score = 0.0;
    if (!corpus.empty()) {
      if (!fs::exists(corpus)) throw ConfigError("corpus file not found: " + corpus);
      std::vector<std::string> docs;
      std::ifstream in(corpus, std::ios::binary);
      for (std::string line; std::getline(in, line);) {
        if (!collapse_whitespace(line).empty()) docs.push_back(line);
      }
      const TfIdfModel model = TfIdfModel::fit_texts(docs, norm);
      score = unit_cosine(model.vectorize(norm.tokens(a)), model.vectorize(norm.tokens(b)));
    } else {
      // No corpus: every term weighs 1, leaving a plain term-frequency cosine.
      std::map<std::string, double> va, vb;
      for (const auto& t : norm.tokens(a)) va[t] += 1.0;
      for (const auto& t : norm.tokens(b)) vb[t] += 1.0;
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (const auto& [t, w] : va) {
        na += w * w;
        if (auto it = vb.find(t); it != vb.end()) dot += w * it->second;
      }
      for (const auto& [t, w] : vb) nb += w * w;
      score = (na > 0 && nb > 0) ? std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0) : 0.0;
    }
    std::printf("tfidf\t%.10f\n", score);
  }
  if (all || metric == "embed") {
    const auto provider = make_provider(e);
    if (!provider) {
      if (!all) throw ConfigError("--metric embed needs an --embed-backend");
      std::printf("embed\tn/a\n");
    } else {
      const EmbedScore s = embed_sim(*provider, a, b);
      save_cache(provider);
      std::printf("embed\t%.10f\n", s.score);
    }
  }
  return 0;
}

int cmd_index(const CommonOpts& c, const EmbedOpts& e) {
  if (c.out.empty()) throw ConfigError("--out is required");
  const auto registry = load_manifest(c.manifest);
  CommonOpts fresh = c;
  fresh.index_dir.clear();
  const auto index = build_index(registry, fresh, load_stopwords(c.stopwords));

  ojson j;
  j["version"] = KSPRUNE_VERSION;
  j["manifest_hash"] = manifest_digest(c.manifest, registry);
  j["rows"] = registry.total_rows();
  j["model"] = index->model().to_json();
  const fs::path out(c.out);
  write_atomic(out / kModelFile, j.dump() + "\n");
  std::printf("tfidf\t%zu docs\t%zu terms\n", index->model().n_docs(), index->model().vocabulary_size());

  if (!e.backend.empty()) {
    EmbedOpts cached = e;
    if (cached.cache.empty()) cached.cache = (out / kEmbedCacheFile).string();
    const auto provider = make_provider(cached);
    std::set<std::string> texts;
    for (const auto& ds : registry.datasets()) {
      for (const auto& r : ds.records) texts.insert(r.answer);
    }
    provider->embed(std::vector<std::string>(texts.begin(), texts.end()));
    auto* cache = dynamic_cast<CachedEmbeddingProvider*>(provider.get());
    cache->save();
    std::printf("embeddings\t%zu cached\t%zu computed\n", cache->cached(), cache->misses());
  }
  return 0;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::get("ksprune");
  if (!logger) logger = spdlog::stderr_color_mt("ksprune");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

void add_common(CLI::App* cmd, CommonOpts& c, bool manifest, bool out) {
  if (manifest) cmd->add_option("--manifest", c.manifest, "Dataset manifest (JSON)")->required();
  if (out) cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--workers", c.workers, "Worker threads (0 = all cores)");
  cmd->add_option("--stopwords", c.stopwords, "Stopword list, one word per line");
  cmd->add_option("--seed", c.seed, "Sampling seed forwarded to the generator");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Cross-dataset knowledge-shortcut pruning and detection", "ksprune"};
  app.set_version_flag("--version", KSPRUNE_VERSION);
  app.set_config("--config", "", "TOML/INI config file; command-line flags override it");
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  CommonOpts common;
  EmbedOpts embed;

  PruneParams prune_params;
  auto* prune = app.add_subcommand("prune", "Delete cross-dataset near-duplicate rows");
  add_common(prune, common, true, true);
  prune->get_option("--out")->required();
  prune->add_option("--k1", prune_params.k1, "Top-K per source row and metric")->capture_default_str();
  prune->add_option("--k2-ratio", prune_params.k2_ratio, "Deletion cap as a fraction of rows")->capture_default_str();
  prune->add_option("--alpha1", prune_params.alpha1, "Frequency weight")->capture_default_str();
  prune->add_option("--alpha2", prune_params.alpha2, "Score weight")->capture_default_str();
  prune->add_flag("--respect-protected,!--no-respect-protected", prune_params.respect_protected,
                  "Skip datasets marked protected")
      ->capture_default_str();
  prune->add_option("--index", common.index_dir, "Reuse a TF-IDF model built by `index`");

  DetectParams detect_params;
  GeneratorOpts gen;
  std::string queries_file;
  std::string detect_metric = "embed";
  auto* detect = app.add_subcommand("detect", "Classify generated answers");
  add_common(detect, common, true, true);
  detect->add_option("--k1", detect_params.k1, "Top-K per dataset and metric")->capture_default_str();
  detect->add_option("--kv", detect_params.kv, "High-value group size")->capture_default_str();
  detect->add_option("--m", detect_params.self_check.m, "Resampled answers")->capture_default_str();
  detect->add_option("--alpha3", detect_params.self_check.alpha3, "Self-check threshold")->capture_default_str();
  detect->add_option("--sim-metric", detect_metric, "Self-check similarity")
      ->check(CLI::IsMember({"embed", "jaccard", "tfidf"}))
      ->capture_default_str();
  detect->add_flag("--eq5-literal", detect_params.eq5_literal, "Intersect every answer token with the pool");
  detect->add_option("--fixtures", gen.fixtures, "Recorded generations (JSONL)");
  detect->add_option("--generator-url", gen.url, "OpenAI-compatible endpoint");
  detect->add_option("--model", gen.model, "Model name sent to the endpoint")->capture_default_str();
  detect->add_option("--prompt-template", gen.prompt_template, "Uses {context} and {question}");
  detect->add_option("--temperature", gen.sampling.temperature)->capture_default_str();
  detect->add_option("--top-k", gen.sampling.top_k)->capture_default_str();
  detect->add_option("--max-tokens", gen.sampling.max_tokens)->capture_default_str();
  detect->add_option("--rps", gen.rps, "Request rate limit (0 = none)");
  detect->add_option("--queries", queries_file, "Queries (JSONL); defaults to the fixture entries");
  detect->add_option("--index", common.index_dir, "Reuse a TF-IDF model built by `index`");
  add_embed_options(detect, embed);

  std::string generations, baseline, verdicts;
  bool no_embed = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score generated answers against references");
  add_common(evaluate, common, false, true);
  evaluate->add_option("--generations", generations, "Generation file (JSONL)")->required();
  evaluate->add_option("--baseline", baseline, "Baseline generation file for more/less labels");
  evaluate->add_option("--verdicts", verdicts, "Verdict file from `detect`");
  evaluate->add_flag("--no-embed", no_embed, "Skip the embedding column");
  add_embed_options(evaluate, embed);

  std::string sim_a, sim_b, sim_metric = "all", corpus;
  auto* sim = app.add_subcommand("sim", "Score two strings");
  add_common(sim, common, false, false);
  sim->add_option("--a", sim_a)->required();
  sim->add_option("--b", sim_b)->required();
  sim->add_option("--metric", sim_metric)->check(CLI::IsMember({"all", "jaccard", "tfidf", "embed"}));
  sim->add_option("--corpus", corpus, "Fit IDF on this file, one document per line");
  add_embed_options(sim, embed);

  auto* index = app.add_subcommand("index", "Build the TF-IDF model and embedding cache");
  add_common(index, common, true, true);
  add_embed_options(index, embed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    setup_logging(log_level);
    if (*prune) return cmd_prune(common, prune_params);
    if (*detect) return cmd_detect(common, detect_params, gen, embed, queries_file, detect_metric);
    if (*evaluate) return cmd_evaluate(common, generations, baseline, verdicts, no_embed, embed);
    if (*sim) return cmd_sim(common, sim_a, sim_b, sim_metric, corpus, embed);
    if (*index) return cmd_index(common, embed);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("ksprune");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ksprune
