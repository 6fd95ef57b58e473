#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "intentloop/errors.hpp"
#include "intentloop/ope.hpp"
#include "intentloop/qpp.hpp"
#include "intentloop/service.hpp"
#include "intentloop/simulator.hpp"
#include "intentloop/text.hpp"

namespace fs = std::filesystem;
using namespace intentloop;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  bool json_out = false;
  std::string config_path;
  std::uint64_t seed = 7;
  bool verbose = false;
};

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

void emit(const Common& c, const json& doc, const std::string& text) {
  if (c.json_out) std::cout << doc.dump(2) << "\n";
  else std::cout << text;
}

// Values from the --config file fill options the command line and the
// environment left unset.
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  const auto doc = parse_json_text(read_text_file(path), path);
  if (!doc.is_object()) throw ValidationError(path + ": config must be a JSON object");
  const nlohmann::json* section = &doc;
  if (doc.contains(sub.get_name()) && doc.at(sub.get_name()).is_object()) section = &doc.at(sub.get_name());
  for (const auto& [key, value] : section->items()) {
    if (value.is_object()) continue;
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      if (section == &doc) continue;
      throw ValidationError(path + ": unknown option '" + key + "' for " + sub.get_name());
    }
    if (opt->count() > 0) continue;
    auto as_text = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array())
      for (const auto& v : value) opt->add_result(as_text(v));
    else
      opt->add_result(as_text(value));
    opt->run_callback();
  }
}

PolicyKind policy_kind(const std::string& name) { return policy_kind_from_string(name); }

std::vector<InteractionRecord> read_logs(const std::vector<std::string>& paths) {
  std::vector<InteractionRecord> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        auto r = read_jsonl_file(f);
        out.insert(out.end(), r.begin(), r.end());
      }
    } else {
      auto r = read_jsonl_file(p);
      out.insert(out.end(), r.begin(), r.end());
    }
  }
  return out;
}

std::string content_hash(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

// ---- simulate

struct SimulateArgs {
  std::size_t requests = 0;
  std::size_t interactions = 0;
  std::optional<double> coupling;
  std::string policy = "adaptive_active_greedy";
  std::string scheme = "method1";
  std::string sim_config;
  std::string policy_config;
  std::string out;
  std::string ontology_out;
  std::string checkpoint_out;
  std::string pairs_out;
  bool oracle = false;
};

int run_simulate(const Common& c, const SimulateArgs& a) {
  SimConfig cfg = a.sim_config.empty() ? SimConfig{} : load_sim_config(a.sim_config);
  cfg.seed = c.seed;
  if (a.requests) cfg.n_requests = a.requests;
  if (a.interactions) cfg.max_interactions = a.interactions;
  if (a.coupling) cfg.coupling_strength = *a.coupling;
  cfg = SimConfig::from_json(cfg.to_json());
  Simulator sim(cfg);
  const auto kind = policy_kind(a.policy);
  PolicyConfig pc = a.policy_config.empty() ? PolicyConfig{} : load_policy_config(a.policy_config, kind);
  pc.kind = kind;
  auto engine = sim.make_engine(pc, context_scheme_from_string(a.scheme));
  if (a.oracle) engine->set_suggestion_override(sim.oracle());
  const auto result = sim.run(*engine, !a.pairs_out.empty());
  if (!a.pairs_out.empty()) {
    std::ostringstream orig, refined, rows;
    for (const auto& p : refine_request_corpus(result.sessions, sim.ontology())) {
      orig << p.original << "\n";
      refined << p.refined << "\n";
      rows << json{{"original", p.original},
                   {"refined", p.refined},
                   {"topic", p.key.topic},
                   {"intent", p.key.intent},
                   {"breadth", std::string(to_string(p.breadth))},
                   {"selections", p.selections}}
                  .dump()
           << "\n";
    }
    fs::create_directories(a.pairs_out);
    write_text_file(fs::path(a.pairs_out) / "original.txt", orig.str());
    write_text_file(fs::path(a.pairs_out) / "refined.txt", refined.str());
    write_text_file(fs::path(a.pairs_out) / "pairs.jsonl", rows.str());
  }

  std::ostringstream log;
  write_jsonl(log, result.logs);
  if (!a.out.empty()) write_text_file(a.out, log.str());
  if (!a.ontology_out.empty()) save_ontology(sim.ontology(), a.ontology_out);
  if (!a.checkpoint_out.empty()) write_text_file(a.checkpoint_out, engine->registry().checkpoint().dump() + "\n");

  json summary{{"seed", cfg.seed},
               {"policy", a.oracle ? "oracle" : a.policy},
               {"scheme", a.scheme},
               {"coupling_strength", cfg.coupling_strength},
               {"records", result.logs.size()},
               {"steps", result.step_rewards.size()},
               {"mean_reward", result.mean_reward()},
               {"tail_mean_reward", result.tail_mean(0.1)},
               {"log_hash", content_hash(log.str())}};
  std::ostringstream text;
  text << "records " << result.logs.size() << "\nsteps " << result.step_rewards.size() << "\nmean reward "
       << result.mean_reward() << "\nfinal 10% reward " << result.tail_mean(0.1) << "\nlog hash "
       << summary["log_hash"].get<std::string>() << "\n";
  emit(c, summary, text.str());
  return 0;
}

// ---- train-predictor

struct TrainArgs {
  std::vector<std::string> logs;
  std::string out;
  std::size_t epochs = 50;
};

int run_train(const Common& c, const TrainArgs& a) {
  const auto records = read_logs(a.logs);
  SlotPredictorConfig cfg;
  cfg.epochs = a.epochs;
  cfg.seed = c.seed;
  const auto model = train_slot_predictor(records, cfg);
  write_text_file(a.out, model.to_json().dump() + "\n");
  const auto& losses = model.epoch_losses();
  json doc{{"rows", rows_from_logs(records).size()},
           {"slots", model.slot_ids().size()},
           {"epochs", losses.size()},
           {"first_loss", losses.empty() ? 0.0 : losses.front()},
           {"final_loss", losses.empty() ? 0.0 : losses.back()},
           {"out", a.out}};
  std::ostringstream text;
  text << "trained on " << doc["rows"] << " rows, loss " << doc["first_loss"] << " -> " << doc["final_loss"]
       << "\nwrote " << a.out << "\n";
  emit(c, doc, text.str());
  return 0;
}

// ---- build-corpus

struct CorpusArgs {
  std::string ontology;
  std::string locations;
  std::string out;
  std::string search_fixtures;
  std::string search_endpoint;
  std::string sim_config;
  bool synthetic = false;
  std::size_t per_query = 100;
  std::size_t concurrency = 4;
};

int run_build_corpus(const Common& c, const CorpusArgs& a) {
  std::unique_ptr<SearchProvider> provider;
  std::optional<Simulator> sim;
  IntentOntology ontology;
  std::vector<std::string> locations;
  if (a.synthetic) {
    SimConfig cfg = a.sim_config.empty() ? SimConfig{} : load_sim_config(a.sim_config);
    cfg.seed = c.seed;
    sim.emplace(cfg);
    ontology = sim->ontology();
    locations = sim->locations();
    provider = std::make_unique<SyntheticSearchProvider>(*sim);
  } else {
    if (a.ontology.empty()) throw ValidationError("--ontology is required unless --synthetic is given");
    ontology = load_ontology(a.ontology);
    if (!a.search_fixtures.empty()) {
      provider = std::make_unique<FixtureSearchProvider>(FixtureSearchProvider::load(a.search_fixtures));
    } else {
      const char* key = env("INTENTLOOP_SEARCH_KEY");
      if (!key || a.search_endpoint.empty())
        throw ValidationError("live search needs --search-endpoint and INTENTLOOP_SEARCH_KEY");
      provider = std::make_unique<HttpSearchProvider>(HttpSearchOptions{a.search_endpoint, key});
    }
  }
  if (!a.locations.empty()) locations = read_lines(a.locations);
  CorpusBuildOptions opts{a.per_query, a.concurrency};
  const auto summary = build_corpus(ontology, locations, *provider, a.out, opts);
  json doc{{"queries", summary.queries}, {"documents", summary.documents}, {"failures", summary.failures},
           {"out", a.out}};
  std::ostringstream text;
  text << summary.queries << " queries, " << summary.documents << " documents, " << summary.failures
       << " failures\nwrote " << a.out << "\n";
  emit(c, doc, text.str());
  return summary.queries > 0 && summary.failures == summary.queries ? 2 : 0;
}

// ---- qpp

struct QppArgs {
  std::string corpus;
  std::string requests;
  std::string refined;
  std::string vocab;
  bool remove_stopwords = false;
  std::size_t neighbors = 10;
  double threshold = 0.5;
};

int run_qpp(const Common& c, const QppArgs& a) {
  const auto corpus = read_corpus(a.corpus);
  QppOptions opts;
  opts.remove_stopwords = a.remove_stopwords;
  opts.cc_neighbors = a.neighbors;
  opts.cc_threshold = a.threshold;
  const auto stats = index_corpus(std::span<const CorpusEntry>(corpus), opts.remove_stopwords);
  const auto index = a.vocab.empty()
                         ? build_cooccurrence_index(tokenize_corpus(corpus, opts.remove_stopwords), 128, 8, c.seed)
                         : VocabularyIndex::load_jsonl(a.vocab);
  const auto originals = read_lines(a.requests);
  QppReport report;
  if (a.refined.empty()) {
    report = score_requests(originals, stats, index, opts);
  } else {
    report = compare_requests(originals, read_lines(a.refined), stats, index, opts);
  }
  emit(c, report.to_json(), report.to_text());
  return 0;
}

// ---- ope / replay-log shared setup

struct ModelArgs {
  std::vector<std::string> logs;
  std::string ontology;
  std::string scheme = "method1";
  std::string policy_config;
  std::string predictor;
  std::size_t embed_dim = 32;
};

struct ModelInputs {
  IntentOntology ontology;
  ContextScheme scheme{};
  std::unique_ptr<HashEmbeddingProvider> embedding;
  std::optional<SlotPredictorModel> predictor;
  std::vector<InteractionRecord> records;
};

ModelInputs load_inputs(const Common& c, const ModelArgs& a) {
  ModelInputs in;
  in.ontology = load_ontology(a.ontology);
  in.scheme = context_scheme_from_string(a.scheme);
  in.embedding = std::make_unique<HashEmbeddingProvider>(a.embed_dim, c.seed);
  if (!a.predictor.empty())
    in.predictor = SlotPredictorModel::from_json(parse_json_text(read_text_file(a.predictor), a.predictor));
  in.records = read_logs(a.logs);
  return in;
}

PolicyConfig policy_config(const Common& c, const ModelArgs& a, PolicyKind kind) {
  PolicyConfig p = a.policy_config.empty() ? PolicyConfig{} : load_policy_config(a.policy_config, kind);
  p.kind = kind;
  p.seed = c.seed;
  return p;
}

std::size_t slot_embed_dim(const ModelInputs& in) { return in.predictor ? in.predictor->embed_dim() : 100; }

struct OpeArgs {
  ModelArgs model;
  std::string policy;
  double cap = kDefaultNcisCap;
  double train_fraction = 0.5;
};

int run_ope(const Common& c, const OpeArgs& a) {
  auto in = load_inputs(c, a.model);
  const SlotPredictorModel* pred = in.predictor ? &*in.predictor : nullptr;
  if (a.train_fraction < 0.0 || a.train_fraction >= 1.0) throw ValidationError("--train-fraction must be in [0, 1)");

  // Sessions in log order; the first share trains the target policy.
  std::vector<std::string> order;
  std::map<std::string, std::vector<InteractionRecord>> by_session;
  for (const auto& r : in.records) {
    if (!by_session.contains(r.session_id)) order.push_back(r.session_id);
    by_session[r.session_id].push_back(r);
  }
  const auto n_train = static_cast<std::size_t>(a.train_fraction * static_cast<double>(order.size()));
  std::vector<InteractionRecord> train, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? train : test;
    dst.insert(dst.end(), by_session[order[i]].begin(), by_session[order[i]].end());
  }
  const auto expanded = expand_records(test, in.scheme, in.ontology, in.embedding.get(), pred);

  std::unique_ptr<EvaluationPolicy> target;
  std::unique_ptr<BanditRegistry> registry;
  if (a.policy == "logging") {
    target = std::make_unique<LoggingPolicy>();
  } else if (a.policy == "uniform") {
    target = std::make_unique<UniformPolicy>();
  } else {
    const auto kind = policy_kind(a.policy);
    registry = std::make_unique<BanditRegistry>(in.ontology, in.scheme, policy_config(c, a.model, kind),
                                                a.model.embed_dim, slot_embed_dim(in));
    replay_log(train, *registry, in.ontology, in.embedding.get(), pred);
    target = std::make_unique<BanditPolicy>(*registry);
  }
  auto report = evaluate_policy(a.policy, expanded.decisions, *target, a.cap, c.seed);
  report.assumed_uniform = expanded.assumed_uniform;
  auto doc = report.to_json();
  doc["train_records"] = train.size();
  doc["test_records"] = test.size();
  std::ostringstream text;
  text << "policy " << a.policy << "\n";
  if (report.rs)
    text << "rs " << report.rs->estimate << " (accepted " << report.rs->accepted << "/" << report.rs->n << ")\n";
  else
    text << "rs unavailable: " << report.rs_error << "\n";
  text << "ncis " << report.ncis.estimate << " (cap " << report.ncis.cap << ", n " << report.ncis.n << ")\n";
  emit(c, doc, text.str());
  return 0;
}

struct ReplayArgs {
  ModelArgs model;
  std::string policy = "adaptive_active_greedy";
  std::string out;
  std::string compare;
};

int run_replay(const Common& c, const ReplayArgs& a) {
  auto in = load_inputs(c, a.model);
  const SlotPredictorModel* pred = in.predictor ? &*in.predictor : nullptr;
  BanditRegistry registry(in.ontology, in.scheme, policy_config(c, a.model, policy_kind(a.policy)),
                          a.model.embed_dim, slot_embed_dim(in));
  replay_log(in.records, registry, in.ontology, in.embedding.get(), pred);
  if (!a.out.empty()) write_text_file(a.out, registry.checkpoint().dump() + "\n");
  const auto state = registry.learned_state().dump();
  json doc{{"records", in.records.size()}, {"models", registry.size()}, {"state_hash", content_hash(state)}};
  int code = 0;
  if (!a.compare.empty()) {
    BanditRegistry other(in.ontology, in.scheme, policy_config(c, a.model, policy_kind(a.policy)),
                         a.model.embed_dim, slot_embed_dim(in));
    other.load_checkpoint(parse_json_text(read_text_file(a.compare), a.compare));
    const bool same = other.learned_state().dump() == state;
    doc["matches"] = same;
    if (!same) code = 1;
  }
  std::ostringstream text;
  text << "replayed " << in.records.size() << " records into " << registry.size() << " models\nstate hash "
       << doc["state_hash"].get<std::string>() << "\n";
  if (doc.contains("matches")) text << (doc["matches"].get<bool>() ? "matches " : "differs from ") << a.compare << "\n";
  emit(c, doc, text.str());
  return code;
}

// ---- serve

struct ServeArgs {
  std::string ontology;
  std::string sessions_dir = "sessions";
  std::string log_dir;
  std::string few_shot;
  std::string profile;
  std::string completions;
  std::string search_fixtures;
  std::string search_endpoint;
  std::string policy = "adaptive_active_greedy";
  std::string policy_config;
  std::string scheme = "method1";
  std::string predictor;
  std::string host = "0.0.0.0";
  std::string cors_origin = "*";
  int port = 8080;
  std::size_t embed_dim = 32;
};

int run_serve(const Common& c, const ServeArgs& a) {
  EngineConfig cfg;
  cfg.scheme = context_scheme_from_string(a.scheme);
  const auto kind = policy_kind(a.policy);
  cfg.policy = a.policy_config.empty() ? PolicyConfig{} : load_policy_config(a.policy_config, kind);
  cfg.policy.kind = kind;
  cfg.policy.seed = c.seed;
  if (!a.log_dir.empty()) cfg.log_dir = a.log_dir;

  HashEmbeddingProvider embedding(a.embed_dim, c.seed);
  std::unique_ptr<CompletionProvider> completion;
  if (const char* lm = env("INTENTLOOP_LM_ENDPOINT"))
    completion = std::make_unique<HttpCompletionProvider>(HttpProviderOptions{lm});
  else if (!a.completions.empty())
    completion = std::make_unique<FixtureCompletionProvider>(FixtureCompletionProvider::load(a.completions));
  std::unique_ptr<SearchProvider> search;
  if (!a.search_fixtures.empty()) {
    search = std::make_unique<FixtureSearchProvider>(FixtureSearchProvider::load(a.search_fixtures));
  } else if (const char* key = env("INTENTLOOP_SEARCH_KEY"); key && !a.search_endpoint.empty()) {
    search = std::make_unique<HttpSearchProvider>(HttpSearchOptions{a.search_endpoint, key});
  }
  std::optional<SlotPredictorModel> predictor;
  if (!a.predictor.empty())
    predictor = SlotPredictorModel::from_json(parse_json_text(read_text_file(a.predictor), a.predictor));

  EngineProviders providers;
  providers.embedding = &embedding;
  providers.completion = completion.get();
  providers.search = search.get();
  providers.predictor = predictor ? &*predictor : nullptr;
  if (!a.few_shot.empty()) providers.few_shot = load_few_shot_examples(a.few_shot);

  Engine engine(load_ontology(a.ontology), cfg, providers);
  if (!a.profile.empty()) engine.profile() = load_profile(a.profile, engine.ontology());
  DirectorySessionStore store(a.sessions_dir);
  ApiRouter router(engine, store);
  ServerOptions opts{a.host, a.port, a.cors_origin};
  serve(router, opts);
  (void)c;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("intentloop"));
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"intentloop: interactive intent refinement"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_flag("--json", common.json_out, "Machine-readable JSON on stdout");
  app.add_option("--config", common.config_path, "JSON config file; flags and environment take precedence")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
  app.add_flag("-v,--verbose", common.verbose, "Log progress to stderr");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run simulated refinement sessions");
  simulate->add_option("--requests", sim.requests, "Number of sessions");
  simulate->add_option("--interactions", sim.interactions, "Stop after this many feedback steps");
  simulate->add_option("--coupling", sim.coupling, "Slot coupling strength");
  simulate->add_option("--policy", sim.policy, "Bandit policy")->capture_default_str();
  simulate->add_option("--scheme", sim.scheme, "Context scheme: method1, method2, method3")->capture_default_str();
  simulate->add_option("--sim-config", sim.sim_config, "Simulation config JSON")->check(CLI::ExistingFile);
  simulate->add_option("--policy-config", sim.policy_config, "Policy hyperparameters JSON")
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Write interaction log JSONL here");
  simulate->add_option("--ontology-out", sim.ontology_out, "Write the generated ontology here");
  simulate->add_option("--checkpoint-out", sim.checkpoint_out, "Write the final bandit checkpoint here");
  simulate->add_option("--pairs-out", sim.pairs_out, "Write original/refined request pairs to this directory");
  simulate->add_flag("--oracle", sim.oracle, "Suggest with the simulated user's true preferences");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-predictor", "Train the slot predictor from interaction logs");
  train_cmd->add_option("--logs", train.logs, "Log JSONL files or directories")->required();
  train_cmd->add_option("--out", train.out, "Model output path")->required();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();

  CorpusArgs corpus;
  auto* corpus_cmd = app.add_subcommand("build-corpus", "Collect search results for every intent and slot");
  corpus_cmd->add_option("--ontology", corpus.ontology, "Ontology JSON");
  corpus_cmd->add_option("--locations", corpus.locations, "Locations, one per line");
  corpus_cmd->add_option("--out", corpus.out, "Corpus JSONL output")->required();
  corpus_cmd->add_option("--search-fixtures", corpus.search_fixtures, "Offline search results JSON");
  corpus_cmd->add_option("--search-endpoint", corpus.search_endpoint, "Live search URL")
      ->envname("INTENTLOOP_SEARCH_ENDPOINT");
  corpus_cmd->add_flag("--synthetic", corpus.synthetic, "Use the simulator's ontology and search engine");
  corpus_cmd->add_option("--sim-config", corpus.sim_config, "Simulation config JSON for --synthetic");
  corpus_cmd->add_option("--per-query", corpus.per_query, "Results per query")->capture_default_str();
  corpus_cmd->add_option("--concurrency", corpus.concurrency, "Parallel queries")->capture_default_str();

  QppArgs qpp;
  auto* qpp_cmd = app.add_subcommand("qpp", "Query performance prediction scores");
  qpp_cmd->add_option("--corpus", qpp.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  qpp_cmd->add_option("--requests", qpp.requests, "Requests, one per line")->required()->check(CLI::ExistingFile);
  qpp_cmd->add_option("--refined", qpp.refined, "Refined requests aligned with --requests")
      ->check(CLI::ExistingFile);
  qpp_cmd->add_option("--vocab", qpp.vocab, "Vocabulary vectors JSONL; built from the corpus when absent")
      ->check(CLI::ExistingFile);
  qpp_cmd->add_flag("--remove-stopwords", qpp.remove_stopwords, "Drop stopwords before scoring");
  qpp_cmd->add_option("--neighbors", qpp.neighbors, "Neighbors per query term")->capture_default_str();
  qpp_cmd->add_option("--threshold", qpp.threshold, "Similarity threshold for graph edges")->capture_default_str();

  auto add_model_options = [](CLI::App* cmd, ModelArgs& m) {
    cmd->add_option("--logs", m.logs, "Log JSONL files or directories")->required();
    cmd->add_option("--ontology", m.ontology, "Ontology JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--scheme", m.scheme, "Context scheme")->capture_default_str();
    cmd->add_option("--policy-config", m.policy_config, "Policy hyperparameters JSON")->check(CLI::ExistingFile);
    cmd->add_option("--predictor", m.predictor, "Slot predictor model for method3")->check(CLI::ExistingFile);
    cmd->add_option("--embed-dim", m.embed_dim, "Offline embedding dimension")->capture_default_str();
  };

  OpeArgs ope;
  auto* ope_cmd = app.add_subcommand("ope", "Off-policy evaluation on logged interactions");
  add_model_options(ope_cmd, ope.model);
  ope_cmd->add_option("--policy", ope.policy, "Target policy kind, 'logging' or 'uniform'")->required();
  ope_cmd->add_option("--cap", ope.cap, "NCIS weight cap")->capture_default_str();
  ope_cmd->add_option("--train-fraction", ope.train_fraction, "Share of sessions used to train the target")
      ->capture_default_str();

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay-log", "Rebuild bandit state from interaction logs");
  add_model_options(replay_cmd, replay.model);
  replay_cmd->add_option("--policy", replay.policy, "Policy kind")->capture_default_str();
  replay_cmd->add_option("--out", replay.out, "Write the rebuilt checkpoint here");
  replay_cmd->add_option("--compare", replay.compare, "Checkpoint to compare the rebuilt state with")
      ->check(CLI::ExistingFile);

  ServeArgs srv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--ontology", srv.ontology, "Ontology JSON")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--sessions-dir", srv.sessions_dir, "Session store directory")->capture_default_str();
  serve_cmd->add_option("--log-dir", srv.log_dir, "Interaction log directory");
  serve_cmd->add_option("--few-shot", srv.few_shot, "Few-shot examples JSON")->check(CLI::ExistingFile);
  serve_cmd->add_option("--profile", srv.profile, "Initial slot counts JSON")->check(CLI::ExistingFile);
  serve_cmd->add_option("--completions", srv.completions, "Offline completion fixtures JSON")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--search-fixtures", srv.search_fixtures, "Offline search results JSON")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--search-endpoint", srv.search_endpoint, "Live search URL")
      ->envname("INTENTLOOP_SEARCH_ENDPOINT");
  serve_cmd->add_option("--policy", srv.policy, "Bandit policy")->capture_default_str();
  serve_cmd->add_option("--policy-config", srv.policy_config, "Policy hyperparameters JSON")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--scheme", srv.scheme, "Context scheme")->capture_default_str();
  serve_cmd->add_option("--predictor", srv.predictor, "Slot predictor model for method3")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", srv.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", srv.port, "Port")->envname("INTENTLOOP_PORT")->capture_default_str();
  serve_cmd->add_option("--cors-origin", srv.cors_origin, "Allowed UI origin")->capture_default_str();
  serve_cmd->add_option("--embed-dim", srv.embed_dim, "Offline embedding dimension")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (common.verbose) spdlog::set_level(spdlog::level::info);
    auto* sub = app.get_subcommands().front();
    apply_config(*sub, common.config_path);
    if (*simulate) return run_simulate(common, sim);
    if (*train_cmd) return run_train(common, train);
    if (*corpus_cmd) return run_build_corpus(common, corpus);
    if (*qpp_cmd) return run_qpp(common, qpp);
    if (*ope_cmd) return run_ope(common, ope);
    if (*replay_cmd) return run_replay(common, replay);
    if (*serve_cmd) return run_serve(common, srv);
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
