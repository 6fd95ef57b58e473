#include "intentloop/session.hpp"

#include <algorithm>
#include <map>
#include <fstream>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

std::string_view to_string(SessionState state) noexcept {
  switch (state) {
    case SessionState::refining: return "refining";
    case SessionState::ready: return "ready";
    case SessionState::retrieved: return "retrieved";
    case SessionState::abandoned: return "abandoned";
  }
  return "abandoned";
}

SessionState session_state_from_string(std::string_view name) {
  for (auto s : {SessionState::refining, SessionState::ready, SessionState::retrieved, SessionState::abandoned})
    if (to_string(s) == name) return s;
  throw ValidationError("unknown session state '" + std::string(name) + "'");
}

namespace {

bool contains(std::span<const std::string> v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

nlohmann::ordered_json to_json(const Session& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  nlohmann::ordered_json req;
  req["text"] = s.request.text;
  req["location"] = s.request.location ? nlohmann::ordered_json(*s.request.location) : nlohmann::ordered_json();
  req["received_at"] = format_timestamp(s.request.received_at);
  j["request"] = req;
  j["frame"] = to_json(s.frame);
  j["context"] = {{"values", s.context.values}, {"scheme", to_string(s.context.scheme)}, {"step", s.context.step}};
  j["step"] = s.step;
  j["max_steps"] = s.max_steps;
  j["selected"] = s.selected;
  j["rejected"] = s.rejected;
  j["shown_history"] = s.shown_history;
  j["last_shown"] = s.last_shown;
  j["last_propensities"] = s.last_propensities;
  j["state"] = to_string(s.state);
  j["created_at"] = s.created_at;
  j["last_activity"] = format_timestamp(s.last_activity);
  j["distribution"] = s.distribution.to_json();
  j["threshold"] = s.threshold;
  j["diagnostic"] = s.diagnostic;
  auto log = nlohmann::ordered_json::array();
  for (const auto& r : s.log) log.push_back(to_json(r));
  j["log"] = std::move(log);
  auto results = nlohmann::ordered_json::array();
  for (const auto& r : s.results) results.push_back(to_json(r));
  j["results"] = std::move(results);
  return j;
}

Session session_from_json(const nlohmann::json& j) {
  try {
    Session s;
    s.id = j.at("id").get<std::string>();
    const auto& req = j.at("request");
    s.request.text = req.at("text").get<std::string>();
    if (req.contains("location") && !req.at("location").is_null())
      s.request.location = req.at("location").get<std::string>();
    s.request.received_at = parse_timestamp(req.at("received_at").get<std::string>());
    s.frame = frame_from_json(j.at("frame"));
    const auto& ctx = j.at("context");
    s.context = {ctx.at("values").get<std::vector<double>>(),
                 context_scheme_from_string(ctx.at("scheme").get<std::string>()), ctx.at("step").get<int>()};
    s.step = j.at("step").get<int>();
    s.max_steps = j.at("max_steps").get<int>();
    s.selected = j.at("selected").get<std::vector<std::string>>();
    s.rejected = j.at("rejected").get<std::vector<std::string>>();
    s.shown_history = j.at("shown_history").get<std::vector<std::string>>();
    s.last_shown = j.at("last_shown").get<std::vector<std::string>>();
    s.last_propensities = j.at("last_propensities").get<std::vector<double>>();
    s.state = session_state_from_string(j.at("state").get<std::string>());
    s.created_at = j.at("created_at").get<std::string>();
    s.last_activity = parse_timestamp(j.at("last_activity").get<std::string>());
    s.distribution = SlotDistribution::from_json(j.at("distribution"));
    s.threshold = j.at("threshold").get<double>();
    s.diagnostic = j.value("diagnostic", "");
    for (const auto& r : j.at("log")) s.log.push_back(record_from_json(r));
    for (const auto& r : j.value("results", nlohmann::json::array())) s.results.push_back(suggestion_from_json(r));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid session document: ") + e.what());
  }
}

Engine::Engine(IntentOntology ontology, EngineConfig config, EngineProviders providers)
    : ontology_(std::move(ontology)),
      config_(std::move(config)),
      providers_(std::move(providers)),
      profile_(ontology_),
      registry_(ontology_, config_.scheme, config_.policy,
                providers_.embedding ? providers_.embedding->dim() : 0,
                providers_.predictor ? providers_.predictor->embed_dim() : 100),
      clock_([] { return std::chrono::system_clock::now(); }) {
  if (!providers_.embedding) throw ValidationError("engine needs an embedding provider");
  if (config_.slate_size == 0) throw ValidationError("slate size must be positive");
  if (config_.max_steps < 0) throw ValidationError("max_steps must be non-negative");
  if (config_.scheme == ContextScheme::method3 && (!providers_.predictor || !providers_.predictor->trained()))
    throw StateError("context method3 needs a trained slot predictor");
  if (config_.session_id_seed) {
    random_ids_ = false;
    id_state_ = *config_.session_id_seed;
  }
}

std::chrono::system_clock::time_point Engine::now() const { return clock_(); }

std::string Engine::next_session_id() {
  std::lock_guard lock(id_mutex_);
  if (random_ids_) {
    std::random_device rd;
    const std::uint64_t hi = rd(), lo = rd();
    std::uint64_t state = (hi << 32) ^ lo ^ id_state_++;
    return hex64(splitmix64(state));
  }
  return hex64(splitmix64(id_state_));
}

std::vector<std::string> Engine::eligible_slots(const Session& s) const {
  const auto mentioned = s.frame.mentioned_ids();
  std::vector<std::string> out;
  for (const auto& id : ontology_.slot_ids(s.frame.key())) {
    if (contains(mentioned, id) || contains(s.selected, id) || contains(s.rejected, id) ||
        contains(s.shown_history, id))
      continue;
    out.push_back(id);
  }
  return out;
}

ContextVector Engine::make_context(const Session& s) const {
  return build_context(config_.scheme, active_slots(s.frame, s.selected), ontology_.slot_ids(s.frame.key()),
                       s.request.text, providers_.embedding, providers_.predictor, s.step);
}

void Engine::update_state(Session& s) {
  if (!should_continue(s.frame.ics, s.threshold, s.step, s.max_steps)) {
    s.state = SessionState::ready;
    s.last_shown.clear();
    s.last_propensities.clear();
  }
}

void Engine::issue_suggestions(Session& s) {
  const auto eligible = eligible_slots(s);
  Slate slate;
  if (override_) {
    slate = override_(s, eligible, config_.slate_size);
  } else if (config_.policy.kind == PolicyKind::popularity_baseline) {
    std::vector<std::string> excluded;
    for (const auto& id : ontology_.slot_ids(s.frame.key()))
      if (!contains(eligible, id)) excluded.push_back(id);
    slate.arms = popularity_suggest(profile_, s.frame.key(), excluded, config_.slate_size);
    slate.propensities.assign(slate.arms.size(), 1.0);
  } else {
    slate = registry_.model(s.frame.key())->suggest(s.context, eligible, config_.slate_size);
  }
  for (const auto& a : slate.arms)
    if (!contains(eligible, a)) throw StateError("suggestion '" + a + "' is not eligible");
  s.last_shown = slate.arms;
  s.last_propensities = slate.propensities;
  s.shown_history.insert(s.shown_history.end(), slate.arms.begin(), slate.arms.end());
  if (s.last_shown.empty()) s.state = SessionState::ready;
}

Session Engine::start_session(const ComplexRequest& request) {
  if (trim(request.text).empty()) throw ValidationError("request text is empty");
  SemanticFrame frame;
  try {
    frame = parse_frame(request, providers_.completion, ontology_, profile_, *providers_.embedding,
                        providers_.few_shot, config_.nlu);
  } catch (const UnknownIntentError& e) {
    Session s;
    s.id = next_session_id();
    s.request = request;
    s.max_steps = config_.max_steps;
    s.created_at = format_timestamp(now());
    s.last_activity = now();
    s.state = SessionState::abandoned;
    s.diagnostic = std::string(e.what()) + "; completion: " + e.raw_completion();
    spdlog::info("session {} abandoned: {}", s.id, e.what());
    return s;
  }
  return start_session_from_frame(request, std::move(frame));
}

Session Engine::start_session_from_frame(const ComplexRequest& request, SemanticFrame frame) {
  if (trim(request.text).empty()) throw ValidationError("request text is empty");
  const auto key = frame.key();
  const auto& universe = ontology_.slot_ids(key);
  const auto mentioned = frame.mentioned_ids();
  for (const auto& m : mentioned)
    if (!contains(universe, m)) throw ValidationError("mentioned slot '" + m + "' does not belong to " + key.str());

  Session s;
  s.id = next_session_id();
  s.request = request;
  s.max_steps = config_.max_steps;
  s.created_at = format_timestamp(now());
  s.last_activity = now();
  s.distribution = profile_.distribution(key);
  s.threshold = s.distribution.threshold();
  frame.ics = intent_completion_score(s.distribution, mentioned, {});
  s.frame = std::move(frame);
  if (config_.record_mentions && !mentioned.empty()) profile_.record(key, mentioned);
  s.context = make_context(s);
  s.state = SessionState::refining;
  update_state(s);
  if (s.state == SessionState::refining) issue_suggestions(s);
  return s;
}

void Engine::apply_feedback(Session& s, std::span<const std::string> selected, std::span<const std::string> rejected) {
  if (s.state != SessionState::refining)
    throw StateError("session " + s.id + " is " + std::string(to_string(s.state)) + ", not refining");
  if (s.step >= s.max_steps) throw StateError("session " + s.id + " has used all refinement steps");
  std::set<std::string> seen;
  for (const auto& x : selected) {
    if (!contains(s.last_shown, x)) throw ValidationError("slot '" + x + "' was not in the last suggestions");
    if (!seen.insert(x).second) throw ValidationError("slot '" + x + "' given twice");
  }
  for (const auto& x : rejected) {
    if (!contains(s.last_shown, x)) throw ValidationError("slot '" + x + "' was not in the last suggestions");
    if (!seen.insert(x).second) throw ValidationError("slot '" + x + "' given twice");
  }

  const auto key = s.frame.key();
  InteractionRecord rec;
  rec.session_id = s.id;
  rec.step = s.step + 1;
  rec.topic = key.topic;
  rec.intent = key.intent;
  rec.context_scheme = std::string(to_string(config_.scheme));
  rec.request_text = s.request.text;
  rec.context_slots = active_slots(s.frame, s.selected);
  rec.shown = s.last_shown;
  rec.propensities = s.last_propensities;
  rec.selected.assign(selected.begin(), selected.end());
  rec.rejected.assign(rejected.begin(), rejected.end());
  rec.ics_before = s.frame.ics;

  if (!selected.empty()) profile_.record(key, rec.selected);
  if (!s.last_shown.empty()) {
    auto decision_eligible = eligible_slots(s);
    for (const auto& a : s.last_shown)
      if (!contains(decision_eligible, a)) decision_eligible.push_back(a);
    registry_.model(key)->update(s.context, s.last_shown, rec.selected, decision_eligible);
  }

  s.selected.insert(s.selected.end(), selected.begin(), selected.end());
  s.rejected.insert(s.rejected.end(), rejected.begin(), rejected.end());
  s.step += 1;
  s.context = make_context(s);
  s.frame.ics = intent_completion_score(s.distribution, s.frame.mentioned_ids(), s.selected);

  const auto t = now();
  s.last_activity = t;
  rec.ics_after = s.frame.ics;
  rec.timestamp = format_timestamp(t);
  validate_record(rec);
  s.log.push_back(rec);
  persist(s, rec);

  s.last_shown.clear();
  s.last_propensities.clear();
  update_state(s);
  if (s.state == SessionState::refining) issue_suggestions(s);
}

std::vector<Suggestion> Engine::retrieve(Session& s) {
  if (s.state != SessionState::ready)
    throw StateError("session " + s.id + " is " + std::string(to_string(s.state)) + ", not ready");
  std::optional<std::string> location = s.frame.location ? s.frame.location : s.request.location;
  std::vector<Document> candidates;
  if (providers_.search) {
    for (const auto& q : generate_subqueries(ontology_, s.frame, s.selected, location)) {
      auto docs = search(q, *providers_.search, config_.search_k);
      candidates.insert(candidates.end(), docs.begin(), docs.end());
    }
  } else {
    spdlog::warn("no search provider configured; session {} retrieves nothing", s.id);
  }
  s.results = rank_suggestions(candidates, ontology_, s.frame, s.selected, s.request.text, providers_.ranker,
                               config_.rank);
  s.state = SessionState::retrieved;
  s.last_activity = now();
  return s.results;
}

void Engine::abandon(Session& s, std::string reason) {
  s.state = SessionState::abandoned;
  s.diagnostic = std::move(reason);
  s.last_shown.clear();
  s.last_propensities.clear();
}

bool Engine::abandon_if_idle(Session& s) {
  if (s.state != SessionState::refining && s.state != SessionState::ready) return false;
  if (now() - s.last_activity <= config_.idle_ttl) return false;
  abandon(s, "idle for longer than " + std::to_string(config_.idle_ttl.count()) + "s");
  return true;
}

std::filesystem::path session_log_path(const std::filesystem::path& root, const std::string& session_id,
                                       const std::string& created_at) {
  const std::string date = created_at.size() >= 10 ? created_at.substr(0, 10) : "undated";
  return root / date / (session_id + ".jsonl");
}

void Engine::persist(const Session& s, const InteractionRecord& rec) const {
  if (!config_.log_dir) return;
  const auto path = session_log_path(*config_.log_dir, s.id, s.created_at);
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to session log " + path.string());
  out << to_json(rec).dump() << '\n';
  if (!out) throw Error("error writing session log " + path.string());
}

void export_log(std::span<const Session> sessions, const std::filesystem::path& path) {
  std::vector<InteractionRecord> records;
  for (const auto& s : sessions) records.insert(records.end(), s.log.begin(), s.log.end());
  write_jsonl_file(path, records);
}

ContextVector context_from_record(const InteractionRecord& record, ContextScheme scheme,
                                  const IntentOntology& ontology, const EmbeddingProvider* embedding,
                                  const SlotPredictorModel* predictor) {
  return build_context(scheme, record.context_slots, ontology.slot_ids({record.topic, record.intent}),
                       record.request_text, embedding, predictor, record.step - 1);
}

void replay_log(std::span<const InteractionRecord> records, BanditRegistry& registry, const IntentOntology& ontology,
                const EmbeddingProvider* embedding, const SlotPredictorModel* predictor) {
  std::map<std::string, std::vector<std::string>> shown_before;
  for (const auto& rec : records) {
    if (rec.context_scheme != to_string(registry.scheme()))
      throw ValidationError("record of session " + rec.session_id + " uses context scheme " + rec.context_scheme);
    if (rec.shown.empty()) continue;
    auto ctx = context_from_record(rec, registry.scheme(), ontology, embedding, predictor);
    auto& history = shown_before[rec.session_id];
    std::vector<std::string> eligible;
    for (const auto& id : ontology.slot_ids({rec.topic, rec.intent}))
      if (!contains(rec.context_slots, id) && !contains(history, id)) eligible.push_back(id);
    registry.model({rec.topic, rec.intent})->update(ctx, rec.shown, rec.selected, eligible);
    history.insert(history.end(), rec.shown.begin(), rec.shown.end());
  }
}

}  // namespace intentloop
