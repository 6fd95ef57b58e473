#include "intentloop/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(std::size_t n, std::mt19937_64& rng) {
  return std::min(n - 1, static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n)));
}

std::size_t categorical(std::span<const double> w, std::mt19937_64& rng) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const double u = unit_draw(rng) * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    last = i;
    acc += w[i];
    if (u < acc) return i;
  }
  return last;
}

struct IntentSpec {
  const char* id;
  const char* label;
  const char* topic;
  double weight;  // share of requests
};

constexpr IntentSpec kIntents[] = {
    {"restaurants", "restaurants", "service", 12}, {"appliance", "appliance", "service", 11},
    {"electrician", "electrician", "service", 13}, {"hotel", "hotel", "service", 2},
    {"landscaping", "landscaping", "service", 16}, {"handyman", "handyman", "service", 2},
    {"hike", "hike", "activity", 10},              {"cleaners", "cleaners", "service", 4},
    {"general", "general", "activity", 8},         {"remodeling", "remodeling", "service", 3},
    {"spring_break", "spring break", "activity", 5}, {"daytrip", "daytrip", "activity", 2},
    {"campground", "campground", "activity", 6},   {"summercamp", "summercamp", "activity", 6},
};

constexpr const char* kLocations[] = {"Austin",   "Boston",  "Chicago",  "Denver",    "Houston",
                                      "Phoenix",  "Portland", "Seattle", "San Diego", "San Francisco"};

constexpr const char* kOpeners[] = {"looking for", "find", "i need", "any recommendations for"};
constexpr const char* kFillers[] = {"guide", "best", "local", "reviews", "top", "popular", "prices", "hours"};

std::string pseudo_word(std::mt19937_64& rng, std::size_t syllables) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += consonants[pick(consonants.size(), rng)];
    w += vowels[pick(vowels.size(), rng)];
  }
  return w;
}

std::string two_digits(std::size_t i) { return (i < 10 ? "0" : "") + std::to_string(i); }

}  // namespace

nlohmann::ordered_json SimConfig::to_json() const {
  return {{"seed", seed},
          {"n_intents", n_intents},
          {"n_slots_per_intent", n_slots_per_intent},
          {"n_requests", n_requests},
          {"coupling_strength", coupling_strength},
          {"slate_size", slate_size},
          {"dirichlet_alpha", dirichlet_alpha},
          {"noise", noise},
          {"partners_per_slot", partners_per_slot},
          {"min_mentions", min_mentions},
          {"max_mentions", max_mentions},
          {"max_steps", max_steps},
          {"embed_dim", embed_dim},
          {"max_interactions", max_interactions}};
}

SimConfig SimConfig::from_json(const nlohmann::json& doc) { return from_json(doc, SimConfig{}); }

SimConfig SimConfig::from_json(const nlohmann::json& doc, SimConfig c) {
  if (!doc.is_object()) throw ValidationError("simulation config must be a JSON object");
  try {
    c.seed = doc.value("seed", c.seed);
    c.n_intents = doc.value("n_intents", c.n_intents);
    c.n_slots_per_intent = doc.value("n_slots_per_intent", c.n_slots_per_intent);
    c.n_requests = doc.value("n_requests", c.n_requests);
    c.coupling_strength = doc.value("coupling_strength", c.coupling_strength);
    c.slate_size = doc.value("slate_size", c.slate_size);
    c.dirichlet_alpha = doc.value("dirichlet_alpha", c.dirichlet_alpha);
    c.noise = doc.value("noise", c.noise);
    c.partners_per_slot = doc.value("partners_per_slot", c.partners_per_slot);
    c.min_mentions = doc.value("min_mentions", c.min_mentions);
    c.max_mentions = doc.value("max_mentions", c.max_mentions);
    c.max_steps = doc.value("max_steps", c.max_steps);
    c.embed_dim = doc.value("embed_dim", c.embed_dim);
    c.max_interactions = doc.value("max_interactions", c.max_interactions);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("simulation config: ") + e.what());
  }
  if (c.n_intents == 0 || c.n_slots_per_intent == 0 || c.slate_size == 0 || c.embed_dim == 0)
    throw ValidationError("simulation counts must be at least 1");
  if (c.n_requests == 0 && c.max_interactions == 0) throw ValidationError("n_requests must be at least 1");
  if (c.noise < 0.0 || c.noise >= 1.0) throw ValidationError("noise must be in [0, 1)");
  if (c.dirichlet_alpha <= 0.0) throw ValidationError("dirichlet_alpha must be positive");
  if (c.coupling_strength < 0.0) throw ValidationError("coupling_strength must be non-negative");
  if (c.min_mentions == 0 || c.min_mentions > c.max_mentions)
    throw ValidationError("mentions range must satisfy 1 <= min_mentions <= max_mentions");
  return c;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  return SimConfig::from_json(parse_json_text(read_text_file(path), path.string()));
}

IntentOntology generate_ontology(const SimConfig& config) {
  std::mt19937_64 rng(config.seed ^ 0x6f6e746f6c6f6779ULL);
  std::vector<Topic> topics{{"service", "service"}, {"activity", "activity"}};
  std::vector<Intent> intents;
  std::vector<Slot> slots;
  std::set<std::string> used;
  for (std::size_t i = 0; i < config.n_intents; ++i) {
    Intent in;
    if (i < std::size(kIntents)) {
      in = {kIntents[i].id, kIntents[i].topic, kIntents[i].label};
    } else {
      const std::string id = "intent" + std::to_string(i + 1);
      in = {id, i % 2 ? "activity" : "service", id};
    }
    for (std::size_t k = 0; k < config.n_slots_per_intent; ++k) {
      std::string words[2];
      for (auto& w : words) {
        std::size_t attempts = 0;
        do {
          w = pseudo_word(rng, attempts++ < 50 ? 2 : 3);
        } while (used.contains(w));
        used.insert(w);
      }
      slots.push_back({in.id + "_" + two_digits(k), in.topic_id, in.id, words[0] + " " + words[1], true});
    }
    intents.push_back(std::move(in));
  }
  return IntentOntology(std::move(topics), std::move(intents), std::move(slots));
}

// ---- SyntheticUser

SyntheticUser::SyntheticUser(std::vector<std::string> slots, std::vector<double> preferences,
                             std::vector<std::vector<double>> affinity, double coupling_strength, double noise)
    : slots_(std::move(slots)),
      prefs_(std::move(preferences)),
      affinity_(std::move(affinity)),
      strength_(coupling_strength),
      noise_(noise) {
  if (slots_.empty() || prefs_.size() != slots_.size()) throw ValidationError("user preferences must cover every slot");
  if (affinity_.empty()) affinity_.assign(slots_.size(), std::vector<double>(slots_.size(), 0.0));
  if (affinity_.size() != slots_.size()) throw ValidationError("affinity matrix has the wrong size");
  if (noise_ < 0.0 || noise_ >= 1.0) throw ValidationError("noise must be in [0, 1)");
  const double total = std::accumulate(prefs_.begin(), prefs_.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("preferences must have positive mass");
  for (auto& p : prefs_) p /= total;
  for (std::size_t i = 0; i < slots_.size(); ++i) index_.emplace(slots_[i], i);
}

SyntheticUser SyntheticUser::sample(std::vector<std::string> slots, const SimConfig& config, std::mt19937_64& rng) {
  const std::size_t n = slots.size();
  std::gamma_distribution<double> gamma(config.dirichlet_alpha, 1.0);
  std::vector<double> prefs(n);
  for (auto& p : prefs) p = gamma(rng);
  if (std::accumulate(prefs.begin(), prefs.end(), 0.0) <= 0.0) prefs.assign(n, 1.0);
  std::vector<std::vector<double>> aff(n, std::vector<double>(n, 0.0));
  const std::size_t partners = std::min(config.partners_per_slot, n - 1);
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t placed = 0;
    while (placed < partners) {
      const auto y = pick(n, rng);
      if (y == x || aff[x][y] > 0.0) continue;
      aff[x][y] = 1.0;
      ++placed;
    }
  }
  return SyntheticUser(std::move(slots), std::move(prefs), std::move(aff), config.coupling_strength, config.noise);
}

std::vector<double> SyntheticUser::coupled(std::span<const std::string> active) const {
  const std::size_t n = slots_.size();
  std::vector<char> is_active(n, 0);
  for (const auto& a : active) {
    auto it = index_.find(a);
    if (it != index_.end()) is_active[it->second] = 1;
  }
  std::vector<double> w(n, 0.0);
  for (std::size_t y = 0; y < n; ++y) {
    if (is_active[y]) continue;
    double boost = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      if (is_active[x]) boost += affinity_[x][y];
    w[y] = prefs_[y] * std::exp(strength_ * boost);
  }
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total <= 0.0) {
    for (std::size_t y = 0; y < n; ++y) w[y] = is_active[y] ? 0.0 : 1.0;
    total = std::accumulate(w.begin(), w.end(), 0.0);
  }
  if (total > 0.0)
    for (auto& x : w) x /= total;
  return w;
}

double SyntheticUser::selection_probability(const std::string& slot, std::span<const std::string> active) const {
  auto it = index_.find(slot);
  if (it == index_.end()) throw ReferenceError("slot '" + slot + "' unknown to the user model");
  const double q = coupled(active)[it->second];
  return (1.0 - noise_) * q + noise_ * 0.5;
}

std::vector<std::string> SyntheticUser::partners(const std::string& slot) const {
  auto it = index_.find(slot);
  if (it == index_.end()) throw ReferenceError("slot '" + slot + "' unknown to the user model");
  std::vector<std::string> out;
  for (std::size_t y = 0; y < slots_.size(); ++y)
    if (affinity_[it->second][y] > 0.0) out.push_back(slots_[y]);
  return out;
}

std::vector<std::string> SyntheticUser::draw_mentions(std::size_t count, std::mt19937_64& rng) const {
  std::vector<std::string> active;
  count = std::min(count, slots_.size());
  while (active.size() < count) active.push_back(slots_[categorical(coupled(active), rng)]);
  return active;
}

// ---- SimulationResult

double SimulationResult::mean_reward() const {
  if (step_rewards.empty()) return 0.0;
  return std::accumulate(step_rewards.begin(), step_rewards.end(), 0.0) / static_cast<double>(step_rewards.size());
}

double SimulationResult::tail_mean(double fraction) const {
  if (step_rewards.empty()) return 0.0;
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(step_rewards.size()))));
  const auto first = step_rewards.end() - static_cast<std::ptrdiff_t>(std::min(n, step_rewards.size()));
  return std::accumulate(first, step_rewards.end(), 0.0) / static_cast<double>(step_rewards.end() - first);
}

// ---- Simulator

Simulator::Simulator(SimConfig config)
    : config_(SimConfig::from_json(config.to_json())),
      ontology_(generate_ontology(config_)),
      locations_(std::begin(kLocations), std::end(kLocations)),
      embedding_(config_.embed_dim, config_.seed) {
  std::mt19937_64 rng(config_.seed ^ 0x7573657273ULL);
  for (const auto& key : ontology_.intent_keys()) {
    users_.emplace(key, SyntheticUser::sample(ontology_.slot_ids(key), config_, rng));
    keys_.push_back(key);
  }
  // Request mix follows the intent shares when the standard intents are used.
  for (const auto& key : keys_) {
    double w = 1.0;
    for (const auto& spec : kIntents)
      if (key.intent == spec.id) w = spec.weight;
    key_weights_.push_back(w);
  }
}

const SyntheticUser& Simulator::user(const IntentKey& key) const {
  auto it = users_.find(key);
  if (it == users_.end()) throw ReferenceError("no synthetic user for " + key.str());
  return it->second;
}

std::mt19937_64 Simulator::session_rng(std::size_t index) const {
  std::uint64_t state = config_.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return std::mt19937_64(splitmix64(state));
}

SimulatedRequest Simulator::draw_request(std::mt19937_64& rng) const {
  return draw_request(keys_[categorical(key_weights_, rng)], rng);
}

SimulatedRequest Simulator::draw_request(const IntentKey& key, std::mt19937_64& rng) const {
  const auto& u = user(key);
  const std::size_t span = config_.max_mentions - config_.min_mentions + 1;
  const std::size_t m = config_.min_mentions + pick(span, rng);
  const auto mentions = u.draw_mentions(m, rng);
  const std::string location = locations_[pick(locations_.size(), rng)];
  const std::string opener = kOpeners[pick(std::size(kOpeners), rng)];

  std::string text = opener + " " + ontology_.intent(key).label + " with ";
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (i > 0) text += i + 1 == mentions.size() ? " and " : ", ";
    text += ontology_.slot(mentions[i]).label;
  }
  text += " near " + location;

  SimulatedRequest r;
  r.request.text = text;
  r.request.location = location;
  r.request.received_at = parse_timestamp("2021-05-09T00:00:00.000Z");
  r.frame.topic_id = key.topic;
  r.frame.intent_id = key.intent;
  for (const auto& id : mentions) r.frame.mentioned_slots.push_back({id, std::nullopt});
  r.frame.location = location;
  r.frame.provenance = "simulated";
  return r;
}

EngineConfig Simulator::engine_config(PolicyKind kind, ContextScheme scheme) const {
  PolicyConfig p;
  p.kind = kind;
  return engine_config(p, scheme);
}

EngineConfig Simulator::engine_config(PolicyConfig policy, ContextScheme scheme) const {
  EngineConfig c;
  c.scheme = scheme;
  c.policy = policy;
  c.policy.seed = config_.seed;
  c.slate_size = config_.slate_size;
  c.max_steps = config_.max_steps;
  c.session_id_seed = config_.seed;
  return c;
}

std::unique_ptr<Engine> Simulator::make_engine(PolicyKind kind, ContextScheme scheme,
                                               const SlotPredictorModel* predictor) const {
  PolicyConfig p;
  p.kind = kind;
  return make_engine(p, scheme, predictor);
}

std::unique_ptr<Engine> Simulator::make_engine(const PolicyConfig& policy, ContextScheme scheme,
                                               const SlotPredictorModel* predictor) const {
  EngineProviders providers;
  providers.embedding = &embedding_;
  providers.predictor = predictor;
  auto engine = std::make_unique<Engine>(ontology_, engine_config(policy, scheme), providers);
  auto tick = std::make_shared<std::int64_t>(0);
  const auto start = parse_timestamp("2021-05-09T00:00:00.000Z");
  engine->set_clock([tick, start] { return start + std::chrono::seconds((*tick)++); });
  return engine;
}

SuggestionOverride Simulator::oracle() const {
  return [this](const Session& s, std::span<const std::string> eligible, std::size_t k) {
    const auto& u = user(s.frame.key());
    const auto active = active_slots(s.frame, s.selected);
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& e : eligible) ranked.emplace_back(u.selection_probability(e, active), e);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    Slate slate;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
      slate.arms.push_back(ranked[i].second);
      slate.propensities.push_back(1.0);
    }
    return slate;
  };
}

SimulationResult Simulator::run(Engine& engine, bool keep_sessions) const {
  SimulationResult result;
  std::size_t steps = 0;
  const bool budgeted = config_.max_interactions > 0;
  for (std::size_t i = 0; budgeted ? steps < config_.max_interactions : i < config_.n_requests; ++i) {
    auto rng = session_rng(i);
    auto req = draw_request(rng);
    const auto& u = user(req.frame.key());
    auto s = engine.start_session_from_frame(req.request, std::move(req.frame));
    while (s.state == SessionState::refining) {
      if (budgeted && steps >= config_.max_interactions) {
        engine.abandon(s, "simulation budget reached");
        break;
      }
      const auto active = active_slots(s.frame, s.selected);
      std::vector<std::string> selected, rejected;
      for (const auto& slot : s.last_shown)
        (unit_draw(rng) < u.selection_probability(slot, active) ? selected : rejected).push_back(slot);
      result.step_rewards.push_back(static_cast<double>(selected.size()) /
                                    static_cast<double>(s.last_shown.size()));
      ++steps;
      engine.apply_feedback(s, selected, rejected);
    }
    result.logs.insert(result.logs.end(), s.log.begin(), s.log.end());
    if (keep_sessions) result.sessions.push_back(std::move(s));
  }
  return result;
}

SimulationResult simulate_sessions(const SimConfig& config, PolicyKind kind, ContextScheme scheme, bool keep_sessions) {
  Simulator sim(config);
  auto engine = sim.make_engine(kind, scheme);
  return sim.run(*engine, keep_sessions);
}

std::vector<RefinedPair> refine_request_corpus(std::span<const Session> sessions, const IntentOntology& ontology) {
  std::vector<RefinedPair> out;
  for (const auto& s : sessions) {
    if (s.frame.intent_id.empty()) continue;
    RefinedPair p;
    p.original = s.request.text;
    p.refined = s.request.text;
    for (const auto& id : s.selected) p.refined += " " + ontology.slot(id).label;
    p.key = s.frame.key();
    p.breadth = classify_breadth(s.frame);
    p.selections = s.selected.size();
    out.push_back(std::move(p));
  }
  return out;
}

// ---- SimulatorEnvironment

SimulatorEnvironment::SimulatorEnvironment(const Simulator& simulator, ContextScheme scheme,
                                           std::optional<IntentKey> key)
    : sim_(&simulator), scheme_(scheme), key_(std::move(key)) {
  if (scheme_ == ContextScheme::method3) throw ValidationError("simulator environment supports method1 and method2");
  if (key_) sim_->user(*key_);
}

LoggedDecision SimulatorEnvironment::draw(std::mt19937_64& rng) {
  const auto req = key_ ? sim_->draw_request(*key_, rng) : sim_->draw_request(rng);
  const auto key = req.frame.key();
  const auto& universe = sim_->ontology().slot_ids(key);
  const auto mentioned = req.frame.mentioned_ids();
  LoggedDecision d;
  d.key = key;
  d.context = build_context(scheme_, mentioned, universe, req.request.text, &sim_->embedding(), nullptr, 0);
  for (const auto& id : universe)
    if (std::find(mentioned.begin(), mentioned.end(), id) == mentioned.end()) d.eligible.push_back(id);
  return d;
}

double SimulatorEnvironment::expected_reward(const LoggedDecision& d, const std::string& action) const {
  std::vector<std::string> active;
  for (const auto& id : sim_->ontology().slot_ids(d.key))
    if (std::find(d.eligible.begin(), d.eligible.end(), id) == d.eligible.end()) active.push_back(id);
  return sim_->user(d.key).selection_probability(action, active);
}

double SimulatorEnvironment::reward(const LoggedDecision& d, const std::string& action, std::mt19937_64& rng) {
  return unit_draw(rng) < expected_reward(d, action) ? 1.0 : 0.0;
}

// ---- SyntheticSearchProvider

SyntheticSearchProvider::SyntheticSearchProvider(const Simulator& simulator) : sim_(&simulator) {
  const auto& onto = sim_->ontology();
  for (const auto& key : onto.intent_keys()) {
    intents_by_label_[onto.intent(key).label] = key;
    for (const auto& id : onto.slot_ids(key)) slots_by_label_[{key, onto.slot(id).label}] = id;
  }
}

std::vector<Document> SyntheticSearchProvider::search(const std::string& query, std::size_t k) {
  const auto near = query.find(" near ");
  const auto with = query.rfind(" with ");
  if (near == std::string::npos || with == std::string::npos || with < near) return {};
  auto intent_it = intents_by_label_.find(query.substr(0, near));
  if (intent_it == intents_by_label_.end()) return {};
  const auto& key = intent_it->second;
  const std::string location = query.substr(near + 6, with - near - 6);
  auto slot_it = slots_by_label_.find({key, query.substr(with + 6)});
  if (slot_it == slots_by_label_.end()) return {};
  const auto& slot = slot_it->second;

  const auto& onto = sim_->ontology();
  const auto& u = sim_->user(key);
  const auto partners = u.partners(slot);
  const auto& intent_label = onto.intent(key).label;
  const auto& slot_label = onto.slot(slot).label;
  std::mt19937_64 rng(sim_->config().seed ^ fnv1a64(query));
  std::string loc_slug = to_lower(location);
  std::replace(loc_slug.begin(), loc_slug.end(), ' ', '-');

  std::vector<Document> docs;
  for (std::size_t j = 0; j < k; ++j) {
    Document d;
    d.title = slot_label + " " + intent_label + " in " + location;
    std::string snippet = intent_label + " " + slot_label;
    for (const auto& p : partners)
      if (unit_draw(rng) < 0.5) snippet += " " + onto.slot(p).label;
    const auto extra = 1 + pick(2, rng);
    for (std::size_t e = 0; e < extra; ++e) {
      const auto& other = u.slots()[categorical(u.preferences(), rng)];
      if (other != slot) snippet += " " + onto.slot(other).label;
    }
    for (std::size_t f = 0; f < 3; ++f) snippet += std::string(" ") + kFillers[pick(std::size(kFillers), rng)];
    d.snippet = snippet;
    d.url = "https://example.com/" + key.intent + "/" + slot + "/" + loc_slug + "/" + std::to_string(j + 1);
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace intentloop
