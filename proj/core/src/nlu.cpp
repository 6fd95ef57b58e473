#include "intentloop/nlu.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"
#include "http_client.hpp"

namespace intentloop {

namespace {

nlohmann::ordered_json frame_for_prompt(const FewShotExample& ex) {
  nlohmann::ordered_json frame;
  frame["topic"] = ex.topic;
  frame["intent"] = ex.intent;
  auto& slots = frame["slots"] = nlohmann::ordered_json::array();
  for (const auto& s : ex.slots) slots.push_back({{"label", s.label}, {"aspect", s.aspect}});
  if (ex.location) frame["location"] = *ex.location;
  return frame;
}

const Topic* resolve_topic(const IntentOntology& ontology, const std::string& name) {
  if (const auto* t = ontology.find_topic(name)) return t;
  const std::string needle = to_lower(trim(name));
  for (const auto& t : ontology.topics()) {
    if (to_lower(t.label) == needle || to_lower(t.id) == needle) return &t;
  }
  return nullptr;
}

const Intent* resolve_intent(const IntentOntology& ontology, const std::string& topic_id, const std::string& name) {
  if (const auto* i = ontology.find_intent({topic_id, name})) return i;
  const std::string needle = to_lower(trim(name));
  for (const auto& i : ontology.intents()) {
    if (i.topic_id == topic_id && (to_lower(i.label) == needle || to_lower(i.id) == needle)) return &i;
  }
  return nullptr;
}

// Capitalized words following "around", "near" or "in".
std::optional<std::string> guess_location(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (const char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch)) != 0 || ch == '\'' || ch == '-') {
      current.push_back(ch);
    } else {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    const std::string w = to_lower(words[i]);
    if (w != "around" && w != "near" && w != "in") continue;
    std::vector<std::string> name;
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (std::isupper(static_cast<unsigned char>(words[j][0])) == 0) break;
      name.push_back(words[j]);
    }
    if (!name.empty()) return join(name, " ");
  }
  return std::nullopt;
}

void add_mention(SemanticFrame& frame, const std::string& slot_id, const std::string& raw_span) {
  for (const auto& m : frame.mentioned_slots) {
    if (m.slot_id == slot_id) return;
  }
  MentionedSlot mention{slot_id, std::nullopt};
  const std::string span = trim(raw_span);
  if (!span.empty()) mention.aspect = AspectValue{slot_id, span, span};
  frame.mentioned_slots.push_back(std::move(mention));
}

}  // namespace

std::vector<FewShotExample> load_few_shot_examples(const std::filesystem::path& path) {
  const auto doc = parse_json_text(read_text_file(path), path.string());
  if (!doc.is_array()) throw ParseError(path.string() + ": expected a JSON array of examples");
  std::vector<FewShotExample> out;
  for (const auto& row : doc) {
    FewShotExample ex;
    ex.request_text = row.at("request").get<std::string>();
    ex.topic = row.at("topic").get<std::string>();
    ex.intent = row.at("intent").get<std::string>();
    for (const auto& s : row.value("slots", nlohmann::json::array())) {
      ex.slots.push_back({s.at("label").get<std::string>(), s.value("aspect", std::string{})});
    }
    if (row.contains("location")) ex.location = row.at("location").get<std::string>();
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<FewShotExample> select_few_shot_pool(std::span<const FewShotExample> examples,
                                                 std::size_t max_examples) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const FewShotExample*>> by_intent;
  for (const auto& ex : examples) {
    const std::string key = ex.topic + "/" + ex.intent;
    if (!by_intent.contains(key)) order.push_back(key);
    by_intent[key].push_back(&ex);
  }
  std::vector<FewShotExample> pool;
  for (std::size_t round = 0; pool.size() < max_examples; ++round) {
    bool any = false;
    for (const auto& key : order) {
      const auto& bucket = by_intent[key];
      if (round < bucket.size() && pool.size() < max_examples) {
        pool.push_back(*bucket[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return pool;
}

std::string build_few_shot_prompt(std::span<const FewShotExample> examples, const ComplexRequest& request) {
  if (examples.empty()) throw ValidationError("few-shot prompt needs at least one example");
  std::string prompt =
      "Extract the topic, intent and slots (with the aspect text that restricts each slot) as one JSON object.\n\n";
  for (const auto& ex : examples) {
    prompt += "REQUEST: " + trim(ex.request_text) + "\n";
    prompt += "FRAME: " + frame_for_prompt(ex).dump() + "\n\n";
  }
  prompt += "REQUEST: " + trim(request.text) + "\n";
  prompt += "FRAME:";
  return prompt;
}

FixtureCompletionProvider::FixtureCompletionProvider(std::map<std::string, std::string> completions)
    : completions_(std::move(completions)) {}

FixtureCompletionProvider FixtureCompletionProvider::load(const std::filesystem::path& path) {
  const auto doc = parse_json_text(read_text_file(path), path.string());
  if (!doc.is_object()) throw ParseError(path.string() + ": expected an object of hash -> completion");
  std::map<std::string, std::string> completions;
  for (const auto& [key, value] : doc.items()) {
    completions.emplace(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  return FixtureCompletionProvider(std::move(completions));
}

std::string FixtureCompletionProvider::fixture_key(std::string_view request_text) {
  return hex64(fnv1a64(trim(request_text)));
}

void FixtureCompletionProvider::add(std::string_view request_text, std::string completion) {
  completions_[fixture_key(request_text)] = std::move(completion);
}

std::string FixtureCompletionProvider::complete(const CompletionRequest& request) {
  auto it = completions_.find(fixture_key(request.request_text));
  if (it == completions_.end()) {
    throw ProviderError("no fixture completion for request '" + request.request_text + "'");
  }
  return it->second;
}

HttpCompletionProvider::HttpCompletionProvider(HttpProviderOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw ValidationError("completion endpoint URL is empty");
}

std::string HttpCompletionProvider::complete(const CompletionRequest& request) {
  detail::HttpRequestOptions req{options_.base_url, "/complete", options_.max_attempts, options_.backoff_ms,
                                 options_.timeout_s};
  const auto response = detail::post_json(
      req, {{"prompt", request.prompt}, {"temperature", request.temperature}, {"max_tokens", request.max_tokens}});
  if (!response.contains("text") || !response.at("text").is_string()) {
    throw ProviderError("completion endpoint returned no 'text' field");
  }
  return response.at("text").get<std::string>();
}

CanonicalSlot canonicalize_slot(std::string_view generated_label, const IntentKey& key,
                                const IntentOntology& ontology, const EmbeddingProvider& embedding,
                                double threshold) {
  const auto& slot_ids = ontology.slot_ids(key);
  CanonicalSlot result;
  result.raw_label = trim(generated_label);
  if (slot_ids.empty()) return result;

  const std::string needle = to_lower(result.raw_label);
  for (const auto& id : slot_ids) {
    if (to_lower(trim(ontology.slot(id).label)) == needle) {
      result.slot_id = id;
      result.nearest_slot_id = id;
      result.distance = 0.0;
      return result;
    }
  }

  std::vector<std::string> texts{result.raw_label};
  for (const auto& id : slot_ids) texts.push_back(ontology.slot(id).label);
  const auto vectors = embedding.embed_batch(texts);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < slot_ids.size(); ++i) {
    const double d = cosine_distance(vectors[0], vectors[i + 1]);
    if (d < best) {
      best = d;
      result.nearest_slot_id = slot_ids[i];
    }
  }
  result.distance = best;
  if (best <= threshold) result.slot_id = result.nearest_slot_id;
  return result;
}

SemanticFrame rule_based_frame(const ComplexRequest& request, const IntentOntology& ontology,
                               const IntentProfile& profile) {
  const auto tokens = tokenize(request.text);
  const std::set<std::string> token_set(tokens.begin(), tokens.end());
  const std::string lowered = to_lower(request.text);

  const Intent* best = nullptr;
  std::pair<std::size_t, std::size_t> best_score{0, 0};
  for (const auto& intent : ontology.intents()) {
    std::size_t overlap = 0;
    const auto label_tokens = tokenize(intent.label);
    for (const auto& t : std::set<std::string>(label_tokens.begin(), label_tokens.end())) {
      if (token_set.contains(t)) ++overlap;
    }
    std::size_t slot_hits = 0;
    for (const auto& id : ontology.slot_ids({intent.topic_id, intent.id})) {
      if (lowered.find(to_lower(trim(ontology.slot(id).label))) != std::string::npos) ++slot_hits;
    }
    const std::pair<std::size_t, std::size_t> score{overlap, slot_hits};
    if (score > best_score) {
      best_score = score;
      best = &intent;
    }
  }
  if (best == nullptr) {
    throw UnknownIntentError("no intent label overlaps the request", request.text);
  }

  SemanticFrame frame;
  frame.topic_id = best->topic_id;
  frame.intent_id = best->id;
  frame.provenance = "rule";
  for (const auto& id : ontology.slot_ids(frame.key())) {
    const std::string label = to_lower(trim(ontology.slot(id).label));
    const auto pos = lowered.find(label);
    if (pos != std::string::npos) add_mention(frame, id, request.text.substr(pos, label.size()));
  }
  frame.location = request.location ? request.location : guess_location(request.text);
  frame.ics = intent_completion_score(profile, frame, {});
  return frame;
}

SemanticFrame parse_frame(const ComplexRequest& request, CompletionProvider* provider,
                          const IntentOntology& ontology, const IntentProfile& profile,
                          const EmbeddingProvider& embedding, std::span<const FewShotExample> few_shot,
                          const NluConfig& config) {
  if (trim(request.text).empty()) throw ValidationError("request text is empty");
  if (ontology.empty()) throw ValidationError("ontology is empty");
  if (provider == nullptr) return rule_based_frame(request, ontology, profile);

  const auto pool = select_few_shot_pool(few_shot, config.max_examples);
  CompletionRequest completion_request{build_few_shot_prompt(pool, request), trim(request.text),
                                       config.temperature, config.max_tokens};
  std::string completion;
  nlohmann::json parsed;
  try {
    completion = provider->complete(completion_request);
    parsed = nlohmann::json::parse(trim(completion));
    if (!parsed.is_object() || !parsed.contains("topic") || !parsed.contains("intent") ||
        !parsed.at("topic").is_string() || !parsed.at("intent").is_string()) {
      throw ParseError("completion is not a frame object");
    }
  } catch (const ProviderError& e) {
    spdlog::warn("completion provider failed ({}); using rule-based NLU", e.what());
    auto frame = rule_based_frame(request, ontology, profile);
    frame.provenance = "fallback";
    return frame;
  } catch (const std::exception& e) {
    spdlog::warn("unusable completion ({}); using rule-based NLU", e.what());
    auto frame = rule_based_frame(request, ontology, profile);
    frame.provenance = "fallback";
    return frame;
  }

  const Topic* topic = resolve_topic(ontology, parsed.at("topic").get<std::string>());
  const Intent* intent = topic == nullptr ? nullptr : resolve_intent(ontology, topic->id, parsed.at("intent").get<std::string>());
  if (intent == nullptr) {
    throw UnknownIntentError("completion names an unknown topic/intent", completion);
  }

  SemanticFrame frame;
  frame.topic_id = intent->topic_id;
  frame.intent_id = intent->id;
  frame.provenance = "lm";
  if (parsed.contains("slots") && parsed.at("slots").is_array()) {
    for (const auto& s : parsed.at("slots")) {
      std::string label;
      std::string aspect;
      if (s.is_string()) {
        label = s.get<std::string>();
      } else if (s.is_object() && s.contains("label") && s.at("label").is_string()) {
        label = s.at("label").get<std::string>();
        if (s.contains("aspect") && s.at("aspect").is_string()) aspect = s.at("aspect").get<std::string>();
      }
      if (trim(label).empty()) continue;
      const auto match = canonicalize_slot(label, frame.key(), ontology, embedding, config.match_threshold);
      if (match.slot_id) {
        add_mention(frame, *match.slot_id, aspect.empty() ? label : aspect);
      } else if (std::find(frame.new_candidates.begin(), frame.new_candidates.end(), match.raw_label) ==
                 frame.new_candidates.end()) {
        frame.new_candidates.push_back(match.raw_label);
      }
    }
  }
  if (request.location) {
    frame.location = request.location;
  } else if (parsed.contains("location") && parsed.at("location").is_string() &&
             !trim(parsed.at("location").get<std::string>()).empty()) {
    frame.location = trim(parsed.at("location").get<std::string>());
  } else {
    frame.location = guess_location(request.text);
  }
  frame.ics = intent_completion_score(profile, frame, {});
  return frame;
}

}  // namespace intentloop
