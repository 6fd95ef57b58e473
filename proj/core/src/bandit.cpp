#include "intentloop/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

namespace {

constexpr std::pair<PolicyKind, std::string_view> kPolicyNames[] = {
    {PolicyKind::epsilon_greedy, "epsilon_greedy"},
    {PolicyKind::adaptive_greedy, "adaptive_greedy"},
    {PolicyKind::adaptive_active_greedy, "adaptive_active_greedy"},
    {PolicyKind::softmax_explorer, "softmax_explorer"},
    {PolicyKind::bootstrapped_ucb, "bootstrapped_ucb"},
    {PolicyKind::bootstrapped_ts, "bootstrapped_ts"},
    {PolicyKind::popularity_baseline, "popularity_baseline"},
    {PolicyKind::uniform_random, "uniform_random"},
};

bool is_bootstrapped(PolicyKind k) { return k == PolicyKind::bootstrapped_ucb || k == PolicyKind::bootstrapped_ts; }
bool is_adaptive(PolicyKind k) {
  return k == PolicyKind::adaptive_greedy || k == PolicyKind::adaptive_active_greedy;
}
bool uses_learner(PolicyKind k) {
  return k == PolicyKind::epsilon_greedy || is_adaptive(k) || k == PolicyKind::softmax_explorer;
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Knuth's method; written out so draws do not depend on the standard library.
int poisson1(std::mt19937_64& rng) {
  const double limit = std::exp(-1.0);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= unit_draw(rng);
  } while (p > limit);
  return k - 1;
}

double percentile_of(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Index of the max; ties to the first (arms are sorted, so lexicographic).
std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<std::uint64_t> rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  std::istringstream is(os.str());
  std::vector<std::uint64_t> out;
  std::uint64_t x;
  while (is >> x) out.push_back(x);
  return out;
}

std::mt19937_64 rng_from_state(const std::vector<std::uint64_t>& state) {
  std::ostringstream os;
  for (std::size_t i = 0; i < state.size(); ++i) os << (i ? " " : "") << state[i];
  std::istringstream is(os.str());
  std::mt19937_64 rng;
  is >> rng;
  if (is.fail()) throw ValidationError("invalid generator state in checkpoint");
  return rng;
}

}  // namespace

std::string_view to_string(PolicyKind kind) noexcept {
  for (const auto& [k, name] : kPolicyNames)
    if (k == kind) return name;
  return "unknown";
}

PolicyKind policy_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kPolicyNames)
    if (n == name) return k;
  throw ValidationError("unknown policy '" + std::string(name) + "'");
}

std::vector<PolicyKind> all_policy_kinds() {
  std::vector<PolicyKind> out;
  for (const auto& [k, name] : kPolicyNames) out.push_back(k);
  return out;
}

nlohmann::ordered_json PolicyConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"epsilon", epsilon},
          {"epsilon_decay", epsilon_decay},
          {"percentile", percentile},
          {"percentile_decay", percentile_decay},
          {"window", window},
          {"softmax_temperature", softmax_temperature},
          {"bootstrap_resamples", bootstrap_resamples},
          {"ucb_percentile", ucb_percentile},
          {"ridge_lambda", ridge_lambda},
          {"seed", seed}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& doc, PolicyConfig c) {
  if (!doc.is_object()) throw ValidationError("policy config must be an object");
  try {
    if (doc.contains("kind")) c.kind = policy_kind_from_string(doc.at("kind").get<std::string>());
    c.epsilon = doc.value("epsilon", c.epsilon);
    c.epsilon_decay = doc.value("epsilon_decay", c.epsilon_decay);
    c.percentile = doc.value("percentile", c.percentile);
    c.percentile_decay = doc.value("percentile_decay", c.percentile_decay);
    c.window = doc.value("window", c.window);
    c.softmax_temperature = doc.value("softmax_temperature", c.softmax_temperature);
    c.bootstrap_resamples = doc.value("bootstrap_resamples", c.bootstrap_resamples);
    c.ucb_percentile = doc.value("ucb_percentile", c.ucb_percentile);
    c.ridge_lambda = doc.value("ridge_lambda", c.ridge_lambda);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("policy config: ") + e.what());
  }
  if (c.epsilon < 0 || c.epsilon > 1) throw ValidationError("epsilon must be in [0, 1]");
  if (c.softmax_temperature <= 0) throw ValidationError("softmax temperature must be positive");
  if (c.bootstrap_resamples == 0) throw ValidationError("bootstrap_resamples must be positive");
  if (c.ridge_lambda <= 0) throw ValidationError("ridge_lambda must be positive");
  if (c.window == 0) throw ValidationError("window must be positive");
  return c;
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& doc) { return from_json(doc, PolicyConfig{}); }

PolicyConfig load_policy_config(const std::filesystem::path& path, PolicyKind kind) {
  const auto doc = parse_json_text(read_text_file(path), path.string());
  PolicyConfig c;
  c.kind = kind;
  if (doc.contains("defaults")) c = PolicyConfig::from_json(doc.at("defaults"), c);
  const std::string name(to_string(kind));
  if (doc.contains(name)) c = PolicyConfig::from_json(doc.at(name), c);
  c.kind = kind;
  return c;
}

// ---- RidgeArm

RidgeArm::RidgeArm(std::size_t context_dim, double lambda)
    : dim_(context_dim + 1), a_inv_(dim_ * dim_, 0.0), b_(dim_, 0.0), theta_(dim_, 0.0) {
  for (std::size_t i = 0; i < dim_; ++i) a_inv_[i * dim_ + i] = 1.0 / lambda;
}

double RidgeArm::predict(std::span<const double> x) const {
  double s = theta_[dim_ - 1];
  for (std::size_t j = 0; j + 1 < dim_; ++j) s += theta_[j] * x[j];
  return s;
}

void RidgeArm::update(std::span<const double> x, double reward, double weight) {
  if (weight <= 0.0) return;
  std::vector<double> z(x.begin(), x.end());
  z.push_back(1.0);
  std::vector<double> v(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* row = a_inv_.data() + i * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += row[j] * z[j];
    v[i] = s;
  }
  double denom = 1.0;
  for (std::size_t i = 0; i < dim_; ++i) denom += weight * z[i] * v[i];
  const double f = weight / denom;
  for (std::size_t i = 0; i < dim_; ++i) {
    double* row = a_inv_.data() + i * dim_;
    const double vi = v[i] * f;
    for (std::size_t j = 0; j < dim_; ++j) row[j] -= vi * v[j];
  }
  for (std::size_t i = 0; i < dim_; ++i) b_[i] += weight * reward * z[i];
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* row = a_inv_.data() + i * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += row[j] * b_[j];
    theta_[i] = s;
  }
}

nlohmann::json RidgeArm::to_json() const { return {{"dim", dim_}, {"a_inv", a_inv_}, {"b", b_}, {"theta", theta_}}; }

RidgeArm RidgeArm::from_json(const nlohmann::json& doc) {
  RidgeArm a;
  a.dim_ = doc.at("dim").get<std::size_t>();
  a.a_inv_ = doc.at("a_inv").get<std::vector<double>>();
  a.b_ = doc.at("b").get<std::vector<double>>();
  a.theta_ = doc.at("theta").get<std::vector<double>>();
  if (a.dim_ == 0 || a.a_inv_.size() != a.dim_ * a.dim_ || a.b_.size() != a.dim_ || a.theta_.size() != a.dim_)
    throw ValidationError("ridge arm checkpoint has inconsistent sizes");
  for (double w : a.theta_)
    if (!std::isfinite(w)) throw ValidationError("ridge arm weights are not finite");
  return a;
}

// ---- BanditModel

BanditModel::BanditModel(IntentKey key, std::vector<std::string> arms, ContextScheme scheme,
                         std::size_t context_dim, PolicyConfig config)
    : key_(std::move(key)),
      arms_(std::move(arms)),
      scheme_(scheme),
      context_dim_(context_dim),
      config_(config),
      stats_(arms_.size()),
      explore_rng_(config.seed),
      update_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL),
      mutex_(std::make_unique<std::mutex>()) {
  for (std::size_t i = 0; i < arms_.size(); ++i)
    if (!arm_pos_.emplace(arms_[i], i).second) throw ValidationError("duplicate arm '" + arms_[i] + "'");
  if (uses_learner(config_.kind)) learners_.assign(arms_.size(), RidgeArm(context_dim_, config_.ridge_lambda));
  if (is_bootstrapped(config_.kind))
    replicas_.assign(arms_.size(),
                     std::vector<RidgeArm>(config_.bootstrap_resamples, RidgeArm(context_dim_, config_.ridge_lambda)));
}

BanditModel::BanditModel(const BanditModel& other) : mutex_(std::make_unique<std::mutex>()) { *this = other; }

BanditModel& BanditModel::operator=(const BanditModel& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(*other.mutex_, *mutex_);
  key_ = other.key_;
  arms_ = other.arms_;
  arm_pos_ = other.arm_pos_;
  scheme_ = other.scheme_;
  context_dim_ = other.context_dim_;
  config_ = other.config_;
  learners_ = other.learners_;
  replicas_ = other.replicas_;
  stats_ = other.stats_;
  window_ = other.window_;
  window_next_ = other.window_next_;
  updates_ = other.updates_;
  explore_rng_ = other.explore_rng_;
  update_rng_ = other.update_rng_;
  return *this;
}

std::size_t BanditModel::arm_index(std::string_view arm) const {
  auto it = arm_pos_.find(arm);
  if (it == arm_pos_.end())
    throw ValidationError("slot '" + std::string(arm) + "' is not an arm of " + key_.str());
  return it->second;
}

void BanditModel::check_context(const ContextVector& context) const {
  if (context.values.size() != context_dim_)
    throw ValidationError("context has dimension " + std::to_string(context.values.size()) + ", model expects " +
                          std::to_string(context_dim_));
}

double BanditModel::arm_score(std::size_t arm, std::span<const double> x) const {
  switch (config_.kind) {
    case PolicyKind::popularity_baseline: return static_cast<double>(stats_[arm].rewards);
    case PolicyKind::uniform_random: return 0.0;
    case PolicyKind::bootstrapped_ucb: {
      std::vector<double> v;
      for (const auto& r : replicas_[arm]) v.push_back(r.predict(x));
      return percentile_of(std::move(v), config_.ucb_percentile);
    }
    case PolicyKind::bootstrapped_ts: {
      double s = 0.0;
      for (const auto& r : replicas_[arm]) s += r.predict(x);
      return s / static_cast<double>(replicas_[arm].size());
    }
    default: return learners_[arm].predict(x);
  }
}

double BanditModel::current_epsilon() const {
  return config_.epsilon * std::pow(config_.epsilon_decay, static_cast<double>(updates_));
}

double BanditModel::current_percentile() const {
  return config_.percentile * std::pow(config_.percentile_decay, static_cast<double>(updates_));
}

double BanditModel::adaptive_threshold() const {
  if (window_.empty()) return -std::numeric_limits<double>::infinity();
  return percentile_of(window_, current_percentile());
}

bool BanditModel::exploits(std::span<const double> x, std::span<const std::string> eligible) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : eligible) best = std::max(best, arm_score(arm_index(a), x));
  return best >= adaptive_threshold();
}

BanditModel::Distribution BanditModel::distribution(std::span<const double> x, std::span<const std::string> eligible,
                                                    int mode) const {
  std::set<std::string> uniq;
  for (const auto& a : eligible) {
    arm_index(a);
    uniq.insert(a);
  }
  Distribution d{{uniq.begin(), uniq.end()}, {}};
  const std::size_t n = d.arms.size();
  if (n == 0) return d;
  d.probs.assign(n, 0.0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = arm_pos_.find(d.arms[i])->second;

  auto point_mass = [&](std::size_t i) { d.probs[i] = 1.0; };
  auto uniform = [&] { std::fill(d.probs.begin(), d.probs.end(), 1.0 / static_cast<double>(n)); };

  if (config_.kind == PolicyKind::uniform_random) {
    uniform();
    return d;
  }
  if (config_.kind == PolicyKind::bootstrapped_ts) {
    const std::size_t m = config_.bootstrap_resamples;
    for (std::size_t r = 0; r < m; ++r) {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = replicas_[idx[i]][r].predict(x);
      d.probs[argmax(s)] += 1.0 / static_cast<double>(m);
    }
    return d;
  }

  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = arm_score(idx[i], x);
  const std::size_t best = argmax(s);

  switch (config_.kind) {
    case PolicyKind::epsilon_greedy: {
      const double eps = current_epsilon();
      std::fill(d.probs.begin(), d.probs.end(), eps / static_cast<double>(n));
      d.probs[best] += 1.0 - eps;
      break;
    }
    case PolicyKind::adaptive_greedy:
    case PolicyKind::adaptive_active_greedy: {
      if (mode == 1 || (mode == -1 && s[best] >= adaptive_threshold())) {
        point_mass(best);
      } else if (config_.kind == PolicyKind::adaptive_greedy) {
        uniform();
      } else {
        std::size_t least = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (stats_[idx[i]].observations < stats_[idx[least]].observations) least = i;
        point_mass(least);
      }
      break;
    }
    case PolicyKind::softmax_explorer: {
      std::vector<double> z(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(s[i], 1e-3, 1.0 - 1e-3);
        z[i] = std::log(p / (1.0 - p)) / config_.softmax_temperature;
      }
      const double zmax = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += d.probs[i] = std::exp(z[i] - zmax);
      for (auto& p : d.probs) p /= total;
      break;
    }
    default: point_mass(best);
  }
  return d;
}

std::size_t BanditModel::sample(const Distribution& d, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < d.probs.size(); ++i) {
    if (d.probs[i] <= 0.0) continue;
    last = i;
    acc += d.probs[i];
    if (u < acc) return i;
  }
  return last;
}

Slate BanditModel::suggest(const ContextVector& context, std::span<const std::string> eligible, std::size_t k) {
  std::lock_guard lock(*mutex_);
  check_context(context);
  std::vector<std::string> remaining(eligible.begin(), eligible.end());
  Slate slate;
  // Adaptive policies explore or exploit for the whole slate.
  int mode = -1;
  if (is_adaptive(config_.kind) && !remaining.empty()) mode = exploits(context.values, remaining) ? 1 : 0;
  while (slate.arms.size() < k && !remaining.empty()) {
    auto d = distribution(context.values, remaining, mode);
    if (d.arms.empty()) break;
    const auto i = sample(d, unit_draw(explore_rng_));
    slate.arms.push_back(d.arms[i]);
    slate.propensities.push_back(d.probs[i]);
    std::erase(remaining, d.arms[i]);
  }
  return slate;
}

std::string BanditModel::choose(const ContextVector& context, std::span<const std::string> eligible,
                                std::mt19937_64& rng) const {
  std::lock_guard lock(*mutex_);
  check_context(context);
  auto d = distribution(context.values, eligible);
  if (d.arms.empty()) throw ValidationError("no eligible arms");
  return d.arms[sample(d, unit_draw(rng))];
}

std::map<std::string, double> BanditModel::action_probabilities(const ContextVector& context,
                                                                std::span<const std::string> eligible) const {
  std::lock_guard lock(*mutex_);
  check_context(context);
  auto d = distribution(context.values, eligible);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < d.arms.size(); ++i) out[d.arms[i]] = d.probs[i];
  return out;
}

std::vector<double> BanditModel::scores(const ContextVector& context, std::span<const std::string> eligible) const {
  std::lock_guard lock(*mutex_);
  check_context(context);
  std::vector<double> out;
  for (const auto& a : eligible) out.push_back(arm_score(arm_index(a), context.values));
  return out;
}

void BanditModel::update(const ContextVector& context, std::span<const std::string> shown,
                         std::span<const std::string> selected, std::span<const std::string> eligible) {
  std::lock_guard lock(*mutex_);
  check_context(context);
  std::vector<std::size_t> shown_idx;
  for (const auto& a : shown) {
    const auto i = arm_index(a);
    if (std::find(shown_idx.begin(), shown_idx.end(), i) != shown_idx.end())
      throw ValidationError("slot '" + a + "' shown twice");
    shown_idx.push_back(i);
  }
  for (const auto& s : selected)
    if (std::find(shown.begin(), shown.end(), s) == shown.end())
      throw ValidationError("selected slot '" + s + "' was not shown");

  const std::span<const double> x = context.values;
  if (is_adaptive(config_.kind)) {
    double best = -std::numeric_limits<double>::infinity();
    if (eligible.empty()) {
      for (std::size_t a = 0; a < arms_.size(); ++a) best = std::max(best, arm_score(a, x));
    } else {
      for (const auto& a : eligible) best = std::max(best, arm_score(arm_index(a), x));
      for (const auto a : shown_idx) best = std::max(best, arm_score(a, x));
    }
    if (window_.size() < config_.window) {
      window_.push_back(best);
    } else {
      window_[window_next_] = best;
      window_next_ = (window_next_ + 1) % config_.window;
    }
  }
  for (std::size_t p = 0; p < shown.size(); ++p) {
    const auto a = shown_idx[p];
    const bool hit = std::find(selected.begin(), selected.end(), shown[p]) != selected.end();
    const double r = hit ? 1.0 : 0.0;
    stats_[a].observations += 1;
    stats_[a].rewards += hit ? 1 : 0;
    if (uses_learner(config_.kind)) learners_[a].update(x, r);
    if (is_bootstrapped(config_.kind))
      for (auto& rep : replicas_[a]) rep.update(x, r, static_cast<double>(poisson1(update_rng_)));
  }
  ++updates_;
}

std::uint64_t BanditModel::updates() const {
  std::lock_guard lock(*mutex_);
  return updates_;
}

ArmStats BanditModel::arm_stats(std::string_view arm) const {
  std::lock_guard lock(*mutex_);
  return stats_[arm_index(arm)];
}

nlohmann::json BanditModel::learned_json() const {
  nlohmann::json doc;
  doc["format"] = "intentloop.bandit";
  doc["version"] = 1;
  doc["topic"] = key_.topic;
  doc["intent"] = key_.intent;
  doc["arms"] = arms_;
  doc["scheme"] = to_string(scheme_);
  doc["context_dim"] = context_dim_;
  doc["config"] = config_.to_json();
  auto& learners = doc["learners"] = nlohmann::json::array();
  for (const auto& l : learners_) learners.push_back(l.to_json());
  auto& replicas = doc["replicas"] = nlohmann::json::array();
  for (const auto& arm : replicas_) {
    auto row = nlohmann::json::array();
    for (const auto& r : arm) row.push_back(r.to_json());
    replicas.push_back(std::move(row));
  }
  auto& stats = doc["stats"] = nlohmann::json::array();
  for (const auto& s : stats_) stats.push_back({s.observations, s.rewards});
  doc["window"] = window_;
  doc["window_next"] = window_next_;
  doc["updates"] = updates_;
  doc["update_rng"] = rng_state(update_rng_);
  return doc;
}

nlohmann::json BanditModel::learned_state() const {
  std::lock_guard lock(*mutex_);
  return learned_json();
}

nlohmann::json BanditModel::checkpoint() const {
  std::lock_guard lock(*mutex_);
  auto doc = learned_json();
  doc["explore_rng"] = rng_state(explore_rng_);
  return doc;
}

BanditModel BanditModel::from_checkpoint(const nlohmann::json& doc) {
  if (doc.value("format", "") != "intentloop.bandit") throw ValidationError("not a bandit checkpoint");
  try {
    BanditModel m({doc.at("topic").get<std::string>(), doc.at("intent").get<std::string>()},
                  doc.at("arms").get<std::vector<std::string>>(),
                  context_scheme_from_string(doc.at("scheme").get<std::string>()),
                  doc.at("context_dim").get<std::size_t>(), PolicyConfig::from_json(doc.at("config")));
    m.learners_.clear();
    for (const auto& l : doc.at("learners")) m.learners_.push_back(RidgeArm::from_json(l));
    m.replicas_.clear();
    for (const auto& row : doc.at("replicas")) {
      std::vector<RidgeArm> reps;
      for (const auto& r : row) reps.push_back(RidgeArm::from_json(r));
      m.replicas_.push_back(std::move(reps));
    }
    if ((uses_learner(m.config_.kind) && m.learners_.size() != m.arms_.size()) ||
        (is_bootstrapped(m.config_.kind) && m.replicas_.size() != m.arms_.size()))
      throw ValidationError("bandit checkpoint has the wrong number of arm models");
    const auto& stats = doc.at("stats");
    if (stats.size() != m.arms_.size()) throw ValidationError("bandit checkpoint has the wrong number of arm stats");
    for (std::size_t i = 0; i < stats.size(); ++i)
      m.stats_[i] = {stats[i].at(0).get<std::uint64_t>(), stats[i].at(1).get<std::uint64_t>()};
    m.window_ = doc.at("window").get<std::vector<double>>();
    m.window_next_ = doc.at("window_next").get<std::size_t>();
    m.updates_ = doc.at("updates").get<std::uint64_t>();
    m.update_rng_ = rng_from_state(doc.at("update_rng").get<std::vector<std::uint64_t>>());
    if (doc.contains("explore_rng"))
      m.explore_rng_ = rng_from_state(doc.at("explore_rng").get<std::vector<std::uint64_t>>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bandit checkpoint: ") + e.what());
  }
}

std::vector<std::string> popularity_suggest(const IntentProfile& profile, const IntentKey& key,
                                            std::span<const std::string> exclusions, std::size_t k) {
  const auto dist = profile.distribution(key);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dist.slot_ids.size(); ++i)
    if (std::find(exclusions.begin(), exclusions.end(), dist.slot_ids[i]) == exclusions.end()) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist.probabilities[a] != dist.probabilities[b]) return dist.probabilities[a] > dist.probabilities[b];
    return dist.slot_ids[a] < dist.slot_ids[b];
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < order.size() && out.size() < k; ++i) out.push_back(dist.slot_ids[order[i]]);
  return out;
}

// ---- BanditRegistry

BanditRegistry::BanditRegistry(const IntentOntology& ontology, ContextScheme scheme, PolicyConfig config,
                               std::size_t embed_dim, std::size_t slot_embed_dim)
    : ontology_(&ontology),
      scheme_(scheme),
      config_(config),
      embed_dim_(embed_dim),
      slot_embed_dim_(slot_embed_dim) {}

std::size_t BanditRegistry::context_dim(const IntentKey& key) const {
  return intentloop::context_dim(scheme_, ontology_->slot_ids(key).size(), embed_dim_, slot_embed_dim_);
}

std::shared_ptr<BanditModel> BanditRegistry::model(const IntentKey& key) {
  std::lock_guard lock(mutex_);
  if (auto it = models_.find(key); it != models_.end()) return it->second;
  PolicyConfig cfg = config_;
  cfg.seed = config_.seed ^ fnv1a64(key.str());
  auto m = std::make_shared<BanditModel>(key, ontology_->slot_ids(key), scheme_, context_dim(key), cfg);
  models_.emplace(key, m);
  return m;
}

bool BanditRegistry::contains(const IntentKey& key) const {
  std::lock_guard lock(mutex_);
  return models_.contains(key);
}

std::size_t BanditRegistry::size() const {
  std::lock_guard lock(mutex_);
  return models_.size();
}

nlohmann::json BanditRegistry::checkpoint() const {
  std::lock_guard lock(mutex_);
  nlohmann::json doc{{"format", "intentloop.registry"}, {"version", 1}, {"scheme", to_string(scheme_)}};
  doc["config"] = config_.to_json();
  auto& models = doc["models"] = nlohmann::json::array();
  for (const auto& [key, m] : models_) models.push_back(m->checkpoint());
  return doc;
}

nlohmann::json BanditRegistry::learned_state() const {
  std::lock_guard lock(mutex_);
  auto models = nlohmann::json::array();
  for (const auto& [key, m] : models_) models.push_back(m->learned_state());
  return {{"scheme", to_string(scheme_)}, {"models", models}};
}

void BanditRegistry::load_checkpoint(const nlohmann::json& doc) {
  if (doc.value("format", "") != "intentloop.registry") throw ValidationError("not a bandit registry checkpoint");
  if (doc.value("scheme", "") != to_string(scheme_)) throw ValidationError("checkpoint context scheme differs");
  std::map<IntentKey, std::shared_ptr<BanditModel>> loaded;
  for (const auto& m : doc.at("models")) {
    auto model = std::make_shared<BanditModel>(BanditModel::from_checkpoint(m));
    if (model->context_dim() != context_dim(model->key()))
      throw ValidationError("checkpoint for " + model->key().str() + " has a different context dimension");
    loaded.emplace(model->key(), std::move(model));
  }
  std::lock_guard lock(mutex_);
  models_ = std::move(loaded);
}

}  // namespace intentloop
