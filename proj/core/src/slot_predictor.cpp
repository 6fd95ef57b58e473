#include "intentloop/slot_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

nlohmann::json SlotPredictorConfig::to_json() const {
  return {{"embed_dim", embed_dim},   {"hidden_dim", hidden_dim}, {"learning_rate", learning_rate},
          {"batch_size", batch_size}, {"dropout", dropout},       {"epochs", epochs},
          {"seed", seed}};
}

SlotPredictorConfig SlotPredictorConfig::from_json(const nlohmann::json& doc) {
  SlotPredictorConfig c;
  c.embed_dim = doc.value("embed_dim", c.embed_dim);
  c.hidden_dim = doc.value("hidden_dim", c.hidden_dim);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.dropout = doc.value("dropout", c.dropout);
  c.epochs = doc.value("epochs", c.epochs);
  c.seed = doc.value("seed", c.seed);
  if (c.embed_dim == 0 || c.hidden_dim == 0 || c.batch_size == 0)
    throw ValidationError("slot predictor dimensions and batch size must be positive");
  if (c.dropout < 0.0 || c.dropout >= 1.0) throw ValidationError("dropout must be in [0, 1)");
  return c;
}

struct SlotPredictorModel::Forward {
  std::vector<std::size_t> words;
  std::vector<std::size_t> slots;
  std::vector<double> x;                 // [mean word ; pooled slot]
  std::vector<std::size_t> pool_argmax;  // slot row chosen per pooled dim
  std::vector<double> z1, h, mask, o, y;
};

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Sigmoid cross-entropy from the logit, stable for large |o|.
double bce_logit(double o, double t) { return std::max(o, 0.0) - o * t + std::log1p(std::exp(-std::abs(o))); }

struct Adam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m, v;

  void step(const std::vector<std::vector<double>*>& params, const std::vector<std::vector<double>>& grads) {
    if (m.empty()) {
      for (auto* p : params) {
        m.emplace_back(p->size(), 0.0);
        v.emplace_back(p->size(), 0.0);
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      const auto& g = grads[k];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[k][j] = b1 * m[k][j] + (1 - b1) * g[j];
        v[k][j] = b2 * v[k][j] + (1 - b2) * g[j] * g[j];
        p[j] -= lr * (m[k][j] / c1) / (std::sqrt(v[k][j] / c2) + eps);
      }
    }
  }
};

}  // namespace

bool SlotPredictorModel::has_slot(std::string_view slot_id) const {
  return slot_index_.contains(std::string(slot_id));
}

std::span<const double> SlotPredictorModel::slot_embedding(std::string_view slot_id) const {
  if (!trained_) throw StateError("slot predictor is not trained");
  auto it = slot_index_.find(std::string(slot_id));
  if (it == slot_index_.end()) throw ReferenceError("slot '" + std::string(slot_id) + "' unknown to the predictor");
  return {slot_emb_.data() + it->second * config_.embed_dim, config_.embed_dim};
}

void SlotPredictorModel::init(std::vector<std::string> vocabulary, std::vector<std::string> slot_universe,
                              const SlotPredictorConfig& config) {
  config_ = config;
  vocabulary_.assign(1, "<unk>");
  vocabulary_.insert(vocabulary_.end(), vocabulary.begin(), vocabulary.end());
  word_index_.clear();
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) word_index_[vocabulary_[i]] = i;
  slot_ids_ = std::move(slot_universe);
  slot_index_.clear();
  for (std::size_t i = 0; i < slot_ids_.size(); ++i) slot_index_[slot_ids_[i]] = i;

  const std::size_t E = config_.embed_dim, H = config_.hidden_dim, S = slot_ids_.size();
  std::mt19937_64 rng(config_.seed);
  auto fill = [&](std::vector<double>& w, std::size_t n, double limit) {
    std::uniform_real_distribution<double> u(-limit, limit);
    w.resize(n);
    for (auto& x : w) x = u(rng);
  };
  fill(word_emb_, vocabulary_.size() * E, 0.05);
  fill(slot_emb_, S * E, 0.05);
  fill(w1_, H * 2 * E, std::sqrt(6.0 / static_cast<double>(2 * E + H)));
  b1_.assign(H, 0.0);
  fill(w2_, S * H, std::sqrt(6.0 / static_cast<double>(H + S)));
  b2_.assign(S, 0.0);
  epoch_losses_.clear();
}

std::vector<std::size_t> SlotPredictorModel::word_ids(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& tok : tokenize(text)) {
    auto it = word_index_.find(tok);
    ids.push_back(it == word_index_.end() ? 0 : it->second);
  }
  return ids;
}

std::vector<std::size_t> SlotPredictorModel::slot_positions(std::span<const std::string> slots) const {
  std::vector<std::size_t> pos;
  for (const auto& s : slots) {
    auto it = slot_index_.find(s);
    if (it == slot_index_.end()) throw ValidationError("slot '" + s + "' unknown to the predictor");
    pos.push_back(it->second);
  }
  return pos;
}

namespace {

void forward_pass(const SlotPredictorConfig& cfg, const std::vector<double>& word_emb,
                  const std::vector<double>& slot_emb, const std::vector<double>& w1, const std::vector<double>& b1,
                  const std::vector<double>& w2, const std::vector<double>& b2, std::size_t S, auto& f,
                  std::mt19937_64* dropout_rng) {
  const std::size_t E = cfg.embed_dim, H = cfg.hidden_dim;
  f.x.assign(2 * E, 0.0);
  f.pool_argmax.assign(E, static_cast<std::size_t>(-1));
  if (!f.words.empty()) {
    for (auto w : f.words)
      for (std::size_t j = 0; j < E; ++j) f.x[j] += word_emb[w * E + j];
    for (std::size_t j = 0; j < E; ++j) f.x[j] /= static_cast<double>(f.words.size());
  }
  for (std::size_t j = 0; j < E; ++j) {
    for (auto s : f.slots) {
      const double v = slot_emb[s * E + j];
      if (f.pool_argmax[j] == static_cast<std::size_t>(-1) || v > f.x[E + j]) {
        f.x[E + j] = v;
        f.pool_argmax[j] = s;
      }
    }
  }
  f.z1.assign(H, 0.0);
  f.h.assign(H, 0.0);
  f.mask.assign(H, 1.0);
  for (std::size_t i = 0; i < H; ++i) {
    double z = b1[i];
    const double* row = w1.data() + i * 2 * E;
    for (std::size_t j = 0; j < 2 * E; ++j) z += row[j] * f.x[j];
    f.z1[i] = z;
  }
  if (dropout_rng && cfg.dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - cfg.dropout);
    for (auto& m : f.mask) m = keep(*dropout_rng) ? 1.0 / (1.0 - cfg.dropout) : 0.0;
  }
  for (std::size_t i = 0; i < H; ++i) f.h[i] = std::max(f.z1[i], 0.0) * f.mask[i];
  f.o.assign(S, 0.0);
  f.y.assign(S, 0.0);
  for (std::size_t k = 0; k < S; ++k) {
    double z = b2[k];
    const double* row = w2.data() + k * H;
    for (std::size_t i = 0; i < H; ++i) z += row[i] * f.h[i];
    f.o[k] = z;
    f.y[k] = sigmoid(z);
  }
}

}  // namespace

std::vector<double> SlotPredictorModel::predict(std::string_view request_text,
                                                std::span<const std::string> input_slots) const {
  if (!trained_) throw StateError("slot predictor is not trained");
  Forward f;
  f.words = word_ids(request_text);
  f.slots = slot_positions(input_slots);
  forward_pass(config_, word_emb_, slot_emb_, w1_, b1_, w2_, b2_, slot_ids_.size(), f, nullptr);
  return f.y;
}

double SlotPredictorModel::loss(std::span<const SlotTrainingRow> rows) const {
  if (rows.empty()) throw ValidationError("no rows to evaluate");
  const std::size_t S = slot_ids_.size();
  double total = 0.0;
  for (const auto& row : rows) {
    Forward f;
    f.words = word_ids(row.request_text);
    f.slots = slot_positions(row.input_slots);
    forward_pass(config_, word_emb_, slot_emb_, w1_, b1_, w2_, b2_, S, f, nullptr);
    std::vector<double> t(S, 0.0);
    for (auto p : slot_positions(row.target_slots)) t[p] = 1.0;
    double l = 0.0;
    for (std::size_t k = 0; k < S; ++k) l += bce_logit(f.o[k], t[k]);
    total += l / static_cast<double>(S);
  }
  return total / static_cast<double>(rows.size());
}

SlotPredictorModel train_slot_predictor(std::span<const SlotTrainingRow> rows, std::vector<std::string> slot_universe,
                                        const SlotPredictorConfig& config) {
  if (rows.empty()) throw ValidationError("slot predictor needs at least one training row");
  if (slot_universe.empty()) throw ValidationError("slot predictor needs a non-empty slot universe");
  std::set<std::string> vocab;
  for (const auto& row : rows) {
    for (const auto& tok : tokenize(row.request_text)) vocab.insert(tok);
    for (const auto& t : row.target_slots)
      if (std::find(row.input_slots.begin(), row.input_slots.end(), t) != row.input_slots.end())
        throw ValidationError("slot '" + t + "' is both an input and a target of one row");
  }

  SlotPredictorModel model;
  model.init({vocab.begin(), vocab.end()}, std::move(slot_universe), config);
  const std::size_t E = config.embed_dim, H = config.hidden_dim, S = model.slot_ids_.size();

  // Pre-resolve ids so unknown slots fail before training starts.
  std::vector<SlotPredictorModel::Forward> cached(rows.size());
  std::vector<std::vector<double>> targets(rows.size(), std::vector<double>(S, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    cached[r].words = model.word_ids(rows[r].request_text);
    cached[r].slots = model.slot_positions(rows[r].input_slots);
    for (auto p : model.slot_positions(rows[r].target_slots)) targets[r][p] = 1.0;
  }

  std::vector<std::vector<double>*> params{&model.word_emb_, &model.slot_emb_, &model.w1_,
                                           &model.b1_,       &model.w2_,       &model.b2_};
  std::vector<std::vector<double>> grads(params.size());
  Adam adam{config.learning_rate};
  std::mt19937_64 rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dh(H), dx(2 * E);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t k = 0; k < params.size(); ++k) grads[k].assign(params[k]->size(), 0.0);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t bi = start; bi < end; ++bi) {
        auto& f = cached[order[bi]];
        const auto& t = targets[order[bi]];
        forward_pass(config, model.word_emb_, model.slot_emb_, model.w1_, model.b1_, model.w2_, model.b2_, S, f,
                     &rng);
        double l = 0.0;
        for (std::size_t k = 0; k < S; ++k) l += bce_logit(f.o[k], t[k]);
        epoch_loss += l / static_cast<double>(S);

        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t k = 0; k < S; ++k) {
          const double d_o = (f.y[k] - t[k]) / static_cast<double>(S) * inv_batch;
          grads[5][k] += d_o;
          double* gw2 = grads[4].data() + k * H;
          const double* w2 = model.w2_.data() + k * H;
          for (std::size_t i = 0; i < H; ++i) {
            gw2[i] += d_o * f.h[i];
            dh[i] += d_o * w2[i];
          }
        }
        std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t i = 0; i < H; ++i) {
          const double dz = f.z1[i] > 0.0 ? dh[i] * f.mask[i] : 0.0;
          if (dz == 0.0) continue;
          grads[3][i] += dz;
          double* gw1 = grads[2].data() + i * 2 * E;
          const double* w1 = model.w1_.data() + i * 2 * E;
          for (std::size_t j = 0; j < 2 * E; ++j) {
            gw1[j] += dz * f.x[j];
            dx[j] += dz * w1[j];
          }
        }
        if (!f.words.empty()) {
          const double share = 1.0 / static_cast<double>(f.words.size());
          for (auto w : f.words)
            for (std::size_t j = 0; j < E; ++j) grads[0][w * E + j] += dx[j] * share;
        }
        for (std::size_t j = 0; j < E; ++j)
          if (f.pool_argmax[j] != static_cast<std::size_t>(-1)) grads[1][f.pool_argmax[j] * E + j] += dx[E + j];
      }
      adam.step(params, grads);
    }
    model.epoch_losses_.push_back(epoch_loss / static_cast<double>(rows.size()));
  }
  model.trained_ = true;
  return model;
}

std::vector<SlotTrainingRow> rows_from_logs(std::span<const InteractionRecord> logs) {
  std::vector<SlotTrainingRow> rows;
  rows.reserve(logs.size());
  for (const auto& rec : logs) {
    SlotTrainingRow row{rec.request_text, rec.context_slots, {}};
    for (const auto& s : rec.selected)
      if (std::find(row.input_slots.begin(), row.input_slots.end(), s) == row.input_slots.end())
        row.target_slots.push_back(s);
    rows.push_back(std::move(row));
  }
  return rows;
}

SlotPredictorModel train_slot_predictor(std::span<const InteractionRecord> logs, const SlotPredictorConfig& config) {
  if (logs.empty()) throw ValidationError("slot predictor needs at least one interaction record");
  std::set<std::string> universe;
  for (const auto& rec : logs) {
    universe.insert(rec.context_slots.begin(), rec.context_slots.end());
    universe.insert(rec.shown.begin(), rec.shown.end());
  }
  const auto rows = rows_from_logs(logs);
  return train_slot_predictor(rows, {universe.begin(), universe.end()}, config);
}

nlohmann::json SlotPredictorModel::to_json() const {
  nlohmann::json doc;
  doc["format"] = "intentloop.slot_predictor";
  doc["version"] = 1;
  doc["config"] = config_.to_json();
  doc["trained"] = trained_;
  doc["vocabulary"] = vocabulary_;
  doc["slots"] = slot_ids_;
  doc["word_embeddings"] = word_emb_;
  doc["slot_embeddings"] = slot_emb_;
  doc["w1"] = w1_;
  doc["b1"] = b1_;
  doc["w2"] = w2_;
  doc["b2"] = b2_;
  doc["epoch_losses"] = epoch_losses_;
  return doc;
}

SlotPredictorModel SlotPredictorModel::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "intentloop.slot_predictor")
    throw ValidationError("not a slot predictor checkpoint");
  SlotPredictorModel m;
  auto vocab = doc.at("vocabulary").get<std::vector<std::string>>();
  if (vocab.empty()) throw ValidationError("slot predictor vocabulary is empty");
  vocab.erase(vocab.begin());
  m.init(std::move(vocab), doc.at("slots").get<std::vector<std::string>>(),
         SlotPredictorConfig::from_json(doc.at("config")));
  auto load = [&](const char* name, std::vector<double>& dst) {
    auto v = doc.at(name).get<std::vector<double>>();
    if (v.size() != dst.size()) throw ValidationError(std::string("checkpoint array '") + name + "' has wrong size");
    for (double x : v)
      if (!std::isfinite(x)) throw ValidationError(std::string("checkpoint array '") + name + "' is not finite");
    dst = std::move(v);
  };
  load("word_embeddings", m.word_emb_);
  load("slot_embeddings", m.slot_emb_);
  load("w1", m.w1_);
  load("b1", m.b1_);
  load("w2", m.w2_);
  load("b2", m.b2_);
  m.epoch_losses_ = doc.value("epoch_losses", std::vector<double>{});
  m.trained_ = doc.value("trained", false);
  return m;
}

}  // namespace intentloop
