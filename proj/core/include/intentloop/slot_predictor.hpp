#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/interaction_log.hpp"

namespace intentloop {

struct SlotPredictorConfig {
  std::size_t embed_dim = 100;  // words and slots
  std::size_t hidden_dim = 64;
  double learning_rate = 0.001;
  std::size_t batch_size = 8;
  double dropout = 0.5;
  std::size_t epochs = 50;
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static SlotPredictorConfig from_json(const nlohmann::json& doc);
};

// Request words and already-active slots -> slots the user will pick.
struct SlotTrainingRow {
  std::string request_text;
  std::vector<std::string> input_slots;
  std::vector<std::string> target_slots;
};

/// Multi-label slot predictor:
///   words  -> mean word embedding      (embed_dim)
///   slots  -> max-pooled slot embedding (embed_dim)
///   concat -> dense + ReLU + dropout -> one sigmoid unit per slot
/// trained with sigmoid cross-entropy and Adam.
class SlotPredictorModel {
 public:
  SlotPredictorModel() = default;

  bool trained() const noexcept { return trained_; }
  const std::vector<std::string>& slot_ids() const noexcept { return slot_ids_; }
  const SlotPredictorConfig& config() const noexcept { return config_; }
  std::size_t embed_dim() const noexcept { return config_.embed_dim; }
  bool has_slot(std::string_view slot_id) const;

  /// Learned embedding row of a slot (StateError when untrained).
  std::span<const double> slot_embedding(std::string_view slot_id) const;

  /// Per-slot sigmoid outputs aligned with slot_ids().
  std::vector<double> predict(std::string_view request_text, std::span<const std::string> input_slots) const;

  /// Mean sigmoid cross-entropy over rows and slots, dropout off.
  double loss(std::span<const SlotTrainingRow> rows) const;

  /// Mean training loss of each epoch.
  const std::vector<double>& epoch_losses() const noexcept { return epoch_losses_; }

  nlohmann::json to_json() const;
  static SlotPredictorModel from_json(const nlohmann::json& doc);

  friend SlotPredictorModel train_slot_predictor(std::span<const SlotTrainingRow> rows,
                                                 std::vector<std::string> slot_universe,
                                                 const SlotPredictorConfig& config);

 private:
  struct Forward;

  void init(std::vector<std::string> vocabulary, std::vector<std::string> slot_universe,
            const SlotPredictorConfig& config);
  std::vector<std::size_t> word_ids(std::string_view text) const;
  std::vector<std::size_t> slot_positions(std::span<const std::string> slots) const;

  SlotPredictorConfig config_;
  bool trained_ = false;
  std::vector<std::string> vocabulary_;  // index 0 is the unknown-word row
  std::unordered_map<std::string, std::size_t> word_index_;
  std::vector<std::string> slot_ids_;
  std::unordered_map<std::string, std::size_t> slot_index_;

  std::vector<double> word_emb_;  // V x E
  std::vector<double> slot_emb_;  // S x E
  std::vector<double> w1_;        // H x 2E
  std::vector<double> b1_;        // H
  std::vector<double> w2_;        // S x H
  std::vector<double> b2_;        // S
  std::vector<double> epoch_losses_;
};

SlotPredictorModel train_slot_predictor(std::span<const SlotTrainingRow> rows, std::vector<std::string> slot_universe,
                                        const SlotPredictorConfig& config = {});

/// Trains from interaction logs: input = context slots, target = selections.
/// The slot universe is every slot id seen in the logs.
SlotPredictorModel train_slot_predictor(std::span<const InteractionRecord> logs,
                                        const SlotPredictorConfig& config = {});

std::vector<SlotTrainingRow> rows_from_logs(std::span<const InteractionRecord> logs);

}  // namespace intentloop
