#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcn/dataset.hpp"
#include "gcn/trainer.hpp"

namespace gcn {

enum class ModelKind { gcn, pgcn, rgcn, prgcn };

ModelKind parse_model_kind(const std::string& name);
const char* to_string(ModelKind kind);
bool uses_transition(ModelKind kind);
bool uses_graph_reg(ModelKind kind);

/// Default minimum epoch count before early stopping may trigger.
inline constexpr std::size_t kMinEpochsPlain = 30;
inline constexpr std::size_t kMinEpochsRegularized = 1500;
inline constexpr std::size_t kEpochLimit = 5000;

struct ExperimentSpec {
  std::filesystem::path dataset;
  ModelKind model = ModelKind::gcn;
  std::vector<int> ks;                 // pgcn / prgcn only; one row per k
  std::size_t n_walks = 10000;
  double prune_threshold = 0.0;
  std::optional<double> reg_weight;    // rgcn / prgcn only
  std::uint64_t first_seed = 0;
  std::uint64_t last_seed = 9;         // inclusive

  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> min_epochs_before_stop;
  std::optional<std::size_t> patience;
  std::optional<double> learning_rate;
  std::optional<std::size_t> hidden_dim;
  std::optional<double> dropout;
  std::optional<double> weight_decay;
  bool normalize_features = true;
};

/// Throws ValidationError when k or the regularizer weight is given for a
/// model that does not take it, or missing for one that does.
void validate_spec(const ExperimentSpec& spec);

/// Trainer configuration for `spec` at transition order `k` (ignored for
/// gcn / rgcn).
TrainConfig make_train_config(const ExperimentSpec& spec, int k);

std::string model_label(ModelKind kind, int k);

struct ResultRow {
  std::string model;    // e.g. "PGCN (3)"
  std::string dataset;
  double accuracy = 0.0;  // mean test accuracy, percent
  double std = 0.0;       // percent
  double mean_epochs = 0.0;
  std::size_t runs = 0;

  bool operator==(const ResultRow&) const = default;
};

using ExperimentLogger =
    std::function<void(const std::string& label, std::size_t run,
                       const EpochRecord& record)>;

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec,
                                      const GraphDataset& dataset,
                                      const ExperimentLogger& logger = {});
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec,
                                      const ExperimentLogger& logger = {});

enum class TableFormat { tsv, markdown };

/// Columns: model, dataset, accuracy, std, epochs, runs.
std::string render_table(std::span<const ResultRow> rows, TableFormat format);

}  // namespace gcn
