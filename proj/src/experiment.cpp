#include "gcn/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

#include "gcn/errors.hpp"

namespace gcn {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "gcn") return ModelKind::gcn;
  if (name == "pgcn") return ModelKind::pgcn;
  if (name == "rgcn") return ModelKind::rgcn;
  if (name == "prgcn") return ModelKind::prgcn;
  throw ValidationError("unknown model '" + name + "'");
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gcn: return "gcn";
    case ModelKind::pgcn: return "pgcn";
    case ModelKind::rgcn: return "rgcn";
    case ModelKind::prgcn: return "prgcn";
  }
  return "?";
}

bool uses_transition(ModelKind kind) {
  return kind == ModelKind::pgcn || kind == ModelKind::prgcn;
}

bool uses_graph_reg(ModelKind kind) {
  return kind == ModelKind::rgcn || kind == ModelKind::prgcn;
}

void validate_spec(const ExperimentSpec& spec) {
  const std::string model = to_string(spec.model);
  if (uses_transition(spec.model) && spec.ks.empty()) {
    throw ValidationError("--k is required for model " + model);
  }
  if (!uses_transition(spec.model) && !spec.ks.empty()) {
    throw ValidationError("--k only applies to pgcn and prgcn");
  }
  for (const int k : spec.ks) {
    if (k < 1) throw ValidationError("--k values must be >= 1");
  }
  if (uses_graph_reg(spec.model) && !spec.reg_weight) {
    throw ValidationError("--reg-weight is required for model " + model);
  }
  if (!uses_graph_reg(spec.model) && spec.reg_weight) {
    throw ValidationError("--reg-weight only applies to rgcn and prgcn");
  }
  if (spec.reg_weight && *spec.reg_weight < 0.0) {
    throw ValidationError("--reg-weight must be non-negative");
  }
  if (spec.last_seed < spec.first_seed) {
    throw ValidationError("seed range is empty");
  }
  if (spec.n_walks < 1) throw ValidationError("--n-walks must be >= 1");
  if (!(spec.prune_threshold >= 0.0 && spec.prune_threshold < 1.0)) {
    throw ValidationError("--prune must lie in [0, 1)");
  }
}

TrainConfig make_train_config(const ExperimentSpec& spec, int k) {
  TrainConfig c;
  c.max_epochs = spec.max_epochs.value_or(kEpochLimit);
  c.min_epochs_before_stop = spec.min_epochs_before_stop.value_or(
      uses_graph_reg(spec.model) ? kMinEpochsRegularized : kMinEpochsPlain);
  c.patience = spec.patience.value_or(c.patience);
  c.learning_rate = spec.learning_rate.value_or(c.learning_rate);
  c.hidden_dim = spec.hidden_dim.value_or(c.hidden_dim);
  c.dropout_rate = spec.dropout.value_or(c.dropout_rate);
  c.loss.weight_decay_lambda = spec.weight_decay.value_or(c.loss.weight_decay_lambda);
  c.normalize_features = spec.normalize_features;

  if (uses_transition(spec.model)) {
    c.propagator.kind = PropagatorKind::transition;
    c.propagator.k = k;
    c.propagator.n_walks = spec.n_walks;
    c.propagator.prune_threshold = spec.prune_threshold;
  }
  if (spec.model == ModelKind::rgcn) {
    c.loss.graph_reg_kind = RegKind::laplacian;
  } else if (spec.model == ModelKind::prgcn) {
    c.loss.graph_reg_kind = RegKind::transition;
    c.loss.transition_order = k;
  }
  if (spec.reg_weight) c.loss.graph_reg_weight = *spec.reg_weight;
  return c;
}

std::string model_label(ModelKind kind, int k) {
  std::string base = to_string(kind);
  std::transform(base.begin(), base.end(), base.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  if (uses_transition(kind)) base += " (" + std::to_string(k) + ")";
  return base;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec,
                                      const GraphDataset& dataset,
                                      const ExperimentLogger& logger) {
  validate_spec(spec);
  std::vector<int> ks = spec.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty()) ks.push_back(0);

  const std::size_t n_runs = static_cast<std::size_t>(spec.last_seed - spec.first_seed) + 1;
  std::vector<ResultRow> rows;
  for (const int k : ks) {
    const TrainConfig config = make_train_config(spec, k);
    const std::string label = model_label(spec.model, k);
    RunLogger run_logger;
    if (logger) {
      run_logger = [&](std::size_t run, const EpochRecord& rec) {
        logger(label, run, rec);
      };
    }
    const RepeatedResult res =
        run_repeated(config, dataset, n_runs, spec.first_seed, run_logger);
    rows.push_back({label, dataset.name, 100.0 * res.mean_accuracy,
                    100.0 * res.std_accuracy, res.mean_epochs, n_runs});
  }
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec,
                                      const ExperimentLogger& logger) {
  validate_spec(spec);
  return run_experiment(spec, load_dataset(spec.dataset), logger);
}

std::string render_table(std::span<const ResultRow> rows, TableFormat format) {
  std::ostringstream os;
  os << std::fixed;
  if (format == TableFormat::tsv) {
    os << "model\tdataset\taccuracy\tstd\tepochs\truns\n";
    for (const auto& r : rows) {
      os << r.model << '\t' << r.dataset << '\t' << std::setprecision(1)
         << r.accuracy << '\t' << r.std << '\t' << r.mean_epochs << '\t'
         << r.runs << '\n';
    }
  } else {
    os << "| model | dataset | accuracy | std | epochs | runs |\n"
       << "|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      os << "| " << r.model << " | " << r.dataset << " | "
         << std::setprecision(1) << r.accuracy << " | " << r.std << " | "
         << r.mean_epochs << " | " << r.runs << " |\n";
    }
  }
  return os.str();
}

}  // namespace gcn
