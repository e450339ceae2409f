// gcn-experiment: trains GCN / PGCN / RGCN / PRGCN on a dataset directory and
// prints a result table.
//
//   gcn-experiment run --dataset DIR --model pgcn --k 1..5 --seeds 0..9
//   gcn-experiment sbm --out DIR [--nodes-per-block N --blocks B ...]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "gcn/dataset.hpp"
#include "gcn/errors.hpp"
#include "gcn/experiment.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

template <typename Int>
Int parse_number(std::string_view s, const char* what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw gcn::ValidationError(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

// "a..b" (inclusive) or a single value.
template <typename Int>
std::pair<Int, Int> parse_range(std::string_view s, const char* what) {
  const auto dots = s.find("..");
  if (dots == std::string_view::npos) {
    const Int v = parse_number<Int>(s, what);
    return {v, v};
  }
  return {parse_number<Int>(s.substr(0, dots), what),
          parse_number<Int>(s.substr(dots + 2), what)};
}

// Comma-separated list of values or ranges, e.g. "1..3,5".
std::vector<int> parse_ks(std::string_view s) {
  std::vector<int> ks;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto part = s.substr(0, comma);
    const auto [lo, hi] = parse_range<int>(part, "--k");
    if (hi < lo) throw gcn::ValidationError("empty --k range");
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return ks;
}

struct RunArgs {
  std::string dataset;
  std::string model;
  std::string k;
  std::string seeds = "0..9";
  std::string format = "tsv";
  std::string out;
  std::size_t n_walks = 10000;
  double prune = 0.0;
  std::optional<double> reg_weight;
  std::optional<std::size_t> max_epochs, min_epochs, patience, hidden;
  std::optional<double> lr, dropout, weight_decay;
  bool raw_features = false;
  std::size_t log_every = 50;
};

int do_run(const RunArgs& a) {
  gcn::ExperimentSpec spec;
  spec.dataset = a.dataset;
  spec.model = gcn::parse_model_kind(a.model);
  if (!a.k.empty()) spec.ks = parse_ks(a.k);
  const auto [first, last] = parse_range<std::uint64_t>(a.seeds, "--seeds");
  spec.first_seed = first;
  spec.last_seed = last;
  spec.n_walks = a.n_walks;
  spec.prune_threshold = a.prune;
  spec.reg_weight = a.reg_weight;
  spec.max_epochs = a.max_epochs;
  spec.min_epochs_before_stop = a.min_epochs;
  spec.patience = a.patience;
  spec.hidden_dim = a.hidden;
  spec.learning_rate = a.lr;
  spec.dropout = a.dropout;
  spec.weight_decay = a.weight_decay;
  spec.normalize_features = !a.raw_features;
  gcn::validate_spec(spec);
  const auto format =
      a.format == "markdown" ? gcn::TableFormat::markdown : gcn::TableFormat::tsv;

  const gcn::GraphDataset dataset = gcn::load_dataset(spec.dataset);
  std::cerr << "dataset " << dataset.name << ": " << dataset.num_nodes
            << " nodes, " << dataset.adjacency.nnz() / 2 << " edges, "
            << dataset.num_features << " features, " << dataset.num_classes
            << " classes\n";

  const std::size_t every = a.log_every;
  const auto logger = [every](const std::string& label, std::size_t run,
                              const gcn::EpochRecord& r) {
    if (every == 0 || r.epoch % every != 0) return;
    std::cerr << std::fixed << std::setprecision(5) << label << " run " << run
              << " epoch " << r.epoch << " L0=" << r.train.cross_entropy
              << " Lwd=" << r.train.weight_decay << " Lreg=" << r.train.graph_reg
              << " total=" << r.train.total << " val_loss=" << r.val_loss
              << " val_acc=" << r.val_accuracy << '\n';
  };
  const auto rows = gcn::run_experiment(spec, dataset, logger);
  const std::string table = gcn::render_table(rows, format);
  if (a.out.empty()) {
    std::cout << table;
  } else {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw gcn::Error(a.out + ": cannot open for writing");
    out << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolutional network experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Train a model over a range of seeds");
  run_cmd->add_option("--dataset", run.dataset, "Dataset directory")->required();
  run_cmd->add_option("--model", run.model, "gcn | pgcn | rgcn | prgcn")
      ->required()
      ->check(CLI::IsMember({"gcn", "pgcn", "rgcn", "prgcn"}));
  run_cmd->add_option("--k", run.k, "Walk depth(s): N, a..b or a list");
  run_cmd->add_option("--n-walks", run.n_walks, "Walks per node");
  run_cmd->add_option("--prune", run.prune, "Transition entry prune threshold");
  run_cmd->add_option("--reg-weight", run.reg_weight, "Graph regularizer weight");
  run_cmd->add_option("--seeds", run.seeds, "Seed range a..b (inclusive)");
  run_cmd->add_option("--format", run.format, "Table format")
      ->check(CLI::IsMember({"tsv", "markdown"}));
  run_cmd->add_option("--out", run.out, "Write the table here instead of stdout");
  run_cmd->add_option("--max-epochs", run.max_epochs);
  run_cmd->add_option("--min-epochs", run.min_epochs, "Epochs before early stopping");
  run_cmd->add_option("--patience", run.patience);
  run_cmd->add_option("--lr", run.lr);
  run_cmd->add_option("--hidden", run.hidden);
  run_cmd->add_option("--dropout", run.dropout);
  run_cmd->add_option("--weight-decay", run.weight_decay);
  run_cmd->add_flag("--raw-features", run.raw_features, "Skip row normalization");
  run_cmd->add_option("--log-every", run.log_every, "Epoch log interval, 0 = off");

  gcn::SbmParams sbm;
  std::string sbm_out;
  auto* sbm_cmd = app.add_subcommand("sbm", "Write a stochastic block model dataset");
  sbm_cmd->add_option("--out", sbm_out, "Output directory")->required();
  sbm_cmd->add_option("--nodes-per-block", sbm.nodes_per_block);
  sbm_cmd->add_option("--blocks", sbm.blocks);
  sbm_cmd->add_option("--p-in", sbm.p_in);
  sbm_cmd->add_option("--p-out", sbm.p_out);
  sbm_cmd->add_option("--noise", sbm.feature_noise);
  sbm_cmd->add_option("--seed", sbm.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return do_run(run);
    gcn::save_dataset(gcn::generate_sbm(sbm), sbm_out);
    return 0;
  } catch (const gcn::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
