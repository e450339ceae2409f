#include "gcn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string_view>
#include <utility>

#include "gcn/errors.hpp"
#include "gcn/random.hpp"
#include "json.hpp"

namespace gcn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void load_fail(const fs::path& file, const std::string& what,
                            std::size_t line = 0) {
  std::ostringstream os;
  os << file.string();
  if (line != 0) os << ":" << line;
  os << ": " << what;
  throw LoadError(os.str());
}

std::ifstream open_in(const fs::path& file, std::ios::openmode mode = {}) {
  std::ifstream in(file, std::ios::in | mode);
  if (!in) load_fail(file, "cannot open file");
  return in;
}

std::ofstream open_out(const fs::path& file, std::ios::openmode mode = {}) {
  std::ofstream out(file, std::ios::out | std::ios::trunc | mode);
  if (!out) throw Error(file.string() + ": cannot open for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

json read_json(const fs::path& file) {
  auto in = open_in(file);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    load_fail(file, std::string("malformed JSON: ") + e.what());
  }
}

std::size_t meta_count(const json& meta, const fs::path& file, const char* key) {
  if (!meta.contains(key) || !meta[key].is_number_unsigned()) {
    load_fail(file, std::string("missing or non-integer \"") + key + "\"");
  }
  return meta[key].get<std::size_t>();
}

std::vector<std::size_t> read_split(const json& splits, const fs::path& file,
                                    const char* key, std::size_t num_nodes) {
  if (!splits.contains(key) || !splits[key].is_array()) {
    load_fail(file, std::string("missing array \"") + key + "\"");
  }
  std::vector<std::size_t> out;
  out.reserve(splits[key].size());
  for (const auto& v : splits[key]) {
    if (!v.is_number_unsigned()) {
      load_fail(file, std::string("non-integer index in \"") + key + "\"");
    }
    const auto idx = v.get<std::size_t>();
    if (idx >= num_nodes) {
      load_fail(file, std::string("index ") + std::to_string(idx) + " in \"" +
                          key + "\" exceeds num_nodes");
    }
    out.push_back(idx);
  }
  return out;
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r = (r << 8) | ((v >> (8 * b)) & 0xffU);
    return r;
  }
}

void check_split(const GraphDataset& d, const std::vector<std::size_t>& split,
                 const char* name, std::vector<char>& seen) {
  for (const std::size_t node : split) {
    if (node >= d.num_nodes) {
      throw ValidationError(std::string(name) + " split index " +
                            std::to_string(node) + " out of range");
    }
    if (d.labels[node] < 0) {
      throw ValidationError(std::string(name) + " split contains unlabeled node " +
                            std::to_string(node));
    }
    if (seen[node]) {
      throw ValidationError("node " + std::to_string(node) +
                            " appears in more than one split slot (" + name + ")");
    }
    seen[node] = 1;
  }
}

}  // namespace

void validate_dataset(const GraphDataset& d) {
  if (d.features.rows() != d.num_nodes || d.features.cols() != d.num_features) {
    throw ValidationError("features shape does not match num_nodes/num_features");
  }
  if (d.adjacency.rows() != d.num_nodes || d.adjacency.cols() != d.num_nodes) {
    throw ValidationError("adjacency shape does not match num_nodes");
  }
  if (d.labels.size() != d.num_nodes) {
    throw ValidationError("label count does not match num_nodes");
  }
  for (std::size_t i = 0; i < d.num_nodes; ++i) {
    if (d.labels[i] < kUnlabeled ||
        (d.labels[i] >= 0 && static_cast<std::size_t>(d.labels[i]) >= d.num_classes)) {
      throw ValidationError("label of node " + std::to_string(i) +
                            " outside [-1, num_classes)");
    }
  }
  for (std::size_t i = 0; i < d.num_nodes; ++i) {
    const auto cols = d.adjacency.row_cols(i);
    const auto vals = d.adjacency.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (cols[p] == i) {
        throw ValidationError("adjacency has a self-loop at node " +
                              std::to_string(i));
      }
      if (!(vals[p] > 0.0) || d.adjacency.at(cols[p], i) != vals[p]) {
        throw ValidationError("adjacency is not symmetric and positive at (" +
                              std::to_string(i) + ", " + std::to_string(cols[p]) +
                              ")");
      }
    }
  }
  std::vector<char> seen(d.num_nodes, 0);
  check_split(d, d.train, "train", seen);
  check_split(d, d.val, "val", seen);
  check_split(d, d.test, "test", seen);
}

GraphDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) load_fail(dir, "not a directory");
  GraphDataset d;

  const fs::path meta_file = dir / "meta.json";
  const json meta = read_json(meta_file);
  if (!meta.is_object()) load_fail(meta_file, "expected a JSON object");
  if (!meta.contains("name") || !meta["name"].is_string()) {
    load_fail(meta_file, "missing string \"name\"");
  }
  d.name = meta["name"].get<std::string>();
  d.num_nodes = meta_count(meta, meta_file, "num_nodes");
  d.num_features = meta_count(meta, meta_file, "num_features");
  d.num_classes = meta_count(meta, meta_file, "num_classes");
  if (!meta.contains("feature_dtype") || meta["feature_dtype"] != "f64le") {
    load_fail(meta_file, "feature_dtype must be \"f64le\"");
  }

  // Edges: undirected, deduplicated, self-loops ignored.
  const fs::path edge_file = dir / "edges.tsv";
  {
    auto in = open_in(edge_file);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = trim(raw);
      if (line.empty()) continue;
      const auto sep = line.find_first_of(" \t");
      std::size_t a = 0, b = 0;
      if (sep == std::string_view::npos ||
          !parse_int(line.substr(0, sep), a) ||
          !parse_int(trim(line.substr(sep + 1)), b)) {
        load_fail(edge_file, "expected two non-negative integers", line_no);
      }
      if (a >= d.num_nodes || b >= d.num_nodes) {
        load_fail(edge_file, "node index out of range", line_no);
      }
      if (a == b) continue;
      pairs.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    std::vector<Triplet> entries;
    entries.reserve(2 * pairs.size());
    for (const auto& [a, b] : pairs) {
      entries.push_back({a, b, 1.0});
      entries.push_back({b, a, 1.0});
    }
    d.adjacency =
        SparseMatrix::from_triplets(d.num_nodes, d.num_nodes, std::move(entries));
  }

  const fs::path feature_file = dir / "features.bin";
  {
    auto in = open_in(feature_file, std::ios::binary);
    const std::size_t expected = d.num_nodes * d.num_features * sizeof(double);
    std::vector<char> bytes(expected);
    in.read(bytes.data(), static_cast<std::streamsize>(expected));
    if (static_cast<std::size_t>(in.gcount()) != expected) {
      load_fail(feature_file, "truncated: expected " + std::to_string(expected) +
                                  " bytes, got " + std::to_string(in.gcount()));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      load_fail(feature_file, "trailing bytes after " + std::to_string(expected));
    }
    std::vector<double> values(d.num_nodes * d.num_features);
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::uint64_t word;
      std::memcpy(&word, bytes.data() + k * sizeof(double), sizeof(word));
      word = to_little_endian(word);
      std::memcpy(&values[k], &word, sizeof(word));
      if (!std::isfinite(values[k])) {
        load_fail(feature_file, "non-finite value at index " + std::to_string(k));
      }
    }
    d.features = DenseMatrix(d.num_nodes, d.num_features, std::move(values));
  }

  const fs::path label_file = dir / "labels.tsv";
  {
    auto in = open_in(label_file);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = trim(raw);
      if (line.empty()) continue;
      int label = 0;
      if (!parse_int(line, label)) load_fail(label_file, "expected an integer", line_no);
      if (label < kUnlabeled ||
          (label >= 0 && static_cast<std::size_t>(label) >= d.num_classes)) {
        load_fail(label_file, "label outside [-1, num_classes)", line_no);
      }
      d.labels.push_back(label);
    }
    if (d.labels.size() != d.num_nodes) {
      load_fail(label_file, std::to_string(d.labels.size()) +
                                " labels but num_nodes is " +
                                std::to_string(d.num_nodes));
    }
  }

  const fs::path split_file = dir / "splits.json";
  {
    const json splits = read_json(split_file);
    if (!splits.is_object()) load_fail(split_file, "expected a JSON object");
    d.train = read_split(splits, split_file, "train", d.num_nodes);
    d.val = read_split(splits, split_file, "val", d.num_nodes);
    d.test = read_split(splits, split_file, "test", d.num_nodes);
    try {
      validate_dataset(d);
    } catch (const ValidationError& e) {
      load_fail(split_file, e.what());
    }
  }
  return d;
}

void save_dataset(const GraphDataset& d, const fs::path& dir) {
  validate_dataset(d);
  for (const double v : d.adjacency.values()) {
    if (v != 1.0) throw ValidationError("edges.tsv stores unweighted edges only");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(dir.string() + ": " + ec.message());

  {
    const json meta = {{"name", d.name},
                       {"num_nodes", d.num_nodes},
                       {"num_features", d.num_features},
                       {"num_classes", d.num_classes},
                       {"feature_dtype", "f64le"}};
    auto out = open_out(dir / "meta.json");
    out << meta.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "edges.tsv");
    for (std::size_t i = 0; i < d.num_nodes; ++i) {
      for (const std::size_t j : d.adjacency.row_cols(i)) {
        if (i < j) out << i << '\t' << j << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "features.bin", std::ios::binary);
    std::vector<char> bytes(d.features.size() * sizeof(double));
    const auto vals = d.features.data();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      std::uint64_t word;
      std::memcpy(&word, &vals[k], sizeof(word));
      word = to_little_endian(word);
      std::memcpy(bytes.data() + k * sizeof(double), &word, sizeof(word));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  {
    auto out = open_out(dir / "labels.tsv");
    for (const int label : d.labels) out << label << '\n';
  }
  {
    const json splits = {{"train", d.train}, {"val", d.val}, {"test", d.test}};
    auto out = open_out(dir / "splits.json");
    out << splits.dump() << '\n';
  }
}

GraphDataset generate_sbm(const SbmParams& params) {
  const auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(params.p_in) || !prob_ok(params.p_out)) {
    throw ValidationError("generate_sbm: probabilities must lie in [0, 1]");
  }
  if (!(params.feature_noise >= 0.0) || !std::isfinite(params.feature_noise)) {
    throw ValidationError("generate_sbm: feature_noise must be non-negative");
  }
  if (params.blocks < 1 || params.nodes_per_block < 3) {
    throw ValidationError(
        "generate_sbm: need at least one block of at least 3 nodes");
  }
  const std::size_t n = params.blocks * params.nodes_per_block;
  const auto block_of = [&](std::size_t i) { return i / params.nodes_per_block; };

  GraphDataset d;
  d.name = "sbm";
  d.num_nodes = n;
  d.num_features = params.blocks;
  d.num_classes = params.blocks;

  CounterRng edge_rng(params.seed, 0x5b3, 0);
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block_of(i) == block_of(j) ? params.p_in : params.p_out;
      if (edge_rng.next_double() < p) {
        entries.push_back({i, j, 1.0});
        entries.push_back({j, i, 1.0});
      }
    }
  }
  d.adjacency = SparseMatrix::from_triplets(n, n, std::move(entries));

  // Box-Muller noise on top of the one-hot block indicator.
  CounterRng noise_rng(params.seed, 0x5b3, 1);
  d.features = DenseMatrix(n, params.blocks);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < params.blocks; ++c) {
      const double u1 = 1.0 - noise_rng.next_double();
      const double u2 = noise_rng.next_double();
      const double z =
          std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      d.features(i, c) = (c == block_of(i) ? 1.0 : 0.0) + params.feature_noise * z;
    }
  }

  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(block_of(i));

  const std::size_t m = params.nodes_per_block;
  const std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(m))));
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(m))));
  CounterRng split_rng(params.seed, 0x5b3, 2);
  for (std::size_t b = 0; b < params.blocks; ++b) {
    std::vector<std::size_t> members(m);
    for (std::size_t k = 0; k < m; ++k) members[k] = b * m + k;
    for (std::size_t k = m - 1; k > 0; --k) {
      const auto r = static_cast<std::size_t>(split_rng.next_u64() % (k + 1));
      std::swap(members[k], members[r]);
    }
    for (std::size_t k = 0; k < m; ++k) {
      auto& target = k < n_train ? d.train : (k < n_train + n_val ? d.val : d.test);
      target.push_back(members[k]);
    }
  }
  std::sort(d.train.begin(), d.train.end());
  std::sort(d.val.begin(), d.val.end());
  std::sort(d.test.begin(), d.test.end());
  return d;
}

DenseMatrix row_normalize(const DenseMatrix& features) {
  DenseMatrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    double norm = 0.0;
    for (const double v : row) norm += std::abs(v);
    if (norm == 0.0) continue;
    for (double& v : row) v /= norm;
  }
  return out;
}

}  // namespace gcn
