#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"

using namespace gcn::testing;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& out = {}) {
  std::string cmd = std::string(GCN_EXPERIMENT_BIN) + " " + args;
  cmd += out.empty() ? " > /dev/null" : " > '" + out.string() + "'";
  cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("cli end to end") {
  const fs::path dir = scratch_dir("cli");
  const std::string data = (dir / "sbm").string();
  REQUIRE(run_cli("sbm --out " + data + " --nodes-per-block 40 --seed 5") == 0);
  CHECK(fs::exists(dir / "sbm" / "meta.json"));

  const std::string base = "run --dataset " + data + " --seeds 0..2";
  REQUIRE(run_cli(base + " --model gcn --max-epochs 200", dir / "a.tsv") == 0);
  REQUIRE(run_cli(base + " --model gcn --max-epochs 200", dir / "b.tsv") == 0);
  const std::string a = slurp(dir / "a.tsv");
  CHECK(a == slurp(dir / "b.tsv"));
  CHECK(a.rfind("model\tdataset\taccuracy", 0) == 0);
  CHECK(a.find("GCN\tsbm\t") != std::string::npos);

  REQUIRE(run_cli(base + " --model pgcn --k 1..5 --n-walks 200 --max-epochs 40 --out " +
                  (dir / "sweep.tsv").string()) == 0);
  std::istringstream sweep(slurp(dir / "sweep.tsv"));
  std::vector<std::string> rows;
  for (std::string l; std::getline(sweep, l);) rows.push_back(l);
  REQUIRE(rows.size() == 6);
  CHECK(rows[5].rfind("PGCN (5)\t", 0) == 0);

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli(base + " --model gat") == 2);
  CHECK(run_cli(base + " --model pgcn") == 2);
  CHECK(run_cli(base + " --model gcn --k 2") == 2);
  CHECK(run_cli(base + " --model rgcn") == 2);
  CHECK(run_cli(base + " --model gcn --reg-weight 0.1") == 2);
  CHECK(run_cli(base + " --model pgcn --k x") == 2);
  CHECK(run_cli(base + " --model gcn --seeds 3..1") == 2);
  CHECK(run_cli("run --dataset " + (dir / "nope").string() + " --model gcn") == 1);
  fs::remove_all(dir);
}
