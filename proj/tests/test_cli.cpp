#include <doctest.h>

#include "srda/cli.hpp"
#include "srda/data.hpp"
#include "srda/io.hpp"
#include "srda/trainer.hpp"
#include "temp_dir.hpp"

using namespace srda;
using Args = std::vector<std::string>;

namespace {

int run(Args args) { return cli::run(args); }

// Four tiny volumes, a one-epoch regressor and source model.
struct Pipeline {
  TempDir dir{"cli"};
  std::string data, ratio, source, runs;
  Args split{"--train-volumes", "3", "--val-volumes", "1"};

  Pipeline() {
    data = (dir / "data").string();
    ratio = (dir / "ratio.bin").string();
    source = (dir / "source.bin").string();
    runs = (dir / "runs").string();
    REQUIRE(run({"gen-data", "--out", data, "--volumes", "4", "--depth", "3", "--height", "32", "--width", "32"}) ==
            cli::kExitOk);
    REQUIRE(run(with_split({"train-ratio", "--source", data, "--epochs", "1", "--width", "4", "--out", ratio})) ==
            cli::kExitOk);
    REQUIRE(run(with_split({"train-source", "--source", data, "--epochs", "1", "--width", "4", "--out", source,
                            "--runs", runs, "--quiet"})) == cli::kExitOk);
  }

  Args with_split(Args a) const {
    a.insert(a.end(), split.begin(), split.end());
    return a;
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}) == cli::kExitUsage);
  CHECK(run({"no-such-command"}) == cli::kExitUsage);
  CHECK(run({"gen-data", "--no-such-flag"}) == cli::kExitUsage);
  CHECK(run({"gen-data", "--volumes", "many"}) == cli::kExitUsage);
  CHECK(run({"evaluate"}) == cli::kExitUsage);
  CHECK(run({"evaluate", "--checkpoint", "x.bin", "--split", "test"}) == cli::kExitUsage);
  CHECK(run({"adapt", "--init", "a.bin"}) == cli::kExitUsage);
  CHECK(run({"--help"}) == cli::kExitOk);
  CHECK(run({"adapt", "--help"}) == cli::kExitOk);
}

TEST_CASE("adapt refuses a source dataset") {
  CHECK(run({"adapt", "--init", "a.bin", "--regressor", "r.bin", "--target", "t", "--source", "s"}) ==
        cli::kExitUsage);
}

TEST_CASE("runtime failures exit with 2") {
  TempDir dir("cli_rt");
  CHECK(run({"evaluate", "--checkpoint", (dir / "missing.bin").string(), "--data", dir.path().string()}) ==
        cli::kExitRuntime);
  CHECK(run({"train-source", "--source", (dir / "nothing").string(), "--epochs", "1"}) == cli::kExitRuntime);
  CHECK(run({"gen-data", "--out", (dir / "d").string(), "--volumes", "0"}) == cli::kExitRuntime);
}

TEST_CASE("config files are overridden by flags") {
  TempDir dir("cli_cfg");
  const auto cfg = dir / "gen.json";
  io::write_text(cfg, R"({"volumes": 3, "depth": 2, "height": 16, "width": 16})");
  const auto a = (dir / "a").string();
  REQUIRE(run({"gen-data", "--config", cfg.string(), "--out", a}) == cli::kExitOk);
  DatasetManifest m = load_manifest(a);
  CHECK(m.volumes.size() == 3);
  CHECK(m.depth == 2);
  CHECK(m.height == 16);

  const auto b = (dir / "b").string();
  REQUIRE(run({"gen-data", "--volumes", "2", "--config", cfg.string(), "--out", b}) == cli::kExitOk);
  m = load_manifest(b);
  CHECK(m.volumes.size() == 2);
  CHECK(m.depth == 2);

  io::write_text(dir / "nested.json", R"({"volumes": {"n": 3}})");
  CHECK(run({"gen-data", "--config", (dir / "nested.json").string(), "--out", b}) == cli::kExitUsage);
  io::write_text(dir / "unknown.json", R"({"colour": "red"})");
  CHECK(run({"gen-data", "--config", (dir / "unknown.json").string(), "--out", b}) == cli::kExitUsage);
  io::write_text(dir / "broken.json", "{");
  CHECK(run({"gen-data", "--config", (dir / "broken.json").string(), "--out", b}) == cli::kExitUsage);
  CHECK(run({"gen-data", "--config", (dir / "absent.json").string(), "--out", b}) == cli::kExitUsage);
}

TEST_CASE("end-to-end subcommands") {
  Pipeline& p = pipeline();
  CHECK(std::filesystem::exists(p.ratio));
  CHECK(std::filesystem::exists(p.source));
  CHECK(std::filesystem::exists(std::filesystem::path(p.runs) / "source_seed0.json"));

  const auto adapted = (p.dir / "adapted.bin").string();
  REQUIRE(run(p.with_split({"adapt", "--init", p.source, "--regressor", p.ratio, "--target", p.data, "--epochs", "1",
                            "--out", adapted, "--runs", p.runs, "--run-id", "ae", "--quiet"})) == cli::kExitOk);
  const RunRecord ae = read_run_record(std::filesystem::path(p.runs) / "ae.json");
  CHECK(ae.method == Method::adaent);
  CHECK(ae.epochs.size() == 2);
  CHECK(ae.lambda == doctest::Approx(1e-2));

  REQUIRE(run(p.with_split({"train-adasource", "--init", p.source, "--regressor", p.ratio, "--source", p.data,
                            "--target", p.data, "--epochs", "1", "--out", (p.dir / "as.bin").string(), "--runs",
                            p.runs, "--run-id", "as", "--quiet"})) == cli::kExitOk);
  REQUIRE(run(p.with_split({"train-oracle", "--target", p.data, "--epochs", "1", "--width", "4", "--out",
                            (p.dir / "or.bin").string(), "--runs", p.runs, "--run-id", "or", "--quiet"})) ==
          cli::kExitOk);
  REQUIRE(run(p.with_split({"evaluate", "--checkpoint", adapted, "--data", p.data, "--runs", p.runs, "--run-id",
                            "eval", "--method", "adaent"})) == cli::kExitOk);
  const RunRecord ev = read_run_record(std::filesystem::path(p.runs) / "eval.json");
  REQUIRE(ev.epochs.size() == 1);
  CHECK(ev.epochs[0].val.volumes.size() == 1);
  CHECK(ev.epochs[0].val.dsc.mean == doctest::Approx(ae.best().val.dsc.mean).epsilon(1e-9));

  const auto figs = (p.dir / "figs").string();
  REQUIRE(run({"report", "--runs", p.runs, "--out", figs}) == cli::kExitOk);
  CHECK(std::filesystem::exists(std::filesystem::path(figs) / "results_table.txt"));
}

TEST_CASE("adapt with a mismatched regressor fails at runtime") {
  Pipeline& p = pipeline();
  CHECK(run(p.with_split({"adapt", "--init", p.ratio, "--regressor", p.ratio, "--target", p.data, "--epochs", "1",
                          "--out", (p.dir / "bad.bin").string(), "--runs", p.runs, "--quiet"})) == cli::kExitRuntime);
}
