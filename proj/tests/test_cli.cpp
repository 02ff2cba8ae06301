#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lga/config.hpp"
#include "lga/csv.hpp"
#include "lga/experiments.hpp"

using namespace lga;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lga_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LGA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string header_of(const fs::path& csv) {
  const std::string text = slurp(csv);
  return text.substr(0, text.find('\n'));
}

const char* kSmallLearnspeed =
    R"({"learnspeed": {"k_max": 3000, "window_begin": 500, "window_end": 2000, "converge_tol": 1.0}})";

}  // namespace

TEST(Csv, GoldenHeaders) {
  const fs::path dir = scratch("headers");
  RunConfig cfg = preset_config("desk");
  cfg = apply_json(cfg, Json::parse(kSmallLearnspeed));
  run_learnspeed(cfg, dir);
  EXPECT_EQ(header_of(dir / "learnspeed_vary_lambda_l.csv"), "k,dim,lambda_l,lambda_u,c");
  EXPECT_EQ(header_of(dir / "learnspeed_vary_lambda_u.csv"), "k,dim,lambda_l,lambda_u,c");

  cfg.gradcheck.instances = 6;
  run_gradcheck(cfg, dir);
  EXPECT_EQ(header_of(dir / "gradcheck.csv"), "op,instances,max_rel_error,threshold,pass");

  cfg.linreg_oracle.problems = 3;
  run_linreg_oracle(cfg, dir);
  EXPECT_EQ(header_of(dir / "linreg_oracle.csv"),
            "problem,m,n,alpha,k,gd_closed_vs_iterative,theta_star_vs_eigsum");

  std::string joined;
  for (const auto& h : rings_records_header()) joined += (joined.empty() ? "" : ",") + h;
  EXPECT_EQ(joined, "iteration,trial,method,test_loss,test_acc,alignment,grad_dist");
  joined.clear();
  for (const auto& h : propcheck_independence_header()) joined += (joined.empty() ? "" : ",") + h;
  EXPECT_EQ(joined, "mode,watched_dim,side,perturbed_dim,value,deviation,threshold,expectation,pass");
}

TEST(Csv, SeventeenDigitsAndNan) {
  const fs::path dir = scratch("digits");
  {
    CsvWriter w(dir / "x.csv", {"a", "b"});
    w.row(0.1, std::nan(""));
  }
  EXPECT_EQ(slurp(dir / "x.csv"), "a,b\n0.10000000000000001,nan\n");
  CsvWriter w(dir / "y.csv", {"a"});
  EXPECT_THROW(w.row(1, 2), std::logic_error);
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig cfg = preset_config("desk");
  const Json j = to_json(cfg);
  EXPECT_EQ(to_json(apply_json(RunConfig{}, j)), j);
  EXPECT_EQ(j["lga"]["iterations"], 4000);
  EXPECT_EQ(j["model"]["hidden_dim"], 64);
  EXPECT_EQ(j["trials"], 5);
  EXPECT_EQ(to_json(preset_config("paper"))["rings"]["n_labeled"], 5000);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  const RunConfig base;
  EXPECT_THROW(apply_json(base, Json::parse(R"({"lga": {"lr_thetaa": 1}})")), ConfigError);
  EXPECT_THROW(apply_json(base, Json::parse(R"({"trials": -1})")), ConfigError);
  EXPECT_THROW(apply_json(base, Json::parse(R"({"lga": {"track_alignment": 1}})")), ConfigError);
  EXPECT_THROW(apply_json(base, Json::parse(R"({"learnspeed": {"mode": "sideways"}})")), ConfigError);
  EXPECT_THROW(preset_config("laptop"), ConfigError);
  RunConfig bad;
  bad.experiment = "nope";
  EXPECT_THROW(validate(bad), ConfigError);
  const RunConfig ok = apply_json(base, Json::parse(R"({"lga": {"track_alignment": false, "optimizer": "sgd", "alignment_update": "gradient"}})"));
  EXPECT_FALSE(ok.lga.track_alignment);
  EXPECT_EQ(ok.lga.alignment_update, AlignmentUpdate::kGradient);
  EXPECT_EQ(ok.lga.optimizer, OptimizerKind::kSgd);
}

TEST(Cli, RunDirectoryContents) {
  const fs::path dir = scratch("rundir");
  write_file(dir / "c.json", kSmallLearnspeed);
  ASSERT_EQ(run_cli("learnspeed --config " + (dir / "c.json").string() + " --out " + (dir / "out").string() +
                    " --seed 11"),
            0);
  for (const char* f : {"config.json", "manifest.json", "report.json", "learnspeed_vary_lambda_l.csv",
                        "learnspeed_vary_lambda_u.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const Json manifest = read_json_file(dir / "out" / "manifest.json");
  EXPECT_EQ(manifest["seed"], 11);
  EXPECT_TRUE(manifest.contains("wall_time_seconds"));
  EXPECT_EQ(manifest["version"], kVersion);
  const Json resolved = read_json_file(dir / "out" / "config.json");
  EXPECT_EQ(resolved["learnspeed"]["k_max"], 3000);
  EXPECT_EQ(resolved["learnspeed"]["lr_w"], 1e-3);
}

TEST(Cli, SameSeedSameBytesAndResolvedConfigReproduces) {
  const fs::path dir = scratch("determinism");
  write_file(dir / "c.json", kSmallLearnspeed);
  const std::string cfg = " --config " + (dir / "c.json").string();
  ASSERT_EQ(run_cli("learnspeed" + cfg + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("learnspeed" + cfg + " --out " + (dir / "b").string()), 0);
  ASSERT_EQ(run_cli("learnspeed --config " + (dir / "a" / "config.json").string() + " --out " + (dir / "c").string()),
            0);
  for (const char* f : {"learnspeed_vary_lambda_l.csv", "learnspeed_vary_lambda_u.csv", "config.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "c" / f)) << f;
  }
}

TEST(Cli, RingsTrialsAreDeterministicAcrossThreadCounts) {
  const fs::path dir = scratch("rings");
  write_file(dir / "c.json", R"({"rings": {"dim": 4, "n_labeled": 30, "n_test": 40},
    "model": {"hidden_dim": 6, "num_hidden_layers": 1},
    "lga": {"iterations": 20, "record_every": 10, "batch_labeled": 10, "batch_unlabeled": 10, "probe_rows": 20},
    "threads": 1})");
  write_file(dir / "d.json", R"({"rings": {"dim": 4, "n_labeled": 30, "n_test": 40},
    "model": {"hidden_dim": 6, "num_hidden_layers": 1},
    "lga": {"iterations": 20, "record_every": 10, "batch_labeled": 10, "batch_unlabeled": 10, "probe_rows": 20},
    "threads": 3})");
  ASSERT_EQ(run_cli("rings --trials 3 --config " + (dir / "c.json").string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("rings --trials 3 --config " + (dir / "d.json").string() + " --out " + (dir / "b").string()), 0);
  for (const char* f : {"rings_records.csv", "rings_summary.csv", "rings_final.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto summary = read_csv(dir / "a" / "rings_summary.csv");
  bool saw_sup = false, saw_lga = false;
  for (std::size_t i = 1; i < summary.size(); ++i) {
    saw_sup = saw_sup || summary[i][0] == "supervised";
    saw_lga = saw_lga || summary[i][0] == "lga";
    EXPECT_EQ(summary[i].back(), summary[i][2] == "grad_dist" && summary[i][0] == "supervised" ? "0" : "3");
  }
  EXPECT_TRUE(saw_sup && saw_lga);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  write_file(dir / "small.json", R"({"gradcheck": {"instances": 5}})");
  EXPECT_EQ(run_cli("gradcheck --config " + (dir / "small.json").string() + " --out " + (dir / "ok").string()), 0);

  write_file(dir / "strict.json", R"({"gradcheck": {"instances": 5, "tol_grad": -1.0}})");
  EXPECT_EQ(run_cli("gradcheck --config " + (dir / "strict.json").string() + " --out " + (dir / "fail").string()),
            1);

  write_file(dir / "typo.json", R"({"gradcheck": {"instancez": 5}})");
  EXPECT_EQ(run_cli("gradcheck --config " + (dir / "typo.json").string() + " --out " + (dir / "x").string()), 2);
  write_file(dir / "broken.json", "{ not json");
  EXPECT_EQ(run_cli("gradcheck --config " + (dir / "broken.json").string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("nonsense --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("gradcheck --preset huge --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("gradcheck"), 2);

  write_file(dir / "blowup.json",
             R"({"learnspeed": {"lr_theta": 1e6, "lr_w": 1e6, "k_max": 2000, "window_begin": 10, "window_end": 100}})");
  EXPECT_EQ(run_cli("learnspeed --config " + (dir / "blowup.json").string() + " --out " + (dir / "y").string()), 3);
}
