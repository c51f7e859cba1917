#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fixture(const char* name) { return fs::path(BTF_FIXTURE_DIR) / name; }

// Runs the CLI with stdout and stderr captured into files under `dir`.
int btf(const std::string& args, const fs::path& dir, const std::string& tag) {
  const std::string cmd = std::string("\"") + BTF_CLI_PATH + "\" " + args + " > \"" + (dir / (tag + ".out")).string() +
                          "\" 2> \"" + (dir / (tag + ".err")).string() + "\"";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class Pipeline : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "btf_pipeline";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "config.json") << R"({
  "encoder": {"d": 8, "h": 16, "L": 1, "J": 2},
  "tokenizer": {"vocab_size": 200},
  "pretrain": {"epochs": 1, "batch_size": 8, "max_tokens": 160},
  "finetune": {"epochs": 1, "batch_size": 8, "max_tokens": 160}
})";
  }

  static std::string cfg() { return "--config " + (root / "config.json").string() + " "; }
  static std::string p(const char* name) { return (root / name).string(); }
};
fs::path Pipeline::root;

}  // namespace

TEST_F(Pipeline, EndToEnd) {
  ASSERT_EQ(btf("gen-corpus --accounts 200 --months 3 --seed 1 --out " + p("raw.jsonl"), root, "gen"), 0);
  const std::string raw = slurp(root / "raw.jsonl");
  ASSERT_EQ(btf("normalize --in " + p("raw.jsonl") + " --out " + p("norm.jsonl"), root, "norm"), 0);
  EXPECT_EQ(slurp(root / "raw.jsonl"), raw);  // input untouched
  ASSERT_EQ(btf("train-vocab " + cfg() + "--in " + p("norm.jsonl") + " --out " + p("tok"), root, "vocab"), 0)
      << slurp(root / "vocab.err");
  EXPECT_TRUE(fs::exists(root / "tok" / "vocab.tsv"));
  EXPECT_TRUE(fs::exists(root / "tok" / "amounts.json"));
  ASSERT_EQ(btf("tokenize --in " + p("norm.jsonl") + " --tokenizer " + p("tok") + " --out " + p("streams.jsonl"),
                root, "tokenize"),
            0);
  const auto first = slurp(root / "streams.jsonl");
  const auto line = nlohmann::json::parse(first.substr(0, first.find('\n')));
  EXPECT_EQ(line.at("x").size(), line.at("a").size());
  EXPECT_EQ(line.at("x").front(), 1);

  ASSERT_EQ(btf("pretrain " + cfg() + "--arch transformer --seed 1 --corpus " + p("norm.jsonl") + " --tokenizer " +
                    p("tok") + " --out " + p("pre"),
                root, "pretrain"),
            0)
      << slurp(root / "pretrain.err");
  EXPECT_TRUE(fs::exists(root / "pre" / "final" / "encoder.ckpt"));
  const auto eval = nlohmann::json::parse(slurp(root / "pre" / "pretrain_eval.json"));
  EXPECT_GT(eval.at("heldout_pairs").get<int>(), 0);
  const auto log = slurp(root / "pre" / "pretrain_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "step,lr,loss,ce_mwm,ce_mam,ce_nsp,acc_mwm,acc_mam,acc_nsp");

  for (const char* task : {"categorization", "risk"}) {
    for (const char* mode : {"frozen", "full"}) {
      const std::string out = std::string("ft_") + task + "_" + mode;
      ASSERT_EQ(btf("finetune " + cfg() + "--seed 1 --corpus " + p("norm.jsonl") + " --tokenizer " + p("tok") +
                        " --encoder " + p("pre/final") + " --task " + task + " --mode " + mode + " --out " +
                        p(out.c_str()),
                    root, out),
                0)
          << slurp(root / (out + ".err"));
    }
  }
  ASSERT_EQ(btf("evaluate --corpus " + p("norm.jsonl") + " --tokenizer " + p("tok") + " --model " +
                    p("ft_categorization_frozen") + " --model " + p("ft_categorization_full") + " --model " +
                    p("ft_risk_frozen") + " --model " + p("ft_risk_full") + " --out " + p("eval"),
                root, "evaluate"),
            0)
      << slurp(root / "evaluate.err");
  const auto report = nlohmann::json::parse(slurp(root / "eval" / "report.json"));
  ASSERT_TRUE(report.is_array());
  EXPECT_EQ(report.size(), 5u);  // majority + 2 categorization + 2 risk
  EXPECT_TRUE(fs::exists(root / "eval" / "confusion.csv"));
  std::size_t with_auc = 0;
  for (const auto& r : report) with_auc += r.contains("roc_auc");
  EXPECT_EQ(with_auc, 2u);

  // Same seed, same bytes.
  ASSERT_EQ(btf("pretrain " + cfg() + "--arch transformer --seed 1 --corpus " + p("norm.jsonl") + " --tokenizer " +
                    p("tok") + " --out " + p("pre2"),
                root, "pretrain2"),
            0);
  EXPECT_EQ(slurp(root / "pre" / "final" / "encoder.ckpt"), slurp(root / "pre2" / "final" / "encoder.ckpt"));
  EXPECT_EQ(slurp(root / "pre" / "pretrain_log.csv"), slurp(root / "pre2" / "pretrain_log.csv"));
}

TEST_F(Pipeline, GoldenListingThroughCli) {
  ASSERT_EQ(btf("tokenize --in " + fixture("golden_statement.jsonl").string() + " --vocab " +
                    fixture("toy_vocab.tsv").string() + " --amounts paper --listing " + p("listing.txt"),
                root, "golden"),
            0)
      << slurp(root / "golden.err");
  const auto text = slurp(root / "listing.txt");
  const auto golden = slurp(fixture("golden_listing.txt"));
  EXPECT_EQ(text, "client 2021-09\n" + golden + "\n");
}

TEST_F(Pipeline, FailuresNameTheStage) {
  EXPECT_EQ(btf("pretrain --corpus /nonexistent --tokenizer /nonexistent --out " + p("x"), root, "fail"), 1);
  EXPECT_EQ(slurp(root / "fail.err").rfind("pretrain: ", 0), 0u) << slurp(root / "fail.err");
  EXPECT_EQ(btf("finetune --corpus a --tokenizer b --encoder /nonexistent --out " + p("y"), root, "fail2"), 1);
  EXPECT_EQ(slurp(root / "fail2.err").rfind("finetune: ", 0), 0u);
}
