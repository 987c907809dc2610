// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binsoinn/cli.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using nlohmann::json;
using testing_support::TempDir;

namespace {

const std::filesystem::path kCorpus = std::filesystem::path(BINSOINN_TEST_DATA) / "microcorpus";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = binsoinn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string corpus_dir(const char* label) { return (kCorpus / label).string(); }

Result train_micro(const std::filesystem::path& model, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"train", "--benign", corpus_dir("benign"), "--malicious", corpus_dir("malicious"),
                                   "--split", "1.0", "-o", model.string(), "--json"};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("classify"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = run({"classify", "x.bin", "--model", "m.json", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
}

TEST(Cli, RenderEmptyFileIsTwoByTwoBlack) {
  TempDir dir("cli");
  testing_support::write_bytes(dir / "empty.bin", {});
  const auto r = run({"render", (dir / "empty.bin").string(), "-o", (dir / "e.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto png = oracle::decode_png(testing_support::read_bytes(dir / "e.png"));
  EXPECT_EQ(png.width, 2u);
  EXPECT_EQ(png.height, 2u);
  for (const auto& p : png.pixels) EXPECT_EQ(p, (oracle::Color{0, 0, 0}));
}

TEST(Cli, RenderMissingFileFails) {
  TempDir dir("cli");
  const auto r = run({"render", (dir / "nope.bin").string(), "-o", (dir / "x.png").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.bin"), std::string::npos);
}

TEST(Cli, TrainThenClassify) {
  TempDir dir("cli");
  const auto trained = train_micro(dir / "m.json");
  ASSERT_EQ(trained.code, 0) << trained.err;
  const auto summary = json::parse(trained.out);
  EXPECT_EQ(summary["train_size"], 20);

  const auto benign = run({"classify", corpus_dir("benign") + "/b00.txt", "--model", (dir / "m.json").string()});
  ASSERT_EQ(benign.code, 0) << benign.err;
  const auto verdict = json::parse(benign.out);
  EXPECT_EQ(verdict["label"], "benign");
  EXPECT_TRUE(verdict["distance"].is_number());
  EXPECT_TRUE(verdict["winner_id"].is_number_unsigned());
  EXPECT_TRUE(verdict["votes"].is_object());
  EXPECT_EQ(verdict["model_provenance"]["extractor"], "rgb332");
  EXPECT_EQ(verdict["model_provenance"]["palette_hash"], binsoinn::palette_hash());

  const auto mal = run({"classify", corpus_dir("malicious") + "/m04.exe", "--model", (dir / "m.json").string()});
  EXPECT_EQ(mal.code, 2) << mal.err;
  EXPECT_EQ(json::parse(mal.out)["label"], "malicious");
}

TEST(Cli, ClassifyWithMissingModelFails) {
  const auto r = run({"classify", corpus_dir("benign") + "/b00.txt", "--model", "/nonexistent/m.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, ClassifyRejectsVariantMismatch) {
  TempDir dir("cli");
  ASSERT_EQ(train_micro(dir / "m.json").code, 0);
  const auto r = run(
      {"classify", corpus_dir("benign") + "/b00.txt", "--model", (dir / "m.json").string(), "--variant", "byte-value"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("extractor"), std::string::npos);
}

TEST(Cli, EvalReportsConfusion) {
  TempDir dir("cli");
  ASSERT_EQ(train_micro(dir / "m.json").code, 0);
  const auto r = run({"eval", "--model", (dir / "m.json").string(), "--benign", corpus_dir("benign"), "--malicious",
                      corpus_dir("malicious"), "--by-ext", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["overall"]["total"], 20);
  EXPECT_EQ(doc["overall"]["accuracy"], 1.0);
  EXPECT_TRUE(doc["by_ext"].contains("exe"));
  EXPECT_EQ(doc["meta"]["lambda"], 290);
  EXPECT_EQ(doc["meta"]["age_max"], 170);
  const auto table = run({"eval", "--model", (dir / "m.json").string(), "--benign", corpus_dir("benign")});
  ASSERT_EQ(table.code, 0);
  EXPECT_NE(table.out.find("overall"), std::string::npos);
}

TEST(Cli, PerExtensionModels) {
  TempDir dir("cli");
  const auto r = train_micro(dir / "models", {"--per-ext"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "models/doc.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "models/pdf.json"));
  // Single-label extensions still train but warn.
  EXPECT_NE(r.err.find("single label"), std::string::npos);
  const auto c = run({"classify", corpus_dir("malicious") + "/m02.doc", "--model", (dir / "models").string()});
  EXPECT_EQ(c.code, 2) << c.err;
  const auto html = run({"classify", corpus_dir("benign") + "/b01.html", "--model", (dir / "models").string()});
  EXPECT_EQ(html.code, 0) << html.err;
  // One .htm file is too few to train, so no model exists for it.
  const auto none = run({"classify", corpus_dir("benign") + "/b09.htm", "--model", (dir / "models").string()});
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.err.find("no per-extension model"), std::string::npos);
}

TEST(Cli, FeaturizeWritesCsvAndColorStats) {
  TempDir dir("cli");
  const auto r = run({"featurize", "--benign", corpus_dir("benign"), "--malicious", corpus_dir("malicious"), "-o",
                      (dir / "f.csv").string(), "--color-stats", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["rows"], 20);
  EXPECT_GT(doc["color_stats"]["benign"]["printable"].get<double>(),
            doc["color_stats"]["malicious"]["printable"].get<double>());
  EXPECT_GT(doc["color_stats"]["malicious"]["null"].get<double>(), doc["color_stats"]["benign"]["null"].get<double>());
  std::ifstream in(dir / "f.csv");
  const auto data = binsoinn::pipeline::read_csv(in);
  ASSERT_EQ(data.rows.size(), 20u);
  EXPECT_EQ(data.rows[0].values.size(), 1024u);

  const auto unlabeled = run({"featurize", corpus_dir("benign"), "-o", (dir / "u.csv").string(), "--json"});
  ASSERT_EQ(unlabeled.code, 0) << unlabeled.err;
  std::ifstream in2(dir / "u.csv");
  const auto u = binsoinn::pipeline::read_csv(in2);
  ASSERT_EQ(u.rows.size(), 10u);
  EXPECT_EQ(u.rows[0].label, "unknown");
}

TEST(Cli, SweepFromDataset) {
  TempDir dir("cli");
  const auto data = testing_support::two_gaussians(100, 0.1, 1.0, 3);
  {
    std::ofstream csv(dir / "d.csv");
    binsoinn::pipeline::write_csv(csv, data);
  }
  const auto r = run({"sweep", "--dataset", (dir / "d.csv").string(), "--lambdas", "50,100", "--ages", "20",
                      "--trials", "2", "--seed", "5", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  ASSERT_EQ(doc["cells"].size(), 2u);
  EXPECT_EQ(doc["cells"][0]["accuracies"].size(), 2u);
  EXPECT_GE(doc["cells"][0]["mean_accuracy"].get<double>(), 0.9);
  const auto bad = run({"sweep", "--dataset", (dir / "d.csv").string(), "--lambdas", "50,x"});
  EXPECT_EQ(bad.code, 1);
  const auto table = run({"sweep", "--dataset", (dir / "d.csv").string(), "--lambdas", "50", "--ages", "20,30",
                          "--trials", "1"});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find("spread"), std::string::npos);
}
