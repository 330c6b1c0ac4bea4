#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "lowlight/backbone.hpp"
#include "lowlight/coco_io.hpp"
#include "lowlight/error.hpp"
#include "lowlight/evaluate.hpp"
#include "lowlight/synth.hpp"
#include "lowlight_cli/cli.hpp"
#include "temp_dir.hpp"

using namespace lowlight;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "lowlight");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

// clean/ from `scenes`, low/ from `synth`.
fs::path make_pairs(const support::TempDir& dir, std::size_t count) {
  const auto root = dir / "pairs";
  EXPECT_EQ(invoke({"scenes", "--out", (root / "clean").string(), "--count", std::to_string(count)}).code, 0);
  EXPECT_EQ(invoke({"synth", "--in", (root / "clean").string(), "--out", (root / "low").string()}).code, 0);
  return root;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({"gradcheck", "--bogus"}).code, 1);
  EXPECT_EQ(invoke({"synth", "--in", "x"}).code, 1);  // --out missing
  const auto help = invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"synth", "scenes", "gradcheck", "train", "ablate", "denoise", "eval"})
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  EXPECT_EQ(invoke({"eval", "--help"}).code, 0);
}

TEST(Cli, SubcommandHelpListsFlags) {
  const auto r = invoke({"synth", "--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--in", "--out", "--seed", "--exposure-range", "--photons-range", "--read-sigma-range",
                           "--no-demosaic", "--wb", "--config"})
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  const auto all = invoke({"--help-all"});
  EXPECT_EQ(all.code, 0);
  for (const char* flag : {"--pairs", "--curve", "--ckpt", "--stage", "--gt", "--pred", "--shape", "--form"})
    EXPECT_NE(all.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, Gradcheck) {
  const auto r = invoke({"gradcheck"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("form=embedded-gaussian shape=4x6x6 seed=0"), std::string::npos);
  EXPECT_NE(r.out.find(" PASS"), std::string::npos);
  for (const char* form : {"dot-product", "gaussian"})
    EXPECT_EQ(invoke({"gradcheck", "--form", form, "--shape", "8x3x5", "--reduction", "4", "--seed", "3"}).code, 0);
  EXPECT_EQ(invoke({"gradcheck", "--form", "cosine"}).code, 1);
  EXPECT_EQ(invoke({"gradcheck", "--shape", "4x6"}).code, 1);
  EXPECT_EQ(invoke({"gradcheck", "--shape", "4x0x6"}).code, 1);
  EXPECT_EQ(invoke({"gradcheck", "--reduction", "3"}).code, 1);
  EXPECT_EQ(invoke({"gradcheck", "--shape", "6x4x4", "--reduction", "4"}).code, 1);
}

TEST(Cli, ScenesAndSynth) {
  support::TempDir dir("cli_synth");
  ASSERT_EQ(invoke({"scenes", "--out", (dir / "a").string(), "--count", "3", "--size", "20x18"}).code, 0);
  ASSERT_EQ(invoke({"scenes", "--out", (dir / "b").string(), "--count", "3", "--size", "20x18"}).code, 0);
  EXPECT_EQ(slurp(dir / "a/scene_0002.png"), slurp(dir / "b/scene_0002.png"));
  EXPECT_EQ(read_image(dir / "a/scene_0000.png"), synth::make_scene(20, 18, mix_seed(0, 0)));
  EXPECT_EQ(invoke({"scenes", "--out", (dir / "c").string(), "--count", "0"}).code, 1);
  EXPECT_EQ(invoke({"scenes", "--out", (dir / "c").string(), "--size", "20"}).code, 1);

  const auto r = invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "low").string(), "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("3 of 3"), std::string::npos);
  EXPECT_EQ(line_count(slurp(dir / "low/manifest.jsonl")), 3u);
  EXPECT_EQ(read_image(dir / "low/scene_0001.png").width(), 20u);

  // Fixed parameters without jitter reproduce the library call.
  ASSERT_EQ(invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "fixed").string(), "--no-jitter",
                 "--exposure", "0.1", "--photons", "500", "--read-sigma", "2", "--wb", "1,1.1,0.9",
                 "--no-demosaic"})
                .code,
            0);
  synth::DegradationConfig cfg;
  cfg.exposure = 0.1;
  cfg.photons_full_scale = 500;
  cfg.read_sigma = 2;
  cfg.wb_gains = {1.0, 1.1, 0.9};
  cfg.demosaic = false;
  cfg = synth::sample_config(cfg, synth::JitterRanges::none(), 1);
  EXPECT_EQ(read_image(dir / "fixed/scene_0001.png"), synth::degrade(read_image(dir / "a/scene_0001.png"), cfg));

  // Same seed twice: byte-identical output trees.
  ASSERT_EQ(invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "low2").string(), "--seed", "4"}).code, 0);
  for (const auto& e : fs::directory_iterator(dir / "low"))
    EXPECT_EQ(slurp(e.path()), slurp(dir / "low2" / e.path().filename())) << e.path();
  ASSERT_EQ(invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "low3").string(), "--seed", "5"}).code, 0);
  EXPECT_NE(slurp(dir / "low/scene_0000.png"), slurp(dir / "low3/scene_0000.png"));

  EXPECT_EQ(invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "x").string(), "--wb", "1,1"}).code, 1);
  EXPECT_EQ(invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "x").string(), "--exposure-range", "0.5,0.1"}).code, 1);
  EXPECT_EQ(invoke({"synth", "--in", (dir / "a").string(), "--out", (dir / "x").string(), "--photons-range", "abc"}).code, 1);
  EXPECT_EQ(invoke({"synth", "--in", (dir / "missing").string(), "--out", (dir / "x").string()}).code, 1);
}

TEST(Cli, TrainWritesCheckpointAndCurve) {
  support::TempDir dir("cli_train");
  const auto pairs = make_pairs(dir, 4);
  const auto r = invoke({"train", "--pairs", pairs.string(), "--steps", "6", "--lr", "0.5", "--batch", "2",
                      "--out", (dir / "m.ckpt").string(), "--curve", (dir / "curve.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("initial_loss="), std::string::npos);
  EXPECT_NE(r.out.find("final_loss="), std::string::npos);
  const auto curve = slurp(dir / "curve.csv");
  EXPECT_EQ(curve.rfind("step,loss,w1,w2,w3,w4,lr\n", 0), 0u);
  EXPECT_EQ(line_count(curve), 7u);
  const auto bb = backbone::load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(bb.spec.form, nl::NLForm::EmbeddedGaussian);

  ASSERT_EQ(invoke({"train", "--pairs", pairs.string(), "--steps", "2", "--freeze-w", "--w-init", "0.25",
                 "--form", "gaussian", "--out", (dir / "g.ckpt").string()})
                .code,
            0);
  const auto g = backbone::load_checkpoint(dir / "g.ckpt");
  EXPECT_EQ(g.spec.form, nl::NLForm::Gaussian);
  for (double w : g.stage_weights()) EXPECT_EQ(w, 0.25);

  EXPECT_EQ(invoke({"train", "--pairs", (dir / "nowhere").string()}).code, 1);
  EXPECT_EQ(invoke({"train", "--pairs", pairs.string(), "--steps", "0"}).code, 1);
  EXPECT_EQ(invoke({"train", "--pairs", pairs.string(), "--w-init", "2"}).code, 1);
  EXPECT_EQ(invoke({"train", "--pairs", pairs.string(), "--form", "x"}).code, 1);
}

TEST(Cli, AblateTable) {
  support::TempDir dir("cli_ablate");
  const auto pairs = make_pairs(dir, 3);
  const auto r = invoke({"ablate", "--pairs", pairs.string(), "--steps", "2", "--out", (dir / "t.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "t.txt"), r.out);
  EXPECT_EQ(line_count(r.out), 5u);
  for (const char* name : {"Dot Product", "Gaussian", "Embedded Gaussian"})
    EXPECT_NE(r.out.find(name), std::string::npos);
}

TEST(Cli, DenoiseStrip) {
  support::TempDir dir("cli_denoise");
  write_png(dir / "in.png", synth::make_scene(32, 24, 3));
  backbone::save_checkpoint(dir / "m.ckpt", backbone::ToyBackbone::create({}));
  for (const char* stage : {"1", "4"}) {
    const auto r = invoke({"denoise", "--in", (dir / "in.png").string(), "--ckpt", (dir / "m.ckpt").string(),
                        "--stage", stage, "--out", (dir / "strip.png").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto strip = read_image(dir / "strip.png");
    EXPECT_EQ(strip.width(), 96u);
    EXPECT_EQ(strip.height(), 24u);
  }
  EXPECT_EQ(invoke({"denoise", "--in", (dir / "in.png").string(), "--ckpt", (dir / "m.ckpt").string(), "--stage", "5",
                 "--out", (dir / "s.png").string()})
                .code,
            1);
  write_png(dir / "tiny.png", synth::make_scene(8, 8, 3));
  EXPECT_EQ(invoke({"denoise", "--in", (dir / "tiny.png").string(), "--ckpt", (dir / "m.ckpt").string(), "--out",
                 (dir / "s.png").string()})
                .code,
            1);
  std::ofstream(dir / "bad.ckpt") << "garbage";
  EXPECT_EQ(invoke({"denoise", "--in", (dir / "in.png").string(), "--ckpt", (dir / "bad.ckpt").string(), "--out",
                 (dir / "s.png").string()})
                .code,
            1);
}

TEST(Cli, Eval) {
  support::TempDir dir("cli_eval");
  Rng rng(2);
  const auto gt = gen::sized_dataset(rng, 2);
  std::ofstream(dir / "gt.json") << eval::annotations_to_json(gt).dump();
  std::ofstream(dir / "pred.json") << eval::predictions_to_json(gen::replay(gt, rng)).dump();

  auto r = invoke({"eval", "--gt", (dir / "gt.json").string(), "--pred", (dir / "pred.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = eval::report_from_json(json::parse(r.out));
  EXPECT_EQ(report.overall.ap, 1.0);

  r = invoke({"eval", "--gt", (dir / "gt.json").string(), "--pred", (dir / "pred.json").string(), "--out",
           (dir / "rep.json").string(), "--table", (dir / "t.txt").string(), "--method", "oracle"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(eval::report_from_json(json::parse(slurp(dir / "rep.json"))), report);
  EXPECT_EQ(slurp(dir / "t.txt"), r.out);
  EXPECT_NE(r.out.find("oracle | 100.0"), std::string::npos);

  std::ofstream(dir / "broken.json") << "{\"images\": [";
  r = invoke({"eval", "--gt", (dir / "broken.json").string(), "--pred", (dir / "pred.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("byte"), std::string::npos);
  EXPECT_EQ(invoke({"eval", "--gt", (dir / "none.json").string(), "--pred", (dir / "pred.json").string()}).code, 1);
}

TEST(Config, MergeRules) {
  const auto merged = cli::merge_config({"train", "--steps", "5"},
                                        json::parse(R"({"steps": 9, "lr": 0.5, "freeze-w": true,
                                                        "no-jitter": false, "out": null, "wb": [1, 1.5, 2],
                                                        "form": "gaussian"})"));
  const std::vector<std::string> expected = {"train", "--steps", "5", "--form", "gaussian", "--freeze-w",
                                             "--lr", "0.5", "--wb", "1,1.5,2"};
  EXPECT_EQ(merged, expected);
  EXPECT_EQ(cli::merge_config({"--lr=1"}, json::parse(R"({"lr": 2})")), std::vector<std::string>{"--lr=1"});
  EXPECT_THROW(cli::merge_config({}, json::parse(R"({"a": {"b": 1}})")), ValidationError);
  EXPECT_THROW(cli::merge_config({}, json::parse(R"({"a": [[1]]})")), ValidationError);
  EXPECT_THROW(cli::merge_config({}, json::parse("[1]")), ValidationError);
}

TEST(Config, FileDrivesSubcommand) {
  support::TempDir dir("cli_config");
  std::ofstream(dir / "c.json") << R"({"shape": "8x3x3", "form": "gaussian", "seed": 5})";
  auto r = invoke({"gradcheck", "--config", (dir / "c.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("form=gaussian shape=8x3x3 seed=5"), std::string::npos);
  r = invoke({"gradcheck", "--config", (dir / "c.json").string(), "--seed", "6"});
  EXPECT_NE(r.out.find("seed=6"), std::string::npos);

  std::ofstream(dir / "bad.json") << "{\"shape\": ";
  EXPECT_EQ(invoke({"gradcheck", "--config", (dir / "bad.json").string()}).code, 1);
  EXPECT_EQ(invoke({"gradcheck", "--config", (dir / "missing.json").string()}).code, 1);
  std::ofstream(dir / "unknown.json") << R"({"colour": "red"})";
  EXPECT_EQ(invoke({"gradcheck", "--config", (dir / "unknown.json").string()}).code, 1);
}

TEST(Visualize, ChannelNorm) {
  const Tensor t({2, 1, 2}, {3.0, 0.0, 4.0, -2.0});
  EXPECT_EQ(cli::channel_norm_map(t), (std::vector<double>{5.0, 2.0}));
}

TEST(Visualize, StripLayoutAndSharedScale) {
  Image8 input(4, 2, 7);
  const Tensor pre({1, 1, 2}, {0.0, 1.0}), post({1, 1, 2}, {2.0, 1.0});
  const auto s = cli::denoise_strip(input, pre, post);
  ASSERT_EQ(s.width(), 12u);
  ASSERT_EQ(s.height(), 2u);
  EXPECT_EQ(s.at(3, 1, 0), 7);
  // pre: 0 -> 0, 1 -> 128; post: 2 -> 255, 1 -> 128; each feature pixel spans 2 columns.
  EXPECT_EQ(s.at(4, 0, 0), 0);
  EXPECT_EQ(s.at(5, 1, 2), 0);
  EXPECT_EQ(s.at(6, 0, 1), 128);
  EXPECT_EQ(s.at(8, 0, 0), 255);
  EXPECT_EQ(s.at(11, 1, 0), 128);
  EXPECT_THROW(cli::denoise_strip(input, pre, Tensor({1, 2, 1}, 0.0)), DimensionError);

  const Tensor flat({1, 1, 1}, {3.0});
  const auto f = cli::denoise_strip(Image8(2, 2), flat, flat);
  EXPECT_EQ(f.at(2, 0, 0), 0);
}
