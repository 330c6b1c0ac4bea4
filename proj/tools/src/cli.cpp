#include "lowlight_cli/cli.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "lowlight/error.hpp"
#include "lowlight/evaluate.hpp"
#include "lowlight/nl_block.hpp"
#include "lowlight/report.hpp"
#include "lowlight/synth.hpp"
#include "lowlight/trainer.hpp"

namespace lowlight::cli {

namespace fs = std::filesystem;

namespace {

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ArgumentError("bad number for " + what + ": " + text);
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

synth::Range parse_range(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ArgumentError(what + " expects LO,HI, got '" + text + "'");
  synth::Range r{parse_double(parts[0], what), parse_double(parts[1], what)};
  if (!(r.lo <= r.hi)) throw ArgumentError(what + " needs LO <= HI");
  return r;
}

std::vector<std::size_t> parse_dims(const std::string& text, std::size_t count,
                                    const std::string& what) {
  const auto parts = split(text, 'x');
  if (parts.size() != count) throw ArgumentError(what + " has the wrong number of dimensions: " + text);
  std::vector<std::size_t> dims;
  for (const auto& p : parts) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || ptr != p.data() + p.size() || v == 0) {
      throw ArgumentError("bad dimension in " + what + ": " + text);
    }
    dims.push_back(v);
  }
  return dims;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write " + path.string());
  f << text;
}

std::string format_g(double v, const char* fmt = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string weights_text(const backbone::StageWeights& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += (i ? " w" : "w") + std::to_string(i + 1) + "=" + format_g(w[i], "%.4f");
  }
  return s;
}

struct SynthArgs {
  std::string in, out;
  std::uint64_t seed = 0;
  std::optional<double> exposure, photons, read_sigma;
  double gamma = 2.2;
  std::string wb = "1,1,1";
  bool no_demosaic = false, no_jitter = false;
  std::string exposure_range, photons_range, read_sigma_range;
};

struct ScenesArgs {
  std::string out;
  std::size_t count = 20;
  std::string size = "32x32";
  std::uint64_t seed = 0;
};

struct GradcheckArgs {
  std::string form = "embedded-gaussian";
  std::string shape = "4x6x6";
  std::uint64_t seed = 0;
  std::size_t reduction = 2;
};

struct TrainArgs {
  std::string pairs, out, curve;
  std::size_t steps = 200, batch = 4, decay_interval = 0;
  double lr = 5e-4, lr_decay = 0.1, w_init = nl::kDefaultMixWeight;
  std::uint64_t seed = 0;
  std::string form = "embedded-gaussian";
  bool freeze_w = false;
};

struct DenoiseArgs {
  std::string in, ckpt, out;
  std::size_t stage = 1;
};

struct EvalArgs {
  std::string gt, pred, out, table, method = "predictions";
};

int do_synth(const SynthArgs& a, std::ostream& out) {
  synth::DegradationConfig base;
  base.seed = a.seed;
  base.gamma = a.gamma;
  base.demosaic = !a.no_demosaic;
  const auto gains = split(a.wb, ',');
  if (gains.size() != 3) throw ArgumentError("--wb expects R,G,B");
  for (std::size_t c = 0; c < 3; ++c) base.wb_gains[c] = parse_double(gains[c], "--wb");

  auto jitter = a.no_jitter ? synth::JitterRanges::none() : synth::JitterRanges::defaults();
  if (a.exposure) base.exposure = *a.exposure, jitter.exposure.reset();
  if (a.photons) base.photons_full_scale = *a.photons, jitter.photons_full_scale.reset();
  if (a.read_sigma) base.read_sigma = *a.read_sigma, jitter.read_sigma.reset();
  if (!a.exposure_range.empty()) jitter.exposure = parse_range(a.exposure_range, "--exposure-range");
  if (!a.photons_range.empty()) {
    jitter.photons_full_scale = parse_range(a.photons_range, "--photons-range");
  }
  if (!a.read_sigma_range.empty()) {
    jitter.read_sigma = parse_range(a.read_sigma_range, "--read-sigma-range");
  }

  const auto records = synth::degrade_dataset(a.in, a.out, base, jitter);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.error ? 1 : 0;
  out << "synth: " << records.size() - failed << " of " << records.size() << " images -> "
      << a.out << " (manifest.jsonl)\n";
  return failed == records.size() ? 1 : 0;
}

int do_scenes(const ScenesArgs& a, std::ostream& out) {
  const auto dims = parse_dims(a.size, 2, "--size");
  if (a.count == 0) throw ArgumentError("--count must be >= 1");
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu.png", i);
    write_image(fs::path(a.out) / name, synth::make_scene(dims[0], dims[1], mix_seed(a.seed, i)));
  }
  out << "scenes: " << a.count << " images " << a.size << " -> " << a.out << "\n";
  return 0;
}

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto form = nl::parse_form(a.form);
  const auto d = parse_dims(a.shape, 3, "--shape");
  if (a.reduction != 2 && a.reduction != 4) throw ArgumentError("--reduction must be 2 or 4");
  if (d[0] % a.reduction != 0) {
    throw ArgumentError("channel count " + std::to_string(d[0]) + " is not divisible by reduction " +
                        std::to_string(a.reduction));
  }
  const auto rep = nl::gradcheck(form, d[0], d[1], d[2], a.seed, a.reduction);
  out << "gradcheck form=" << nl::form_id(form) << " shape=" << a.shape << " seed=" << a.seed
      << " max_rel_err=" << format_g(rep.max_rel_err, "%.3e") << " checked=" << rep.checked
      << " worst=" << rep.worst << " " << (rep.pass ? "PASS" : "FAIL") << "\n";
  return rep.pass ? 0 : 2;
}

train::TrainConfig train_config(const TrainArgs& a) {
  train::TrainConfig cfg;
  cfg.steps = a.steps;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.lr_decay = a.lr_decay;
  cfg.decay_interval = a.decay_interval;
  cfg.seed = a.seed;
  cfg.train_w = !a.freeze_w;
  cfg.validate();
  return cfg;
}

backbone::BackboneSpec backbone_spec(const TrainArgs& a) {
  backbone::BackboneSpec spec;
  spec.seed = a.seed;
  spec.form = nl::parse_form(a.form);
  if (!(a.w_init >= 0.0 && a.w_init <= 1.0)) throw ArgumentError("--w-init must lie in [0, 1]");
  spec.w_init = a.w_init;
  return spec;
}

int do_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = train_config(a);
  auto bb = backbone::ToyBackbone::create(backbone_spec(a));
  const auto data = train::load_pairs(a.pairs);
  out << "train: " << data.size() << " pairs, form=" << a.form << ", steps=" << cfg.steps
      << ", lr=" << format_g(cfg.lr) << "\n";
  const auto result = train::train_nl_blocks(bb, data, cfg);
  out << "initial_loss=" << format_g(result.initial_loss, "%.6e") << " "
      << weights_text(result.initial_w) << "\n";
  out << "final_loss=" << format_g(result.final_loss, "%.6e") << " "
      << weights_text(result.final_w) << "\n";
  if (!a.out.empty()) {
    backbone::save_checkpoint(a.out, bb);
    out << "checkpoint -> " << a.out << "\n";
  }
  if (!a.curve.empty()) {
    std::ostringstream csv;
    train::write_curve_csv(csv, result);
    write_text(a.curve, csv.str());
    out << "curve -> " << a.curve << "\n";
  }
  return 0;
}

int do_ablate(const TrainArgs& a, std::ostream& out) {
  const auto cfg = train_config(a);
  const auto spec = backbone_spec(a);
  const auto data = train::load_pairs(a.pairs);
  const auto table = report::ablation_table(train::ablate_forms(data, spec, cfg));
  if (!a.out.empty()) write_text(a.out, table);
  out << table;
  return 0;
}

int do_denoise(const DenoiseArgs& a, std::ostream& out) {
  if (a.stage < 1 || a.stage > backbone::kStages) throw ArgumentError("--stage must be 1..4");
  const Image8 img = read_image(a.in);
  if (img.width() < backbone::kMinImageSide || img.height() < backbone::kMinImageSide) {
    throw ArgumentError("image must be at least 16x16");
  }
  const auto bb = backbone::load_checkpoint(a.ckpt);
  const auto trace = backbone::extract_traced(backbone::image_to_tensor(img), bb, true);
  const auto& pre = trace.pre_nl[a.stage - 1];
  const auto& post = trace.features[a.stage - 1];
  write_image(a.out, denoise_strip(img, pre, post));
  out << "denoise: stage " << a.stage << " features " << pre.shape_string()
      << " w=" << format_g(bb.nl_blocks[a.stage - 1].w, "%.4f") << " -> " << a.out << "\n";
  return 0;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
  const auto gt = eval::load_annotations(a.gt);
  const auto preds = eval::load_predictions(a.pred);
  const auto rep = eval::evaluate(gt, preds);
  const std::string json = eval::report_to_json(rep).dump(2) + "\n";
  const std::string table = report::eval_table({{a.method, rep.overall}});
  if (!a.table.empty()) write_text(a.table, table);
  if (a.out.empty()) {
    out << json;
  } else {
    write_text(a.out, json);
    out << table;
  }
  return 0;
}

std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-light feature denoising toolkit", "lowlight"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat JSON file whose keys mirror the flags");
  };

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Degrade a directory of images");
  synth_cmd->add_option("--in", sa.in, "Input image directory")->required();
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--seed", sa.seed, "Base seed");
  synth_cmd->add_option("--exposure", sa.exposure, "Fixed exposure (disables its jitter)");
  synth_cmd->add_option("--photons", sa.photons, "Fixed photons_full_scale");
  synth_cmd->add_option("--read-sigma", sa.read_sigma, "Fixed read noise sigma");
  synth_cmd->add_option("--gamma", sa.gamma, "Display gamma");
  synth_cmd->add_option("--wb", sa.wb, "White-balance gains R,G,B");
  synth_cmd->add_flag("--no-demosaic", sa.no_demosaic, "Skip the Bayer mosaic/demosaic stage");
  synth_cmd->add_flag("--no-jitter", sa.no_jitter, "Disable default per-image jitter");
  synth_cmd->add_option("--exposure-range", sa.exposure_range, "LO,HI log-uniform exposure");
  synth_cmd->add_option("--photons-range", sa.photons_range, "LO,HI log-uniform photons");
  synth_cmd->add_option("--read-sigma-range", sa.read_sigma_range, "LO,HI uniform read sigma");
  add_config(synth_cmd);

  ScenesArgs sc;
  auto* scenes_cmd = app.add_subcommand("scenes", "Write procedural clean images");
  scenes_cmd->add_option("--out", sc.out, "Output directory")->required();
  scenes_cmd->add_option("--count", sc.count, "Number of images");
  scenes_cmd->add_option("--size", sc.size, "WxH");
  scenes_cmd->add_option("--seed", sc.seed, "Seed");
  add_config(scenes_cmd);

  GradcheckArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the NL block");
  grad_cmd->add_option("--form", ga.form, "dot-product | gaussian | embedded-gaussian");
  grad_cmd->add_option("--shape", ga.shape, "CxHxW");
  grad_cmd->add_option("--seed", ga.seed, "Seed");
  grad_cmd->add_option("--reduction", ga.reduction, "Channel reduction (2 or 4)");
  add_config(grad_cmd);

  TrainArgs ta;
  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--pairs", ta.pairs, "Directory with clean/ and low/")->required();
    sub->add_option("--steps", ta.steps, "SGD steps");
    sub->add_option("--lr", ta.lr, "Initial learning rate");
    sub->add_option("--batch", ta.batch, "Batch size");
    sub->add_option("--lr-decay", ta.lr_decay, "Learning-rate decay factor");
    sub->add_option("--decay-interval", ta.decay_interval, "Steps between decays (0: 60%/90%)");
    sub->add_option("--seed", ta.seed, "Seed");
    sub->add_option("--w-init", ta.w_init, "Initial mixing weight w");
    sub->add_flag("--freeze-w", ta.freeze_w, "Keep every w at its initial value");
    add_config(sub);
  };
  auto* train_cmd = app.add_subcommand("train", "Train the NL blocks of the toy backbone");
  add_train_flags(train_cmd);
  train_cmd->add_option("--form", ta.form, "NL form");
  train_cmd->add_option("--out", ta.out, "Checkpoint path");
  train_cmd->add_option("--curve", ta.curve, "Loss curve CSV path");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train every NL form and tabulate");
  add_train_flags(ablate_cmd);
  ablate_cmd->add_option("--out", ta.out, "Table path");

  DenoiseArgs da;
  auto* denoise_cmd = app.add_subcommand("denoise", "Render pre/post NL features of one stage");
  denoise_cmd->add_option("--in", da.in, "Input image")->required();
  denoise_cmd->add_option("--ckpt", da.ckpt, "Checkpoint")->required();
  denoise_cmd->add_option("--stage", da.stage, "Stage 1..4");
  denoise_cmd->add_option("--out", da.out, "Output image")->required();
  add_config(denoise_cmd);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "COCO-style mask AP");
  eval_cmd->add_option("--gt", ea.gt, "Annotation JSON")->required();
  eval_cmd->add_option("--pred", ea.pred, "Prediction JSON")->required();
  eval_cmd->add_option("--out", ea.out, "Report JSON path (stdout when omitted)");
  eval_cmd->add_option("--table", ea.table, "Plain-text table path");
  eval_cmd->add_option("--method", ea.method, "Row label in the table");
  add_config(eval_cmd);

  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  try {
    if (auto cfg_path = find_config(args)) {
      std::ifstream f(*cfg_path);
      if (!f) throw ArgumentError("cannot open config " + *cfg_path);
      nlohmann::json cfg;
      try {
        f >> cfg;
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed config JSON at byte " + std::to_string(e.byte), e.byte);
      }
      args = merge_config(args, cfg);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  std::vector<const char*> cargv{argc > 0 ? argv[0] : "lowlight"};
  for (const auto& s : args) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) return do_synth(sa, out);
    if (scenes_cmd->parsed()) return do_scenes(sc, out);
    if (grad_cmd->parsed()) return do_gradcheck(ga, out);
    if (train_cmd->parsed()) return do_train(ta, out);
    if (ablate_cmd->parsed()) return do_ablate(ta, out);
    if (denoise_cmd->parsed()) return do_denoise(da, out);
    if (eval_cmd->parsed()) return do_eval(ea, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace lowlight::cli
