#include "posefuse/pipeline.hpp"
#include "posefuse/hash.hpp"
#include "posefuse/serialize.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace posefuse;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitContract = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string config;
  std::uint64_t seed = 42;
  bool seed_set = false;
  std::string out;
  std::string data;
  std::string models;
  std::string cham;
  std::string strategy = "cham";
  std::string split = "heldout";
  int sample = 0;
  int runs = 0;
  bool oracle = false;
  std::string what = "gt";
};

Config load(const Options& o) { return o.config.empty() ? Config{} : load_config(o.config); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, dir);
}

Backbones load_backbones(const std::string& dir) {
  Backbones bb;
  bb.body = deserialize_body_backbone(read_file(dir + "/body.bin"));
  bb.hand = deserialize_hand_backbone(read_file(dir + "/hand.bin"));
  return bb;
}

ChamParams load_cham(const Options& o, const Config& cfg) {
  if (o.cham.empty()) return init_cham(cfg.model.cham_seed, cfg.model.depth, cfg.model.channels);
  return deserialize_cham(read_file(o.cham));
}

const std::vector<int>& split_ids(const Dataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "heldout") return d.heldout;
  throw Error(Errc::ConfigError, "unknown split: " + name);
}

const Sample& pick_sample(const Dataset& d, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= d.samples.size()) {
    throw Error(Errc::ConfigError, "sample index out of range", index);
  }
  return d.samples[static_cast<std::size_t>(index)];
}

std::string context_json(const Config& cfg, const Dataset& d, const Backbones& bb, const ChamParams* cham,
                         const std::string& strategy, const std::string& split) {
  nlohmann::ordered_json c;
  c["strategy"] = strategy;
  c["split"] = split;
  c["seeds"] = {{"dataset", d.seed}, {"train", cfg.train.seed}, {"pretrain", cfg.pretrain.seed}};
  c["hashes"] = {{"body_spec", hash_hex(d.body_spec_hash)},
                 {"hand_spec", hash_hex(d.hand_spec_hash)},
                 {"body_backbone", hash_hex(bb.body.hash)},
                 {"hand_backbone", hash_hex(bb.hand.hash)}};
  if (cham) c["hashes"]["cham"] = hash_hex(cham_hash(*cham));
  c["config"] = nlohmann::ordered_json::parse(config_to_json(cfg));
  return c.dump();
}

int cmd_generate(const Options& o) {
  const Config cfg = load(o);
  const Models m = make_models(cfg);
  const Dataset d = generate_dataset(cfg, m, o.seed);
  save_dataset(d, cfg, o.out);
  std::cout << "wrote " << d.samples.size() << " samples to " << o.out << "\n";
  return 0;
}

int cmd_pretrain(const Options& o) {
  Config cfg = load(o);
  if (o.seed_set) cfg.pretrain.seed = o.seed;
  const Models m = make_models(cfg);
  const Dataset d = load_dataset(o.data, m);
  PretrainReport rep;
  const Backbones bb = pretrain_backbones(cfg, m, d, &rep);
  ensure_dir(o.out);
  write_file(o.out + "/body.bin", serialize_body_backbone(bb.body));
  write_file(o.out + "/hand.bin", serialize_hand_backbone(bb.hand));
  std::ofstream log(o.out + "/pretrain_log.jsonl");
  for (std::size_t i = 0; i < rep.step_loss.size(); ++i) {
    log << nlohmann::json{{"step", i + 1}, {"loss", rep.step_loss[i]}}.dump() << '\n';
  }
  for (std::size_t i = 0; i < rep.eval_steps.size(); ++i) {
    log << nlohmann::json{{"eval_step", rep.eval_steps[i]}, {"train_split_loss", rep.eval_loss[i]}}.dump() << '\n';
  }
  std::cout << "body " << hash_hex(bb.body.hash) << " hand " << hash_hex(bb.hand.hash) << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  Config cfg = load(o);
  if (o.seed_set) cfg.train.seed = o.seed;
  const Models m = make_models(cfg);
  const Dataset d = load_dataset(o.data, m);
  const Backbones bb = load_backbones(o.models);
  const std::vector<PreparedSample> train = prepare_samples(m, bb.hand, d, d.train);
  const std::vector<PreparedSample> held = prepare_samples(m, bb.hand, d, d.heldout);
  ensure_dir(o.out);
  std::ofstream log(o.out + "/train_log.jsonl");
  TrainHooks hooks;
  hooks.log = &log;
  hooks.checkpoint = [&](int step, const ChamParams& p) {
    write_file(o.out + "/cham_step" + std::to_string(step) + ".bin", serialize_cham(p));
  };
  hooks.epoch_end = [&](int epoch, const ChamParams& p) {
    if (held.empty()) return;
    const MetricsReport r = run_baseline(Strategy::Cham, m, bb, &p, held);
    log << nlohmann::json{{"epoch_end", epoch},
                          {"heldout",
                           {{"mpvpe_full_mm", r.mpvpe_full},
                            {"mpvpe_hands_mm", r.mpvpe_hands},
                            {"mrrpe_mm", r.mrrpe},
                            {"wrist_geodesic_rad", r.wrist_geodesic}}}}
               .dump()
        << '\n';
  };
  const ChamParams init = init_cham(cfg.model.cham_seed, cfg.model.depth, cfg.model.channels);
  const ChamParams out = train_cham(cfg, m, bb, train, init, hooks);
  write_file(o.out + "/cham.bin", serialize_cham(out));
  std::cout << "cham " << hash_hex(cham_hash(out)) << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const Config cfg = load(o);
  const Models m = make_models(cfg);
  const Dataset d = load_dataset(o.data, m);
  const Backbones bb = load_backbones(o.models);
  const Strategy s = parse_strategy(o.strategy);
  const ChamParams cham = load_cham(o, cfg);
  const std::vector<PreparedSample> split = prepare_samples(m, bb.hand, d, split_ids(d, o.split));
  InferOptions opt;
  opt.strategy = s;
  opt.oracle = o.oracle;
  const MetricsReport r = evaluate(m, bb, &cham, split, opt);
  const std::string doc =
      metrics_json(r, context_json(cfg, d, bb, s == Strategy::Cham ? &cham : nullptr, o.strategy, o.split));
  if (o.out.empty()) {
    std::cout << doc;
  } else {
    write_file(o.out, doc);
    std::cout << "hand mpvpe " << r.mpvpe_hands << " mm, full mpvpe " << r.mpvpe_full << " mm\n";
  }
  return 0;
}

int cmd_infer(const Options& o) {
  const Config cfg = load(o);
  const Models m = make_models(cfg);
  const Dataset d = load_dataset(o.data, m);
  const Backbones bb = load_backbones(o.models);
  const ChamParams cham = load_cham(o, cfg);
  const Sample& s = pick_sample(d, o.sample);
  InferOptions opt;
  opt.strategy = parse_strategy(o.strategy);
  opt.oracle = o.oracle;
  const InferResult res = infer(m, bb, &cham, s, opt);
  const SampleTargets tg = make_targets(m, s.scene);
  SampleMetrics sm = sample_metrics(m, s.scene, res.assembly, tg.gt);
  sm.index = s.index;
  ensure_dir(o.out);
  export_obj(res.assembly.mesh, o.out + "/mesh.obj");
  write_file(o.out + "/metrics.json", metrics_json(aggregate({sm}), context_json(cfg, d, bb, &cham, o.strategy, "")));
  std::cout << "hand mpvpe " << sm.mpvpe_hands << " mm, full mpvpe " << sm.mpvpe_full << " mm\n";
  return 0;
}

int cmd_export(const Options& o) {
  const Config cfg = load(o);
  const Models m = make_models(cfg);
  if (o.what == "body") {
    export_obj(Mesh{m.body.template_vertices, m.body.faces}, o.out);
  } else if (o.what == "hand") {
    export_obj(Mesh{m.hand.template_vertices, m.hand.faces}, o.out);
  } else if (o.what == "gt") {
    const Dataset d = load_dataset(o.data, m);
    export_obj(make_targets(m, pick_sample(d, o.sample).scene).gt.mesh, o.out);
  } else {
    throw Error(Errc::ConfigError, "export --what must be body, hand or gt");
  }
  return 0;
}

int cmd_bench(const Options& o) {
  const Config cfg = load(o);
  const Models m = make_models(cfg);
  const Dataset d = load_dataset(o.data, m);
  const Backbones bb = load_backbones(o.models);
  const ChamParams cham = load_cham(o, cfg);
  std::vector<const Sample*> samples;
  for (int i : split_ids(d, o.split)) samples.push_back(&d.samples[static_cast<std::size_t>(i)]);
  const StageTimings t = report_timings(m, bb, cham, samples, o.runs > 0 ? o.runs : cfg.bench.runs);
  const std::string doc = timings_json(t);
  if (o.out.empty()) {
    std::cout << doc;
  } else {
    write_file(o.out, doc);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand-aware whole-body mesh recovery toolkit"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    c->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          o.seed = s;
          o.seed_set = true;
        },
        "random seed");
  };
  auto* gen = app.add_subcommand("generate", "synthesize a dataset");
  common(gen);
  gen->add_option("--out", o.out, "output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "pretrain and freeze the backbones");
  common(pre);
  pre->add_option("--data", o.data, "dataset directory")->required();
  pre->add_option("--out", o.out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train CHAM with frozen backbones");
  common(train);
  train->add_option("--data", o.data, "dataset directory")->required();
  train->add_option("--models", o.models, "backbone directory")->required();
  train->add_option("--out", o.out, "output directory")->required();

  auto add_inference = [&](CLI::App* c) {
    common(c);
    c->add_option("--data", o.data, "dataset directory")->required();
    c->add_option("--models", o.models, "backbone directory")->required();
    c->add_option("--cham", o.cham, "CHAM parameters (default: zero-initialized)");
    c->add_option("--strategy", o.strategy, "frozen | wrist_copy | cham")
        ->check(CLI::IsMember({"frozen", "wrist_copy", "cham"}));
  };
  auto* ev = app.add_subcommand("eval", "evaluate a split");
  add_inference(ev);
  ev->add_option("--split", o.split, "train | heldout")->check(CLI::IsMember({"train", "heldout"}));
  ev->add_option("--out", o.out, "metrics JSON path (stdout when omitted)");
  ev->add_flag("--oracle", o.oracle, "inject ground-truth hands, wrists and body shape");

  auto* inf = app.add_subcommand("infer", "run the pipeline on one sample");
  add_inference(inf);
  inf->add_option("--sample", o.sample, "sample index")->required();
  inf->add_option("--out", o.out, "output directory")->required();
  inf->add_flag("--oracle", o.oracle, "inject ground-truth hands, wrists and body shape");

  auto* ex = app.add_subcommand("export", "write a mesh as OBJ");
  common(ex);
  ex->add_option("--what", o.what, "gt | body | hand")->check(CLI::IsMember({"gt", "body", "hand"}));
  ex->add_option("--data", o.data, "dataset directory (for gt)");
  ex->add_option("--sample", o.sample, "sample index (for gt)");
  ex->add_option("--out", o.out, "OBJ path")->required();

  auto* bench = app.add_subcommand("bench", "per-stage timings");
  add_inference(bench);
  bench->add_option("--split", o.split, "train | heldout")->check(CLI::IsMember({"train", "heldout"}));
  bench->add_option("--runs", o.runs, "number of runs (default from config)");
  bench->add_option("--out", o.out, "timings JSON path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*pre) return cmd_pretrain(o);
    if (*train) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*inf) return cmd_infer(o);
    if (*ex) return cmd_export(o);
    if (*bench) return cmd_bench(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::ConfigError:
        return kExitUsage;
      case Errc::NonFiniteLoss:
      case Errc::NonFiniteEvaluation:
        return kExitNumeric;
      default:
        return kExitContract;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitUsage;
}
