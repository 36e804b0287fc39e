#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>

#include "bodylift/checkpoint.hpp"
#include "bodylift/error.hpp"
#include "bodylift/metrics.hpp"
#include "bodylift/model.hpp"
#include "bodylift/pose.hpp"
#include "bodylift/synth.hpp"
#include "bodylift/trainer.hpp"
#include "bodylift/verify/selfcheck.hpp"
#include "config.hpp"

namespace bodylift::cli {
namespace {

// Thrown for argument combinations CLI11 cannot express; maps to exit 2.
struct UsageError : Error {
  using Error::Error;
};

Skeleton resolve_skeleton(const std::string& name) {
  if (name == "h36m16") return Skeleton::h36m16();
  if (name == "h36m17") return Skeleton::h36m17();
  return load_skeleton(name);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

void require_joints(const Checkpoint& ckpt, const Dataset& data, const std::string& path) {
  if (data.empty()) return;
  const std::size_t want = ckpt.model.spec.joints;
  for (const auto& s : data) {
    if (s.joint_count() != want) {
      throw FormatError("joint set mismatch: checkpoint expects " + std::to_string(want) + " joints, " + path +
                        " has " + std::to_string(s.joint_count()));
    }
  }
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string skeleton = "h36m16";
  std::size_t count = 1000;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream&, std::ostream& err) {
  const Skeleton sk = resolve_skeleton(a.skeleton);
  const std::uint64_t seed = a.seed.value_or(default_seed());
  err << "synth: skeleton=" << a.skeleton << " joints=" << sk.joint_count() << " count=" << a.count
      << " seed=" << seed << "\n";
  Rng rng = make_rng(seed);
  save_dataset(synth_dataset(sk, a.count, rng), a.out);
  return kExitOk;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::optional<std::string> mode;
  std::string labeled;
  std::string unlabeled;
  std::string val;
  std::string config;
  std::string out_checkpoint;
  std::string log;
  std::string val_log;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, width, patience, disc_steps, root_index;
  std::optional<double> lr, dropout, lambda_est, lambda_perceptual, lambda_rec, lambda_disc_ul, lambda_perc_ul;
  std::optional<std::string> reencode_source;
  bool detach_reencoder = false;
  bool quiet = false;
};

train::TrainConfig resolve_train_config(const TrainArgs& a) {
  train::TrainConfig c;
  c.seed = default_seed();
  if (!a.config.empty()) apply_json(read_json_file(a.config), c);
  if (a.mode) c.mode = train::parse_mode(*a.mode);
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.width) c.width = *a.width;
  if (a.patience) c.patience = *a.patience;
  if (a.disc_steps) c.disc_steps = *a.disc_steps;
  if (a.root_index) c.root_index = *a.root_index;
  if (a.lr) c.lr = *a.lr;
  if (a.dropout) c.dropout = *a.dropout;
  if (a.lambda_est) c.weights.est = *a.lambda_est;
  if (a.lambda_perceptual) c.weights.perceptual = *a.lambda_perceptual;
  if (a.lambda_rec) c.weights.rec = *a.lambda_rec;
  if (a.lambda_disc_ul) c.weights.disc_unlabeled = *a.lambda_disc_ul;
  if (a.lambda_perc_ul) c.weights.perc_unlabeled = *a.lambda_perc_ul;
  if (a.reencode_source) c.reencode_source = train::parse_reencode_source(*a.reencode_source);
  if (a.detach_reencoder) c.detach_reencoder = true;
  c.validate();
  return c;
}

int cmd_train(const TrainArgs& a, std::ostream&, std::ostream& err) {
  const train::TrainConfig config = resolve_train_config(a);
  if (config.mode == train::TrainMode::Semi && a.unlabeled.empty()) {
    throw UsageError("--mode semi requires --unlabeled");
  }
  err << "resolved config: " << to_json(config).dump() << "\n";

  const Dataset labeled = load_dataset(a.labeled, config.root_index);
  const Dataset unlabeled = a.unlabeled.empty() ? Dataset{} : load_dataset(a.unlabeled, config.root_index);
  const Dataset val = a.val.empty() ? Dataset{} : load_dataset(a.val, config.root_index);
  err << "data: labeled=" << labeled.size() << " unlabeled=" << unlabeled.size() << " val=" << val.size() << "\n";

  train::TrainCallbacks cb;
  cb.on_warning = [&err](const std::string& msg) { err << "warning: " << msg << "\n"; };
  if (!a.quiet) {
    cb.on_validation = [&err](std::size_t epoch, double mpjpe) {
      err << "epoch " << epoch << " val MPJPE " << mpjpe << " mm\n";
    };
  }

  train::TrainResult result;
  try {
    result = train::train(labeled, unlabeled, val, config, cb);
  } catch (const train::TrainingDiverged& e) {
    const std::string rescue = a.out_checkpoint + ".last-good";
    save_checkpoint(e.last_good().model, e.last_good().stats, rescue);
    err << "error: " << e.what() << "\nlast good checkpoint written to " << rescue << "\n";
    return kExitFailure;
  }

  save_checkpoint(result.model, result.stats, a.out_checkpoint);
  if (!a.log.empty()) train::write_log_csv(result.log, a.log);
  if (!a.val_log.empty()) train::write_validation_csv(result.log, a.val_log);
  err << "trained " << result.epochs_run << " epochs, " << result.steps << " steps";
  if (result.best_val_mpjpe) err << ", best val MPJPE " << *result.best_val_mpjpe << " mm at epoch " << result.best_epoch;
  err << "\ncheckpoint written to " << a.out_checkpoint << "\n";
  return kExitOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string protocol = "all";
  bool per_action = false;
  std::string out;
  double pck_threshold = 150.0;
  std::size_t root_index = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data, a.root_index);
  require_joints(ckpt, data, a.data);
  metrics::EvalOptions opt;
  opt.pck_threshold = a.pck_threshold;
  opt.root_index = a.root_index;
  const auto report = metrics::evaluate(train::make_predictor(ckpt.model), data, ckpt.stats, opt);

  const bool all = a.protocol == "all";
  auto full = nlohmann::ordered_json::parse(metrics::report_json(report));
  nlohmann::ordered_json j;
  j["n_samples"] = full["n_samples"];
  if (all || a.protocol == "p1") j["mpjpe_p1_mm"] = full["mpjpe_p1_mm"];
  if (all || a.protocol == "p2") j["mpjpe_p2_mm"] = full["mpjpe_p2_mm"];
  if (all || a.protocol == "pck") {
    j["pck"] = full["pck"];
    j["pck_threshold_mm"] = full["pck_threshold_mm"];
  }
  if (all || a.protocol == "auc") j["auc"] = full["auc"];
  if (a.per_action) j["per_action"] = full["per_action"];

  if (a.per_action) {
    out << metrics::report_table(report);
  } else {
    char line[96];
    if (j.contains("mpjpe_p1_mm")) std::snprintf(line, sizeof line, "MPJPE P1  %10.3f mm\n", report.mpjpe_p1), out << line;
    if (j.contains("mpjpe_p2_mm")) std::snprintf(line, sizeof line, "MPJPE P2  %10.3f mm\n", report.mpjpe_p2), out << line;
    if (j.contains("pck")) std::snprintf(line, sizeof line, "PCK@%-5.0f %10.4f\n", report.pck_threshold, report.pck), out << line;
    if (j.contains("auc")) std::snprintf(line, sizeof line, "AUC       %10.4f\n", report.auc), out << line;
  }
  if (!a.out.empty()) open_output(a.out) << j.dump(2) << "\n";
  return kExitOk;
}

// --- predict -------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t root_index = 0;
};

int cmd_predict(const PredictArgs& a, std::ostream&, std::ostream& err) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  Dataset data = load_dataset(a.data, a.root_index);
  require_joints(ckpt, data, a.data);
  const auto preds = metrics::predict_poses(train::make_predictor(ckpt.model), data, ckpt.stats, a.root_index);
  for (std::size_t k = 0; k < data.size(); ++k) data[k].pose3d = preds[k];
  save_dataset(data, a.out);
  err << "predicted " << data.size() << " poses\n";
  return kExitOk;
}

// --- export-features -----------------------------------------------------

struct ExportArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  bool reencoded = false;
  std::size_t root_index = 0;
};

void write_feature_rows(std::ostream& os, std::size_t first_id, const char* source, const Tensor& features,
                        const std::vector<std::size_t>& ids) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    os << first_id + ids[r] << ',' << source;
    for (double v : features.row(r)) os << ',' << v;
    os << '\n';
  }
}

int cmd_export(const ExportArgs& a, std::ostream&, std::ostream& err) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  auto& model = ckpt.model;
  if (!model.is_full()) throw ConfigError("baseline checkpoints have no encoders to export");
  const Dataset data = load_dataset(a.data, a.root_index);
  require_joints(ckpt, data, a.data);

  auto os = open_output(a.out);
  os.precision(17);
  os << "id,source";
  for (std::size_t i = 0; i < model.spec.width; ++i) os << ",f" << i;
  os << '\n';

  net::ForwardContext ctx;
  ctx.mode = ad::Mode::Eval;
  ctx.trainable = false;
  constexpr std::size_t kChunk = 256;
  std::size_t rows = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    std::vector<std::size_t> all(end - start);
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = start + k;
    std::vector<std::size_t> ids(all.size());
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = k;

    ad::Var x2 = ad::constant(batch2d(data, all, ckpt.stats));
    ad::Var f2d = net::encode2d(model, x2, ctx);
    write_feature_rows(os, start, "2d", f2d.value(), ids);
    rows += ids.size();

    std::vector<std::size_t> lab, lab_ids;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (data[all[k]].labeled()) lab.push_back(all[k]), lab_ids.push_back(k);
    }
    if (!lab.empty()) {
      ad::Var h3d = net::encode3d(model, ad::constant(batch3d(data, lab, ckpt.stats)), ctx);
      write_feature_rows(os, start, "3d", h3d.value(), lab_ids);
      rows += lab.size();
    }
    if (a.reencoded) {
      ad::Var h = net::encode3d(model, net::generate(model, x2, f2d, ctx), ctx);
      write_feature_rows(os, start, "3d-reencoded", h.value(), ids);
      rows += ids.size();
    }
  }
  err << "wrote " << rows << " feature rows of width " << model.spec.width << "\n";
  return kExitOk;
}

// --- selfcheck -----------------------------------------------------------

int cmd_selfcheck(bool inject_fault, std::ostream& out) {
  verify::SelfCheckOptions opt;
  opt.inject_fault = inject_fault;
  const auto results = verify::run_selfcheck(opt);
  out << verify::format_results(results);
  const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"bodylift: 2D-to-3D human pose lifting with a shared 2D/3D feature space"};
  app.name("bodylift");
  app.require_subcommand(1);
  app.fallthrough(false);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic 2D/3D pose dataset (JSONL)");
  s->add_option("--skeleton", synth.skeleton, "h36m16, h36m17 or a skeleton JSON file")->capture_default_str();
  s->add_option("--count", synth.count, "Number of poses")->capture_default_str();
  s->add_option("--seed", synth.seed, "RNG seed (default: $BODYLIFT_SEED or 0)");
  s->add_option("--out", synth.out, "Output JSONL path")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a lifting model");
  t->add_option("--mode", tr.mode, "supervised | semi | baseline")
      ->check(CLI::IsMember({"supervised", "semi", "baseline"}));
  t->add_option("--labeled", tr.labeled, "Labeled training set (JSONL)")->required();
  t->add_option("--unlabeled", tr.unlabeled, "Unlabeled 2D poses (JSONL), semi mode");
  t->add_option("--val", tr.val, "Validation set for per-epoch MPJPE and early stopping");
  t->add_option("--config", tr.config, "JSON training config; flags override its values");
  t->add_option("--out-checkpoint", tr.out_checkpoint, "Checkpoint output path")->required();
  t->add_option("--log", tr.log, "Per-step loss CSV");
  t->add_option("--val-log", tr.val_log, "Per-epoch validation CSV");
  t->add_option("--seed", tr.seed, "RNG seed (default: $BODYLIFT_SEED or 0)");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr);
  t->add_option("--width", tr.width, "Feature width w");
  t->add_option("--dropout", tr.dropout);
  t->add_option("--patience", tr.patience, "Epochs without validation improvement before stopping (0 = off)");
  t->add_option("--lambda-est", tr.lambda_est);
  t->add_option("--lambda-perceptual", tr.lambda_perceptual);
  t->add_option("--lambda-rec", tr.lambda_rec);
  t->add_option("--lambda-disc-unlabeled", tr.lambda_disc_ul);
  t->add_option("--lambda-perc-unlabeled", tr.lambda_perc_ul);
  t->add_option("--reencode-source", tr.reencode_source, "generator | decoder")
      ->check(CLI::IsMember({"generator", "decoder"}));
  t->add_flag("--detach-reencoder", tr.detach_reencoder, "Freeze the 3D encoder on the self-consistency path");
  t->add_option("--disc-steps", tr.disc_steps);
  t->add_option("--root-index", tr.root_index);
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on labeled data");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  e->add_option("--protocol", ev.protocol, "p1 | p2 | pck | auc | all")
      ->check(CLI::IsMember({"p1", "p2", "pck", "auc", "all"}))
      ->capture_default_str();
  e->add_flag("--per-action", ev.per_action, "Break MPJPE down by action");
  e->add_option("--out", ev.out, "JSON report path");
  e->add_option("--pck-threshold", ev.pck_threshold, "mm")->capture_default_str();
  e->add_option("--root-index", ev.root_index);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Lift 2D poses to root-relative 3D (mm)");
  p->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
  p->add_option("--data", pr.data)->required()->check(CLI::ExistingFile);
  p->add_option("--out", pr.out)->required();
  p->add_option("--root-index", pr.root_index);

  ExportArgs ex;
  auto* x = app.add_subcommand("export-features", "Write 2D and 3D encoder features as CSV");
  x->add_option("--checkpoint", ex.checkpoint)->required()->check(CLI::ExistingFile);
  x->add_option("--data", ex.data)->required()->check(CLI::ExistingFile);
  x->add_option("--out", ex.out)->required();
  x->add_flag("--reencoded", ex.reencoded, "Also export 3D features of the predicted pose");
  x->add_option("--root-index", ex.root_index);

  bool inject_fault = false;
  auto* c = app.add_subcommand("selfcheck", "Gradient checks, metric oracles and checkpoint round trip");
  c->add_flag("--inject-fault", inject_fault)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out, err);
    if (*t) return cmd_train(tr, out, err);
    if (*e) return cmd_eval(ev, out, err);
    if (*p) return cmd_predict(pr, out, err);
    if (*x) return cmd_export(ex, out, err);
    if (*c) return cmd_selfcheck(inject_fault, out);
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace bodylift::cli
