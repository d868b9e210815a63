#include "auxmat/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "auxmat/compositor.hpp"
#include "auxmat/gradcheck.hpp"
#include "auxmat/igdrnet.hpp"
#include "auxmat/image_io.hpp"
#include "auxmat/linedet.hpp"
#include "auxmat/metrics.hpp"
#include "auxmat/parallel.hpp"
#include "auxmat/pseudogt.hpp"
#include "auxmat/random.hpp"

namespace auxmat {

namespace fs = std::filesystem;

namespace {

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  write_atomically(path, [&](std::ostream& o) { o << text; });
}

ImageF32 read_mask_png(const fs::path& path) {
  ImageF32 m = read_png(path);
  if (m.channels() != 1) m = to_gray(m);
  return threshold_mask(m, 0.5f);
}

ImageF32 read_alpha_png(const fs::path& path) {
  ImageF32 a = read_png(path);
  return a.channels() == 1 ? a : to_gray(a);
}

struct Options {
  // composite
  std::string fg, bg, alpha, out;
  // guidance
  float threshold = 0.95f;
  int erode_k = 21;
  bool perturb = false;
  std::string distance;
  // lsd / homoadapt
  std::string image;
  std::string out_segments, out_distance, out_activation;
  LsdParams lsd;
  int n = 100;
  std::uint64_t seed = 0;
  // pseudogt
  std::string out_bl;
  // synth
  std::string task = "matting";
  std::string out_dir;
  int size = 64;
  int adaptation_n = 5;
  // train
  std::string config, out_checkpoint, out_curves;
  int steps = -1;
  // infer
  std::string checkpoint, guidance, out_alpha;
  // eval
  std::string pred_dir, gt_dir, out_report, out_table;
  int detail_band = 15;
  double max_sad = -1.0;
  // gradcheck
  std::string op = "all";
};

void run_composite(const Options& o, std::ostream&) {
  const ImageF32 f = read_png(o.fg), b = read_png(o.bg);
  write_png(o.out, composite(f, b, read_alpha_png(o.alpha)));
}

void run_guidance(const Options& o, std::ostream&) {
  BinaryMask m = make_guidance(read_alpha_png(o.alpha), o.threshold, o.erode_k);
  if (o.perturb) {
    std::optional<ImageF32> d;
    if (!o.distance.empty()) d = read_field(o.distance);
    m = perturb_guidance(m, d ? &*d : nullptr, o.seed);
  }
  write_png(o.out, m);
}

void run_lsd(const Options& o, std::ostream& out) {
  const std::vector<LineSegment> segs = lsd_detect(to_gray(read_png(o.image)), o.lsd);
  write_text(o.out_segments, segments_to_json(segs));
  out << segs.size() << " segments\n";
}

void run_homoadapt(const Options& o, std::ostream&) {
  AdaptationParams p;
  p.n = o.n;
  p.lsd = o.lsd;
  const DistanceField d = homography_adaptation(to_gray(read_png(o.image)), o.seed, p);
  write_field(o.out_distance, d);
  if (!o.out_activation.empty()) write_png(o.out_activation, line_activation(d));
}

void run_pseudogt(const Options& o, std::ostream&) {
  const DistanceField d = read_field(o.distance);
  write_field(o.out_bl, background_line_gt(line_activation(d), read_alpha_png(o.alpha)).pack());
}

void run_synth(const Options& o, std::ostream& out) {
  const Task task = task_from_name(o.task);
  if (o.n < 1) throw std::invalid_argument("--n must be >= 1");
  fs::create_directories(o.out_dir);
  SynthOptions so;
  so.size = o.size;
  so.adaptation_n = o.adaptation_n;
  std::vector<SampleBundle> samples(static_cast<std::size_t>(o.n));
  parallel_for(samples.size(), [&](std::size_t i) { samples[i] = synth_sample(task, derive_seed(o.seed, i), so); });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SampleBundle& s = samples[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "%04zu_", i);
    const fs::path base = fs::path(o.out_dir) / stem;
    auto file = [&](const char* name) { return base.string() + name; };
    write_png(file("image.png"), s.image);
    write_png(file("guidance.png"), s.guidance);
    if (s.alpha) write_png(file("alpha.png"), *s.alpha);
    if (s.seg) write_png(file("seg.png"), *s.seg);
    if (s.edge) write_png(file("edge.png"), *s.edge);
    if (s.bl) write_field(file("bl.fld"), s.bl->pack());
    if (s.distance) write_field(file("distance.fld"), *s.distance);
  }
  out << samples.size() << " " << task_name(task) << " samples\n";
}

void run_train(const Options& o, std::ostream& out) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : TrainConfig::from_json(read_text(o.config));
  if (o.steps >= 0) cfg.steps = o.steps;
  const TrainResult r = train(cfg);
  if (r.non_finite_grad) throw VerificationFailure("non-finite gradient during training");
  ad::save_checkpoint(o.out_checkpoint, r.network.named_parameters());
  if (!o.out_curves.empty()) write_text(o.out_curves, curve_to_csv(r.curve));
  for (int k = 0; k < 3; ++k) {
    const std::vector<double> v = task_totals(r.curve, static_cast<Task>(k));
    if (v.empty()) continue;
    const std::size_t window = std::min<std::size_t>(20, v.size());
    const auto [first, last] = smoothed_endpoints(v, window);
    out << task_name(static_cast<Task>(k)) << ": " << first << " -> " << last << "\n";
  }
  out << "checksum " << std::hex << r.network.checksum() << std::dec << "\n";
}

void run_infer(const Options& o, std::ostream&) {
  const Network net = Network::from_checkpoint(ad::load_checkpoint(o.checkpoint));
  ImageF32 img = read_png(o.image);
  if (img.channels() == 1) {
    ImageF32 rgb(img.height(), img.width(), 3);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x);
      }
    }
    img = std::move(rgb);
  }
  write_png(o.out_alpha, infer_alpha(net, img, read_mask_png(o.guidance)));
}

void run_eval(const Options& o, std::ostream& out) {
  EvalOptions opts;
  opts.detail_band = o.detail_band;
  const EvalReport report = evaluate(o.pred_dir, o.gt_dir, opts);
  if (!o.out_report.empty()) write_text(o.out_report, report_to_json(report));
  const std::string table = report_to_table(report);
  if (!o.out_table.empty()) write_text(o.out_table, table);
  out << table;
  if (o.max_sad >= 0.0 && report.mean_whole.sad > o.max_sad) {
    throw VerificationFailure("mean SAD " + std::to_string(report.mean_whole.sad) + " exceeds " + std::to_string(o.max_sad));
  }
}

void run_gradcheck(const Options& o, std::ostream& out) {
  bool ok = true;
  for (const GradCheckReport& r : run_gradchecks(o.op)) {
    out << std::left << std::setw(24) << r.op << " max_rel_err " << std::scientific << std::setprecision(3)
        << r.max_rel_error << " tol " << r.tolerance << std::defaultfloat << (r.passed() ? "  ok" : "  FAIL") << "\n";
    ok = ok && r.passed();
  }
  if (!ok) throw VerificationFailure("gradient check tolerance exceeded");
}

void add_lsd_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--angle-tol", o.lsd.angle_tol_deg, "level-line angle tolerance in degrees");
  cmd->add_option("--min-density", o.lsd.min_density);
  cmd->add_option("--min-length", o.lsd.min_length);
  cmd->add_option("--mag-quantile", o.lsd.mag_quantile);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"auxmat: mask-guided matting toolkit"};
  app.require_subcommand(1);
  Options o;
  std::function<void(const Options&, std::ostream&)> action;
  auto sub = [&](const char* name, const char* help, void (*fn)(const Options&, std::ostream&)) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->callback([&action, fn] { action = fn; });
    return cmd;
  };

  CLI::App* c = sub("composite", "I = A*F + (1-A)*B", run_composite);
  c->add_option("--fg", o.fg)->required();
  c->add_option("--bg", o.bg)->required();
  c->add_option("--alpha", o.alpha)->required();
  c->add_option("--out", o.out)->required();

  c = sub("guidance", "binarize and erode an alpha matte", run_guidance);
  c->add_option("--alpha", o.alpha)->required();
  c->add_option("--threshold", o.threshold)->capture_default_str();
  c->add_option("--erode", o.erode_k)->capture_default_str();
  c->add_flag("--perturb", o.perturb, "apply the random training perturbation");
  c->add_option("--distance", o.distance, "FLD1 distance field for line perturbation");
  c->add_option("--seed", o.seed);
  c->add_option("--out", o.out)->required();

  c = sub("lsd", "detect line segments", run_lsd);
  c->add_option("--image", o.image)->required();
  c->add_option("--out-segments", o.out_segments)->required();
  add_lsd_flags(c, o);

  c = sub("homoadapt", "median distance field over random homographies", run_homoadapt);
  c->add_option("--image", o.image)->required();
  c->add_option("--n", o.n)->capture_default_str();
  c->add_option("--seed", o.seed);
  c->add_option("--out-distance", o.out_distance)->required();
  c->add_option("--out-activation", o.out_activation, "also write exp(-D/2) as PNG");
  add_lsd_flags(c, o);

  c = sub("pseudogt", "background-line target with ignore band (FLD1, C=2: values, valid)", run_pseudogt);
  c->add_option("--distance", o.distance)->required();
  c->add_option("--alpha", o.alpha)->required();
  c->add_option("--out-bl", o.out_bl)->required();

  c = sub("synth", "generate synthetic training samples", run_synth);
  c->add_option("--task", o.task)->check(CLI::IsMember({"matting", "seg", "bgline"}))->capture_default_str();
  c->add_option("--n", o.n)->required();
  c->add_option("--seed", o.seed);
  c->add_option("--size", o.size)->capture_default_str();
  c->add_option("--adaptation-n", o.adaptation_n)->capture_default_str();
  c->add_option("--out-dir", o.out_dir)->required();

  c = sub("train", "train the toy network", run_train);
  c->add_option("--config", o.config, "JSON training config");
  c->add_option("--steps", o.steps, "override the configured step count");
  c->add_option("--out-checkpoint", o.out_checkpoint)->required();
  c->add_option("--out-curves", o.out_curves);

  c = sub("infer", "predict an alpha matte", run_infer);
  c->add_option("--checkpoint", o.checkpoint)->required();
  c->add_option("--image", o.image)->required();
  c->add_option("--guidance", o.guidance)->required();
  c->add_option("--out-alpha", o.out_alpha)->required();

  c = sub("eval", "SAD/MSE/Grad/Conn over paired directories", run_eval);
  c->add_option("--pred-dir", o.pred_dir)->required();
  c->add_option("--gt-dir", o.gt_dir)->required();
  c->add_option("--out-report", o.out_report);
  c->add_option("--out-table", o.out_table);
  c->add_option("--detail-band", o.detail_band)->capture_default_str();
  c->add_option("--max-sad", o.max_sad, "exit 3 when mean whole-image SAD exceeds this");

  c = sub("gradcheck", "finite-difference checks of every differentiable op", run_gradcheck);
  c->add_option("--op", o.op)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    action(o, out);
  } catch (const VerificationFailure& e) {
    err << "verification failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace auxmat
