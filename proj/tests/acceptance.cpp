// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1-7 and 10 are fast; 8 and 9 train the desk-scale
// synthetic corpus (resumable, cached under the output directory).
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mcat/experiment.hpp"

using namespace mcat;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---- criterion 1: analytics vs brute-force oracles, exact ----

bool analytics_exact() {
  Rng rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 2 + int(rng.uniform_int(10));
    const int g = 1 + int(rng.uniform_int(std::uint64_t(c)));
    std::vector<int> cats(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) cats[std::size_t(i)] = i % g;
    const int n = 50 + int(rng.uniform_int(200));
    std::vector<int> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      truth[std::size_t(k)] = int(rng.uniform_int(std::uint64_t(c)));
      pred[std::size_t(k)] = int(rng.uniform_int(std::uint64_t(c)));
    }

    // confusion build: naive nested counter
    const ConfusionMatrix cm = build_confusion(truth, pred, c, cats);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j) {
        std::int64_t count = 0;
        for (int k = 0; k < n; ++k)
          if (truth[std::size_t(k)] == i && pred[std::size_t(k)] == j) ++count;
        if (cm.at(i, j) != count) return false;
      }

    // merge: item-level recount at the category level
    const ConfusionMatrix super = merge_to_superclasses(cm);
    for (int a = 0; a < super.num_classes; ++a)
      for (int b = 0; b < super.num_classes; ++b) {
        std::int64_t count = 0;
        for (int k = 0; k < n; ++k)
          if (cats[std::size_t(truth[std::size_t(k)])] == a &&
              cats[std::size_t(pred[std::size_t(k)])] == b)
            ++count;
        if (super.at(a, b) != count) return false;
      }

    // leakage: item-level inter/within tallies
    std::int64_t wrong = 0, inter = 0;
    for (int k = 0; k < n; ++k) {
      if (truth[std::size_t(k)] == pred[std::size_t(k)]) continue;
      ++wrong;
      if (cats[std::size_t(truth[std::size_t(k)])] != cats[std::size_t(pred[std::size_t(k)])])
        ++inter;
    }
    const LeakageReport leak = leakage(cm);
    if (leak.total_error.num != wrong || leak.total_error.den != n) return false;
    if (leak.inter_category_error.num != inter) return false;
    if (leak.within_category_error.num != wrong - inter) return false;
  }

  // histogram: linear-scan oracle
  Rng hrng(1002);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + int(hrng.uniform_int(60));
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = hrng.uniform(-20.0, 20.0);
    const double w = 0.5 + hrng.uniform(0.0, 3.0);
    const Histogram h = histogram(values, w);
    std::int64_t total = 0;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      std::int64_t count = 0;
      for (double v : values)
        if (v >= h.edges[b] && v < h.edges[b] + w) ++count;
      if (h.counts[b] != count) return false;
      total += h.counts[b];
    }
    if (total != n) return false;
  }

  // relative increase: direct element-wise division
  Rng rrng(1003);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + int(rrng.uniform_int(8));
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(n));
    std::vector<double> errors(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      sizes[std::size_t(i)] = 1 + std::int64_t(rrng.uniform_int(5000));
      errors[std::size_t(i)] = rrng.uniform(0.01, 0.99);
    }
    const ScalingCurve curve = relative_increase_curve(sizes, errors);
    for (int i = 0; i < n; ++i) {
      if (curve.relative_sizes[std::size_t(i)] != double(sizes[std::size_t(i)]) / double(sizes[0]))
        return false;
      if (curve.relative_errors[std::size_t(i)] != errors[std::size_t(i)] / errors[0])
        return false;
    }
  }
  return true;
}

// ---- criterion 2: published scaling numbers ----

bool published_scaling_curve() {
  const ScalingCurve curve =
      relative_increase_curve({10, 50, 100, 500, 1000}, {4.81, 7.7, 10.1, 16.0, 21.8});
  const std::vector<double> expected = {1.000, 1.601, 2.100, 3.326, 4.532};
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (!near(curve.relative_errors[i], expected[i], 0.005)) return false;
  return near(curve.relative_errors.back(), 4.5, 0.05);
}

// ---- criterion 3: leakage decomposition identity ----

bool decomposition_identity() {
  Rng rng(1004);
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 2 + int(rng.uniform_int(12));
    const int g = 1 + int(rng.uniform_int(std::uint64_t(c)));
    std::vector<int> cats(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) cats[std::size_t(i)] = i % g;
    ConfusionMatrix cm(c, cats);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j) cm.at(i, j) = std::int64_t(rng.uniform_int(40));
    if (cm.total() == 0) cm.at(0, 0) = 1;
    const LeakageReport leak = leakage(cm);
    if (leak.total_error.num != leak.inter_category_error.num + leak.within_category_error.num)
      return false;
    if (leak.total_error.den != leak.inter_category_error.den ||
        leak.total_error.den != leak.within_category_error.den)
      return false;
  }

  // published figures: 18.28% total, 2.36% inter => 15.92% within, exactly.
  // 10000 test items, 4 classes in 2 categories.
  ConfusionMatrix cm(4, {0, 0, 1, 1});
  cm.at(0, 0) = 2500 - 1592 - 236;  // diag remainder for class 0
  cm.at(0, 1) = 1592;               // within-category errors
  cm.at(0, 2) = 236;                // inter-category errors
  cm.at(1, 1) = 2500;
  cm.at(2, 2) = 2500;
  cm.at(3, 3) = 2500;
  const LeakageReport leak = leakage(cm);
  // integer identity is exact; the percent rendering is float, hence 1e-9
  if (leak.total_error.num != leak.inter_category_error.num + leak.within_category_error.num)
    return false;
  return near(leak.total_error.percent(), 18.28, 1e-9) &&
         near(leak.inter_category_error.percent(), 2.36, 1e-9) &&
         near(leak.within_category_error.percent(), 15.92, 1e-9);
}

// ---- criterion 4: label-scheme contract ----

bool label_contract() {
  LabelScheme scheme;
  scheme.kind = LabelKind::ClassCategory;
  scheme.num_classes = 100;
  scheme.num_categories = 10;
  for (int cls = 0; cls < 100; ++cls) {
    const int cat = cls / 10;
    const auto t = encode_label<double>(scheme, cls, cat);
    if (t.size() != 110) return false;
    int halves = 0;
    double sum = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      sum += t[i];
      if (t[i] == 0.5) ++halves;
      else if (t[i] != 0.0) return false;
    }
    if (halves != 2 || sum != 1.0) return false;
    if (t[std::size_t(cat)] != 0.5 || t[std::size_t(10 + cls)] != 0.5) return false;

    // uniform logits: loss is exactly ln(110) for any valid target
    const std::vector<double> logits(110, 0.0);
    const double loss = soft_cross_entropy<double>(std::span<const double>(logits),
                                                   std::span<const double>(t));
    if (!near(loss, std::log(110.0), 1e-9)) return false;
  }
  return true;
}

// ---- criterion 5: optimizer exactness ----

bool optimizer_exact() {
  // single unit-gradient step from zero
  {
    Tensor<double> value({1}), grad({1});
    grad[0] = 1.0;
    std::vector<ParamRef<double>> refs = {{"p", &value, &grad, true, false, 0}};
    auto st = RMSPropState<double>::make(refs);
    rmsprop_update(refs, st, 0.01);
    const double expected = -0.01 / (std::sqrt(0.001) + 1e-8);
    if (!near(value[0], expected, 1e-12)) return false;
    if (!near(value[0], -0.316228, 1e-6)) return false;
  }
  // 100 steps against an independent scalar loop
  {
    const int n = 7;
    Tensor<double> value({n}), grad({n});
    Rng rng(1005);
    std::vector<double> theta(static_cast<std::size_t>(n)), v(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
      theta[std::size_t(i)] = rng.uniform(-1.0, 1.0);
      value[i] = theta[std::size_t(i)];
    }
    std::vector<ParamRef<double>> refs = {{"p", &value, &grad, true, false, 0}};
    auto st = RMSPropState<double>::make(refs, 0.999, 1e-8);
    const double lr = 0.004;
    for (int step = 0; step < 100; ++step) {
      for (int i = 0; i < n; ++i) grad[i] = rng.uniform(-2.0, 2.0);
      for (int i = 0; i < n; ++i) {
        const double gg = grad[i];
        v[std::size_t(i)] = 0.999 * v[std::size_t(i)] + 0.001 * gg * gg;
        theta[std::size_t(i)] -= lr * gg / (std::sqrt(v[std::size_t(i)]) + 1e-8);
      }
      rmsprop_update(refs, st, lr);
      for (int i = 0; i < n; ++i)
        if (!near(value[i], theta[std::size_t(i)], 1e-12)) return false;
    }
  }
  return true;
}

// ---- criterion 6: gradient check ----

bool gradient_check() {
  ArchitectureSpec spec;
  spec.input_size = 8;
  spec.stem_channels = 4;
  spec.stem_kernel = 3;
  spec.stem_stride = 1;
  spec.stem_pool = false;
  spec.stages = {{1, 4}, {1, 8}};
  spec.output_width = 3;

  Network<double> net(spec);
  net.init(2025);
  LabelScheme scheme;
  scheme.num_classes = 3;

  const int n = 2;
  Tensor<double> x({n, 3, 8, 8});
  Rng rng(1006);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  std::vector<std::vector<double>> targets = {encode_label<double>(scheme, 0),
                                              encode_label<double>(scheme, 2)};

  auto loss_fn = [&]() {
    const auto y = net.forward(x, true);
    double loss = 0;
    for (int i = 0; i < n; ++i)
      loss += soft_cross_entropy<double>(std::span<const double>(y.data() + i * 3, 3),
                                         std::span<const double>(targets[std::size_t(i)]));
    return loss;
  };

  net.zero_grad();
  const auto y = net.forward(x, true);
  Tensor<double> dlogits(y.shape());
  for (int i = 0; i < n; ++i) {
    const auto g = soft_cross_entropy_grad<double>(std::span<const double>(y.data() + i * 3, 3),
                                                   std::span<const double>(targets[std::size_t(i)]));
    for (int j = 0; j < 3; ++j) dlogits[std::int64_t(i) * 3 + j] = g[std::size_t(j)];
  }
  net.backward(dlogits);

  const double h = 1e-5;
  for (auto& p : net.params()) {
    if (!p.trainable) continue;
    for (std::int64_t k = 0; k < p.value->size(); ++k) {
      const double saved = (*p.value)[k];
      (*p.value)[k] = saved + h;
      const double up = loss_fn();
      (*p.value)[k] = saved - h;
      const double down = loss_fn();
      (*p.value)[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = (*p.grad)[k];
      const double rel = std::abs(analytic - numeric) /
                         std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
      if (rel >= 1e-4) return false;
    }
  }
  return true;
}

// ---- criterion 7: augmentation properties ----

bool augmentation_properties() {
  AugmentConfig cfg;
  Rng rng(1007);
  const int w = 224, h = 168;
  const double s2 = double(h) * double(h);
  for (int i = 0; i < 100000; ++i) {
    const CropRect r = sample_crop(w, h, cfg, rng);
    if (r.x < 0 || r.y < 0 || r.x + r.width > w || r.y + r.height > h) return false;
    const double frac = double(r.width) * double(r.height) / s2;
    if (frac < 0.08 * 0.95 || frac > 1.0 * 1.05) return false;  // rounding slack
    const double aspect = double(r.width) / double(r.height);
    if (aspect < 0.75 * 0.96 || aspect > (4.0 / 3.0) * 1.04) return false;
  }

  Image img(8, 8);
  Rng prng(1008);
  for (auto& p : img.pixels) p = float(prng.uniform(0.0, 1.0));
  ColorStats stats;
  stats.eigenvalues << 0.1, 0.2, 0.3;
  stats.eigenvectors.setIdentity();
  Rng crng(1009);
  const Image out = color_augment(img, stats, 0.0, crng);
  return out.pixels == img.pixels;
}

// ---- criteria 8 and 9: desk-scale directional analogs ----

HarnessConfig desk_config() {
  HarnessConfig cfg = make_preset("toy");
  cfg.synth.num_categories = 10;
  cfg.synth.classes_per_category = 10;
  cfg.synth.train_per_class = 40;
  cfg.synth.test_per_class = 50;  // 5000 test items keep the binomial noise small
  cfg.synth.seed = 11;
  cfg.seed = 21;
  return cfg;
}

// Hue jitter makes neighboring category backgrounds partially confusable,
// so the shared network pays an inter-category leakage price that
// per-category networks structurally cannot, which produces the small
// systematic per-class deficit this criterion looks for.
HarnessConfig desk_svs_config() {
  HarnessConfig cfg = desk_config();
  cfg.synth.hue_jitter = 0.02;
  return cfg;
}

// The 0.5 class-slot target halves the class gradient, so the combined
// arm converges slower; a longer schedule with late decay lets both arms
// reach their plateau before the comparison.
HarnessConfig desk_label_config() {
  HarnessConfig cfg = desk_config();
  cfg.train.epochs = 100;
  cfg.train.lr_decay_at = {0.8, 0.92};
  cfg.joint_decode = true;  // also records the joint-rule ablation
  return cfg;
}

bool desk_shared_vs_separate(const fs::path& out_dir, std::string& detail) {
  const SharedVsSeparateResult res = run_shared_vs_separate(desk_svs_config(), out_dir, true);

  double shared_avg = 0, sep_avg = 0;
  for (const auto& f : res.shared_category_errors) shared_avg += f.value();
  shared_avg /= double(res.shared_category_errors.size());
  for (const auto& f : res.separate_category_errors) sep_avg += f.value();
  sep_avg /= double(res.separate_category_errors.size());

  double mean_delta_pp = 0;
  bool has_positive = false, has_negative = false;
  for (double d : res.class_deltas) {
    mean_delta_pp += 100.0 * d;
    if (d > 0) has_positive = true;
    if (d < 0) has_negative = true;
  }
  mean_delta_pp /= double(res.class_deltas.size());

  const double total = res.leak.total_error.value();
  const double inter = res.leak.inter_category_error.value();

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "shared %.2f%% vs separate %.2f%%, leakage %.2f%% of total %.2f%%, "
                "mean delta %+.2fpp (signs %c%c)",
                100.0 * shared_avg, 100.0 * sep_avg, 100.0 * inter, 100.0 * total, mean_delta_pp,
                has_positive ? '+' : ' ', has_negative ? '-' : ' ');
  detail = buf;

  const bool gap_ok = std::abs(shared_avg - sep_avg) <= 0.03;
  const bool leak_ok = total > 0 && inter < total / 3.0;
  const bool delta_ok = mean_delta_pp >= -3.0 && mean_delta_pp <= 0.0;
  return gap_ok && leak_ok && delta_ok && has_positive && has_negative;
}

bool desk_label_compare(const fs::path& out_dir, std::string& detail) {
  const LabelComparisonResult res = run_label_comparison(desk_label_config(), out_dir, true);
  char buf[160];
  std::snprintf(buf, sizeof buf, "class-only %.2f%%, class/category %.2f%% (delta %+.2fpp)",
                100.0 * res.class_only_error, 100.0 * res.class_category_error,
                100.0 * (res.class_category_error - res.class_only_error));
  detail = buf;
  return res.class_category_error <= res.class_only_error + 0.005;
}

// ---- criterion 10: reproducibility and resume ----

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// metrics.csv minus the trailing wall_seconds column, which is wall-clock
// and legitimately differs between runs
std::string metrics_without_wall_time(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    out << (comma == std::string::npos ? line : line.substr(0, comma)) << "\n";
  }
  return out.str();
}

bool reproducibility(const fs::path& base) {
  HarnessConfig cfg = make_preset("toy");
  cfg.synth.num_categories = 2;
  cfg.synth.classes_per_category = 2;
  cfg.synth.train_per_class = 8;
  cfg.synth.test_per_class = 4;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 8;
  cfg.sizes = {2, 3};
  cfg.replicates = {1, 1};

  HarnessConfig a = cfg, b = cfg;
  const fs::path dir_a = base / "repro_a", dir_b = base / "repro_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_scaling(a, dir_a, false);
  run_scaling(b, dir_b, false);
  for (const char* run : {"scaling_size2_rep0", "scaling_size3_rep0"}) {
    if (metrics_without_wall_time(dir_a / "runs" / run / "metrics.csv") !=
        metrics_without_wall_time(dir_b / "runs" / run / "metrics.csv"))
      return false;
    if (slurp(dir_a / "runs" / run / "eval.json") != slurp(dir_b / "runs" / run / "eval.json"))
      return false;
  }

  // resume executes only the missing run
  const fs::path untouched = dir_a / "runs" / "scaling_size2_rep0" / "eval.json";
  const fs::path redo = dir_a / "runs" / "scaling_size3_rep0";
  const auto t_before = fs::last_write_time(untouched);
  fs::remove(redo / "DONE");
  HarnessConfig again = cfg;
  run_scaling(again, dir_a, true);
  return fs::last_write_time(untouched) == t_before && fs::exists(redo / "DONE");
}

template <typename F>
void timed(int criterion, const std::string& what, F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string note;
  try {
    ok = fn();
  } catch (const std::exception& e) {
    note = std::string(" [exception: ") + e.what() + "]";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1fs)", secs);
  report(criterion, ok, what + note + buf);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-out");
  fs::create_directories(out_dir);

  timed(1, "analytics match brute-force oracles exactly on 1000+ random instances",
        analytics_exact);
  timed(2, "published scaling numbers give relative errors "
           "[1.000, 1.601, 2.100, 3.326, 4.532] +- 0.005",
        published_scaling_curve);
  timed(3, "leakage decomposition is exact; 18.28%/2.36% decompose to 15.92%",
        decomposition_identity);
  timed(4, "combined labels carry exactly two 0.5 entries; uniform-logit loss is ln(110)",
        label_contract);
  timed(5, "RMSProp matches hand-derived step (-0.316228) and a 100-step scalar "
           "reference to 1e-12",
        optimizer_exact);
  timed(6, "analytic gradients match central finite differences to 1e-4", gradient_check);
  timed(7, "100k crops in-bounds with area/aspect in range; zero-strength color "
           "augmentation is the identity",
        augmentation_properties);

  timed(8, "desk-scale shared-vs-separate", [&] {
    std::string detail;
    const bool ok = desk_shared_vs_separate(out_dir / "shared-vs-separate", detail);
    std::printf("  %s\n", detail.c_str());
    return ok;
  });
  timed(9, "desk-scale label comparison", [&] {
    std::string detail;
    const bool ok = desk_label_compare(out_dir / "label-compare", detail);
    std::printf("  %s\n", detail.c_str());
    return ok;
  });

  timed(10, "identical config+seed gives identical logs; resume re-runs only missing runs",
        [&] { return reproducibility(out_dir); });

  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
