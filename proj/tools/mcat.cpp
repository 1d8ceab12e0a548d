// mcat: experiment harness CLI.
//
// Verbs: sample, train, evaluate, scaling, shared-vs-separate,
// label-compare, report, emit-figure. Device selection via MCAT_DEVICE
// (only "cpu" is implemented).
#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mcat/experiment.hpp"

namespace fs = std::filesystem;
using mcat::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out = "results";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--preset", args.preset, "Config preset: paper|cifar|toy");
  cmd->add_option("--out", args.out, "Output directory");
  cmd->add_option("--seed", args.seed, "Override the experiment seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_flag("--resume", args.resume, "Skip runs already completed with the same config");
}

mcat::HarnessConfig resolve_config(const CommonArgs& args) {
  mcat::HarnessConfig cfg;
  if (!args.preset.empty()) cfg = mcat::make_preset(args.preset);
  if (!args.config_path.empty()) {
    // a config file overlays the preset field-by-field
    std::ifstream in(args.config_path);
    if (!in) throw std::runtime_error("cannot open config " + args.config_path);
    json base = mcat::config_to_json(cfg);
    base.merge_patch(json::parse(in));
    cfg = mcat::config_from_json(base);
  }
  if (args.preset.empty() && args.config_path.empty())
    cfg = mcat::make_preset("toy");
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

void check_device() {
  const char* dev = std::getenv("MCAT_DEVICE");
  if (dev && std::string(dev) != "cpu")
    throw std::runtime_error(std::string("MCAT_DEVICE=") + dev +
                             " is not available; only 'cpu' is implemented");
}

void print_csv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::cout << "--- " << path.filename().string() << " ---\n" << in.rdbuf() << "\n";
}

int cmd_sample(const CommonArgs& args) {
  mcat::HarnessConfig cfg = resolve_config(args);
  fs::create_directories(args.out);
  const mcat::CategoryManifest manifest = mcat::prepare_corpus(cfg, args.out);
  const auto pool = manifest.flat_classes();
  for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
    mcat::DatasetSpec spec;
    spec.num_classes = cfg.sizes[si];
    spec.num_replicates = cfg.replicates[si];
    spec.seed = mcat::derive_seed(cfg.seed, si);
    auto subsets = mcat::sample_class_subsets(pool, spec);
    for (std::size_t r = 0; r < subsets.size(); ++r) {
      mcat::CategoryManifest sub;
      sub.categories.push_back({"sampled", subsets[r]});
      const std::string name = "sampled_size" + std::to_string(cfg.sizes[si]) + "_rep" +
                               std::to_string(r) + ".csv";
      mcat::save_manifest(sub, fs::path(args.out) / name);
      std::cout << "wrote " << name << " (" << subsets[r].size() << " classes)\n";
    }
  }
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& scheme_name) {
  mcat::HarnessConfig cfg = resolve_config(args);
  fs::create_directories(args.out);
  const mcat::CategoryManifest manifest = mcat::prepare_corpus(cfg, args.out);
  mcat::DatasetSplit split = mcat::resolve_split(manifest, cfg.data_root, cfg.train_per_class,
                                                 cfg.test_per_class);
  mcat::ResultsStore store(args.out);
  mcat::ImageStore images;
  mcat::RunRequest req;
  req.name = "train_" + scheme_name;
  const int C = split.num_classes();
  const int G = split.num_categories();
  req.scheme = scheme_name == "class_category"
                   ? mcat::LabelScheme{mcat::LabelKind::ClassCategory, C, G}
                   : mcat::LabelScheme{mcat::LabelKind::ClassOnly, C, 0};
  req.split = std::move(split);
  req.arch = cfg.arch;
  req.train = cfg.train;
  req.train.seed = mcat::derive_seed(cfg.seed, 0x17);
  req.resume = args.resume;
  mcat::RunOutcome out = mcat::execute_run(store, std::move(req), images);
  std::cout << "run " << out.name << (out.from_cache ? " (cached)" : "") << ": test error "
            << 100.0 * out.error << "%\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint) {
  mcat::HarnessConfig cfg = resolve_config(args);
  fs::create_directories(args.out);
  const mcat::CategoryManifest manifest = mcat::prepare_corpus(cfg, args.out);
  const mcat::DatasetSplit split = mcat::resolve_split(manifest, cfg.data_root,
                                                       cfg.train_per_class, cfg.test_per_class);
  auto loaded = mcat::load_checkpoint<float>(checkpoint);
  const int C = split.num_classes();
  const int G = split.num_categories();
  const int width = loaded.network->spec().output_width;
  mcat::LabelScheme scheme = width == C + G
                                 ? mcat::LabelScheme{mcat::LabelKind::ClassCategory, C, G}
                                 : mcat::LabelScheme{mcat::LabelKind::ClassOnly, C, 0};
  mcat::ImageStore images;
  mcat::EvalResult ev = mcat::evaluate(*loaded.network, split.test, scheme,
                                       cfg.train.eval_views, images);
  std::vector<int> truth;
  for (const auto& item : split.test) truth.push_back(item.class_index);
  auto cm = mcat::build_confusion(truth, ev.predictions, C, split.category_of_class);
  mcat::save_confusion_csv(cm, fs::path(args.out) / "evaluate_confusion.csv");
  std::cout << "multi-view test error: " << 100.0 * ev.error() << "% (" << ev.wrong << "/"
            << ev.total << ")\n";
  return 0;
}

int cmd_report(const CommonArgs& args) {
  const fs::path dir(args.out);
  std::ifstream rec(dir / "record.json");
  if (!rec) {
    std::cerr << "no record.json under " << dir << "\n";
    return 1;
  }
  json record = json::parse(rec);
  std::cout << "experiment: " << record.value("experiment", "?") << "\n"
            << "config hash: " << record.value("config_hash", "?") << "\n"
            << "results: " << record.at("results").dump(2) << "\n\n";
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv") print_csv_file(entry.path());
  return 0;
}

// Recomputes figure data from the persisted confusion matrices only.
int cmd_emit_figure(const CommonArgs& args, int figure) {
  const fs::path dir(args.out);
  std::ifstream rec(dir / "record.json");
  if (!rec) throw std::runtime_error("emit-figure: no record.json under " + dir.string());
  json record = json::parse(rec);
  const json& results = record.at("results");

  if (figure == 1) {
    std::map<int, std::vector<double>> by_size;
    for (const auto& run : results.at("runs")) {
      auto cm = mcat::load_confusion_csv(dir / "runs" / run.at("name").get<std::string>() /
                                         "confusion.csv");
      by_size[run.at("size").get<int>()].push_back(cm.total_error().value());
    }
    std::vector<std::int64_t> sizes;
    std::vector<double> errors;
    for (auto& [size, errs] : by_size) {
      sizes.push_back(size);
      errors.push_back(std::accumulate(errs.begin(), errs.end(), 0.0) / double(errs.size()));
    }
    auto curve = mcat::relative_increase_curve(sizes, errors);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < sizes.size(); ++i)
      rows.push_back({mcat::fmt(curve.relative_sizes[i]), mcat::fmt(curve.relative_errors[i])});
    mcat::write_csv(dir / "fig1_relative_increase.csv",
                    {"relative_num_classes", "relative_error"}, rows,
                    "mirrors Fig. 1: relative error increase vs relative class-count increase");
    print_csv_file(dir / "fig1_relative_increase.csv");
    return 0;
  }

  const std::string grouping = results.value("grouping", "natural");
  auto shared_cm = mcat::load_confusion_csv(dir / "runs" / ("shared_" + grouping) /
                                            "confusion.csv");
  const int G = shared_cm.num_categories();

  if (figure == 2) {
    auto shared_errs = mcat::category_errors(shared_cm);
    std::vector<std::vector<std::string>> rows;
    for (int g = 0; g < G; ++g) {
      auto sep_cm = mcat::load_confusion_csv(
          dir / "runs" / ("separate_" + grouping + "_cat" + std::to_string(g)) / "confusion.csv");
      rows.push_back({std::to_string(g), mcat::fmt(sep_cm.total_error().percent(), 5),
                      mcat::fmt(shared_errs[std::size_t(g)].percent(), 5)});
    }
    mcat::write_csv(dir / ("fig2_bars_" + grouping + ".csv"),
                    {"category", "separate_error_percent", "shared_error_percent"}, rows,
                    "mirrors Fig. 2: per-category error bars");
    print_csv_file(dir / ("fig2_bars_" + grouping + ".csv"));
    return 0;
  }

  if (figure == 3) {
    const int C = shared_cm.num_classes;
    std::vector<mcat::Fraction> shared_err(static_cast<std::size_t>(C)), sep_err(static_cast<std::size_t>(C));
    for (int i = 0; i < C; ++i) shared_err[std::size_t(i)] = shared_cm.class_error(i);
    // category sub-runs keep the pool's class order within each category
    std::vector<int> next_in_cat;
    for (int g = 0; g < G; ++g) {
      auto sep_cm = mcat::load_confusion_csv(
          dir / "runs" / ("separate_" + grouping + "_cat" + std::to_string(g)) / "confusion.csv");
      int local = 0;
      for (int i = 0; i < C; ++i)
        if (shared_cm.category_of_class[std::size_t(i)] == g)
          sep_err[std::size_t(i)] = sep_cm.class_error(local++);
    }
    auto deltas = mcat::per_class_delta(shared_err, sep_err);
    std::vector<double> pp;
    for (double d : deltas) pp.push_back(100.0 * d);
    auto h = mcat::histogram(pp, 1.0);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      rows.push_back({mcat::fmt(h.edges[b]), std::to_string(h.counts[b])});
    mcat::write_csv(dir / ("fig3_delta_histogram_" + grouping + ".csv"),
                    {"bin_lower_edge_pp", "count"}, rows,
                    "mirrors Fig. 3: per-class accuracy delta histogram");
    print_csv_file(dir / ("fig3_delta_histogram_" + grouping + ".csv"));
    return 0;
  }
  throw std::runtime_error("emit-figure: figure must be 1, 2 or 3");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-category image-classification experiment harness"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string scheme_name = "class";
  std::string checkpoint;
  int figure = 1;

  auto* sample = app.add_subcommand("sample", "Sample class subsets into manifest files");
  add_common(sample, args);

  auto* train = app.add_subcommand("train", "Train a single network");
  add_common(train, args);
  train->add_option("--scheme", scheme_name, "Label scheme: class|class_category");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  add_common(evaluate, args);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  auto* scaling = app.add_subcommand("scaling", "Error-vs-class-count study");
  add_common(scaling, args);

  auto* svs = app.add_subcommand("shared-vs-separate",
                                 "Shared network vs one network per category");
  add_common(svs, args);

  auto* label = app.add_subcommand("label-compare",
                                   "Class-only vs combined class/category labels");
  add_common(label, args);

  auto* report = app.add_subcommand("report", "Print the record and tables of an output dir");
  add_common(report, args);

  auto* emit = app.add_subcommand("emit-figure", "Recompute figure data from stored matrices");
  add_common(emit, args);
  emit->add_option("figure", figure, "Figure number: 1, 2 or 3")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    check_device();
    if (sample->parsed()) return cmd_sample(args);
    if (train->parsed()) return cmd_train(args, scheme_name);
    if (evaluate->parsed()) return cmd_evaluate(args, checkpoint);
    if (scaling->parsed()) {
      auto results = mcat::run_scaling(resolve_config(args), args.out, args.resume);
      std::cout << results.dump(2) << "\n";
      return 0;
    }
    if (svs->parsed()) {
      auto res = mcat::run_shared_vs_separate(resolve_config(args), args.out, args.resume);
      std::cout << "shared error: " << 100.0 * res.shared_error
                << "%, separate avg: " << 100.0 * res.separate_avg_error
                << "%, leakage: " << res.leak.inter_category_error.percent() << "%\n";
      return 0;
    }
    if (label->parsed()) {
      auto res = mcat::run_label_comparison(resolve_config(args), args.out, args.resume);
      std::cout << "class-only error: " << 100.0 * res.class_only_error
                << "%, class/category error: " << 100.0 * res.class_category_error << "%\n";
      return 0;
    }
    if (report->parsed()) return cmd_report(args);
    if (emit->parsed()) return cmd_emit_figure(args, figure);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
