// Experiment orchestration: declarative JSON configs, a directory-per-run
// results store with atomic completion markers, resume support, and the
// three studies (error-vs-class-count scaling, shared vs per-category
// networks, class vs class/category labeling) plus table and figure-data
// emission. Every emitted number is recomputable from the persisted
// confusion matrices.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcat/analytics.hpp"
#include "mcat/augment.hpp"
#include "mcat/checkpoint.hpp"
#include "mcat/manifest.hpp"
#include "mcat/synth.hpp"
#include "mcat/train.hpp"

namespace mcat {

using json = nlohmann::json;

// ---- config (de)serialization ----

inline json augment_to_json(const AugmentConfig& a) {
  return {{"min_area_fraction", a.min_area_fraction},
          {"max_area_fraction", a.max_area_fraction},
          {"min_aspect", a.min_aspect},
          {"max_aspect", a.max_aspect},
          {"area_reference",
           a.area_reference == AreaReference::MaxSquare ? "max_square" : "full_image"},
          {"output_size", a.output_size},
          {"color_jitter_strength", a.color_jitter_strength},
          {"horizontal_flip", a.horizontal_flip}};
}

inline AugmentConfig augment_from_json(const json& j) {
  AugmentConfig a;
  a.min_area_fraction = j.value("min_area_fraction", a.min_area_fraction);
  a.max_area_fraction = j.value("max_area_fraction", a.max_area_fraction);
  a.min_aspect = j.value("min_aspect", a.min_aspect);
  a.max_aspect = j.value("max_aspect", a.max_aspect);
  a.area_reference = j.value("area_reference", std::string("max_square")) == "full_image"
                         ? AreaReference::FullImage
                         : AreaReference::MaxSquare;
  a.output_size = j.value("output_size", a.output_size);
  a.color_jitter_strength = j.value("color_jitter_strength", a.color_jitter_strength);
  a.horizontal_flip = j.value("horizontal_flip", a.horizontal_flip);
  return a;
}

inline json views_to_json(const ViewSpec& v) {
  return {{"center_only", v.center_only},
          {"scales", v.scales},
          {"include_corners", v.include_corners},
          {"include_mirrors", v.include_mirrors}};
}

inline ViewSpec views_from_json(const json& j) {
  ViewSpec v;
  v.center_only = j.value("center_only", v.center_only);
  if (j.contains("scales")) v.scales = j.at("scales").get<std::vector<double>>();
  v.include_corners = j.value("include_corners", v.include_corners);
  v.include_mirrors = j.value("include_mirrors", v.include_mirrors);
  return v;
}

inline json train_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"lr_decay_at", t.lr_decay_at},
          {"lr_decay_factor", t.lr_decay_factor},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"weight_decay", t.weight_decay},
          {"rmsprop_decay", t.rmsprop_decay},
          {"rmsprop_epsilon", t.rmsprop_epsilon},
          {"seed", t.seed},
          {"augment", augment_to_json(t.augment)},
          {"eval_views", views_to_json(t.eval_views)}};
}

inline TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.lr = j.value("lr", t.lr);
  if (j.contains("lr_decay_at")) t.lr_decay_at = j.at("lr_decay_at").get<std::vector<double>>();
  t.lr_decay_factor = j.value("lr_decay_factor", t.lr_decay_factor);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.epochs = j.value("epochs", t.epochs);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.rmsprop_decay = j.value("rmsprop_decay", t.rmsprop_decay);
  t.rmsprop_epsilon = j.value("rmsprop_epsilon", t.rmsprop_epsilon);
  t.seed = j.value("seed", t.seed);
  if (j.contains("augment")) t.augment = augment_from_json(j.at("augment"));
  if (j.contains("eval_views")) t.eval_views = views_from_json(j.at("eval_views"));
  return t;
}

struct HarnessConfig {
  int schema_version = 1;
  std::string data_root;
  std::string manifest_path;  // defaults to data_root/manifest.csv
  int train_per_class = 0;    // 0 = all available
  int test_per_class = 0;
  ArchitectureSpec arch;      // output_width is set per run
  TrainConfig train;
  std::uint64_t seed = 1;
  // scaling study
  std::vector<int> sizes = {10, 50, 100, 500, 1000};
  std::vector<int> replicates = {10, 10, 5, 2, 1};
  // shared-vs-separate study
  std::string grouping = "natural";  // "natural" or "random"
  // label-compare ablation: also score the combined arm with the joint
  // decode rule (class score + its category score)
  bool joint_decode = false;
  // synthetic corpus (used when data_root is missing and synth is enabled)
  bool synth_data = false;
  SynthConfig synth;

  std::filesystem::path manifest() const {
    return manifest_path.empty() ? std::filesystem::path(data_root) / "manifest.csv"
                                 : std::filesystem::path(manifest_path);
  }
};

inline json synth_to_json(const SynthConfig& s) {
  return {{"num_categories", s.num_categories},
          {"classes_per_category", s.classes_per_category},
          {"train_per_class", s.train_per_class},
          {"test_per_class", s.test_per_class},
          {"image_size", s.image_size},
          {"noise_sigma", s.noise_sigma},
          {"patch_jitter", s.patch_jitter},
          {"brightness_jitter", s.brightness_jitter},
          {"hue_jitter", s.hue_jitter},
          {"label_noise", s.label_noise},
          {"seed", s.seed}};
}

inline SynthConfig synth_from_json(const json& j) {
  SynthConfig s;
  s.num_categories = j.value("num_categories", s.num_categories);
  s.classes_per_category = j.value("classes_per_category", s.classes_per_category);
  s.train_per_class = j.value("train_per_class", s.train_per_class);
  s.test_per_class = j.value("test_per_class", s.test_per_class);
  s.image_size = j.value("image_size", s.image_size);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.patch_jitter = j.value("patch_jitter", s.patch_jitter);
  s.brightness_jitter = j.value("brightness_jitter", s.brightness_jitter);
  s.hue_jitter = j.value("hue_jitter", s.hue_jitter);
  s.label_noise = j.value("label_noise", s.label_noise);
  s.seed = j.value("seed", s.seed);
  return s;
}

inline json config_to_json(const HarnessConfig& c) {
  return {{"schema_version", c.schema_version},
          {"data_root", c.data_root},
          {"manifest_path", c.manifest_path},
          {"train_per_class", c.train_per_class},
          {"test_per_class", c.test_per_class},
          {"arch", arch_to_json(c.arch)},
          {"train", train_to_json(c.train)},
          {"seed", c.seed},
          {"sizes", c.sizes},
          {"replicates", c.replicates},
          {"grouping", c.grouping},
          {"joint_decode", c.joint_decode},
          {"synth_data", c.synth_data},
          {"synth", synth_to_json(c.synth)}};
}

inline HarnessConfig config_from_json(const json& j) {
  HarnessConfig c;
  c.schema_version = j.value("schema_version", 1);
  if (c.schema_version != 1)
    throw std::runtime_error("config: unsupported schema_version " +
                             std::to_string(c.schema_version));
  c.data_root = j.value("data_root", c.data_root);
  c.manifest_path = j.value("manifest_path", c.manifest_path);
  c.train_per_class = j.value("train_per_class", c.train_per_class);
  c.test_per_class = j.value("test_per_class", c.test_per_class);
  if (j.contains("arch")) c.arch = arch_from_json(j.at("arch"));
  if (j.contains("train")) c.train = train_from_json(j.at("train"));
  c.seed = j.value("seed", c.seed);
  if (j.contains("sizes")) c.sizes = j.at("sizes").get<std::vector<int>>();
  if (j.contains("replicates")) c.replicates = j.at("replicates").get<std::vector<int>>();
  c.grouping = j.value("grouping", c.grouping);
  c.joint_decode = j.value("joint_decode", c.joint_decode);
  c.synth_data = j.value("synth_data", c.synth_data);
  if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"));
  return c;
}

inline HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  return config_from_json(json::parse(in));
}

// FNV-1a 64 over the canonical (key-sorted) JSON dump.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t config_hash(const json& j) { return fnv1a64(j.dump()); }

// Hash with all seed fields removed; identifies the experiment lineage
// independently of the seed.
inline std::uint64_t lineage_hash(json j) {
  j.erase("seed");
  if (j.contains("train")) j.at("train").erase("seed");
  if (j.contains("synth")) j.at("synth").erase("seed");
  return fnv1a64(j.dump());
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- presets ----

inline HarnessConfig make_preset(const std::string& name) {
  HarnessConfig c;
  if (name == "paper") {
    c.arch = ArchitectureSpec::paper(0);
    c.train.augment.output_size = 224;
    c.train.batch_size = 256;
    c.train.epochs = 90;
    c.train_per_class = 1300;
    c.test_per_class = 50;
    c.data_root = "data/imagenet";
    c.manifest_path = "manifests/imagenet_100c10.csv";
  } else if (name == "cifar") {
    c.arch = ArchitectureSpec::desk32(0);
    c.train.augment.output_size = 32;
    c.train.augment.min_area_fraction = 0.4;
    c.train.batch_size = 128;
    c.train.epochs = 60;
    c.data_root = "data/cifar";
    c.sizes = {10, 20, 50, 100};
    c.replicates = {4, 3, 2, 1};
  } else if (name == "toy") {
    c.arch = ArchitectureSpec::tiny(0, 16);
    c.train.augment.output_size = 16;
    c.train.augment.min_area_fraction = 0.6;
    c.train.augment.color_jitter_strength = 0.05;
    c.train.lr = 0.001;
    c.train.batch_size = 64;
    c.train.epochs = 25;
    c.train.weight_decay = 1e-4;
    c.synth_data = true;
    c.sizes = {10, 20, 40};
    c.replicates = {3, 2, 1};
    c.data_root = "";  // resolved to <out>/toy-data at run time
  } else {
    throw std::runtime_error("unknown preset '" + name + "' (expected paper|cifar|toy)");
  }
  return c;
}

// ---- results store ----

struct RunOutcome {
  std::string name;
  double error = 0;  // multi-view test error
  ConfusionMatrix confusion;
  bool from_cache = false;
};

class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path out_dir) : out_(std::move(out_dir)) {
    std::filesystem::create_directories(out_ / "runs");
  }

  const std::filesystem::path& dir() const { return out_; }
  std::filesystem::path run_dir(const std::string& name) const { return out_ / "runs" / name; }

  bool is_complete(const std::string& name, std::uint64_t hash) const {
    const auto marker = run_dir(name) / "DONE";
    std::ifstream in(marker);
    std::string stored;
    return in && std::getline(in, stored) && stored == hex64(hash);
  }

  void mark_complete(const std::string& name, std::uint64_t hash) const {
    // write-then-rename so a killed process never leaves a valid marker
    const auto dir = run_dir(name);
    const auto tmp = dir / "DONE.tmp";
    {
      std::ofstream out(tmp);
      out << hex64(hash) << "\n";
    }
    std::filesystem::rename(tmp, dir / "DONE");
  }

 private:
  std::filesystem::path out_;
};

// ---- single run ----

struct RunRequest {
  std::string name;
  DatasetSplit split;
  LabelScheme scheme;
  ArchitectureSpec arch;  // output_width filled in here
  TrainConfig train;
  bool resume = false;
};

template <typename S = float>
RunOutcome execute_run(const ResultsStore& store, RunRequest req, ImageStore& images) {
  req.scheme.validate();
  req.arch.output_width = req.scheme.target_length();
  req.train.scheme = req.scheme;

  json run_config = {{"arch", arch_to_json(req.arch)},
                     {"train", train_to_json(req.train)},
                     {"scheme",
                      {{"kind", req.scheme.kind == LabelKind::ClassOnly ? "class" : "class_category"},
                       {"num_classes", req.scheme.num_classes},
                       {"num_categories", req.scheme.num_categories}}},
                     {"num_train_items", req.split.train.size()},
                     {"num_test_items", req.split.test.size()},
                     {"class_ids", req.split.class_ids},
                     {"categories", req.split.category_of_class}};
  const std::uint64_t hash = config_hash(run_config);

  const auto dir = store.run_dir(req.name);
  RunOutcome outcome;
  outcome.name = req.name;

  if (req.resume && store.is_complete(req.name, hash)) {
    std::ifstream ev(dir / "eval.json");
    json j = json::parse(ev);
    outcome.error = j.at("error").get<double>();
    outcome.confusion = load_confusion_csv(dir / "confusion.csv");
    outcome.from_cache = true;
    return outcome;
  }

  std::filesystem::create_directories(dir);
  {
    std::ofstream cf(dir / "config.json");
    cf << run_config.dump(2) << "\n";
  }

  // color statistics pass, cached next to the run
  std::optional<ColorStats> stats;
  if (req.train.augment.color_jitter_strength > 0) {
    const auto cache = dir / "color_stats.txt";
    if (std::filesystem::exists(cache)) {
      stats = load_color_stats(cache);
    } else {
      std::vector<const Image*> sample;
      const std::size_t step = std::max<std::size_t>(1, req.split.train.size() / 256);
      for (std::size_t i = 0; i < req.split.train.size(); i += step)
        sample.push_back(&images.get(req.split.train[i].image));
      stats = compute_color_stats(sample);
      save_color_stats(*stats, cache);
    }
  }

  auto result = train<S>(req.split, req.arch, req.train, images, stats);
  save_metrics_csv(result.metrics, dir / "metrics.csv");
  if (result.network) save_checkpoint(*result.network, req.train.seed, dir / "checkpoint.bin");
  if (result.diverged) {
    std::ofstream ev(dir / "eval.json");
    ev << json{{"status", "diverged"}, {"completed_epochs", result.completed_epochs}}.dump(2)
       << "\n";
    throw std::runtime_error("run '" + req.name + "' diverged (non-finite loss); " +
                             "last checkpoint kept in " + dir.string());
  }

  EvalResult ev = evaluate(*result.network, req.split.test, req.scheme, req.train.eval_views,
                           images);
  std::vector<int> truth;
  for (const auto& item : req.split.test) truth.push_back(item.class_index);
  outcome.confusion = build_confusion(truth, ev.predictions, req.split.num_classes(),
                                      req.split.category_of_class);
  outcome.error = ev.error();
  save_confusion_csv(outcome.confusion, dir / "confusion.csv");
  {
    std::ofstream out(dir / "eval.json");
    out << json{{"status", "ok"},
                {"error", outcome.error},
                {"wrong", ev.wrong},
                {"total", ev.total},
                {"config_hash", hex64(hash)}}
               .dump(2)
        << "\n";
  }
  store.mark_complete(req.name, hash);
  return outcome;
}

// ---- CSV helpers ----

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows,
                      const std::string& comment = "") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << "\n";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

// ---- experiment record ----

inline void append_record(const std::filesystem::path& out_dir, const std::string& experiment,
                          const HarnessConfig& cfg, const json& results) {
  const json snapshot = config_to_json(cfg);
  json record = {{"experiment", experiment},
                 {"config", snapshot},
                 {"config_hash", hex64(config_hash(snapshot))},
                 {"lineage_hash", hex64(lineage_hash(snapshot))},
                 {"results", results},
                 {"harness_version", "1.0"},
                 {"written_at", std::chrono::duration_cast<std::chrono::seconds>(
                                    std::chrono::system_clock::now().time_since_epoch())
                                    .count()}};
  std::ofstream out(out_dir / "record.json");
  out << record.dump(2) << "\n";
}

// ---- data preparation ----

// Resolves the configured corpus, generating the synthetic one on demand.
inline CategoryManifest prepare_corpus(HarnessConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (cfg.synth_data) {
    if (cfg.data_root.empty()) cfg.data_root = (out_dir / "toy-data").string();
    if (!fs::exists(cfg.manifest())) generate_synth_corpus(cfg.synth, cfg.data_root);
  }
  return load_manifest(cfg.manifest());
}

// ---- studies ----

// One network per (size, replicate): classes sampled without replacement
// from the manifest pool, errors averaged per size, scaling curve emitted.
inline json run_scaling(HarnessConfig cfg, const std::filesystem::path& out_dir, bool resume) {
  if (cfg.sizes.size() != cfg.replicates.size() || cfg.sizes.empty())
    throw std::runtime_error("scaling: sizes and replicates must be parallel nonempty lists");
  ResultsStore store(out_dir);
  const CategoryManifest manifest = prepare_corpus(cfg, out_dir);
  const auto pool = manifest.flat_classes();
  ImageStore images;

  std::vector<double> mean_errors;
  json runs = json::array();
  for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
    DatasetSpec spec;
    spec.num_classes = cfg.sizes[si];
    spec.num_replicates = cfg.replicates[si];
    spec.seed = derive_seed(cfg.seed, si);
    auto subsets = sample_class_subsets(pool, spec);

    double err_sum = 0;
    for (std::size_t r = 0; r < subsets.size(); ++r) {
      CategoryManifest sub;
      sub.categories.push_back({"sampled", subsets[r]});
      RunRequest req;
      req.name = "scaling_size" + std::to_string(cfg.sizes[si]) + "_rep" + std::to_string(r);
      req.split = resolve_split(sub, cfg.data_root, cfg.train_per_class, cfg.test_per_class);
      req.scheme = {LabelKind::ClassOnly, cfg.sizes[si], 0};
      req.arch = cfg.arch;
      req.train = cfg.train;
      req.train.seed = derive_seed(cfg.seed, 1000 * si + r);
      req.resume = resume;
      RunOutcome out = execute_run(store, std::move(req), images);
      err_sum += out.error;
      runs.push_back({{"name", out.name}, {"size", cfg.sizes[si]}, {"error", out.error}});
    }
    mean_errors.push_back(err_sum / double(subsets.size()));
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < mean_errors.size(); ++i)
    rows.push_back({std::to_string(cfg.sizes[i]), fmt(100.0 * mean_errors[i], 6)});
  write_csv(out_dir / "table2_scaling.csv", {"num_classes", "test_error_percent"}, rows,
            "mirrors Table 2: test error vs number of classes");

  // the normalized curve is undefined when the baseline error is zero
  std::vector<double> relative_errors;
  if (mean_errors.front() > 0) {
    std::vector<std::int64_t> sizes64(cfg.sizes.begin(), cfg.sizes.end());
    const ScalingCurve curve = relative_increase_curve(sizes64, mean_errors);
    relative_errors = curve.relative_errors;
    rows.clear();
    for (std::size_t i = 0; i < curve.relative_sizes.size(); ++i)
      rows.push_back({fmt(curve.relative_sizes[i]), fmt(curve.relative_errors[i])});
    write_csv(out_dir / "fig1_relative_increase.csv",
              {"relative_num_classes", "relative_error"}, rows,
              "mirrors Fig. 1: relative error increase vs relative class-count increase");
  }

  json results = {{"runs", runs},
                  {"sizes", cfg.sizes},
                  {"mean_errors", mean_errors},
                  {"relative_errors", relative_errors}};
  append_record(out_dir, "scaling", cfg, results);
  return results;
}

namespace detail {
// Aligns per-class errors of a category sub-run back to pool class order.
inline void scatter_class_errors(const DatasetSplit& sub, const std::vector<std::string>& all_ids,
                                 const ConfusionMatrix& cm, std::vector<Fraction>& out) {
  for (int i = 0; i < sub.num_classes(); ++i) {
    auto it = std::find(all_ids.begin(), all_ids.end(), sub.class_ids[std::size_t(i)]);
    if (it == all_ids.end()) throw std::runtime_error("scatter_class_errors: unknown class id");
    out[std::size_t(it - all_ids.begin())] = cm.class_error(i);
  }
}
}  // namespace detail

struct SharedVsSeparateResult {
  double shared_error = 0;
  double separate_avg_error = 0;
  std::vector<Fraction> shared_category_errors;
  std::vector<Fraction> separate_category_errors;
  LeakageReport leak;
  std::vector<double> class_deltas;  // accuracy shared - accuracy separate
  std::vector<std::string> category_names;
};

// One shared network over all classes plus one network per category;
// grouping is the manifest's natural one or a random equal-size partition.
inline SharedVsSeparateResult run_shared_vs_separate(HarnessConfig cfg,
                                                     const std::filesystem::path& out_dir,
                                                     bool resume) {
  ResultsStore store(out_dir);
  const CategoryManifest manifest = prepare_corpus(cfg, out_dir);
  ImageStore images;

  DatasetSplit split = resolve_split(manifest, cfg.data_root, cfg.train_per_class,
                                     cfg.test_per_class);
  if (cfg.grouping == "random") {
    const int g = split.num_categories();
    split.category_of_class = random_partition(split.num_classes(), g,
                                               derive_seed(cfg.seed, 0xD1CE));
    split.category_names.clear();
    for (int i = 0; i < g; ++i) split.category_names.push_back("random" + std::to_string(i));
  } else if (cfg.grouping != "natural") {
    throw std::runtime_error("shared-vs-separate: grouping must be natural or random");
  }

  const int C = split.num_classes();
  const int G = split.num_categories();

  RunRequest shared_req;
  shared_req.name = std::string("shared_") + cfg.grouping;
  shared_req.split = split;
  shared_req.scheme = {LabelKind::ClassOnly, C, 0};
  shared_req.arch = cfg.arch;
  shared_req.train = cfg.train;
  shared_req.train.seed = derive_seed(cfg.seed, 0x5A);
  shared_req.resume = resume;
  RunOutcome shared = execute_run(store, std::move(shared_req), images);

  SharedVsSeparateResult res;
  res.category_names = split.category_names;
  res.shared_error = shared.error;
  res.shared_category_errors = category_errors(shared.confusion);
  res.leak = leakage(shared.confusion);

  std::vector<Fraction> shared_class_err(static_cast<std::size_t>(C)), separate_class_err(static_cast<std::size_t>(C));
  for (int i = 0; i < C; ++i) shared_class_err[std::size_t(i)] = shared.confusion.class_error(i);

  double sep_sum = 0;
  for (int g = 0; g < G; ++g) {
    RunRequest req;
    req.name = "separate_" + cfg.grouping + "_cat" + std::to_string(g);
    req.split = split_category(split, g);
    req.scheme = {LabelKind::ClassOnly, req.split.num_classes(), 0};
    req.arch = cfg.arch;
    req.train = cfg.train;
    req.train.seed = derive_seed(cfg.seed, 0x100 + std::uint64_t(g));
    req.resume = resume;
    const DatasetSplit sub = req.split;
    RunOutcome out = execute_run(store, std::move(req), images);
    res.separate_category_errors.push_back(out.confusion.total_error());
    sep_sum += out.confusion.total_error().value();
    detail::scatter_class_errors(sub, split.class_ids, out.confusion, separate_class_err);
  }
  res.separate_avg_error = sep_sum / double(G);
  res.class_deltas = per_class_delta(shared_class_err, separate_class_err);

  // Table 3 style: per-category errors for both arms
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"arm"};
  for (const auto& n : split.category_names) header.push_back(n);
  header.push_back("avg");
  std::vector<std::string> row_sep = {"network_per_category"}, row_shared = {"shared_network"};
  for (int g = 0; g < G; ++g) {
    row_sep.push_back(fmt(res.separate_category_errors[std::size_t(g)].percent(), 5));
    row_shared.push_back(fmt(res.shared_category_errors[std::size_t(g)].percent(), 5));
  }
  row_sep.push_back(fmt(100.0 * res.separate_avg_error, 5));
  double shared_avg = 0;
  for (auto& f : res.shared_category_errors) shared_avg += f.value();
  row_shared.push_back(fmt(100.0 * shared_avg / double(G), 5));
  write_csv(out_dir / ("table3_per_category_" + cfg.grouping + ".csv"), header,
            {row_sep, row_shared}, "mirrors Table 3: per-category error, both arms");

  // Fig. 2 style grouped bars
  rows.clear();
  for (int g = 0; g < G; ++g)
    rows.push_back({split.category_names[std::size_t(g)],
                    fmt(res.separate_category_errors[std::size_t(g)].percent(), 5),
                    fmt(res.shared_category_errors[std::size_t(g)].percent(), 5)});
  write_csv(out_dir / ("fig2_bars_" + cfg.grouping + ".csv"),
            {"category", "separate_error_percent", "shared_error_percent"}, rows,
            "mirrors Fig. 2: per-category error bars");

  // Table 4 style leakage
  rows.clear();
  for (int g = 0; g < G; ++g)
    rows.push_back({split.category_names[std::size_t(g)],
                    fmt(res.leak.per_category_leakage[std::size_t(g)].percent(), 5)});
  rows.push_back({"total", fmt(res.leak.inter_category_error.percent(), 5)});
  write_csv(out_dir / ("table4_leakage_" + cfg.grouping + ".csv"),
            {"category", "leakage_percent"}, rows,
            "mirrors Table 4: inter-category leakage from superclass merging");

  // Fig. 3 style histogram of per-class accuracy deltas (percentage points)
  std::vector<double> deltas_pp;
  for (double d : res.class_deltas) deltas_pp.push_back(100.0 * d);
  const Histogram h = histogram(deltas_pp, 1.0);
  rows.clear();
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    rows.push_back({fmt(h.edges[b]), std::to_string(h.counts[b])});
  write_csv(out_dir / ("fig3_delta_histogram_" + cfg.grouping + ".csv"),
            {"bin_lower_edge_pp", "count"}, rows,
            "mirrors Fig. 3: per-class accuracy delta histogram");

  json results = {{"grouping", cfg.grouping},
                  {"shared_error", res.shared_error},
                  {"separate_avg_error", res.separate_avg_error},
                  {"leakage", res.leak.inter_category_error.value()},
                  {"within_error", res.leak.within_category_error.value()},
                  {"class_deltas", res.class_deltas}};
  append_record(out_dir, "shared-vs-separate", cfg, results);
  return res;
}

struct LabelComparisonResult {
  double class_only_error = 0;
  double class_category_error = 0;
  // joint-rule ablation for the combined arm; < 0 when not computed
  double class_category_joint_error = -1;
  std::vector<double> class_deltas;  // accuracy(class/category) - accuracy(class only)
};

// Two shared networks differing only in the label scheme.
inline LabelComparisonResult run_label_comparison(HarnessConfig cfg,
                                                  const std::filesystem::path& out_dir,
                                                  bool resume) {
  ResultsStore store(out_dir);
  const CategoryManifest manifest = prepare_corpus(cfg, out_dir);
  ImageStore images;
  const DatasetSplit split = resolve_split(manifest, cfg.data_root, cfg.train_per_class,
                                           cfg.test_per_class);
  const int C = split.num_classes();
  const int G = split.num_categories();

  auto make_req = [&](const std::string& name, LabelKind kind) {
    RunRequest req;
    req.name = name;
    req.split = split;
    req.scheme = {kind, C, kind == LabelKind::ClassCategory ? G : 0};
    req.arch = cfg.arch;
    req.train = cfg.train;
    req.train.seed = derive_seed(cfg.seed, 0x1AB);  // identical seeds in both arms
    req.resume = resume;
    return req;
  };
  RunOutcome class_only = execute_run(store, make_req("label_class_only", LabelKind::ClassOnly),
                                      images);
  RunOutcome combined = execute_run(
      store, make_req("label_class_category", LabelKind::ClassCategory), images);

  LabelComparisonResult res;
  res.class_only_error = class_only.error;
  res.class_category_error = combined.error;
  std::vector<Fraction> err_a(static_cast<std::size_t>(C)), err_b(static_cast<std::size_t>(C));
  for (int i = 0; i < C; ++i) {
    err_a[std::size_t(i)] = class_only.confusion.class_error(i);
    err_b[std::size_t(i)] = combined.confusion.class_error(i);
  }
  res.class_deltas = per_class_delta(err_b, err_a);

  std::vector<std::vector<std::string>> scheme_rows = {
      {"class", fmt(100.0 * res.class_only_error, 5)},
      {"class_category", fmt(100.0 * res.class_category_error, 5)}};
  if (cfg.joint_decode) {
    // ablation: rescore the combined arm with the joint decode rule
    auto loaded = load_checkpoint<float>(store.run_dir("label_class_category") /
                                         "checkpoint.bin");
    const LabelScheme scheme{LabelKind::ClassCategory, C, G};
    const EvalResult joint = evaluate(*loaded.network, split.test, scheme,
                                      cfg.train.eval_views, images, true,
                                      std::span<const int>(split.category_of_class));
    res.class_category_joint_error = joint.error();
    scheme_rows.push_back({"class_category_joint",
                           fmt(100.0 * res.class_category_joint_error, 5)});
  }
  write_csv(out_dir / "table5_label_schemes.csv", {"label_scheme", "error_percent"},
            scheme_rows,
            "mirrors Table 5: class labels vs combined class/category labels");

  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < C; ++i)
    rows.push_back({split.class_ids[std::size_t(i)], fmt(err_a[std::size_t(i)].percent(), 5),
                    fmt(err_b[std::size_t(i)].percent(), 5),
                    fmt(100.0 * res.class_deltas[std::size_t(i)], 5)});
  write_csv(out_dir / "label_per_class_deltas.csv",
            {"class_id", "class_only_error_percent", "class_category_error_percent",
             "accuracy_delta_pp"},
            rows, "per-class comparison of the two label schemes");

  json results = {{"class_only_error", res.class_only_error},
                  {"class_category_error", res.class_category_error},
                  {"delta_pp", 100.0 * (res.class_only_error - res.class_category_error)}};
  if (cfg.joint_decode) results["class_category_joint_error"] = res.class_category_joint_error;
  append_record(out_dir, "label-compare", cfg, results);
  return res;
}

}  // namespace mcat
