#include "mcat/train.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "mcat/checkpoint.hpp"
#include "mcat/synth.hpp"

using namespace mcat;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fs::path root;
  CategoryManifest manifest;
  DatasetSplit split;

  Corpus(const std::string& tag, const SynthConfig& cfg) {
    root = fs::temp_directory_path() / ("mcat_train_test_" + tag);
    fs::remove_all(root);
    manifest = generate_synth_corpus(cfg, root);
    split = resolve_split(manifest, root, 0, 0);
  }
  ~Corpus() { fs::remove_all(root); }
};

SynthConfig small_corpus_config(int categories, int classes_per_category) {
  SynthConfig cfg;
  cfg.num_categories = categories;
  cfg.classes_per_category = classes_per_category;
  cfg.train_per_class = 16;
  cfg.test_per_class = 8;
  cfg.image_size = 16;
  cfg.seed = 7;
  return cfg;
}

TrainConfig fast_train_config(int num_classes, int epochs) {
  TrainConfig cfg;
  cfg.lr = 0.002;
  cfg.batch_size = 16;
  cfg.epochs = epochs;
  cfg.weight_decay = 0.0;
  cfg.scheme.num_classes = num_classes;
  cfg.augment.output_size = 16;
  cfg.augment.min_area_fraction = 0.9;
  cfg.augment.color_jitter_strength = 0.0;
  return cfg;
}

TEST(Train, OverfitsTinyTwoClassProblem) {
  Corpus corpus("overfit", small_corpus_config(2, 1));
  ASSERT_EQ(corpus.split.num_classes(), 2);

  ImageStore store;
  auto result = train<float>(corpus.split, ArchitectureSpec::tiny(2), fast_train_config(2, 20),
                             store);
  ASSERT_FALSE(result.diverged);
  ASSERT_EQ(result.completed_epochs, 20);

  const double first_loss = result.metrics.front().train_loss;
  const double last_loss = result.metrics.back().train_loss;
  EXPECT_LT(last_loss, 0.10 * first_loss);

  // error on the training items themselves
  ViewSpec center;
  center.center_only = true;
  LabelScheme scheme;
  scheme.num_classes = 2;
  const EvalResult ev = evaluate(*result.network, corpus.split.train, scheme, center, store);
  EXPECT_LE(ev.error(), 0.05);
}

TEST(Train, RunToRunReproducibility) {
  Corpus corpus("repro", small_corpus_config(2, 1));
  ImageStore store;
  const TrainConfig cfg = fast_train_config(2, 3);
  auto a = train<float>(corpus.split, ArchitectureSpec::tiny(2), cfg, store);
  auto b = train<float>(corpus.split, ArchitectureSpec::tiny(2), cfg, store);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].train_loss, b.metrics[i].train_loss);
    EXPECT_EQ(a.metrics[i].test_error, b.metrics[i].test_error);
  }
  auto pa = a.network->params(), pb = b.network->params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::int64_t j = 0; j < pa[i].value->size(); ++j)
      ASSERT_EQ((*pa[i].value)[j], (*pb[i].value)[j]) << pa[i].name;

  TrainConfig other = cfg;
  other.seed = 99;
  auto c = train<float>(corpus.split, ArchitectureSpec::tiny(2), other, store);
  EXPECT_NE(a.metrics.back().train_loss, c.metrics.back().train_loss);
}

TEST(Train, CheckpointRoundTripKeepsEvaluationBitExact) {
  Corpus corpus("ckpt", small_corpus_config(2, 2));
  ImageStore store;
  auto result = train<float>(corpus.split, ArchitectureSpec::tiny(4), fast_train_config(4, 2),
                             store);
  ASSERT_FALSE(result.diverged);

  LabelScheme scheme;
  scheme.num_classes = 4;
  const EvalResult before = evaluate(*result.network, corpus.split.test, scheme, ViewSpec{},
                                     store);

  const auto path = corpus.root / "ckpt.bin";
  save_checkpoint(*result.network, 0, path);
  auto loaded = load_checkpoint<float>(path);
  const EvalResult after = evaluate(*loaded.network, corpus.split.test, scheme, ViewSpec{}, store);

  EXPECT_EQ(before.predictions, after.predictions);
  EXPECT_EQ(before.wrong, after.wrong);
}

TEST(Train, DivergenceIsReportedNotFatal) {
  Corpus corpus("diverge", small_corpus_config(2, 1));
  ImageStore store;
  TrainConfig cfg = fast_train_config(2, 10);
  cfg.lr = 1e38;  // overflows float weights on the first update
  bool handled = false;
  try {
    auto result = train<float>(corpus.split, ArchitectureSpec::tiny(2), cfg, store);
    handled = result.diverged;
  } catch (const std::runtime_error&) {
    handled = true;  // optimizer aborts on non-finite gradients
  }
  EXPECT_TRUE(handled);
}

TEST(Train, ClassCategorySchemeWidensTheHead) {
  Corpus corpus("combined", small_corpus_config(2, 2));
  ImageStore store;
  TrainConfig cfg = fast_train_config(4, 2);
  cfg.scheme.kind = LabelKind::ClassCategory;
  cfg.scheme.num_categories = 2;
  auto result = train<float>(corpus.split, ArchitectureSpec::tiny(6), cfg, store);
  ASSERT_FALSE(result.diverged);
  EXPECT_EQ(result.network->spec().output_width, 6);  // 2 categories + 4 classes

  const EvalResult ev = evaluate(*result.network, corpus.split.test, cfg.scheme, ViewSpec{},
                                 store);
  EXPECT_EQ(ev.total, std::int64_t(corpus.split.test.size()));
  for (int p : ev.predictions) {
    EXPECT_GE(p, 0);
    EXPECT_LT(p, 4);
  }

  // head width must match the scheme exactly
  TrainConfig bad = cfg;
  EXPECT_THROW(train<float>(corpus.split, ArchitectureSpec::tiny(4), bad, store),
               std::runtime_error);
}

TEST(Train, ColorJitterWithoutStatsIsRejected) {
  Corpus corpus("jitter", small_corpus_config(2, 1));
  ImageStore store;
  TrainConfig cfg = fast_train_config(2, 1);
  cfg.augment.color_jitter_strength = 0.1;
  EXPECT_THROW(train<float>(corpus.split, ArchitectureSpec::tiny(2), cfg, store),
               std::runtime_error);
}

TEST(Evaluate, MatchesNaiveViewAveragingLoop) {
  Corpus corpus("evalavg", small_corpus_config(2, 2));
  ImageStore store;
  Network<float> net(ArchitectureSpec::tiny(4));
  net.init(31);
  LabelScheme scheme;
  scheme.num_classes = 4;
  const ViewSpec views;  // full 20-view set
  const EvalResult fast = evaluate(net, corpus.split.test, scheme, views, store);

  // independent re-implementation: per-view forward, softmax, plain average
  std::int64_t wrong = 0;
  std::vector<int> preds;
  for (const auto& item : corpus.split.test) {
    const auto crops = multi_crop_views(store.get(item.image), views, 16);
    ASSERT_EQ(crops.size(), 20u);
    std::vector<float> avg(4, 0.f);
    for (const auto& view : crops) {
      Tensor<float> x({1, 3, 16, 16});
      for (int c = 0; c < 3; ++c)
        for (int p = 0; p < 16 * 16; ++p)
          x[c * 256 + p] = 2.f * view.pixels[std::size_t(p) * 3 + std::size_t(c)] - 1.f;
      const auto logits = net.forward(x, false);
      const auto prob = softmax(std::span<const float>(logits.data(), 4));
      for (int i = 0; i < 4; ++i) avg[std::size_t(i)] += prob[std::size_t(i)];
    }
    int best = 0;
    for (int i = 1; i < 4; ++i)
      if (avg[std::size_t(i)] > avg[std::size_t(best)]) best = i;
    preds.push_back(best);
    if (best != item.class_index) ++wrong;
  }
  EXPECT_EQ(fast.predictions, preds);
  EXPECT_EQ(fast.wrong, wrong);
}

TEST(Evaluate, SingleViewUsesTheCenterCrop) {
  Corpus corpus("evalcenter", small_corpus_config(2, 1));
  ImageStore store;
  Network<float> net(ArchitectureSpec::tiny(2));
  net.init(13);
  LabelScheme scheme;
  scheme.num_classes = 2;
  ViewSpec center;
  center.center_only = true;
  const EvalResult ev = evaluate(net, corpus.split.test, scheme, center, store);

  const auto& item = corpus.split.test.front();
  const auto crops = multi_crop_views(store.get(item.image), center, 16);
  ASSERT_EQ(crops.size(), 1u);
  Tensor<float> x({1, 3, 16, 16});
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 16 * 16; ++p)
      x[c * 256 + p] = 2.f * crops[0].pixels[std::size_t(p) * 3 + std::size_t(c)] - 1.f;
  const auto logits = net.forward(x, false);
  const int pred = decode_class(scheme, std::span<const float>(logits.data(), 2));
  EXPECT_EQ(ev.predictions.front(), pred);
}

TEST(Metrics, CsvHasTheExpectedHeader) {
  std::vector<EpochMetrics> metrics = {{0, 1.5, 0.5, 0.001, 2.0}};
  const auto path = fs::temp_directory_path() / "mcat_metrics_test.csv";
  save_metrics_csv(metrics, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,train_loss,test_error,lr,wall_seconds");
  std::string row;
  std::getline(in, row);
  EXPECT_EQ(row.substr(0, 6), "0,1.5,");
  fs::remove(path);
}

}  // namespace
