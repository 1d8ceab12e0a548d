// Training loop: shuffled mini-batches with augmentation, soft-target
// cross-entropy plus weight decay, RMSProp updates, per-epoch metrics and
// divergence handling. Single-threaded reference backend; results are a
// pure function of the config seed.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcat/augment.hpp"
#include "mcat/image.hpp"
#include "mcat/labeling.hpp"
#include "mcat/manifest.hpp"
#include "mcat/nn.hpp"
#include "mcat/optim.hpp"
#include "mcat/rng.hpp"

namespace mcat {

struct TrainConfig {
  double lr = 0.001;
  std::vector<double> lr_decay_at = {0.5, 0.75};  // fractions of total epochs
  double lr_decay_factor = 0.1;
  int batch_size = 128;
  int epochs = 60;
  double weight_decay = 1e-4;
  double rmsprop_decay = 0.999;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 0;
  LabelScheme scheme;
  AugmentConfig augment;
  ViewSpec eval_views;

  void validate() const {
    if (lr <= 0 || batch_size < 1 || epochs < 1)
      throw std::invalid_argument("TrainConfig: lr, batch size and epochs must be positive");
  }
};

// Decoded-image cache keyed by path. Toy/desk corpora fit in memory whole.
class ImageStore {
 public:
  const Image& get(const std::string& path) {
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(path, read_ppm(path)).first->second;
  }

 private:
  std::unordered_map<std::string, Image> cache_;
};

namespace detail {
// pixels are mapped from [0,1] to [-1,1] before entering the network
template <typename S>
void image_to_chw(const Image& img, S* dst) {
  const std::size_t hw = std::size_t(img.height) * std::size_t(img.width);
  for (int c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < hw; ++p) dst[std::size_t(c) * hw + p] = S(2.f * img.pixels[p * 3 + std::size_t(c)] - 1.f);
}
}  // namespace detail

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double test_error = 0;
  double lr = 0;
  double wall_seconds = 0;
};

inline void save_metrics_csv(const std::vector<EpochMetrics>& metrics,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_metrics_csv: cannot write " + path.string());
  out << "epoch,train_loss,test_error,lr,wall_seconds\n";
  out.precision(12);
  for (const auto& m : metrics)
    out << m.epoch << "," << m.train_loss << "," << m.test_error << "," << m.lr << ","
        << m.wall_seconds << "\n";
}

struct EvalResult {
  std::vector<int> predictions;  // per test item, class index
  std::int64_t wrong = 0;
  std::int64_t total = 0;
  double error() const { return total == 0 ? 0.0 : double(wrong) / double(total); }
};

// Multi-view evaluation: average softmax over the view set, then decode.
// joint_rule switches to the ablation decode that adds each class's own
// category score (ClassCategory schemes only; needs the category map).
template <typename S>
EvalResult evaluate(Network<S>& net, const std::vector<DatasetItem>& test_items,
                    const LabelScheme& scheme, const ViewSpec& views, ImageStore& store,
                    bool joint_rule = false, std::span<const int> category_map = {}) {
  scheme.validate();
  if (net.spec().output_width != scheme.target_length())
    throw std::runtime_error("evaluate: network width " +
                             std::to_string(net.spec().output_width) +
                             " does not match label scheme length " +
                             std::to_string(scheme.target_length()));
  const int size = net.spec().input_size;
  EvalResult result;
  for (const auto& item : test_items) {
    auto crops = multi_crop_views(store.get(item.image), views, size);
    Tensor<S> batch({std::int64_t(crops.size()), 3, size, size});
    for (std::size_t v = 0; v < crops.size(); ++v)
      detail::image_to_chw(crops[v], batch.data() + std::int64_t(v) * 3 * size * size);
    Tensor<S> logits = net.forward(batch, false);

    const int L = scheme.target_length();
    std::vector<S> avg(std::size_t(L), S(0));
    for (std::size_t v = 0; v < crops.size(); ++v) {
      auto p = softmax(std::span<const S>(logits.data() + std::int64_t(v) * L, std::size_t(L)));
      for (int i = 0; i < L; ++i) avg[std::size_t(i)] += p[std::size_t(i)];
    }
    const int pred = decode_class(scheme, std::span<const S>(avg.data(), avg.size()),
                                  joint_rule, category_map);
    result.predictions.push_back(pred);
    if (pred != item.class_index) ++result.wrong;
    ++result.total;
  }
  return result;
}

template <typename S>
struct TrainResult {
  std::unique_ptr<Network<S>> network;
  std::vector<EpochMetrics> metrics;
  bool diverged = false;
  int completed_epochs = 0;
};

// Trains a network on the split's train side. The category map is taken
// from the split when the scheme is ClassCategory. Color jitter requires
// precomputed eigenpair statistics unless its strength is zero.
template <typename S>
TrainResult<S> train(const DatasetSplit& split, const ArchitectureSpec& arch,
                     const TrainConfig& config, ImageStore& store,
                     const std::optional<ColorStats>& color_stats = std::nullopt) {
  config.validate();
  config.scheme.validate();
  if (config.scheme.kind == LabelKind::ClassCategory && !split.has_categories())
    throw std::runtime_error("train: ClassCategory scheme needs a split with a category map");
  if (config.scheme.num_classes != split.num_classes())
    throw std::runtime_error("train: scheme class count does not match split");
  if (arch.output_width != config.scheme.target_length())
    throw std::runtime_error("train: output width must equal the label target length");
  if (config.augment.color_jitter_strength > 0 && !color_stats)
    throw std::runtime_error(
        "train: color jitter requested but no eigenpair statistics supplied "
        "(run the color statistics pass or set strength to 0)");

  TrainResult<S> result;
  result.network = std::make_unique<Network<S>>(arch);
  result.network->init(derive_seed(config.seed, 0xBEEF));
  auto params = result.network->params();
  auto opt_state = RMSPropState<S>::make(params, config.rmsprop_decay, config.rmsprop_epsilon);

  const int size = arch.input_size;
  const std::size_t n_train = split.train.size();
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  // precompute targets per item
  std::vector<std::vector<S>> targets(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    const int cls = split.train[i].class_index;
    const int cat = split.has_categories() ? split.category_of_class[std::size_t(cls)] : -1;
    targets[i] = encode_label<S>(config.scheme, cls, cat);
  }

  Rng shuffle_rng(derive_seed(config.seed, 0x5F0F));
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.lr;
    for (double frac : config.lr_decay_at)
      if (epoch >= int(frac * config.epochs)) lr *= config.lr_decay_factor;

    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    std::int64_t loss_items = 0;

    for (std::size_t start = 0; start < n_train; start += std::size_t(config.batch_size)) {
      const std::size_t bs = std::min(std::size_t(config.batch_size), n_train - start);
      Tensor<S> batch({std::int64_t(bs), 3, size, size});
      for (std::size_t b = 0; b < bs; ++b) {
        const std::size_t idx = order[start + b];
        Rng aug_rng(derive_seed(derive_seed(config.seed, std::uint64_t(epoch) + 1),
                                std::uint64_t(idx)));
        const Image& src = store.get(split.train[idx].image);
        CropRect rect = sample_crop(src.width, src.height, config.augment, aug_rng);
        Image view = resize_bilinear(crop(src, rect.y, rect.x, rect.height, rect.width),
                                     size, size);
        if (config.augment.horizontal_flip && aug_rng.uniform() < 0.5)
          view = mirror_horizontal(view);
        if (config.augment.color_jitter_strength > 0)
          view = color_augment(view, *color_stats, config.augment.color_jitter_strength, aug_rng);
        detail::image_to_chw(view, batch.data() + std::int64_t(b) * 3 * size * size);
      }

      result.network->zero_grad();
      Tensor<S> logits = result.network->forward(batch, true);
      const int L = config.scheme.target_length();
      Tensor<S> dlogits(logits.shape());
      double batch_loss = 0;
      for (std::size_t b = 0; b < bs; ++b) {
        std::span<const S> row(logits.data() + std::int64_t(b) * L, std::size_t(L));
        const auto& t = targets[order[start + b]];
        batch_loss += double(soft_cross_entropy(row, std::span<const S>(t.data(), t.size())));
        auto g = soft_cross_entropy_grad(row, std::span<const S>(t.data(), t.size()));
        for (int i = 0; i < L; ++i)
          dlogits[std::int64_t(b) * L + i] = g[std::size_t(i)] / S(bs);
      }
      if (!std::isfinite(batch_loss)) {
        result.diverged = true;
        return result;  // caller keeps the last completed-epoch checkpoint
      }
      result.network->backward(dlogits);
      rmsprop_update(params, opt_state, lr, config.weight_decay);
      loss_sum += batch_loss;
      loss_items += std::int64_t(bs);
    }

    // per-epoch test metric uses the fast center view; final reporting uses
    // the configured multi-view evaluation
    ViewSpec center;
    center.center_only = true;
    EvalResult ev = evaluate(*result.network, split.test, config.scheme, center, store);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_items ? loss_sum / double(loss_items) : 0.0;
    m.test_error = ev.error();
    m.lr = lr;
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(m);
    result.completed_epochs = epoch + 1;
  }
  return result;
}

}  // namespace mcat
