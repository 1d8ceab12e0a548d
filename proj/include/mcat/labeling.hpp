// Label encodings and the soft-target softmax cross-entropy.
//
// Two schemes: plain one-hot class targets of length C, and a combined
// class/category target of length G+C with 0.5 on the true category slot
// (indices [0,G)) and 0.5 on the true class slot (indices [G, G+C)).
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcat {

enum class LabelKind { ClassOnly, ClassCategory };

struct LabelScheme {
  LabelKind kind = LabelKind::ClassOnly;
  int num_classes = 0;
  int num_categories = 0;  // used only by ClassCategory

  int target_length() const {
    return kind == LabelKind::ClassOnly ? num_classes : num_categories + num_classes;
  }
  int class_slot_offset() const { return kind == LabelKind::ClassOnly ? 0 : num_categories; }

  void validate() const {
    if (num_classes < 1) throw std::invalid_argument("LabelScheme: num_classes < 1");
    if (kind == LabelKind::ClassCategory && num_categories < 1)
      throw std::invalid_argument("LabelScheme: ClassCategory needs num_categories >= 1");
  }
};

template <typename S>
std::vector<S> encode_label(const LabelScheme& scheme, int class_index, int category_index = -1) {
  scheme.validate();
  if (class_index < 0 || class_index >= scheme.num_classes)
    throw std::out_of_range("encode_label: class index " + std::to_string(class_index) +
                            " out of [0, " + std::to_string(scheme.num_classes) + ")");
  std::vector<S> target(std::size_t(scheme.target_length()), S(0));
  if (scheme.kind == LabelKind::ClassOnly) {
    target[std::size_t(class_index)] = S(1);
  } else {
    if (category_index < 0 || category_index >= scheme.num_categories)
      throw std::out_of_range("encode_label: category index required in [0, " +
                              std::to_string(scheme.num_categories) + ")");
    target[std::size_t(category_index)] = S(0.5);
    target[std::size_t(scheme.num_categories + class_index)] = S(0.5);
  }
  return target;
}

// softmax with max-subtraction; safe for logits up to +-1e4 and beyond.
template <typename S>
std::vector<S> softmax(std::span<const S> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  S m = logits[0];
  for (S v : logits) m = std::max(m, v);
  std::vector<S> p(logits.size());
  S z = S(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

// -sum_i t_i * log softmax(logits)_i, computed as sum t_i*(logsumexp - x_i).
template <typename S>
S soft_cross_entropy(std::span<const S> logits, std::span<const S> target) {
  if (logits.size() != target.size())
    throw std::invalid_argument("soft_cross_entropy: length mismatch (" +
                                std::to_string(logits.size()) + " vs " +
                                std::to_string(target.size()) + ")");
  S sum = S(0);
  for (S t : target) {
    if (t < S(0)) throw std::invalid_argument("soft_cross_entropy: negative target entry");
    sum += t;
  }
  if (std::abs(double(sum) - 1.0) > 1e-6)
    throw std::invalid_argument("soft_cross_entropy: target does not sum to 1");

  S m = logits[0];
  for (S v : logits) m = std::max(m, v);
  S z = S(0);
  for (S v : logits) z += std::exp(v - m);
  const S logz = std::log(z) + m;
  S loss = S(0);
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (target[i] != S(0)) loss += target[i] * (logz - logits[i]);
  return loss;
}

// d loss / d logits = softmax(logits) - target.
template <typename S>
std::vector<S> soft_cross_entropy_grad(std::span<const S> logits, std::span<const S> target) {
  auto g = softmax(logits);
  if (g.size() != target.size())
    throw std::invalid_argument("soft_cross_entropy_grad: length mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= target[i];
  return g;
}

// Class prediction. The default rule takes the argmax over class slots only,
// ignoring category slots, so the class-error metric is directly comparable
// across schemes. joint_rule adds the class's own category score before the
// argmax (requires category_map).
template <typename S>
int decode_class(const LabelScheme& scheme, std::span<const S> logits, bool joint_rule = false,
                 std::span<const int> category_map = {}) {
  if (int(logits.size()) != scheme.target_length())
    throw std::invalid_argument("decode_class: logits length " + std::to_string(logits.size()) +
                                " does not match scheme length " +
                                std::to_string(scheme.target_length()));
  const int offset = scheme.class_slot_offset();
  int best = 0;
  S best_score = std::numeric_limits<S>::lowest();
  for (int c = 0; c < scheme.num_classes; ++c) {
    S score = logits[std::size_t(offset + c)];
    if (joint_rule && scheme.kind == LabelKind::ClassCategory) {
      if (category_map.size() != std::size_t(scheme.num_classes))
        throw std::invalid_argument("decode_class: joint rule needs a category map");
      score += logits[std::size_t(category_map[std::size_t(c)])];
    }
    if (score > best_score) {  // ties keep the lowest index
      best_score = score;
      best = c;
    }
  }
  return best;
}

// Category implied by the predicted class.
template <typename S>
int decode_category(const LabelScheme& scheme, std::span<const S> logits,
                    std::span<const int> category_map) {
  if (category_map.size() != std::size_t(scheme.num_classes))
    throw std::invalid_argument("decode_category: category map length mismatch");
  return category_map[std::size_t(decode_class(scheme, logits))];
}

}  // namespace mcat
