// Confusion-matrix analytics: per-category errors, superclass merging,
// inter-category leakage, per-class deltas, histograms and scaling curves.
//
// Error rates are carried as integer (numerator, denominator) pairs so the
// decomposition identities hold exactly; they are rendered as fractions or
// percentages only at the output boundary.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcat {

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return den == 0 ? 0.0 : double(num) / double(den); }
  double percent() const { return 100.0 * value(); }
};

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;    // row-major C x C, rows = true class
  std::vector<int> category_of_class;  // empty when no category level

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int c, std::vector<int> categories = {})
      : num_classes(c),
        counts(std::size_t(c) * std::size_t(c), 0),
        category_of_class(std::move(categories)) {
    if (!category_of_class.empty() && int(category_of_class.size()) != c)
      throw std::invalid_argument("ConfusionMatrix: category map length mismatch");
  }

  std::int64_t& at(int true_class, int predicted) {
    return counts[std::size_t(true_class) * std::size_t(num_classes) + std::size_t(predicted)];
  }
  std::int64_t at(int true_class, int predicted) const {
    return counts[std::size_t(true_class) * std::size_t(num_classes) + std::size_t(predicted)];
  }

  bool has_categories() const { return !category_of_class.empty(); }
  int num_categories() const {
    int g = 0;
    for (int c : category_of_class) g = std::max(g, c + 1);
    return g;
  }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto v : counts) t += v;
    return t;
  }
  std::int64_t diagonal() const {
    std::int64_t t = 0;
    for (int i = 0; i < num_classes; ++i) t += at(i, i);
    return t;
  }

  Fraction total_error() const { return {total() - diagonal(), total()}; }

  std::int64_t row_sum(int i) const {
    std::int64_t t = 0;
    for (int j = 0; j < num_classes; ++j) t += at(i, j);
    return t;
  }

  Fraction class_error(int i) const { return {row_sum(i) - at(i, i), row_sum(i)}; }
};

inline ConfusionMatrix build_confusion(const std::vector<int>& truth,
                                       const std::vector<int>& predictions, int num_classes,
                                       std::vector<int> category_map = {}) {
  if (truth.size() != predictions.size())
    throw std::invalid_argument("build_confusion: truth/prediction length mismatch");
  ConfusionMatrix cm(num_classes, std::move(category_map));
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k] < 0 || truth[k] >= num_classes || predictions[k] < 0 ||
        predictions[k] >= num_classes)
      throw std::out_of_range("build_confusion: label out of range at item " + std::to_string(k));
    ++cm.at(truth[k], predictions[k]);
  }
  return cm;
}

// Class-level error restricted to each category's test items.
inline std::vector<Fraction> category_errors(const ConfusionMatrix& cm) {
  if (!cm.has_categories()) throw std::runtime_error("category_errors: no category map");
  const int g = cm.num_categories();
  std::vector<std::int64_t> wrong(std::size_t(g), 0), items(std::size_t(g), 0);
  for (int i = 0; i < cm.num_classes; ++i) {
    const int cat = cm.category_of_class[std::size_t(i)];
    items[std::size_t(cat)] += cm.row_sum(i);
    wrong[std::size_t(cat)] += cm.row_sum(i) - cm.at(i, i);
  }
  std::vector<Fraction> out(static_cast<std::size_t>(g));
  for (int a = 0; a < g; ++a) {
    if (items[std::size_t(a)] == 0)
      throw std::runtime_error("category_errors: category " + std::to_string(a) +
                               " has no test items");
    out[std::size_t(a)] = {wrong[std::size_t(a)], items[std::size_t(a)]};
  }
  return out;
}

// Merges every category into one superclass: within-category confusion lands
// on the diagonal and counts as correct at the category level.
inline ConfusionMatrix merge_to_superclasses(const ConfusionMatrix& cm) {
  if (!cm.has_categories()) throw std::runtime_error("merge_to_superclasses: no category map");
  const int g = cm.num_categories();
  std::vector<int> identity(static_cast<std::size_t>(g));
  for (int a = 0; a < g; ++a) identity[std::size_t(a)] = a;
  ConfusionMatrix super(g, identity);
  for (int i = 0; i < cm.num_classes; ++i)
    for (int j = 0; j < cm.num_classes; ++j)
      super.at(cm.category_of_class[std::size_t(i)], cm.category_of_class[std::size_t(j)]) +=
          cm.at(i, j);
  return super;
}

struct LeakageReport {
  Fraction total_error;
  Fraction inter_category_error;   // "leakage"
  Fraction within_category_error;  // total - inter, same denominator
  std::vector<Fraction> per_category_leakage;
};

inline LeakageReport leakage(const ConfusionMatrix& cm) {
  const ConfusionMatrix super = merge_to_superclasses(cm);
  LeakageReport r;
  r.total_error = cm.total_error();
  r.inter_category_error = super.total_error();
  r.within_category_error = {r.total_error.num - r.inter_category_error.num, r.total_error.den};
  for (int a = 0; a < super.num_classes; ++a) r.per_category_leakage.push_back(super.class_error(a));
  return r;
}

// accuracy_shared - accuracy_separate per class; positive means the class
// did better on the shared network.
inline std::vector<double> per_class_delta(const std::vector<Fraction>& errors_shared,
                                           const std::vector<Fraction>& errors_separate) {
  if (errors_shared.size() != errors_separate.size())
    throw std::invalid_argument("per_class_delta: length mismatch");
  std::vector<double> delta(errors_shared.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = (1.0 - errors_shared[i].value()) - (1.0 - errors_separate[i].value());
  return delta;
}

struct Histogram {
  double bin_width = 0;
  std::vector<double> edges;        // lower edge per bin, aligned to multiples of bin_width
  std::vector<std::int64_t> counts; // bins are half-open [e, e+w)
};

inline Histogram histogram(const std::vector<double>& values, double bin_width) {
  if (bin_width <= 0) throw std::invalid_argument("histogram: bin width must be positive");
  if (values.empty()) throw std::invalid_argument("histogram: empty input");
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  std::vector<std::int64_t> bins(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    bins[i] = std::int64_t(std::floor(values[i] / bin_width));
    lo = std::min(lo, bins[i]);
    hi = std::max(hi, bins[i]);
  }
  Histogram h;
  h.bin_width = bin_width;
  h.edges.resize(std::size_t(hi - lo + 1));
  h.counts.assign(std::size_t(hi - lo + 1), 0);
  for (std::size_t b = 0; b < h.edges.size(); ++b) h.edges[b] = double(lo + std::int64_t(b)) * bin_width;
  for (auto b : bins) ++h.counts[std::size_t(b - lo)];
  return h;
}

struct ScalingCurve {
  std::vector<std::int64_t> sizes;
  std::vector<double> errors;
  std::vector<double> relative_sizes;
  std::vector<double> relative_errors;
};

inline ScalingCurve relative_increase_curve(const std::vector<std::int64_t>& sizes,
                                            const std::vector<double>& errors) {
  if (sizes.size() != errors.size() || sizes.empty())
    throw std::invalid_argument("relative_increase_curve: need equal nonempty lists");
  if (sizes[0] == 0 || errors[0] == 0)
    throw std::invalid_argument("relative_increase_curve: first entries must be nonzero");
  ScalingCurve c;
  c.sizes = sizes;
  c.errors = errors;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    c.relative_sizes.push_back(double(sizes[i]) / double(sizes[0]));
    c.relative_errors.push_back(errors[i] / errors[0]);
  }
  return c;
}

// ---- serialization ----

inline void save_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_confusion_csv: cannot write " + path.string());
  out << "true\\pred";
  for (int j = 0; j < cm.num_classes; ++j) out << "," << j;
  out << "\n";
  for (int i = 0; i < cm.num_classes; ++i) {
    out << i;
    for (int j = 0; j < cm.num_classes; ++j) out << "," << cm.at(i, j);
    out << "\n";
  }
  if (cm.has_categories()) {
    out << "#categories";
    for (int c : cm.category_of_class) out << "," << c;
    out << "\n";
  }
}

inline ConfusionMatrix load_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_confusion_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_confusion_csv: empty file");
  std::vector<std::vector<std::int64_t>> rows;
  std::vector<int> categories;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const bool is_categories = cell == "#categories";
    std::vector<std::int64_t> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stoll(cell));
    if (is_categories) {
      categories.assign(row.begin(), row.end());
    } else {
      rows.push_back(std::move(row));
    }
  }
  ConfusionMatrix cm(int(rows.size()), categories);
  for (int i = 0; i < cm.num_classes; ++i) {
    if (int(rows[std::size_t(i)].size()) != cm.num_classes)
      throw std::runtime_error("load_confusion_csv: ragged matrix in " + path.string());
    for (int j = 0; j < cm.num_classes; ++j) cm.at(i, j) = rows[std::size_t(i)][std::size_t(j)];
  }
  return cm;
}

}  // namespace mcat
