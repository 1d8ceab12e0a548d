// Category manifests, dataset sampling and split resolution.
//
// A manifest is a CSV file with one class per record:
//   category_name,class_id[,display_name]
// Blank lines and `#` comments are allowed. Categories keep the order of
// first appearance; classes keep file order within their category.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcat/rng.hpp"

namespace mcat {

struct ClassEntry {
  std::string class_id;      // opaque identifier, e.g. an ImageNet synset folder
  std::string display_name;  // optional, defaults to class_id
  std::string image_dir;     // resolved later; may be empty in a bare manifest
};

struct Category {
  std::string name;
  std::vector<ClassEntry> classes;
};

struct CategoryManifest {
  std::vector<Category> categories;

  std::size_t num_classes() const {
    std::size_t n = 0;
    for (const auto& c : categories) n += c.classes.size();
    return n;
  }

  std::vector<ClassEntry> flat_classes() const {
    std::vector<ClassEntry> out;
    for (const auto& c : categories)
      out.insert(out.end(), c.classes.begin(), c.classes.end());
    return out;
  }

  void validate() const {
    std::set<std::string> cat_names, class_ids;
    for (const auto& cat : categories) {
      if (cat.classes.empty())
        throw std::runtime_error("manifest: empty category '" + cat.name + "'");
      if (!cat_names.insert(cat.name).second)
        throw std::runtime_error("manifest: duplicate category '" + cat.name + "'");
      for (const auto& cls : cat.classes)
        if (!class_ids.insert(cls.class_id).second)
          throw std::runtime_error("manifest: class '" + cls.class_id +
                                   "' appears in more than one category (seen again under '" +
                                   cat.name + "')");
    }
  }
};

namespace detail {
inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

inline CategoryManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path.string());

  CategoryManifest m;
  std::map<std::string, std::size_t> cat_index;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(detail::trim(field));
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty())
      throw std::runtime_error("manifest: " + path.string() + ":" + std::to_string(lineno) +
                               ": expected 'category,class_id[,display_name]'");

    ClassEntry e;
    e.class_id = fields[1];
    e.display_name = fields.size() == 3 ? fields[2] : fields[1];

    auto it = cat_index.find(fields[0]);
    if (it == cat_index.end()) {
      cat_index.emplace(fields[0], m.categories.size());
      m.categories.push_back({fields[0], {e}});
    } else {
      m.categories[it->second].classes.push_back(e);
    }
  }
  m.validate();
  return m;
}

inline void save_manifest(const CategoryManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot write " + path.string());
  for (const auto& cat : m.categories)
    for (const auto& cls : cat.classes)
      out << cat.name << "," << cls.class_id << "," << cls.display_name << "\n";
}

struct DatasetSpec {
  int num_classes = 0;
  int num_replicates = 1;
  int train_per_class = 1300;
  int test_per_class = 50;
  std::uint64_t seed = 0;
};

struct DatasetItem {
  std::string image;  // path or opaque image reference
  int class_index = 0;
};

// A resolved dataset: contiguous class indices, optional category level,
// explicit train/test item lists. Immutable after construction.
struct DatasetSplit {
  std::vector<std::string> class_ids;             // index -> class_id
  std::vector<int> category_of_class;             // index -> category, empty if absent
  std::vector<std::string> category_names;        // parallel to category indices
  std::vector<DatasetItem> train;
  std::vector<DatasetItem> test;

  int num_classes() const { return int(class_ids.size()); }
  bool has_categories() const { return !category_of_class.empty(); }
  int num_categories() const { return int(category_names.size()); }
};

// Draws spec.num_replicates subsets of spec.num_classes classes, uniformly
// without replacement. Replicate i is seeded with derive_seed(spec.seed, i),
// so replicates are independent and the whole draw is reproducible.
inline std::vector<std::vector<ClassEntry>> sample_class_subsets(
    const std::vector<ClassEntry>& pool, const DatasetSpec& spec) {
  if (spec.num_classes <= 0 || spec.num_replicates <= 0)
    throw std::invalid_argument("sample_class_subsets: counts must be positive");
  if (std::size_t(spec.num_classes) > pool.size())
    throw std::runtime_error("sample_class_subsets: pool of " + std::to_string(pool.size()) +
                             " classes is smaller than requested " +
                             std::to_string(spec.num_classes));

  std::vector<std::vector<ClassEntry>> out;
  out.reserve(std::size_t(spec.num_replicates));
  for (int r = 0; r < spec.num_replicates; ++r) {
    Rng rng(derive_seed(spec.seed, std::uint64_t(r)));
    // partial Fisher-Yates: the first num_classes slots are the sample
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int i = 0; i < spec.num_classes; ++i) {
      std::size_t j = std::size_t(i) + std::size_t(rng.uniform_int(idx.size() - std::size_t(i)));
      std::swap(idx[std::size_t(i)], idx[j]);
    }
    std::vector<ClassEntry> subset;
    subset.reserve(std::size_t(spec.num_classes));
    for (int i = 0; i < spec.num_classes; ++i) subset.push_back(pool[idx[std::size_t(i)]]);
    out.push_back(std::move(subset));
  }
  return out;
}

// Assigns each class to one of num_groups equal-sized groups, uniformly at
// random. Requires num_groups to divide the class count.
inline std::vector<int> random_partition(int num_classes, int num_groups, std::uint64_t seed) {
  if (num_groups <= 0 || num_classes <= 0)
    throw std::invalid_argument("random_partition: counts must be positive");
  if (num_classes % num_groups != 0)
    throw std::runtime_error("random_partition: " + std::to_string(num_groups) +
                             " groups do not evenly divide " + std::to_string(num_classes) +
                             " classes");
  std::vector<int> perm(static_cast<std::size_t>(num_classes));
  for (int i = 0; i < num_classes; ++i) perm[std::size_t(i)] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  const int per_group = num_classes / num_groups;
  std::vector<int> group(static_cast<std::size_t>(num_classes));
  for (int i = 0; i < num_classes; ++i) group[std::size_t(perm[std::size_t(i)])] = i / per_group;
  return group;
}

// Restricts a split to one category, re-indexing its classes contiguously
// from 0 in their original order.
inline DatasetSplit split_category(const DatasetSplit& split, int category) {
  if (!split.has_categories())
    throw std::runtime_error("split_category: split has no category map");
  if (category < 0 || category >= split.num_categories())
    throw std::runtime_error("split_category: category " + std::to_string(category) +
                             " out of range [0, " + std::to_string(split.num_categories()) + ")");

  DatasetSplit out;
  std::vector<int> remap(split.class_ids.size(), -1);
  for (std::size_t i = 0; i < split.class_ids.size(); ++i) {
    if (split.category_of_class[i] == category) {
      remap[i] = int(out.class_ids.size());
      out.class_ids.push_back(split.class_ids[i]);
      out.category_of_class.push_back(0);
    }
  }
  out.category_names.push_back(split.category_names[std::size_t(category)]);
  for (const auto& item : split.train)
    if (remap[std::size_t(item.class_index)] >= 0)
      out.train.push_back({item.image, remap[std::size_t(item.class_index)]});
  for (const auto& item : split.test)
    if (remap[std::size_t(item.class_index)] >= 0)
      out.test.push_back({item.image, remap[std::size_t(item.class_index)]});
  return out;
}

// Resolves a manifest against an image folder tree:
//   root/<class_id>/train/*.ppm and root/<class_id>/test/*.ppm
// Files are taken in sorted order; per-class counts are capped by the spec
// (0 means "all available").
inline DatasetSplit resolve_split(const CategoryManifest& manifest,
                                  const std::filesystem::path& root, int train_per_class,
                                  int test_per_class) {
  namespace fs = std::filesystem;
  manifest.validate();
  DatasetSplit split;
  for (std::size_t g = 0; g < manifest.categories.size(); ++g)
    split.category_names.push_back(manifest.categories[g].name);

  auto list_sorted = [](const fs::path& dir) {
    std::vector<std::string> files;
    if (!fs::exists(dir)) return files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
  };

  for (std::size_t g = 0; g < manifest.categories.size(); ++g) {
    for (const auto& cls : manifest.categories[g].classes) {
      const int ci = int(split.class_ids.size());
      split.class_ids.push_back(cls.class_id);
      split.category_of_class.push_back(int(g));

      const fs::path class_dir = root / cls.class_id;
      auto train_files = list_sorted(class_dir / "train");
      auto test_files = list_sorted(class_dir / "test");
      if (train_files.empty() || test_files.empty())
        throw std::runtime_error("resolve_split: no images for class '" + cls.class_id +
                                 "' under " + class_dir.string());
      if (train_per_class > 0 && std::size_t(train_per_class) < train_files.size())
        train_files.resize(std::size_t(train_per_class));
      if (test_per_class > 0 && std::size_t(test_per_class) < test_files.size())
        test_files.resize(std::size_t(test_per_class));
      for (auto& f : train_files) split.train.push_back({std::move(f), ci});
      for (auto& f : test_files) split.test.push_back({std::move(f), ci});
    }
  }
  return split;
}

}  // namespace mcat
