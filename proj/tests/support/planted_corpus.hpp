#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "miniperm/scanner.hpp"

namespace miniperm::testing {

struct PlantedFile {
  std::string path;  // relative to the package root
  std::string text;
};

struct PlantedPackage {
  std::string id;
  std::string category;
  bool uses_clipboard = false;
  std::vector<PlantedFile> files;
  // Every member call the generator wrote, in (file, line, column) order.
  std::vector<CallSite> sites;
};

struct CategoryQuota {
  std::string name;
  std::size_t packages = 0;
  std::size_t with_clipboard = 0;
};

struct PlantedCorpus {
  std::vector<PlantedPackage> packages;
  std::size_t site_count() const;
};

/// Default quotas: five categories, 977 packages in total.
std::vector<CategoryQuota> default_quotas();

/// Deterministic for a given seed. Scripts mix real calls in every supported
/// form with traps: calls inside strings, comments, regex literals and
/// substitution-free templates, member reads without a call, and computed
/// member calls.
PlantedCorpus generate_corpus(std::uint32_t seed, const std::vector<CategoryQuota>& quotas);

/// Writes each package under `root/<id>/` and the category map to
/// `root/index.json`.
void write_corpus(const PlantedCorpus& corpus, const std::filesystem::path& root);

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace miniperm::testing
