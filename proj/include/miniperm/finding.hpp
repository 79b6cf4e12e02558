#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "miniperm/types.hpp"

namespace miniperm {

/// Category-specific refinement. V1 and V6 have none.
enum class SubMode {
  None,
  QualificationIgnored,
  ForgottenScope,
  ParameterLeak,
  InvalidSetting,
  Vertical,
  Horizontal,
  SettingDisappears,
  CannotDelete,
  IncompleteRemoval,
  BothLayersIgnored,
  HostLayerIgnored,
};

std::string_view to_string(SubMode v);

struct Finding {
  VulnCategory category = VulnCategory::V1_CacheReuse;
  SubMode sub_mode = SubMode::None;
  std::string host_id;
  Platform platform = Platform::Android;
  std::optional<std::string> api;
  std::string mini_program;
  std::string scenario;
  // Trace sequence numbers for dynamic findings.
  std::vector<std::uint64_t> evidence_seqs;
  // "registry:<api>" for static findings, "env:<name>" for divergence runs.
  std::vector<std::string> evidence_refs;
  std::string description;

  friend bool operator==(const Finding&, const Finding&) = default;
};

/// Stable order: category, sub-mode, api name, first evidence seq, then the
/// remaining fields as tie-breakers.
bool finding_less(const Finding& a, const Finding& b);
void sort_findings(std::vector<Finding>& findings);

nlohmann::ordered_json finding_to_json(const Finding& f);
nlohmann::ordered_json findings_to_json(const std::vector<Finding>& findings);
std::string findings_to_text(const std::vector<Finding>& findings);
std::string findings_to_markdown(const std::vector<Finding>& findings);

/// One run_all result: a host on one platform, one status per category.
struct MatrixRow {
  std::string host_id;
  Platform platform = Platform::Android;
  std::array<CellStatus, 6> cells{CellStatus::Unknown, CellStatus::Unknown, CellStatus::Unknown,
                                  CellStatus::Unknown, CellStatus::Unknown, CellStatus::Unknown};
};

struct CellPair {
  CellStatus android = CellStatus::Unknown;
  CellStatus ios = CellStatus::Unknown;

  /// "<android>|<ios>".
  std::string str() const;
  friend bool operator==(const CellPair&, const CellPair&) = default;
};

/// Hosts x six categories; a host missing a platform keeps Unknown there.
struct VulnMatrix {
  std::vector<std::string> rows;
  std::map<std::string, std::array<CellPair, 6>> cells;

  const CellPair& at(std::string_view host, VulnCategory category) const;
  std::size_t cell_count() const;
};

/// Rows appear in first-seen host order.
VulnMatrix build_matrix(const std::vector<MatrixRow>& rows);

nlohmann::ordered_json matrix_to_json(const VulnMatrix& m);
std::string matrix_to_markdown(const VulnMatrix& m);
std::string matrix_to_text(const VulnMatrix& m);

}  // namespace miniperm
