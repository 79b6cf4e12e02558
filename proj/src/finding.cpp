#include "miniperm/finding.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "miniperm/error.hpp"

namespace miniperm {

using nlohmann::ordered_json;

std::string_view to_string(SubMode v) {
  switch (v) {
    case SubMode::None: return "None";
    case SubMode::QualificationIgnored: return "QualificationIgnored";
    case SubMode::ForgottenScope: return "ForgottenScope";
    case SubMode::ParameterLeak: return "ParameterLeak";
    case SubMode::InvalidSetting: return "InvalidSetting";
    case SubMode::Vertical: return "Vertical";
    case SubMode::Horizontal: return "Horizontal";
    case SubMode::SettingDisappears: return "SettingDisappears";
    case SubMode::CannotDelete: return "CannotDelete";
    case SubMode::IncompleteRemoval: return "IncompleteRemoval";
    case SubMode::BothLayersIgnored: return "BothLayersIgnored";
    case SubMode::HostLayerIgnored: return "HostLayerIgnored";
  }
  return "?";
}

namespace {

auto sort_key(const Finding& f) {
  const std::uint64_t first = f.evidence_seqs.empty() ? 0 : f.evidence_seqs.front();
  return std::tie(f.category, f.sub_mode, f.api, first, f.scenario, f.mini_program, f.host_id,
                  f.platform, f.description, f.evidence_seqs, f.evidence_refs);
}

}  // namespace

bool finding_less(const Finding& a, const Finding& b) {
  // std::tie needs lvalues; the first-seq temporaries live in each tuple.
  return sort_key(a) < sort_key(b);
}

void sort_findings(std::vector<Finding>& findings) {
  std::stable_sort(findings.begin(), findings.end(), finding_less);
  findings.erase(std::unique(findings.begin(), findings.end()), findings.end());
}

ordered_json finding_to_json(const Finding& f) {
  ordered_json j;
  j["category"] = to_string(f.category);
  j["sub_mode"] = f.sub_mode == SubMode::None ? ordered_json(nullptr) : ordered_json(to_string(f.sub_mode));
  j["host_id"] = f.host_id;
  j["platform"] = to_string(f.platform);
  j["api"] = f.api ? ordered_json(*f.api) : ordered_json(nullptr);
  j["mini_program"] = f.mini_program.empty() ? ordered_json(nullptr) : ordered_json(f.mini_program);
  j["scenario"] = f.scenario.empty() ? ordered_json(nullptr) : ordered_json(f.scenario);
  ordered_json ev;
  ev["seqs"] = f.evidence_seqs;
  ev["refs"] = f.evidence_refs;
  j["evidence"] = std::move(ev);
  j["description"] = f.description;
  return j;
}

ordered_json findings_to_json(const std::vector<Finding>& findings) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : findings) arr.push_back(finding_to_json(f));
  return arr;
}

namespace {

std::string label(const Finding& f) {
  std::string s(short_name(f.category));
  if (f.sub_mode != SubMode::None) s += "/" + std::string(to_string(f.sub_mode));
  return s;
}

std::string evidence_text(const Finding& f) {
  std::ostringstream os;
  bool first = true;
  for (auto seq : f.evidence_seqs) {
    os << (first ? "" : ",") << "#" << seq;
    first = false;
  }
  for (const auto& ref : f.evidence_refs) {
    os << (first ? "" : ",") << ref;
    first = false;
  }
  return os.str();
}

}  // namespace

std::string findings_to_text(const std::vector<Finding>& findings) {
  std::ostringstream os;
  for (const auto& f : findings) {
    os << label(f) << "  " << f.host_id << "-" << to_string(f.platform);
    if (f.api) os << "  " << *f.api;
    if (!f.scenario.empty()) os << "  [" << f.scenario << "]";
    os << "\n    " << f.description << "\n    evidence: " << evidence_text(f) << "\n";
  }
  os << findings.size() << " finding(s)\n";
  return os.str();
}

std::string findings_to_markdown(const std::vector<Finding>& findings) {
  std::ostringstream os;
  os << "| Category | Host | API | Scenario | Evidence | Description |\n";
  os << "|---|---|---|---|---|---|\n";
  auto esc = [](std::string s) {
    std::string out;
    for (char c : s) {
      if (c == '|') out += "\\|";
      else out += c;
    }
    return out;
  };
  for (const auto& f : findings) {
    os << "| " << label(f) << " | " << f.host_id << "-" << to_string(f.platform) << " | "
       << esc(f.api.value_or("")) << " | " << esc(f.scenario) << " | " << esc(evidence_text(f))
       << " | " << esc(f.description) << " |\n";
  }
  return os.str();
}

std::string CellPair::str() const {
  return std::string(to_string(android)) + "|" + std::string(to_string(ios));
}

const CellPair& VulnMatrix::at(std::string_view host, VulnCategory category) const {
  auto it = cells.find(std::string(host));
  if (it == cells.end()) throw Error(ErrorCode::UnknownHost, "no matrix row for '" + std::string(host) + "'");
  return it->second[static_cast<std::size_t>(category)];
}

std::size_t VulnMatrix::cell_count() const { return rows.size() * 6; }

VulnMatrix build_matrix(const std::vector<MatrixRow>& rows) {
  VulnMatrix m;
  for (const auto& row : rows) {
    auto [it, inserted] = m.cells.try_emplace(row.host_id);
    if (inserted) m.rows.push_back(row.host_id);
    for (std::size_t c = 0; c < 6; ++c) {
      auto& pair = it->second[c];
      (row.platform == Platform::Android ? pair.android : pair.ios) = row.cells[c];
    }
  }
  return m;
}

ordered_json matrix_to_json(const VulnMatrix& m) {
  ordered_json j;
  ordered_json cols = ordered_json::array();
  for (auto c : kAllCategories) cols.push_back(to_string(c));
  j["columns"] = std::move(cols);
  j["cell_format"] = "<android>|<ios>";
  ordered_json rows = ordered_json::array();
  for (const auto& host : m.rows) {
    ordered_json r;
    r["host_id"] = host;
    ordered_json cells;
    for (auto c : kAllCategories) cells[std::string(to_string(c))] = m.at(host, c).str();
    r["cells"] = std::move(cells);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string matrix_to_markdown(const VulnMatrix& m) {
  std::ostringstream os;
  os << "| Host |";
  for (auto c : kAllCategories) os << " " << to_string(c) << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < 6; ++i) os << "---|";
  os << "\n";
  for (const auto& host : m.rows) {
    os << "| " << host << " |";
    for (auto c : kAllCategories) {
      const auto& cell = m.at(host, c);
      // escape the column separator
      os << " " << to_string(cell.android) << " \\| " << to_string(cell.ios) << " |";
    }
    os << "\n";
  }
  return os.str();
}

std::string matrix_to_text(const VulnMatrix& m) {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"host"};
  for (auto c : kAllCategories) header.emplace_back(short_name(c));
  table.push_back(header);
  for (const auto& host : m.rows) {
    std::vector<std::string> line{host};
    for (auto c : kAllCategories) line.push_back(m.at(host, c).str());
    table.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      os << line[i];
      if (i + 1 < line.size()) os << std::string(width[i] - line[i].size() + 2, ' ');
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace miniperm
