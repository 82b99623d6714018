#pragma once

#include "fdiff/verifier.hpp"

#include <json.hpp>

#include <iomanip>
#include <sstream>

namespace fdiff {

using ojson = nlohmann::ordered_json;

inline ojson to_json(const Report& r)
{
  ojson j;
  j["check"] = r.name;
  ojson params = ojson::object();
  for (auto& [k, v] : r.params)
    params[k] = v;
  j["params"] = params;
  j["status"] = to_string(r.status);
  if (r.status == Status::Fail) {
    ojson w;
    w["n"] = r.witness.n;
    w["quantity"] = r.witness.quantity;
    if (!r.witness.tree.empty())
      w["tree"] = r.witness.tree;
    w["residual"] = r.witness.residual;
    j["witness"] = w;
  }
  if (!r.notes.empty())
    j["notes"] = r.notes;
  if (r.wall_ms)
    j["wall_ms"] = std::llround(*r.wall_ms);
  return j;
}

inline ojson to_json(const std::vector<Report>& reports)
{
  ojson j;
  j["status"] = suite_passed(reports) ? "pass" : "fail";
  j["reports"] = ojson::array();
  for (auto& r : reports)
    j["reports"].push_back(to_json(r));
  return j;
}

namespace detail {

inline std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string joined_params(const Report& r)
{
  std::string p;
  for (auto& [k, v] : r.params) {
    if (!p.empty())
      p += ";";
    p += k + "=" + v;
  }
  return p;
}

} // namespace detail

inline std::string to_csv(const std::vector<Report>& reports, bool timing = false)
{
  std::ostringstream os;
  os << "check,params,status,witness_n,witness_quantity,witness_tree,witness_residual";
  if (timing)
    os << ",wall_ms";
  os << "\n";
  for (auto& r : reports) {
    bool fail = r.status == Status::Fail;
    os << detail::csv_field(r.name) << "," << detail::csv_field(detail::joined_params(r)) << "," << to_string(r.status)
       << "," << (fail ? std::to_string(r.witness.n) : "") << "," << detail::csv_field(fail ? r.witness.quantity : "")
       << "," << detail::csv_field(fail ? r.witness.tree : "") << ","
       << detail::csv_field(fail ? r.witness.residual : "");
    if (timing)
      os << "," << (r.wall_ms ? std::to_string(std::llround(*r.wall_ms)) : "");
    os << "\n";
  }
  return os.str();
}

inline std::string to_pretty(const std::vector<Report>& reports)
{
  std::ostringstream os;
  for (auto& r : reports) {
    std::string status = to_string(r.status);
    for (auto& ch : status)
      ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    os << std::left << std::setw(5) << status << " " << r.name << " (" << detail::joined_params(r) << ")";
    if (r.wall_ms)
      os << " " << std::llround(*r.wall_ms) << " ms";
    os << "\n";
    if (r.status == Status::Fail) {
      os << "      n = " << r.witness.n << ": " << r.witness.quantity << "\n";
      if (!r.witness.tree.empty())
        os << "      tree " << r.witness.tree << "\n";
      os << "      residual " << r.witness.residual << "\n";
    }
    for (auto& note : r.notes)
      os << "      note: " << note << "\n";
  }
  os << (suite_passed(reports) ? "suite: pass" : "suite: fail") << "\n";
  return os.str();
}

} // namespace fdiff
