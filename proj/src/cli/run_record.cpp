#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "sketchy/cli.hpp"
#include "sketchy/errors.hpp"

namespace sketchy::cli {

namespace {

using Json = nlohmann::ordered_json;

Json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

Json summary_json(const Summary& s) {
  Json obj = Json::object();
  for (const auto& e : s.entries()) obj[e.key] = e.is_number ? number_or_null(e.number) : Json(e.text);
  return obj;
}

std::string entry_text(const SummaryEntry& e) { return e.is_number ? format_number(e.number) : e.text; }

}  // namespace

void Summary::set(const std::string& key, double value) {
  for (auto& e : entries_)
    if (e.key == key) {
      e = SummaryEntry{key, {}, value, true};
      return;
    }
  entries_.push_back(SummaryEntry{key, {}, value, true});
}

void Summary::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_)
    if (e.key == key) {
      e = SummaryEntry{key, value, 0.0, false};
      return;
    }
  entries_.push_back(SummaryEntry{key, value, 0.0, false});
}

const SummaryEntry* Summary::find(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // integral values (iteration counts, sizes) print without exponent
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

void check_rows(const std::vector<RunRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].ms >= 0.0)) throw ArgumentError("run record: negative time in row " + std::to_string(i));
    if (i == 0) continue;
    if (rows[i].iter <= rows[i - 1].iter) throw ArgumentError("run record: rows out of order at " + std::to_string(i));
    if (rows[i].ms < rows[i - 1].ms) throw ArgumentError("run record: time decreases at row " + std::to_string(i));
  }
}

void write_solve_csv(std::ostream& out, const SolveRecord& rec) {
  out << "iter,r_est,true_res,cond,ms\n";
  for (const auto& r : rec.rows) {
    out << r.iter << ',' << format_number(r.r_est) << ',' << format_number(r.true_res) << ','
        << format_number(r.cond) << ',' << format_number(r.ms) << '\n';
  }
}

void write_solve_json(std::ostream& out, const SolveRecord& rec) {
  Json j;
  j["problem"] = rec.problem;
  j["method"] = rec.method;
  j["d"] = rec.d;
  Json hist = Json::array();
  for (const auto& r : rec.rows) {
    Json row;
    row["iter"] = r.iter;
    row["r_est"] = number_or_null(r.r_est);
    row["true_res"] = number_or_null(r.true_res);
    row["cond"] = number_or_null(r.cond);
    row["ms"] = r.ms;
    hist.push_back(std::move(row));
  }
  j["history"] = std::move(hist);
  j["summary"] = summary_json(rec.summary);
  out << j.dump(2) << '\n';
}

void write_eig_csv(std::ostream& out, const EigRecord& rec) {
  out << "# problem=" << rec.problem << '\n';
  out << "# method=" << rec.method << '\n';
  out << "# d=" << rec.d << '\n';
  for (const auto& e : rec.summary.entries()) out << "# " << e.key << '=' << entry_text(e) << '\n';
  out << "theta_re,theta_im,r_est\n";
  for (const auto& p : rec.pairs)
    out << format_number(p.theta_re) << ',' << format_number(p.theta_im) << ',' << format_number(p.r_est) << '\n';
}

void write_eig_json(std::ostream& out, const EigRecord& rec) {
  Json j;
  j["problem"] = rec.problem;
  j["method"] = rec.method;
  j["d"] = rec.d;
  Json pairs = Json::array();
  for (const auto& p : rec.pairs) {
    Json row;
    row["theta_re"] = p.theta_re;
    row["theta_im"] = p.theta_im;
    row["r_est"] = number_or_null(p.r_est);
    pairs.push_back(std::move(row));
  }
  j["pairs"] = std::move(pairs);
  j["summary"] = summary_json(rec.summary);
  out << j.dump(2) << '\n';
}

}  // namespace sketchy::cli
