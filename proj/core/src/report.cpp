#include "flowbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "flowbench/common.hpp"

namespace flowbench {

namespace fs = std::filesystem;

bool glob_match(const std::string& pattern, const std::string& text) {
  std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::vector<ReportRow> aggregate_runs(const std::string& glob_pattern) {
  // Walk from the pattern's fixed prefix directory.
  fs::path base = fs::path(glob_pattern);
  while (base.string().find('*') != std::string::npos) base = base.parent_path();
  if (base.empty()) base = ".";

  std::vector<fs::path> run_dirs;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(base, ec), end; it != end && !ec; it.increment(ec)) {
    if (!it->is_directory()) continue;
    std::string p = it->path().generic_string();
    if (glob_match(glob_pattern, p) && fs::exists(it->path() / "metrics.csv")) {
      run_dirs.push_back(it->path());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());

  struct Key {
    std::string env, task, regime, metric, scope;
    bool operator<(const Key& o) const {
      return std::tie(env, task, regime, metric, scope) <
             std::tie(o.env, o.task, o.regime, o.metric, o.scope);
    }
  };
  std::map<Key, std::vector<double>> groups;

  for (const auto& dir : run_dirs) {
    std::ifstream in(dir / "metrics.csv");
    if (!in) continue;
    std::string line;
    std::getline(in, line);  // header
    struct Rec {
      long long step;
      Key key;
      double value;
    };
    std::vector<Rec> recs;
    long long last_step = -1;
    while (std::getline(in, line)) {
      std::stringstream ls(line);
      std::string f[8];
      int i = 0;
      while (i < 8 && std::getline(ls, f[i], ',')) ++i;
      if (i != 8) continue;
      Rec rec{std::stoll(f[0]), {f[2], f[3], f[4], f[5], f[6]}, std::stod(f[7])};
      last_step = std::max(last_step, rec.step);
      recs.push_back(std::move(rec));
    }
    for (const auto& rec : recs) {
      if (rec.step == last_step) groups[rec.key].push_back(rec.value);
    }
  }

  std::vector<ReportRow> rows;
  for (const auto& [key, values] : groups) {
    ReportRow row{key.env, key.task, key.regime, key.metric, key.scope, 0.0, 0.0,
                  static_cast<int>(values.size())};
    for (double v : values) row.mean += v;
    row.mean /= double(values.size());
    if (values.size() > 1) {
      double acc = 0.0;
      for (double v : values) acc += (v - row.mean) * (v - row.mean);
      row.sd = std::sqrt(acc / double(values.size() - 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_to_csv(const std::vector<ReportRow>& rows) {
  std::string out = "env,task,regime,metric,scope,mean,sd,runs\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d", r.mean, r.sd, r.runs);
    out += r.env + "," + r.task + "," + r.regime + "," + r.metric + "," + r.scope + "," + buf + "\n";
  }
  return out;
}

}  // namespace flowbench
