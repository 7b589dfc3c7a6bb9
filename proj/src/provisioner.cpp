#include "flowlet/provisioner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "flowlet/error.hpp"

namespace flowlet {

void ProfileTable::record(const std::string& row, const std::string& col,
                          double runtime_s) {
  if (runtime_s <= 0) raise(Errc::malformed, "runtime must be positive");
  rows_.insert(row);
  cols_.insert(col);
  auto& cell = cells_[row][col];
  cell.runtime_s = runtime_s;  // latest measurement wins
  cell.observed = true;
}

void ProfileTable::ensure_column(const std::string& col) { cols_.insert(col); }
void ProfileTable::ensure_row(const std::string& row) { rows_.insert(row); }

std::optional<double> ProfileTable::lookup(const std::string& row,
                                           const std::string& col) const {
  auto r = cells_.find(row);
  if (r == cells_.end()) return std::nullopt;
  auto c = r->second.find(col);
  if (c == r->second.end()) return std::nullopt;
  return c->second.runtime_s;
}

bool ProfileTable::is_observed(const std::string& row, const std::string& col) const {
  auto r = cells_.find(row);
  if (r == cells_.end()) return false;
  auto c = r->second.find(col);
  return c != r->second.end() && c->second.observed;
}

size_t ProfileTable::observed_count() const {
  size_t n = 0;
  for (const auto& [r, cols] : cells_)
    for (const auto& [c, cell] : cols)
      if (cell.observed) n++;
  return n;
}

std::vector<std::string> ProfileTable::row_names() const {
  return {rows_.begin(), rows_.end()};
}

std::vector<std::string> ProfileTable::col_names() const {
  return {cols_.begin(), cols_.end()};
}

void ProfileTable::complete(const SgdParams& params) {
  std::vector<std::string> rows = row_names();
  std::vector<std::string> cols = col_names();
  std::map<std::string, size_t> ri, ci;
  for (size_t i = 0; i < rows.size(); i++) ri[rows[i]] = i;
  for (size_t j = 0; j < cols.size(); j++) ci[cols[j]] = j;

  struct Obs {
    size_t i, j;
    double y;
  };
  std::vector<Obs> obs;
  for (const auto& [r, rcells] : cells_)
    for (const auto& [c, cell] : rcells)
      if (cell.observed)
        obs.push_back({ri.at(r), ci.at(c), std::log(std::max(1e-9, cell.runtime_s))});
  if (obs.empty()) raise(Errc::underdetermined, "no observed cells");

  double mu = 0;
  for (const auto& o : obs) mu += o.y;
  mu /= static_cast<double>(obs.size());

  size_t nr = rows.size(), nc = cols.size(), k = static_cast<size_t>(params.rank);
  std::vector<double> bu(nr, 0), bv(nc, 0), U(nr * k), V(nc * k);
  std::mt19937_64 rng(params.seed);
  auto draw = [&rng]() {
    return (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 0.2 - 0.1;
  };
  for (auto& u : U) u = draw();
  for (auto& v : V) v = draw();

  double prev_loss = -1;
  for (int epoch = 0; epoch < params.epochs; epoch++) {
    double se = 0;
    for (const auto& o : obs) {
      double* u = &U[o.i * k];
      double* v = &V[o.j * k];
      double pred = mu + bu[o.i] + bv[o.j];
      for (size_t f = 0; f < k; f++) pred += u[f] * v[f];
      double e = pred - o.y;
      se += e * e;
      bu[o.i] -= params.lr * (e + params.l2 * bu[o.i]);
      bv[o.j] -= params.lr * (e + params.l2 * bv[o.j]);
      for (size_t f = 0; f < k; f++) {
        double uf = u[f];
        u[f] -= params.lr * (e * v[f] + params.l2 * uf);
        v[f] -= params.lr * (e * uf + params.l2 * v[f]);
      }
    }
    double loss = se / static_cast<double>(obs.size());
    if (prev_loss >= 0 && std::abs(prev_loss - loss) < params.tol) break;
    prev_loss = loss;
  }

  for (size_t i = 0; i < nr; i++) {
    for (size_t j = 0; j < nc; j++) {
      auto& cell = cells_[rows[i]][cols[j]];
      if (cell.observed) continue;
      double pred = mu + bu[i] + bv[j];
      const double* u = &U[i * k];
      const double* v = &V[j * k];
      for (size_t f = 0; f < k; f++) pred += u[f] * v[f];
      cell.runtime_s = std::exp(std::clamp(pred, -30.0, 30.0));
      cell.observed = false;
    }
  }
}

std::string ProfileTable::to_csv() const {
  std::string out = "row,col,runtime_s,observed\n";
  char buf[64];
  for (const auto& [r, rcells] : cells_) {
    for (const auto& [c, cell] : rcells) {
      snprintf(buf, sizeof(buf), "%.9g", cell.runtime_s);
      out += r + "," + c + "," + buf + "," + (cell.observed ? "1" : "0") + "\n";
    }
  }
  return out;
}

ProfileTable ProfileTable::from_csv(const std::string& text) {
  ProfileTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::array<std::string, 4> f;
    size_t pos = 0;
    for (size_t i = 0; i < 3; i++) {
      auto c = line.find(',', pos);
      if (c == std::string::npos) raise(Errc::malformed, "profile row: " + line);
      f[i] = line.substr(pos, c - pos);
      pos = c + 1;
    }
    f[3] = line.substr(pos);
    t.rows_.insert(f[0]);
    t.cols_.insert(f[1]);
    auto& cell = t.cells_[f[0]][f[1]];
    cell.runtime_s = std::stod(f[2]);
    cell.observed = f[3] == "1";
  }
  return t;
}

std::string Provisioner::row_key(const std::string& pipeline, int64_t input_bytes) {
  int bucket = 0;
  for (int64_t v = std::max<int64_t>(1, input_bytes); v > 1; v >>= 1) bucket++;
  return pipeline + "#b" + std::to_string(bucket);
}

std::vector<int64_t> Provisioner::split_grid(int64_t input_bytes,
                                             int64_t concurrency_limit, size_t cap) {
  const int64_t anchor = kDefaultSplitSize;
  int64_t lo = std::max<int64_t>(1, (input_bytes + concurrency_limit - 1) /
                                        concurrency_limit);
  int64_t hi = std::max(input_bytes, anchor);
  std::set<int64_t> cand;
  cand.insert(anchor);
  cand.insert(lo);
  for (int64_t v = anchor; v >= lo && v >= 1; v /= 2) {
    cand.insert(v);
    if (v == 1) break;
  }
  for (int64_t v = anchor;; v *= 2) {
    if (v >= lo) cand.insert(v);
    if (v >= hi) break;
  }
  std::vector<int64_t> sorted(cand.begin(), cand.end());
  // Drop grid points below the max-concurrency endpoint; lo itself stays.
  sorted.erase(std::remove_if(sorted.begin(), sorted.end(),
                              [&](int64_t v) { return v < lo; }),
               sorted.end());
  if (sorted.size() <= cap) return sorted;

  std::set<int64_t> keep = {sorted.front(), sorted.back()};
  if (anchor >= lo) keep.insert(anchor);
  size_t need = cap - keep.size();
  std::vector<int64_t> rest;
  for (auto v : sorted)
    if (!keep.count(v)) rest.push_back(v);
  for (size_t i = 0; i < need; i++) {
    size_t idx = need == 1 ? 0 : i * (rest.size() - 1) / (need - 1);
    keep.insert(rest[idx]);
  }
  return {keep.begin(), keep.end()};
}

ColumnSpec Provisioner::column_for(const std::vector<int64_t>& splits) {
  ColumnSpec c;
  c.splits = splits;
  c.id = "c";
  for (size_t i = 0; i < splits.size(); i++) {
    if (i) c.id += "x";
    c.id += std::to_string(splits[i]);
  }
  return c;
}

std::vector<ColumnSpec> Provisioner::column_grid(size_t n_unsized,
                                                 int64_t input_bytes,
                                                 int64_t concurrency_limit,
                                                 size_t cap) {
  if (n_unsized == 0) return {};
  auto grid = split_grid(input_bytes, concurrency_limit, cap);
  if (n_unsized == 1) {
    std::vector<ColumnSpec> out;
    for (auto v : grid) out.push_back(column_for({v}));
    return out;
  }
  // Multi-phase: tie every phase to the same grid point so the column count
  // stays linear, plus the four lo/hi corner mixes.
  std::vector<ColumnSpec> out;
  for (auto v : grid) out.push_back(column_for(std::vector<int64_t>(n_unsized, v)));
  int64_t lo = grid.front(), hi = grid.back();
  std::vector<int64_t> alt1, alt2;
  for (size_t p = 0; p < n_unsized; p++) {
    alt1.push_back(p % 2 == 0 ? lo : hi);
    alt2.push_back(p % 2 == 0 ? hi : lo);
  }
  for (auto& mix : {alt1, alt2}) {
    auto col = column_for(mix);
    if (std::none_of(out.begin(), out.end(),
                     [&](const ColumnSpec& c) { return c.id == col.id; }))
      out.push_back(col);
  }
  if (out.size() > cap) {
    // Trim uniform columns from the middle of the grid first.
    std::vector<ColumnSpec> trimmed;
    trimmed.push_back(out.front());
    size_t uniform_last = grid.size() - 1;
    size_t need = cap - 2 - (out.size() - grid.size());
    for (size_t i = 1; i < need + 1; i++)
      trimmed.push_back(out[i * uniform_last / (need + 1)]);
    trimmed.push_back(out[uniform_last]);
    for (size_t i = grid.size(); i < out.size(); i++) trimmed.push_back(out[i]);
    out = std::move(trimmed);
  }
  std::sort(out.begin(), out.end(),
            [](const ColumnSpec& a, const ColumnSpec& b) { return a.id < b.id; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const ColumnSpec& a, const ColumnSpec& b) {
                          return a.id == b.id;
                        }),
            out.end());
  return out;
}

std::vector<ColumnSpec> Provisioner::canary_columns(const std::vector<ColumnSpec>& grid) {
  if (grid.empty()) return {};
  size_t phases = grid.front().splits.size();
  int64_t lo = INT64_MAX, hi = 0;
  for (const auto& c : grid)
    for (auto v : c.splits) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  std::vector<ColumnSpec> out;
  auto push_unique = [&](const ColumnSpec& c) {
    for (const auto& o : out)
      if (o.id == c.id) return;
    out.push_back(c);
  };
  if (phases == 1) {
    int64_t anchor = kDefaultSplitSize;
    bool has_anchor = std::any_of(grid.begin(), grid.end(), [&](const ColumnSpec& c) {
      return c.splits[0] == anchor;
    });
    push_unique(column_for({lo}));
    push_unique(column_for({has_anchor ? anchor : hi}));
    return out;
  }
  push_unique(column_for(std::vector<int64_t>(phases, lo)));
  push_unique(column_for(std::vector<int64_t>(phases, hi)));
  std::vector<int64_t> alt1, alt2;
  for (size_t p = 0; p < phases; p++) {
    alt1.push_back(p % 2 == 0 ? lo : hi);
    alt2.push_back(p % 2 == 0 ? hi : lo);
  }
  push_unique(column_for(alt1));
  push_unique(column_for(alt2));
  return out;
}

int64_t Provisioner::canary_bytes(int64_t input_bytes) {
  return std::min<int64_t>(input_bytes, 20'000'000);
}

double Provisioner::scale_runtime(double canary_runtime_s, int64_t canary_bytes,
                                  int64_t input_bytes) {
  if (canary_bytes <= 0) raise(Errc::malformed, "canary size must be positive");
  return canary_runtime_s * static_cast<double>(input_bytes) /
         static_cast<double>(canary_bytes);
}

int64_t Provisioner::task_count(const ColumnSpec& col, int64_t input_bytes) {
  int64_t n = 0;
  for (auto split : col.splits)
    n += std::max<int64_t>(1, (input_bytes + split - 1) / split);
  return n;
}

void Provisioner::record_run(const std::string& row, const ColumnSpec& col,
                             double runtime_s) {
  table_.record(row, col.id, runtime_s);
}

SizingDecision Provisioner::choose(const std::string& row, const JobGoal& goal,
                                   const std::vector<ColumnSpec>& grid,
                                   int64_t input_bytes, int64_t memory_mb,
                                   double cost_rate) {
  if (grid.empty()) raise(Errc::malformed, "empty sizing grid");
  table_.ensure_row(row);
  for (const auto& c : grid) table_.ensure_column(c.id);
  table_.complete(sgd_);

  struct Scored {
    const ColumnSpec* col;
    double runtime;
    double cost;
    int64_t tasks;
  };
  std::vector<Scored> scored;
  for (const auto& c : grid) {
    auto rt = table_.lookup(row, c.id);
    if (!rt) continue;
    int64_t n = task_count(c, input_bytes);
    double cost = (static_cast<double>(memory_mb) / 1024.0) * *rt *
                  static_cast<double>(n) * cost_rate;
    scored.push_back({&c, *rt, cost, n});
  }
  if (scored.empty()) raise(Errc::underdetermined, "no predictions for " + row);

  auto fastest = [&]() {
    return *std::min_element(scored.begin(), scored.end(),
                             [](const Scored& a, const Scored& b) {
                               if (a.runtime != b.runtime) return a.runtime < b.runtime;
                               if (a.cost != b.cost) return a.cost < b.cost;
                               if (a.tasks != b.tasks) return a.tasks < b.tasks;
                               return a.col->id < b.col->id;
                             });
  };
  auto cheapest_of = [](std::vector<Scored>& v) {
    return *std::min_element(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      if (a.tasks != b.tasks) return a.tasks < b.tasks;  // larger splits win ties
      return a.col->id < b.col->id;
    });
  };

  SizingDecision d;
  if (goal.kind == JobGoal::Kind::best_effort) {
    auto pick = fastest();
    d.column = *pick.col;
    d.predicted_runtime_s = pick.runtime;
    d.predicted_cost = pick.cost;
    return d;
  }
  std::vector<Scored> feasible;
  for (const auto& s : scored) {
    if (goal.kind == JobGoal::Kind::deadline && s.runtime <= goal.value)
      feasible.push_back(s);
    if (goal.kind == JobGoal::Kind::cost_cap && s.cost <= goal.value)
      feasible.push_back(s);
  }
  if (feasible.empty()) {
    auto pick = fastest();
    d.column = *pick.col;
    d.predicted_runtime_s = pick.runtime;
    d.predicted_cost = pick.cost;
    d.fallback = true;
    return d;
  }
  if (goal.kind == JobGoal::Kind::deadline) {
    auto pick = cheapest_of(feasible);
    d.column = *pick.col;
    d.predicted_runtime_s = pick.runtime;
    d.predicted_cost = pick.cost;
    return d;
  }
  auto pick = *std::min_element(feasible.begin(), feasible.end(),
                                [](const Scored& a, const Scored& b) {
                                  if (a.runtime != b.runtime) return a.runtime < b.runtime;
                                  return a.col->id < b.col->id;
                                });
  d.column = *pick.col;
  d.predicted_runtime_s = pick.runtime;
  d.predicted_cost = pick.cost;
  return d;
}

}  // namespace flowlet
