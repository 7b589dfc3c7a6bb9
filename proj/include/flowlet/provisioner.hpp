#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowlet/orchestrator.hpp"

namespace flowlet {

struct SgdParams {
  int rank = 4;
  double lr = 0.01;
  int epochs = 2000;
  double l2 = 1e-4;
  double tol = 1e-6;  // stop when the train loss moves less than this
  uint64_t seed = 17;
};

struct ProfileCell {
  double runtime_s = 0;
  bool observed = false;
};

// Rows are (pipeline, input-size bucket), columns are split-size choices,
// values are makespans in seconds. Completion fits a biased low-rank model
// in log space, so predictions are positive by construction and observed
// cells are never overwritten.
class ProfileTable {
 public:
  void record(const std::string& row, const std::string& col, double runtime_s);
  void ensure_column(const std::string& col);
  void ensure_row(const std::string& row);
  std::optional<double> lookup(const std::string& row, const std::string& col) const;
  bool is_observed(const std::string& row, const std::string& col) const;
  size_t observed_count() const;
  void complete(const SgdParams& params = {});  // Underdetermined
  std::vector<std::string> row_names() const;
  std::vector<std::string> col_names() const;

  std::string to_csv() const;
  static ProfileTable from_csv(const std::string& text);

 private:
  std::map<std::string, std::map<std::string, ProfileCell>> cells_;
  std::set<std::string> rows_;
  std::set<std::string> cols_;
};

struct ColumnSpec {
  std::string id;
  std::vector<int64_t> splits;  // one per unsized stage, in stage order
};

struct SizingDecision {
  ColumnSpec column;
  double predicted_runtime_s = 0;
  double predicted_cost = 0;
  bool fallback = false;  // goal was infeasible; best-effort pick instead
};

class Provisioner {
 public:
  Provisioner() = default;
  explicit Provisioner(SgdParams sgd) : sgd_(sgd) {}

  ProfileTable& table() { return table_; }
  const ProfileTable& table() const { return table_; }

  // Row key: pipeline name plus the log2 bucket of the input size.
  static std::string row_key(const std::string& pipeline, int64_t input_bytes);
  // Geometric split grid doubling around the shared 1MB anchor, clamped to
  // [input/concurrency, one-chunk], at most `cap` columns.
  static std::vector<int64_t> split_grid(int64_t input_bytes,
                                         int64_t concurrency_limit, size_t cap = 12);
  static std::vector<ColumnSpec> column_grid(size_t n_unsized, int64_t input_bytes,
                                             int64_t concurrency_limit,
                                             size_t cap = 12);
  // Probe configurations: {default, max-concurrency} for one phase, four
  // lo/hi corners for multi-phase pipelines.
  static std::vector<ColumnSpec> canary_columns(const std::vector<ColumnSpec>& grid);
  static int64_t canary_bytes(int64_t input_bytes);
  static double scale_runtime(double canary_runtime_s, int64_t canary_bytes,
                              int64_t input_bytes);
  static ColumnSpec column_for(const std::vector<int64_t>& splits);
  static int64_t task_count(const ColumnSpec& col, int64_t input_bytes);

  void record_run(const std::string& row, const ColumnSpec& col, double runtime_s);
  // Completes the table over the grid and picks a column for the goal.
  SizingDecision choose(const std::string& row, const JobGoal& goal,
                        const std::vector<ColumnSpec>& grid, int64_t input_bytes,
                        int64_t memory_mb, double cost_rate);

 private:
  ProfileTable table_;
  SgdParams sgd_;
};

}  // namespace flowlet
