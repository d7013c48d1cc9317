#pragma once
// Sample batch executor: turns an allocation into coupled-pair jobs, runs
// them on a local thread pool (one single-threaded solver per worker), and
// persists every sample as a JSON record so batches can be resumed and
// samples reused. Sample content depends only on (run id, seed, level,
// index, solver config), never on worker count or completion order;
// aggregation reads records back in (level, index) order.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "henry/grid.hpp"
#include "henry/mlmc.hpp"
#include "henry/qoi.hpp"
#include "henry/random_inputs.hpp"
#include "henry/solver.hpp"

namespace henry {

// Records every standard QoI after each accepted step (series start at the
// first step; the t=0 values are fixed by the initial condition).
class QoiRecorder final : public StepObserver {
 public:
  QoiRecorder(const StructuredGrid& g, const HenryParameters& prm);
  void on_step(const FlowSolver& solver, const State& s, int step) override;
  const std::vector<QoiSeries>& series() const { return series_; }
  std::vector<QoiSeries> take() { return std::move(series_); }

 private:
  const StructuredGrid& g_;
  HenryParameters prm_;
  std::vector<SubdomainWeights> boxes_;
  std::vector<QoiSeries> series_;  // order of standard_qoi_names()
};

enum class JobKind { single, pair };

struct Job {
  std::string run_id;
  int level = 0;
  long index = 0;
  std::uint64_t seed = 0;
  JobKind kind = JobKind::pair;
  std::string sampling = "pseudo";  // "pseudo" | "halton"
  std::optional<RandomInput> xi_override;  // shared-sample diagnostics
};

// One solve inside a record (the fine member, or the coarse partner).
struct SolveInfo {
  int level = 0;
  std::string status;  // RunStatus name
  std::string message;
  RunMetrics metrics;  // step_log omitted from persistence
  std::vector<QoiSeries> series;
};

struct SampleRecord {
  std::string run_id;
  int level = 0;
  long index = 0;
  std::uint64_t seed = 0;
  std::string sampling = "pseudo";
  JobKind kind = JobKind::pair;
  RandomInput xi;
  std::string status;  // "ok" | "failed"
  std::string error;
  SolveInfo fine;
  std::optional<SolveInfo> coarse;

  bool ok() const { return status == "ok"; }
  double total_work() const;
  double total_wall() const;
};

// samples/L{level}_{i|h}{index}.json; the tag keeps pseudo-random and Halton
// records apart.
std::string record_filename(int level, long index, const std::string& sampling);

void save_record(const std::filesystem::path& sample_dir,
                 const SampleRecord& rec);
// Missing or unreadable files yield nullopt so interrupted writes are
// recomputed instead of wedging a resumed run.
std::optional<SampleRecord> load_record(const std::filesystem::path& file);

// True when the persisted record can stand in for the job: identity fields
// match, status ok, and every series has the expected length.
bool record_usable(const SampleRecord& rec, const Job& job,
                   const GridHierarchy& gh);

// Jobs for m[l] samples per level, skipping those with a usable persisted
// record; highest level first (longest jobs first), index ascending within a
// level. Level 0 jobs are single solves, higher levels coupled pairs.
std::vector<Job> plan_jobs(const std::vector<long>& m, const std::string& run_id,
                           std::uint64_t seed, const std::string& sampling,
                           const std::filesystem::path& sample_dir,
                           const GridHierarchy& gh);

struct ExecutorConfig {
  std::filesystem::path sample_dir;
  int workers = 1;
  SolverConfig solver;
  // Cooperative stop for restart tests: after this many records have been
  // persisted by this call, workers take no further jobs (0 = run all).
  long stop_after_records = 0;
};

struct BatchResult {
  std::vector<SampleRecord> records;  // executed this call, (level, index) order
  long executed = 0;
  long failed = 0;
  bool stopped_early = false;
};

// Runs the jobs at-most-once each; every record is persisted (tmp file +
// rename) and appended to index.csv before it is reported. A solver failure
// or exception yields a status "failed" record; the batch continues.
BatchResult run_batch(const GridHierarchy& gh, const HenryParameters& prm,
                      const ExecutorConfig& cfg, const std::vector<Job>& jobs);

// All persisted records of a run in (level, index) order; missing files are
// skipped, malformed files throw.
std::vector<SampleRecord> load_records(const std::filesystem::path& sample_dir,
                                       const std::string& run_id,
                                       const std::vector<long>& m,
                                       const std::string& sampling);

// Ordered reduction of ok records into per-level statistics for one QoI.
// Failed records are skipped and counted in *failed if given.
std::vector<LevelStats> accumulate_records(
    const GridHierarchy& gh, const std::vector<SampleRecord>& records,
    const std::string& qoi, int L, long* failed = nullptr);

}  // namespace henry
