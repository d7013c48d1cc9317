#include "henry/executor.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace henry {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

QoiRecorder::QoiRecorder(const StructuredGrid& g, const HenryParameters& prm)
    : g_(g), prm_(prm) {
  boxes_.reserve(kNumSubdomains);
  for (int p = 1; p <= kNumSubdomains; ++p)
    boxes_.push_back(subdomain_weights(g, p));
  const auto& names = standard_qoi_names();
  series_.resize(names.size());
  for (size_t i = 0; i < names.size(); ++i) {
    series_[i].qoi = names[i];
    series_[i].level = g.level;
  }
}

void QoiRecorder::on_step(const FlowSolver&, const State& s, int) {
  size_t k = 0;
  auto push = [&](double v) {
    series_[k].t.push_back(s.t);
    series_[k].v.push_back(v);
    ++k;
  };
  push(salt_mass(g_, prm_, s.c));
  push(freshwater_area(g_, prm_, s.c));
  for (const auto& box : boxes_) push(subdomain_salt_mass(box, prm_, s.c));
}

double SampleRecord::total_work() const {
  double w = fine.metrics.work_units();
  if (coarse) w += coarse->metrics.work_units();
  return w;
}

double SampleRecord::total_wall() const {
  double w = fine.metrics.wall_seconds;
  if (coarse) w += coarse->metrics.wall_seconds;
  return w;
}

std::string record_filename(int level, long index,
                            const std::string& sampling) {
  const char tag = (sampling == "halton") ? 'h' : 'i';
  return "L" + std::to_string(level) + "_" + tag + std::to_string(index) +
         ".json";
}

namespace {

ordered_json metrics_to_json(const RunMetrics& m) {
  ordered_json j;
  j["num_vertices"] = m.num_vertices;
  j["steps"] = m.steps;
  j["newton_iters"] = m.newton_iters;
  j["linear_iters"] = m.linear_iters;
  j["first_linear_iters"] = m.first_linear_iters;
  j["substeps"] = m.substeps;
  j["clamp_count"] = m.clamp_count;
  j["work_units"] = m.work_units();
  j["wall_seconds"] = m.wall_seconds;
  j["cmin"] = m.cmin;
  j["cmax"] = m.cmax;
  j["max_mass_balance_error"] = m.max_mass_balance_error;
  return j;
}

RunMetrics metrics_from_json(const ordered_json& j) {
  RunMetrics m;
  m.num_vertices = j.at("num_vertices").get<long>();
  m.steps = j.at("steps").get<long>();
  m.newton_iters = j.at("newton_iters").get<long>();
  m.linear_iters = j.at("linear_iters").get<long>();
  m.first_linear_iters = j.at("first_linear_iters").get<long>();
  m.substeps = j.at("substeps").get<long>();
  m.clamp_count = j.at("clamp_count").get<long>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  m.cmin = j.at("cmin").get<double>();
  m.cmax = j.at("cmax").get<double>();
  m.max_mass_balance_error = j.at("max_mass_balance_error").get<double>();
  return m;
}

ordered_json solve_to_json(const SolveInfo& s) {
  ordered_json j;
  j["level"] = s.level;
  j["status"] = s.status;
  j["message"] = s.message;
  j["metrics"] = metrics_to_json(s.metrics);
  ordered_json q;
  for (const auto& series : s.series) {
    ordered_json e;
    e["t"] = series.t;
    e["v"] = series.v;
    q[series.qoi] = std::move(e);
  }
  j["qois"] = std::move(q);
  return j;
}

SolveInfo solve_from_json(const ordered_json& j) {
  SolveInfo s;
  s.level = j.at("level").get<int>();
  s.status = j.at("status").get<std::string>();
  s.message = j.at("message").get<std::string>();
  s.metrics = metrics_from_json(j.at("metrics"));
  for (const auto& [name, e] : j.at("qois").items()) {
    QoiSeries series;
    series.qoi = name;
    series.level = s.level;
    series.t = e.at("t").get<std::vector<double>>();
    series.v = e.at("v").get<std::vector<double>>();
    s.series.push_back(std::move(series));
  }
  return s;
}

SampleRecord record_from_json(const ordered_json& j) {
  if (j.at("schema").get<std::string>() != "henry-sample-v1")
    throw std::runtime_error("unknown sample schema");
  SampleRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.level = j.at("level").get<int>();
  r.index = j.at("index").get<long>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sampling = j.at("sampling").get<std::string>();
  r.kind = (j.at("kind").get<std::string>() == "pair") ? JobKind::pair
                                                       : JobKind::single;
  const auto xi = j.at("xi").get<std::vector<double>>();
  if (xi.size() != 3) throw std::runtime_error("bad xi array");
  r.xi = RandomInput{xi[0], xi[1], xi[2]};
  r.status = j.at("status").get<std::string>();
  r.error = j.at("error").get<std::string>();
  r.fine = solve_from_json(j.at("fine"));
  if (!j.at("coarse").is_null()) r.coarse = solve_from_json(j.at("coarse"));
  return r;
}

ordered_json record_to_json(const SampleRecord& r) {
  ordered_json j;
  j["schema"] = "henry-sample-v1";
  j["run_id"] = r.run_id;
  j["level"] = r.level;
  j["index"] = r.index;
  j["seed"] = r.seed;
  j["sampling"] = r.sampling;
  j["kind"] = (r.kind == JobKind::pair) ? "pair" : "single";
  j["xi"] = {r.xi.xi1, r.xi.xi2, r.xi.xi3};
  j["status"] = r.status;
  j["error"] = r.error;
  j["fine"] = solve_to_json(r.fine);
  j["coarse"] = r.coarse ? solve_to_json(*r.coarse) : ordered_json(nullptr);
  return j;
}

SampleRecord parse_record(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  ordered_json j;
  in >> j;
  return record_from_json(j);
}

}  // namespace

void save_record(const fs::path& sample_dir, const SampleRecord& rec) {
  const fs::path file =
      sample_dir / record_filename(rec.level, rec.index, rec.sampling);
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << record_to_json(rec).dump(1) << '\n';
  }
  fs::rename(tmp, file);
}

std::optional<SampleRecord> load_record(const fs::path& file) {
  if (!fs::exists(file)) return std::nullopt;
  try {
    return parse_record(file);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool record_usable(const SampleRecord& rec, const Job& job,
                   const GridHierarchy& gh) {
  if (rec.run_id != job.run_id || rec.level != job.level ||
      rec.index != job.index || rec.seed != job.seed ||
      rec.sampling != job.sampling || rec.kind != job.kind || !rec.ok())
    return false;
  if (job.xi_override &&
      (rec.xi.xi1 != job.xi_override->xi1 ||
       rec.xi.xi2 != job.xi_override->xi2 ||
       rec.xi.xi3 != job.xi_override->xi3))
    return false;
  const auto expect = [&](const SolveInfo& s, int level) {
    if (s.level != level) return false;
    const size_t steps = static_cast<size_t>(gh.time_grid(level).steps);
    const auto& names = standard_qoi_names();
    if (s.series.size() != names.size()) return false;
    for (const auto& series : s.series)
      if (series.t.size() != steps || series.v.size() != steps) return false;
    return true;
  };
  if (!expect(rec.fine, job.level)) return false;
  if (job.kind == JobKind::pair)
    return rec.coarse && expect(*rec.coarse, job.level - 1);
  return !rec.coarse;
}

std::vector<Job> plan_jobs(const std::vector<long>& m,
                           const std::string& run_id, std::uint64_t seed,
                           const std::string& sampling,
                           const fs::path& sample_dir,
                           const GridHierarchy& gh) {
  std::vector<Job> jobs;
  for (int level = static_cast<int>(m.size()) - 1; level >= 0; --level) {
    for (long i = 0; i < m[static_cast<size_t>(level)]; ++i) {
      Job job;
      job.run_id = run_id;
      job.level = level;
      job.index = i;
      job.seed = seed;
      job.kind = (level == 0) ? JobKind::single : JobKind::pair;
      job.sampling = sampling;
      const fs::path file =
          sample_dir / record_filename(level, i, sampling);
      if (auto rec = load_record(file); rec && record_usable(*rec, job, gh))
        continue;
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

namespace {

SolveInfo run_one(const GridHierarchy& gh, int level,
                  const HenryParameters& prm, const RandomInput& xi,
                  const SolverConfig& scfg) {
  FlowSolver solver(gh, level, prm, xi, scfg);
  QoiRecorder recorder(solver.grid(), prm);
  RunResult res = solver.run({&recorder});
  SolveInfo info;
  info.level = level;
  info.status = to_string(res.status);
  info.message = res.message;
  info.metrics = res.metrics;
  info.metrics.step_log.clear();  // not persisted
  info.series = recorder.take();
  return info;
}

SampleRecord execute_job(const GridHierarchy& gh, const HenryParameters& prm,
                         const SolverConfig& scfg, const Job& job) {
  SampleRecord rec;
  rec.run_id = job.run_id;
  rec.level = job.level;
  rec.index = job.index;
  rec.seed = job.seed;
  rec.sampling = job.sampling;
  rec.kind = job.kind;
  rec.xi = job.xi_override          ? *job.xi_override
           : job.sampling == "halton" ? halton_point(job.index)
                                      : draw_uniform(job.seed, job.level,
                                                     job.index);
  try {
    rec.fine = run_one(gh, job.level, prm, rec.xi, scfg);
    bool ok = rec.fine.status == "ok";
    std::string err = ok ? "" : rec.fine.message;
    if (job.kind == JobKind::pair) {
      rec.coarse = run_one(gh, job.level - 1, prm, rec.xi, scfg);
      if (rec.coarse->status != "ok") {
        ok = false;
        if (!err.empty()) err += "; ";
        err += rec.coarse->message;
      }
    }
    rec.status = ok ? "ok" : "failed";
    rec.error = err;
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.error = e.what();
  }
  return rec;
}

}  // namespace

BatchResult run_batch(const GridHierarchy& gh, const HenryParameters& prm,
                      const ExecutorConfig& cfg, const std::vector<Job>& jobs) {
  if (cfg.workers < 1)
    throw std::invalid_argument("run_batch: workers must be >= 1");
  fs::create_directories(cfg.sample_dir);
  const fs::path index = cfg.sample_dir / "index.csv";
  if (!fs::exists(index)) {
    std::ofstream out(index);
    out << "# schema=henry-index-v1\n"
        << "run_id,level,index,kind,sampling,seed,status,work_units,"
           "wall_seconds\n";
  }

  std::vector<Job> sorted = jobs;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Job& a, const Job& b) {
                     if (a.level != b.level) return a.level > b.level;
                     return a.index < b.index;
                   });

  std::vector<std::optional<SampleRecord>> slots(sorted.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex io_mutex;
  long persisted = 0;

  auto worker = [&]() {
    for (;;) {
      if (stop.load(std::memory_order_relaxed)) return;
      const size_t k = next.fetch_add(1);
      if (k >= sorted.size()) return;
      SampleRecord rec = execute_job(gh, prm, cfg.solver, sorted[k]);
      save_record(cfg.sample_dir, rec);
      std::lock_guard<std::mutex> lock(io_mutex);
      std::ofstream out(index, std::ios::app);
      out << rec.run_id << ',' << rec.level << ',' << rec.index << ','
          << (rec.kind == JobKind::pair ? "pair" : "single") << ','
          << rec.sampling << ',' << rec.seed << ',' << rec.status << ','
          << rec.total_work() << ',' << rec.total_wall() << '\n';
      slots[k] = std::move(rec);
      ++persisted;
      if (cfg.stop_after_records > 0 && persisted >= cfg.stop_after_records)
        stop.store(true, std::memory_order_relaxed);
    }
  };

  const size_t nthreads =
      std::min<size_t>(static_cast<size_t>(cfg.workers), sorted.size());
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  BatchResult out;
  for (auto& slot : slots)
    if (slot) {
      ++out.executed;
      if (!slot->ok()) ++out.failed;
      out.records.push_back(std::move(*slot));
    }
  out.stopped_early = out.executed < static_cast<long>(sorted.size());
  std::sort(out.records.begin(), out.records.end(),
            [](const SampleRecord& a, const SampleRecord& b) {
              if (a.level != b.level) return a.level < b.level;
              return a.index < b.index;
            });
  return out;
}

std::vector<SampleRecord> load_records(const fs::path& sample_dir,
                                       const std::string& run_id,
                                       const std::vector<long>& m,
                                       const std::string& sampling) {
  std::vector<SampleRecord> records;
  for (size_t level = 0; level < m.size(); ++level) {
    for (long i = 0; i < m[level]; ++i) {
      const fs::path file =
          sample_dir /
          record_filename(static_cast<int>(level), i, sampling);
      if (!fs::exists(file)) continue;
      SampleRecord rec = parse_record(file);
      if (rec.run_id != run_id)
        throw std::runtime_error("sample " + file.string() +
                                 " belongs to run " + rec.run_id);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<LevelStats> accumulate_records(
    const GridHierarchy& gh, const std::vector<SampleRecord>& records,
    const std::string& qoi, int L, long* failed) {
  if (L < 0 || L > gh.max_level())
    throw std::invalid_argument("accumulate_records: bad level range");
  std::vector<LevelAccumulator> accs;
  accs.reserve(L + 1);
  for (int l = 0; l <= L; ++l) {
    const TimeGrid& tg = gh.time_grid(std::max(l - 1, 0));
    std::vector<double> t(tg.steps);
    for (int k = 0; k < tg.steps; ++k)
      t[static_cast<size_t>(k)] = static_cast<double>(k + 1) * tg.tau;
    accs.emplace_back(l, std::move(t));
  }

  std::vector<const SampleRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const SampleRecord* a, const SampleRecord* b) {
              if (a->level != b->level) return a->level < b->level;
              return a->index < b->index;
            });

  long nfail = 0;
  auto find_series = [&](const SolveInfo& s) -> const QoiSeries& {
    for (const auto& series : s.series)
      if (series.qoi == qoi) return series;
    throw std::runtime_error("accumulate_records: QoI " + qoi +
                             " missing from a sample record");
  };
  for (const SampleRecord* rec : sorted) {
    if (rec->level > L) continue;
    if (!rec->ok()) {
      ++nfail;
      continue;
    }
    const QoiSeries& f = find_series(rec->fine);
    if (rec->level == 0) {
      accs[0].add_pair(f.v, {}, rec->total_work(), rec->total_wall());
    } else {
      if (!rec->coarse)
        throw std::runtime_error(
            "accumulate_records: coupled record lacks its coarse half");
      const QoiSeries& c = find_series(*rec->coarse);
      accs[static_cast<size_t>(rec->level)].add_pair(
          f.v, c.v, rec->total_work(), rec->total_wall());
    }
  }
  if (failed) *failed = nfail;

  std::vector<LevelStats> out;
  out.reserve(accs.size());
  for (const auto& acc : accs) out.push_back(acc.stats());
  return out;
}

}  // namespace henry
