#include "neverup/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neverup/errors.hpp"

namespace neverup {

MetricsSink::MetricsSink(const std::string& path) : path_(path) {
  {
    std::ofstream os(path_, std::ios::trunc);
    if (!os) throw DataError("metrics: cannot open " + path_);
    os << kHeader << "\n";
    if (!os) throw DataError("metrics: write failed for " + path_);
  }
  writer_ = std::thread([this] { run(); });
}

MetricsSink::~MetricsSink() { close(); }

void MetricsSink::record(MetricRow row) {
  std::lock_guard lock(mu_);
  if (closing_) throw UsageError("metrics: record() after close()");
  queue_.push_back(std::move(row));
  cv_.notify_one();
}

void MetricsSink::close() {
  {
    std::lock_guard lock(mu_);
    if (closing_) {
      if (!closed_ && writer_.joinable()) writer_.join();
      closed_ = true;
      return;
    }
    closing_ = true;
    cv_.notify_one();
  }
  if (writer_.joinable()) writer_.join();
  closed_ = true;
}

void MetricsSink::run() {
  std::ofstream os(path_, std::ios::app);
  const auto start = std::chrono::steady_clock::now();
  char buf[512];
  for (;;) {
    MetricRow row;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return !queue_.empty() || closing_; });
      if (queue_.empty()) return;
      row = std::move(queue_.front());
      queue_.pop_front();
      auto [it, fresh] = last_frame_.try_emplace(row.tag, row.frame_count);
      if (!fresh) {
        // monotone per tag even under producer races
        it->second = std::max(it->second, row.frame_count);
        row.frame_count = it->second;
      }
    }
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const int n = std::snprintf(buf, sizeof buf, "%.6f,%lld,%s,%d,%.10g\n", row.wall_time,
                                static_cast<long long>(row.frame_count), row.tag.c_str(),
                                row.mixture, row.value);
    if (n < 0 || n >= static_cast<int>(sizeof buf))
      throw DataError("metrics: row formatting overflow");
    os.write(buf, n);
    if (!os) throw DataError("metrics: write failed for " + path_);
    os.flush();
  }
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("metrics: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("metrics: empty file " + path);
  if (line != MetricsSink::kHeader)
    throw DataError("metrics: unexpected header in " + path + ": " + line);
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    MetricRow r;
    std::string field;
    if (!std::getline(ls, field, ',')) throw DataError("metrics: bad row: " + line);
    r.wall_time = std::stod(field);
    if (!std::getline(ls, field, ',')) throw DataError("metrics: bad row: " + line);
    r.frame_count = std::stoll(field);
    if (!std::getline(ls, r.tag, ',')) throw DataError("metrics: bad row: " + line);
    if (!std::getline(ls, field, ',')) throw DataError("metrics: bad row: " + line);
    r.mixture = std::stoi(field);
    if (!std::getline(ls, field)) throw DataError("metrics: bad row: " + line);
    r.value = std::stod(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<std::string>& csv_paths,
                                  std::int64_t window) {
  if (csv_paths.empty()) throw UsageError("summarize: need at least one metrics file");
  if (window < 1) throw UsageError("summarize: window must be positive");

  // (tag, bucket) -> per-seed mean
  struct Acc {
    double sum = 0.0;
    std::int64_t n = 0;
  };
  std::map<std::pair<std::string, std::int64_t>, std::vector<Acc>> cells;
  const int seeds = static_cast<int>(csv_paths.size());
  for (int seed = 0; seed < seeds; ++seed) {
    for (const MetricRow& r : read_metrics_csv(csv_paths[static_cast<std::size_t>(seed)])) {
      const std::int64_t bucket = r.frame_count / window * window;
      auto& per_seed = cells[{r.tag, bucket}];
      per_seed.resize(static_cast<std::size_t>(seeds));
      per_seed[static_cast<std::size_t>(seed)].sum += r.value;
      per_seed[static_cast<std::size_t>(seed)].n += 1;
    }
  }

  std::vector<SummaryRow> out;
  for (const auto& [key, per_seed] : cells) {
    std::vector<double> means;
    for (const Acc& a : per_seed)
      if (a.n > 0) means.push_back(a.sum / static_cast<double>(a.n));
    if (means.empty()) continue;
    SummaryRow row;
    row.tag = key.first;
    row.bucket_frame = key.second;
    row.seeds = static_cast<int>(means.size());
    double m = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(means.size());
    row.mean = m;
    if (means.size() > 1) {
      double ss = 0.0;
      for (double x : means) ss += (x - m) * (x - m);
      const double sd = std::sqrt(ss / static_cast<double>(means.size() - 1));
      row.stderr_ = sd / std::sqrt(static_cast<double>(means.size()));
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "tag,frame,mean,stderr,seeds\n";
  os.precision(10);
  for (const SummaryRow& r : rows)
    os << r.tag << "," << r.bucket_frame << "," << r.mean << "," << r.stderr_ << "," << r.seeds
       << "\n";
  return os.str();
}

}  // namespace neverup
