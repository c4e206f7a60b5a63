#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace neverup {

struct MetricRow {
  double wall_time = 0.0;
  std::int64_t frame_count = 0;
  std::string tag;
  int mixture = -1;  // -1: not mixture-specific
  double value = 0.0;
};

// Many-producer, single-consumer CSV sink. Rows are written line-atomically
// in arrival order; frame_count is clamped monotone per tag so the on-disk
// invariant holds regardless of producer interleaving. record() blocks only
// for the bounded enqueue.
class MetricsSink {
 public:
  explicit MetricsSink(const std::string& path);
  ~MetricsSink();
  MetricsSink(const MetricsSink&) = delete;
  MetricsSink& operator=(const MetricsSink&) = delete;

  void record(MetricRow row);
  // Drains the queue and fsync-closes the file; implicit in the destructor.
  void close();

  static constexpr const char* kHeader = "wall_time,frame_count,tag,mixture,value";

 private:
  void run();
  std::string path_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<MetricRow> queue_;
  std::map<std::string, std::int64_t> last_frame_;
  bool closing_ = false;
  bool closed_ = false;
  std::thread writer_;
};

// Parsed-back metrics file.
std::vector<MetricRow> read_metrics_csv(const std::string& path);

struct SummaryRow {
  std::string tag;
  std::int64_t bucket_frame = 0;  // floor(frame/window)*window
  double mean = 0.0;
  double stderr_ = 0.0;  // sample stddev of per-seed means / sqrt(seeds)
  int seeds = 0;
};

// Aligns per-seed metric curves on frame buckets and reports mean +/- stderr
// across seeds. Every input file must carry the standard header.
std::vector<SummaryRow> summarize(const std::vector<std::string>& csv_paths,
                                  std::int64_t window);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

}  // namespace neverup
