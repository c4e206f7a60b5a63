#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "neverup/errors.hpp"
#include "neverup/metrics.hpp"

using namespace neverup;

namespace {

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

// every column except wall_time
std::vector<std::string> stable_columns(const std::string& path) {
  std::ifstream is(path);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    rows.push_back(comma == std::string::npos ? line : line.substr(comma + 1));
  }
  return rows;
}

}  // namespace

TEST_CASE("a single record produces header plus one row") {
  const auto path = tmp("neverup_m1.csv");
  {
    MetricsSink sink(path.string());
    sink.record({0.0, 10, "episode/return_ext", 2, 1.5});
  }
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == std::string(MetricsSink::kHeader));
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1);
  const auto parsed = read_metrics_csv(path.string());
  CHECK(parsed.size() == 1);
  CHECK(parsed[0].tag == "episode/return_ext");
  CHECK(parsed[0].mixture == 2);
  CHECK(parsed[0].value == doctest::Approx(1.5));
  std::filesystem::remove(path);
}

TEST_CASE("1e5 rows from 8 concurrent producers parse back without corruption") {
  const auto path = tmp("neverup_mstress.csv");
  const int producers = 8;
  const int per_producer = 12500;
  {
    MetricsSink sink(path.string());
    std::vector<std::thread> threads;
    for (int p = 0; p < producers; ++p)
      threads.emplace_back([&, p] {
        for (int i = 0; i < per_producer; ++i)
          sink.record({0.0, i, "producer_" + std::to_string(p), p,
                       static_cast<double>(p) * 1e6 + i});
      });
    for (auto& t : threads) t.join();
  }
  const auto rows = read_metrics_csv(path.string());
  CHECK(static_cast<int>(rows.size()) == producers * per_producer);
  // per-producer: all values present exactly once, frames monotone
  std::vector<std::int64_t> seen(producers, 0);
  std::vector<std::int64_t> last_frame(producers, -1);
  std::vector<double> sum(producers, 0.0);
  for (const auto& r : rows) {
    const int p = r.mixture;
    ++seen[static_cast<std::size_t>(p)];
    CHECK(r.frame_count >= last_frame[static_cast<std::size_t>(p)]);
    last_frame[static_cast<std::size_t>(p)] = r.frame_count;
    sum[static_cast<std::size_t>(p)] += r.value - p * 1e6;
  }
  const double expect_sum = per_producer * (per_producer - 1) / 2.0;
  for (int p = 0; p < producers; ++p) {
    CHECK(seen[static_cast<std::size_t>(p)] == per_producer);
    CHECK(sum[static_cast<std::size_t>(p)] == doctest::Approx(expect_sum));
  }
  std::filesystem::remove(path);
}

TEST_CASE("replayed identical runs are byte-identical modulo the wall_time column") {
  const auto p1 = tmp("neverup_d1.csv");
  const auto p2 = tmp("neverup_d2.csv");
  auto write = [](const std::string& path) {
    MetricsSink sink(path);
    for (int i = 0; i < 200; ++i) sink.record({0.0, i * 7, "tag_" + std::to_string(i % 3), -1, i * 0.5});
  };
  write(p1.string());
  write(p2.string());
  CHECK(stable_columns(p1.string()) == stable_columns(p2.string()));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("frame counts are clamped monotone per tag") {
  const auto path = tmp("neverup_mono.csv");
  {
    MetricsSink sink(path.string());
    sink.record({0.0, 100, "a", -1, 1.0});
    sink.record({0.0, 50, "a", -1, 2.0});  // late producer with a stale frame
    sink.record({0.0, 120, "a", -1, 3.0});
    sink.record({0.0, 10, "b", -1, 4.0});  // independent tag
  }
  const auto rows = read_metrics_csv(path.string());
  CHECK(rows[0].frame_count == 100);
  CHECK(rows[1].frame_count == 100);
  CHECK(rows[2].frame_count == 120);
  CHECK(rows[3].frame_count == 10);
  std::filesystem::remove(path);
}

TEST_CASE("record after close is a usage error") {
  const auto path = tmp("neverup_closed.csv");
  MetricsSink sink(path.string());
  sink.close();
  CHECK_THROWS_AS(sink.record({0.0, 0, "x", -1, 0.0}), UsageError);
  std::filesystem::remove(path);
}

TEST_CASE("summarize: a single seed reports stderr 0") {
  const auto path = tmp("neverup_s1.csv");
  {
    MetricsSink sink(path.string());
    sink.record({0.0, 0, "eval/coverage", 0, 0.25});
    sink.record({0.0, 1000, "eval/coverage", 0, 0.5});
  }
  const auto rows = summarize({path.string()}, 500);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].stderr_ == 0.0);
  CHECK(rows[0].seeds == 1);
  std::filesystem::remove(path);
}

TEST_CASE("summarize: constant seeds {1,2,3} give mean 2 and stderr 0.577") {
  std::vector<std::string> paths;
  for (int seed = 0; seed < 3; ++seed) {
    const auto path = tmp("neverup_s3_" + std::to_string(seed) + ".csv");
    MetricsSink sink(path.string());
    for (int i = 0; i < 5; ++i)
      sink.record({0.0, i * 100, "eval/return_ext", 0, static_cast<double>(seed + 1)});
    sink.close();
    paths.push_back(path.string());
  }
  const auto rows = summarize(paths, 1000);
  REQUIRE(!rows.empty());
  for (const auto& r : rows) {
    CHECK(r.mean == doctest::Approx(2.0));
    CHECK(r.stderr_ == doctest::Approx(0.5773502692).epsilon(1e-6));
    CHECK(r.seeds == 3);
  }
  for (const auto& p : paths) std::filesystem::remove(p);
}

TEST_CASE("summarize: synthetic curves match hand-computed bucket means") {
  const auto path = tmp("neverup_buckets.csv");
  {
    MetricsSink sink(path.string());
    // bucket [0,100): values 1, 3 -> mean 2; bucket [100, 200): value 10
    sink.record({0.0, 10, "t", -1, 1.0});
    sink.record({0.0, 90, "t", -1, 3.0});
    sink.record({0.0, 150, "t", -1, 10.0});
  }
  const auto rows = summarize({path.string()}, 100);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].bucket_frame == 0);
  CHECK(rows[0].mean == doctest::Approx(2.0));
  CHECK(rows[1].bucket_frame == 100);
  CHECK(rows[1].mean == doctest::Approx(10.0));
  std::filesystem::remove(path);
}

TEST_CASE("bucketing is independent of row arrival interleaving") {
  const auto p1 = tmp("neverup_i1.csv");
  const auto p2 = tmp("neverup_i2.csv");
  {
    MetricsSink sink(p1.string());
    sink.record({0.0, 10, "t", -1, 1.0});
    sink.record({0.0, 90, "t", -1, 3.0});
  }
  {
    MetricsSink sink(p2.string());
    sink.record({0.0, 90, "t", -1, 3.0});
    // frame clamped to 90 here, still the same bucket
    sink.record({0.0, 10, "t", -1, 1.0});
  }
  const auto a = summarize({p1.string()}, 100);
  const auto b = summarize({p2.string()}, 100);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].mean == doctest::Approx(b[i].mean));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("mismatched schemas are rejected") {
  const auto path = tmp("neverup_badschema.csv");
  {
    std::ofstream os(path);
    os << "time,frames,tag,value\n1,2,x,3\n";
  }
  CHECK_THROWS_AS(read_metrics_csv(path.string()), DataError);
  CHECK_THROWS_AS(summarize({path.string()}, 100), DataError);
  std::filesystem::remove(path);
}
