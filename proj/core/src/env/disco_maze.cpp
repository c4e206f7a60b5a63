#include "neverup/env/disco_maze.hpp"

#include <algorithm>
#include <fstream>

#include "neverup/errors.hpp"

namespace neverup {

namespace {
constexpr int kDx[4] = {-1, 1, 0, 0};  // left, right, up, down
constexpr int kDy[4] = {0, 0, -1, 1};
}  // namespace

void DiscoMazeConfig::validate() const {
  if (size < 5 || size % 2 == 0) throw ConfigError("disco maze: size must be odd and >= 5");
  if (colors < 1) throw ConfigError("disco maze: palette must be nonempty");
  if (time_limit < 1) throw ConfigError("disco maze: time limit must be positive");
}

DiscoMaze::DiscoMaze(const DiscoMazeConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
  cfg_.validate();
  const auto n = static_cast<std::size_t>(cfg_.size) * cfg_.size;
  wall_.assign(n, 1);
  color_.assign(n, 0);
  visited_.assign(n, 0);
  obs_.assign(n, 0);
  reset();
}

bool DiscoMaze::is_wall(int x, int y) const {
  return wall_[static_cast<std::size_t>(y) * cfg_.size + x] != 0;
}

void DiscoMaze::generate_maze() {
  const int s = cfg_.size;
  std::fill(wall_.begin(), wall_.end(), 1);
  const int lattice = (s - 1) / 2;  // carvable cells sit at odd coordinates

  auto cell_xy = [&](int cx, int cy) { return std::pair<int, int>{2 * cx + 1, 2 * cy + 1}; };
  auto carve = [&](int x, int y) { wall_[static_cast<std::size_t>(y) * s + x] = 0; };

  // Recursive backtracker over the odd lattice: connected by construction.
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(lattice) * lattice, 0);
  std::vector<std::pair<int, int>> stack;
  const int start = rng_.uniform_int(lattice * lattice);
  stack.emplace_back(start % lattice, start / lattice);
  seen[static_cast<std::size_t>(start)] = 1;
  {
    auto [x, y] = cell_xy(stack.back().first, stack.back().second);
    carve(x, y);
  }
  while (!stack.empty()) {
    auto [cx, cy] = stack.back();
    int options[4];
    int count = 0;
    for (int d = 0; d < 4; ++d) {
      const int nx = cx + kDx[d];
      const int ny = cy + kDy[d];
      if (nx < 0 || ny < 0 || nx >= lattice || ny >= lattice) continue;
      if (seen[static_cast<std::size_t>(ny) * lattice + nx]) continue;
      options[count++] = d;
    }
    if (count == 0) {
      stack.pop_back();
      continue;
    }
    const int d = options[rng_.uniform_int(count)];
    const int nx = cx + kDx[d];
    const int ny = cy + kDy[d];
    seen[static_cast<std::size_t>(ny) * lattice + nx] = 1;
    auto [x, y] = cell_xy(cx, cy);
    carve(x + kDx[d], y + kDy[d]);  // passage between the two lattice cells
    auto [x2, y2] = cell_xy(nx, ny);
    carve(x2, y2);
    stack.emplace_back(nx, ny);
  }

  corridor_count_ = 0;
  for (std::uint8_t w : wall_)
    if (w == 0) ++corridor_count_;
}

void DiscoMaze::paint() {
  const int s = cfg_.size;
  for (int i = 0; i < s * s; ++i) {
    if (wall_[static_cast<std::size_t>(i)]) {
      if (cfg_.randomize_colors || color_[static_cast<std::size_t>(i)] == 0)
        color_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng_.uniform_int(cfg_.colors));
      obs_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(2 + color_[static_cast<std::size_t>(i)]);
    } else {
      obs_[static_cast<std::size_t>(i)] = 0;
    }
  }
  obs_[static_cast<std::size_t>(ay_) * s + ax_] = 1;
}

void DiscoMaze::reset() {
  generate_maze();
  std::fill(color_.begin(), color_.end(), 0);
  std::fill(visited_.begin(), visited_.end(), 0);
  trace_.clear();
  unique_visited_ = 0;
  // uniformly random corridor start
  int pick = rng_.uniform_int(corridor_count_);
  for (int i = 0; i < cfg_.size * cfg_.size; ++i) {
    if (wall_[static_cast<std::size_t>(i)]) continue;
    if (pick-- == 0) {
      ax_ = i % cfg_.size;
      ay_ = i / cfg_.size;
      break;
    }
  }
  visited_[static_cast<std::size_t>(ay_) * cfg_.size + ax_] = 1;
  unique_visited_ = 1;
  done_ = false;
  // force a full repaint regardless of the color mode
  for (int i = 0; i < cfg_.size * cfg_.size; ++i)
    if (wall_[static_cast<std::size_t>(i)])
      color_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng_.uniform_int(cfg_.colors));
  paint();
}

double DiscoMaze::step(int action) {
  if (done_) throw UsageError("disco maze: episode is over; call reset()");
  if (action < 0 || action >= 4)
    throw UsageError("disco maze: action " + std::to_string(action) + " out of range");
  const int nx = ax_ + kDx[action];
  const int ny = ay_ + kDy[action];
  if (is_wall(nx, ny)) {
    done_ = true;
  } else {
    ax_ = nx;
    ay_ = ny;
    auto& seen = visited_[static_cast<std::size_t>(ay_) * cfg_.size + ax_];
    if (!seen) {
      seen = 1;
      ++unique_visited_;
    }
  }
  trace_.push_back({static_cast<int>(trace_.size()), ax_, ay_, action, done_});
  if (static_cast<int>(trace_.size()) >= cfg_.time_limit) done_ = true;
  paint();
  return 0.0;
}

int DiscoMaze::unique_states() const { return unique_visited_; }
double DiscoMaze::coverage() const {
  return static_cast<double>(unique_visited_) / corridor_count_;
}

std::string DiscoMaze::render_ascii() const {
  std::string out;
  for (int y = 0; y < cfg_.size; ++y) {
    for (int x = 0; x < cfg_.size; ++x) {
      if (x == ax_ && y == ay_)
        out += '@';
      else if (is_wall(x, y))
        out += static_cast<char>('1' + color_[static_cast<std::size_t>(y) * cfg_.size + x]);
      else
        out += ' ';
    }
    out += '\n';
  }
  return out;
}

void DiscoMaze::dump_trace_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("disco maze: cannot open " + path);
  os << "step,x,y,action,done\n";
  for (const TraceRow& r : trace_)
    os << r.step << "," << r.x << "," << r.y << "," << r.action << "," << (r.done ? 1 : 0)
       << "\n";
}

std::vector<std::uint8_t> DiscoMaze::encode(const Grid& grid) {
  std::vector<std::uint8_t> obs(static_cast<std::size_t>(grid.size) * grid.size, 0);
  for (int i = 0; i < grid.size * grid.size; ++i)
    if (grid.wall[static_cast<std::size_t>(i)])
      obs[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(2 + grid.color[static_cast<std::size_t>(i)]);
  obs[static_cast<std::size_t>(grid.agent_y) * grid.size + grid.agent_x] = 1;
  return obs;
}

DiscoMaze::Grid DiscoMaze::decode(const std::vector<std::uint8_t>& obs, int size) {
  Grid g;
  g.size = size;
  g.wall.assign(obs.size(), 0);
  g.color.assign(obs.size(), 0);
  for (int i = 0; i < size * size; ++i) {
    const std::uint8_t c = obs[static_cast<std::size_t>(i)];
    if (c == 1) {
      g.agent_x = i % size;
      g.agent_y = i / size;
    } else if (c >= 2) {
      g.wall[static_cast<std::size_t>(i)] = 1;
      g.color[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(c - 2);
    }
  }
  return g;
}

double unique_state_coverage(const std::vector<std::pair<int, int>>& positions,
                             int reachable_corridors) {
  if (reachable_corridors <= 0) throw UsageError("coverage: no reachable corridors");
  std::vector<std::pair<int, int>> uniq = positions;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  return static_cast<double>(uniq.size()) / reachable_corridors;
}

}  // namespace neverup
