#include "neverup/env/gridworld.hpp"

#include <algorithm>

#include "neverup/errors.hpp"

namespace neverup {

namespace {
constexpr int kDx[4] = {-1, 1, 0, 0};
constexpr int kDy[4] = {0, 0, -1, 1};

bool is_border(int x, int y, int size) {
  return x == 0 || y == 0 || x == size - 1 || y == size - 1;
}
}  // namespace

void GridworldConfig::validate() const {
  if (size < 4) throw ConfigError("gridworld: size must be >= 4");
  if (colors < 1) throw ConfigError("gridworld: palette must be nonempty");
  if (time_limit < 1) throw ConfigError("gridworld: time limit must be positive");
}

Gridworld::Gridworld(const GridworldConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
  cfg_.validate();
  const auto n = static_cast<std::size_t>(cfg_.size) * cfg_.size;
  color_.assign(n, 0);
  visited_.assign(n, 0);
  obs_.assign(n, 0);
  reset();
}

void Gridworld::paint() {
  const int s = cfg_.size;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const auto i = static_cast<std::size_t>(y) * s + x;
      if (is_border(x, y, s)) {
        if (cfg_.randomize_colors)
          color_[i] = static_cast<std::uint8_t>(rng_.uniform_int(cfg_.colors));
        obs_[i] = static_cast<std::uint8_t>(2 + color_[i]);
      } else {
        obs_[i] = 0;
      }
    }
  obs_[static_cast<std::size_t>(ay_) * s + ax_] = 1;
}

void Gridworld::reset() {
  std::fill(visited_.begin(), visited_.end(), 0);
  steps_ = 0;
  const int interior = cfg_.size - 2;
  ax_ = 1 + rng_.uniform_int(interior);
  ay_ = 1 + rng_.uniform_int(interior);
  visited_[static_cast<std::size_t>(ay_) * cfg_.size + ax_] = 1;
  unique_visited_ = 1;
  done_ = false;
  for (int y = 0; y < cfg_.size; ++y)
    for (int x = 0; x < cfg_.size; ++x)
      if (is_border(x, y, cfg_.size))
        color_[static_cast<std::size_t>(y) * cfg_.size + x] =
            static_cast<std::uint8_t>(rng_.uniform_int(cfg_.colors));
  paint();
}

double Gridworld::step(int action) {
  if (done_) throw UsageError("gridworld: episode is over; call reset()");
  if (action < 0 || action >= 4) throw UsageError("gridworld: action out of range");
  const int nx = ax_ + kDx[action];
  const int ny = ay_ + kDy[action];
  if (!is_border(nx, ny, cfg_.size)) {
    ax_ = nx;
    ay_ = ny;
    auto& seen = visited_[static_cast<std::size_t>(ay_) * cfg_.size + ax_];
    if (!seen) {
      seen = 1;
      ++unique_visited_;
    }
  }
  ++steps_;
  if (steps_ >= cfg_.time_limit) done_ = true;
  paint();
  return 0.0;
}

double Gridworld::coverage() const {
  const int interior = (cfg_.size - 2) * (cfg_.size - 2);
  return static_cast<double>(unique_visited_) / interior;
}

int Gridworld::border_cell_count() const { return 4 * (cfg_.size - 1); }

std::vector<std::uint8_t> Gridworld::observation_for(
    int x, int y, const std::vector<std::uint8_t>& border_colors) const {
  if (is_border(x, y, cfg_.size)) throw UsageError("gridworld: agent cannot stand on the border");
  if (static_cast<int>(border_colors.size()) != border_cell_count())
    throw UsageError("gridworld: need one color per border cell");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(cfg_.size) * cfg_.size, 0);
  int k = 0;
  for (int yy = 0; yy < cfg_.size; ++yy)
    for (int xx = 0; xx < cfg_.size; ++xx)
      if (is_border(xx, yy, cfg_.size))
        out[static_cast<std::size_t>(yy) * cfg_.size + xx] =
            static_cast<std::uint8_t>(2 + border_colors[static_cast<std::size_t>(k++)]);
  out[static_cast<std::size_t>(y) * cfg_.size + x] = 1;
  return out;
}

}  // namespace neverup
