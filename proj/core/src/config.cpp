#include "neverup/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "neverup/errors.hpp"

namespace neverup {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Key {
  std::vector<std::string> names;  // first entry is canonical
  std::function<bool(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

bool parse_int(const std::string& v, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) return false;
    const auto i = static_cast<std::int64_t>(d);
    if (static_cast<double>(i) != d) return false;  // "5e6" style literals allowed, "1.5" not
    out = i;
    return true;
  } catch (...) {
    return false;
  }
}

bool parse_double(const std::string& v, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_bool(const std::string& v, bool& out) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

template <typename T>
std::string fmt(T v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

#define INT_KEY(field)                                                     \
  [](ExperimentConfig& c, const std::string& v) {                          \
    std::int64_t x;                                                        \
    if (!parse_int(v, x)) return false;                                    \
    c.field = static_cast<decltype(c.field)>(x);                           \
    return true;                                                           \
  },                                                                       \
      [](const ExperimentConfig& c) { return fmt(c.field); }

#define DBL_KEY(field)                                                     \
  [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.field); }, \
      [](const ExperimentConfig& c) { return fmt(c.field); }

#define BOOL_KEY(field)                                                    \
  [](ExperimentConfig& c, const std::string& v) { return parse_bool(v, c.field); }, \
      [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }

#define STR_KEY(field)                                                     \
  [](ExperimentConfig& c, const std::string& v) {                          \
    c.field = v;                                                           \
    return true;                                                           \
  },                                                                       \
      [](const ExperimentConfig& c) { return c.field; }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      {{"config_version"}, INT_KEY(config_version)},
      {{"environment"}, STR_KEY(environment)},
      {{"maze_size"}, INT_KEY(maze_size)},
      {{"palette_colors"}, INT_KEY(palette_colors)},
      {{"time_limit"}, INT_KEY(time_limit)},
      {{"randomize_colors"}, BOOL_KEY(randomize_colors)},
      {{"chain_states"}, INT_KEY(chain_states)},

      {{"Number of mixtures N", "num_mixtures"}, INT_KEY(num_mixtures)},
      {{"Intrinsic reward scale beta", "Intrinsic reward scale β", "beta"}, DBL_KEY(beta)},
      {{"Discount r^e", "gamma_max"}, DBL_KEY(gamma_max)},
      {{"Discount r^i", "gamma_min"}, DBL_KEY(gamma_min)},
      {{"Cross Mixture Ratio", "cross_mixture_ratio"}, DBL_KEY(cross_mixture_ratio)},
      {{"RND clipping factor L", "rnd_clip"}, DBL_KEY(rnd_clip)},
      {{"use_rnd"}, BOOL_KEY(use_rnd)},

      {{"Kernel epsilon", "Kernel ε", "kernel_epsilon"}, DBL_KEY(kernel_epsilon)},
      {{"Kernel num. neighbors used", "kernel_neighbors"}, INT_KEY(kernel_neighbors)},
      {{"Kernel cluster distance xi", "Kernel cluster distance ξ", "kernel_xi"}, DBL_KEY(kernel_xi)},
      {{"Kernel pseudo-counts constant c", "kernel_c"}, DBL_KEY(kernel_c)},
      {{"Kernel maximum similarity s_m", "kernel_sm"}, DBL_KEY(kernel_sm)},
      {{"Episodic memory capacity", "episodic_capacity"}, INT_KEY(episodic_capacity)},
      {{"# Episodes w/o wiping Episodic Memory", "meta_episode_len"}, INT_KEY(meta_episode_len)},
      {{"first_step_zero_reward"}, BOOL_KEY(first_step_zero_reward)},

      {{"embedding_dim"}, INT_KEY(embedding_dim)},
      {{"f_hidden"}, INT_KEY(f_hidden)},
      {{"h_hidden"}, INT_KEY(h_hidden)},
      {{"Action prediction network L2 weight", "l2_weight"}, DBL_KEY(l2_weight)},
      {{"embedding_mode"}, STR_KEY(embedding_mode)},
      {{"rnd_dim"}, INT_KEY(rnd_dim)},
      {{"rnd_hidden"}, INT_KEY(rnd_hidden)},

      {{"torso_hidden"}, INT_KEY(torso_hidden)},
      {{"gru_hidden"}, INT_KEY(gru_hidden)},
      {{"head_hidden"}, INT_KEY(head_hidden)},

      {{"Learning rate (R2D2)", "lr_rl"}, DBL_KEY(lr_rl)},
      {{"Learning rate (RND and Action prediction)",
        "Learning rate (R2D2 and Action prediction)", "lr_aux"},
       DBL_KEY(lr_aux)},
      {{"Adam epsilon", "adam_epsilon"}, DBL_KEY(adam_epsilon)},
      {{"Adam beta1", "adam_beta1"}, DBL_KEY(adam_beta1)},
      {{"Adam beta2", "adam_beta2"}, DBL_KEY(adam_beta2)},
      {{"Adam clip norm", "adam_clip_norm"}, DBL_KEY(adam_clip_norm)},
      {{"Batch size", "batch_size"}, INT_KEY(batch_size)},
      {{"Trace length", "trace_length"}, INT_KEY(trace_length)},
      {{"Replay period", "replay_period"}, INT_KEY(replay_period)},
      {{"Retrace lambda", "Retrace λ", "retrace_lambda"}, DBL_KEY(retrace_lambda)},
      {{"R2D2 reward transformation", "Retrace loss transformation", "reward_transform"},
       STR_KEY(reward_transform)},
      {{"h_epsilon"}, DBL_KEY(h_epsilon)},
      {{"Target epsilon", "Target ε", "target_epsilon"}, DBL_KEY(target_epsilon)},
      {{"Target Q-network update period", "target_update_period"}, INT_KEY(target_update_period)},
      {{"aux_frames_per_sequence"}, INT_KEY(aux_frames_per_sequence)},

      {{"Replay capacity", "replay_capacity"}, INT_KEY(replay_capacity)},
      {{"Replay priority exponent", "priority_exponent"}, DBL_KEY(priority_exponent)},
      {{"priority_max_weight"}, DBL_KEY(priority_max_weight)},
      {{"Minimum sequences to start replay", "min_replay_sequences"}, INT_KEY(min_replay_sequences)},

      {{"actor_count"}, INT_KEY(actor_count)},
      {{"Actor update period", "actor_update_period"}, INT_KEY(actor_update_period)},
      {{"Evaluation epsilon", "Evaluation ε", "eval_epsilon"}, DBL_KEY(eval_epsilon)},
      {{"eval_mixture"}, INT_KEY(eval_mixture)},
      {{"eval_episodes"}, INT_KEY(eval_episodes)},
      {{"paper_actor_assignment"}, BOOL_KEY(paper_actor_assignment)},
      {{"actor_epsilon_base"}, DBL_KEY(actor_epsilon_base)},
      {{"actor_epsilon_power"}, DBL_KEY(actor_epsilon_power)},

      {{"frame_budget"}, INT_KEY(frame_budget)},
      {{"eval_period_frames"}, INT_KEY(eval_period_frames)},
      {{"frames_per_learner_step"}, INT_KEY(frames_per_learner_step)},
      {{"checkpoint_period_frames"}, INT_KEY(checkpoint_period_frames)},
      {{"driver"}, STR_KEY(driver)},

      {{"Optimizer", "optimizer"}, STR_KEY(optimizer)},
      {{"Embeddings memory mode", "memory_mode"}, STR_KEY(memory_mode)},
      {{"Num. action repeats", "action_repeats"}, INT_KEY(action_repeats)},
      {{"Q-network filter sizes"}, STR_KEY(q_filter_sizes)},
      {{"Q-network filter strides"}, STR_KEY(q_filter_strides)},
      {{"Q-network num. filters"}, STR_KEY(q_num_filters)},
      {{"Action prediction network filter sizes"}, STR_KEY(ap_filter_sizes)},
      {{"Action prediction network filter strides"}, STR_KEY(ap_filter_strides)},
      {{"Action prediction network num. filters"}, STR_KEY(ap_num_filters)},
      {{"Embeddings target update period"}, STR_KEY(embeddings_update_period)},
  };
  return keys;
}

#undef INT_KEY
#undef DBL_KEY
#undef BOOL_KEY
#undef STR_KEY

const Key* find_key(const std::string& name) {
  for (const Key& k : registry())
    for (const std::string& n : k.names)
      if (n == name) return &k;
  return nullptr;
}

}  // namespace

std::vector<std::string> ExperimentConfig::validation_errors() const {
  std::vector<std::string> errs;
  auto want = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  want(config_version == 1, "config_version: only version 1 is supported");
  want(environment == "disco_maze" || environment == "gridworld" || environment == "chain",
       "environment: must be disco_maze, gridworld, or chain");
  want(maze_size >= 5 && maze_size % 2 == 1, "maze_size: must be odd and >= 5");
  want(palette_colors >= 1, "palette_colors: must be >= 1");
  want(time_limit >= 1, "time_limit: must be >= 1");
  want(chain_states >= 2, "chain_states: must be >= 2");
  want(num_mixtures >= 1, "Number of mixtures N: must be >= 1");
  want(beta >= 0.0, "Intrinsic reward scale beta: must be >= 0");
  want(gamma_max > 0.0 && gamma_max < 1.0, "Discount r^e: must be in (0,1)");
  want(gamma_min > 0.0 && gamma_min < 1.0, "Discount r^i: must be in (0,1)");
  want(gamma_min <= gamma_max, "Discount r^i must not exceed Discount r^e");
  want(cross_mixture_ratio >= 0.0 && cross_mixture_ratio <= 1.0,
       "Cross Mixture Ratio: must be in [0,1]");
  want(rnd_clip >= 1.0, "RND clipping factor L: must be >= 1");
  want(kernel_epsilon > 0.0, "Kernel epsilon: must be positive");
  want(kernel_neighbors >= 1, "Kernel num. neighbors used: must be >= 1");
  want(kernel_xi >= 0.0, "Kernel cluster distance xi: must be >= 0");
  want(kernel_c > 0.0, "Kernel pseudo-counts constant c: must be positive");
  want(kernel_sm > 0.0, "Kernel maximum similarity s_m: must be positive");
  want(episodic_capacity >= 1, "Episodic memory capacity: must be >= 1");
  want(meta_episode_len >= 1, "# Episodes w/o wiping Episodic Memory: must be >= 1");
  want(embedding_dim >= 1, "embedding_dim: must be >= 1");
  want(f_hidden >= 1 && h_hidden >= 1, "embedding hidden sizes must be >= 1");
  want(l2_weight >= 0.0, "Action prediction network L2 weight: must be >= 0");
  want(embedding_mode == "learned" || embedding_mode == "random_projection",
       "embedding_mode: must be learned or random_projection");
  want(rnd_dim >= 1 && rnd_hidden >= 1, "RND sizes must be >= 1");
  want(torso_hidden >= 1 && gru_hidden >= 1 && head_hidden >= 1, "Q-network sizes must be >= 1");
  want(lr_rl > 0.0, "Learning rate (R2D2): must be positive");
  want(lr_aux > 0.0, "Learning rate (RND and Action prediction): must be positive");
  want(adam_epsilon > 0.0, "Adam epsilon: must be positive");
  want(adam_beta1 > 0.0 && adam_beta1 < 1.0, "Adam beta1: must be in (0,1)");
  want(adam_beta2 > 0.0 && adam_beta2 < 1.0, "Adam beta2: must be in (0,1)");
  want(adam_clip_norm > 0.0, "Adam clip norm: must be positive");
  want(batch_size >= 1, "Batch size: must be >= 1");
  want(trace_length >= 2, "Trace length: must be >= 2");
  want(replay_period >= 0 && replay_period < trace_length,
       "Replay period: must be in [0, Trace length)");
  want(retrace_lambda > 0.0 && retrace_lambda <= 1.0, "Retrace lambda: must be in (0,1]");
  want(reward_transform == "squash" || reward_transform == "identity",
       "reward transformation: must be squash or identity");
  want(h_epsilon > 0.0, "h_epsilon: must be positive");
  want(target_epsilon >= 0.0 && target_epsilon <= 1.0, "Target epsilon: must be in [0,1]");
  want(target_update_period >= 1, "Target Q-network update period: must be >= 1");
  want(aux_frames_per_sequence >= 1, "aux_frames_per_sequence: must be >= 1");
  want(replay_capacity >= 1, "Replay capacity: must be >= 1");
  want(priority_exponent >= 0.0, "Replay priority exponent: must be >= 0");
  want(priority_max_weight >= 0.0 && priority_max_weight <= 1.0,
       "priority_max_weight: must be in [0,1]");
  want(min_replay_sequences >= 1, "Minimum sequences to start replay: must be >= 1");
  want(actor_count >= 1, "actor_count: must be >= 1");
  want(actor_update_period >= 1, "Actor update period: must be >= 1");
  want(eval_epsilon >= 0.0 && eval_epsilon <= 1.0, "Evaluation epsilon: must be in [0,1]");
  want(eval_mixture >= 0 && eval_mixture < num_mixtures,
       "eval_mixture: must index a mixture in [0, N)");
  want(eval_episodes >= 1, "eval_episodes: must be >= 1");
  want(actor_epsilon_base > 0.0 && actor_epsilon_base < 1.0,
       "actor_epsilon_base: must be in (0,1)");
  want(actor_epsilon_power >= 1.0, "actor_epsilon_power: must be >= 1");
  want(frame_budget >= 0, "frame_budget: must be >= 0");
  want(eval_period_frames >= 1, "eval_period_frames: must be >= 1");
  want(frames_per_learner_step >= 1, "frames_per_learner_step: must be >= 1");
  want(checkpoint_period_frames >= 0, "checkpoint_period_frames: must be >= 0");
  want(driver == "serial" || driver == "threaded", "driver: must be serial or threaded");
  want(action_repeats == 1, "Num. action repeats: only 1 is supported at this scale");
  return errs;
}

void ExperimentConfig::validate() const {
  const auto errs = validation_errors();
  if (errs.empty()) return;
  std::string msg = "invalid configuration (" + std::to_string(errs.size()) + " problems):";
  for (const std::string& e : errs) msg += "\n  - " + e;
  throw ConfigError(msg);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> errs;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool saw_version = false;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* k = find_key(key);
    if (k == nullptr) {
      errs.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    if (!k->set(cfg, value)) {
      errs.push_back("line " + std::to_string(lineno) + ": bad value '" + value + "' for '" +
                     key + "'");
      continue;
    }
    if (k->names[0] == "config_version") saw_version = true;
  }
  if (!saw_version) errs.push_back("missing required key 'config_version'");
  for (const std::string& e : cfg.validation_errors()) errs.push_back(e);
  if (!errs.empty()) {
    std::string msg = "config: " + std::to_string(errs.size()) + " problems:";
    for (const std::string& e : errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const Key& k : registry()) os << k.names[0] << " = " << k.get(cfg) << "\n";
  return os.str();
}

}  // namespace neverup
