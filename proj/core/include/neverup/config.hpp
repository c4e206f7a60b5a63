#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace neverup {

// Full experiment configuration. File format: versioned `key = value` text,
// one pair per line, `#` comments. Keys use the hyperparameter-table names
// verbatim where one exists (ASCII aliases accepted for the Greek-lettered
// ones); everything else is lower_snake_case.
struct ExperimentConfig {
  int config_version = 1;

  // environment
  std::string environment = "disco_maze";  // disco_maze | gridworld | chain
  int maze_size = 11;
  int palette_colors = 5;
  int time_limit = 500;
  bool randomize_colors = true;
  int chain_states = 10;

  // mixtures and reward combination
  int num_mixtures = 32;     // Number of mixtures N
  double beta = 0.3;         // Intrinsic reward scale beta
  double gamma_max = 0.997;  // Discount r^e
  double gamma_min = 0.99;   // Discount r^i
  double cross_mixture_ratio = 0.0;
  double rnd_clip = 5.0;     // RND clipping factor L
  bool use_rnd = true;

  // episodic novelty
  double kernel_epsilon = 1e-3;
  int kernel_neighbors = 10;
  double kernel_xi = 0.008;       // cluster distance
  double kernel_c = 0.001;        // pseudo-counts constant
  double kernel_sm = 8.0;         // maximum similarity
  int episodic_capacity = 5000;
  int meta_episode_len = 1;       // episodes sharing one memory
  bool first_step_zero_reward = true;

  // embedding / RND networks
  int embedding_dim = 32;
  int f_hidden = 64;
  int h_hidden = 64;
  double l2_weight = 1e-5;  // Action prediction network L2 weight
  std::string embedding_mode = "learned";  // learned | random_projection
  int rnd_dim = 32;
  int rnd_hidden = 64;

  // Q network
  int torso_hidden = 64;
  int gru_hidden = 64;
  int head_hidden = 64;

  // optimization
  double lr_rl = 1e-4;   // Learning rate (R2D2)
  double lr_aux = 5e-4;  // Learning rate (RND and Action prediction)
  double adam_epsilon = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_clip_norm = 40.0;
  int batch_size = 64;
  int trace_length = 80;
  int replay_period = 40;
  double retrace_lambda = 0.95;
  std::string reward_transform = "squash";  // squash | identity
  double h_epsilon = 1e-2;
  double target_epsilon = 0.01;
  int target_update_period = 1500;
  int aux_frames_per_sequence = 5;

  // replay
  std::int64_t replay_capacity = 50000;
  double priority_exponent = 0.9;
  double priority_max_weight = 0.9;
  int min_replay_sequences = 500;

  // actors / evaluator
  int actor_count = 8;
  int actor_update_period = 100;
  double eval_epsilon = 0.01;
  int eval_mixture = 0;
  int eval_episodes = 2;
  bool paper_actor_assignment = false;  // literal j mod (N-1)
  double actor_epsilon_base = 0.4;
  double actor_epsilon_power = 8.0;

  // run control
  std::int64_t frame_budget = 2000000;
  std::int64_t eval_period_frames = 20000;
  std::int64_t frames_per_learner_step = 200;
  std::int64_t checkpoint_period_frames = 0;  // 0: final checkpoint only
  std::string driver = "serial";              // serial | threaded

  // table keys accepted for schema compatibility; inert in MLP mode
  std::string optimizer = "Adam";
  std::string memory_mode = "Ring buffer";
  int action_repeats = 1;
  std::string q_filter_sizes = "(3, 3)";
  std::string q_filter_strides = "(1, 1)";
  std::string q_num_filters = "(16, 32)";
  std::string ap_filter_sizes = "(3, 3)";
  std::string ap_filter_strides = "(1, 1)";
  std::string ap_num_filters = "(16, 32)";
  std::string embeddings_update_period = "once/episode";

  // Collects every problem (empty when valid).
  std::vector<std::string> validation_errors() const;
  // Throws ConfigError listing all problems.
  void validate() const;
};

// Parses `key = value` text; unknown keys, bad values, and domain violations
// are reported together, exhaustively.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
// Canonical round-trippable dump (written next to run outputs).
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace neverup
