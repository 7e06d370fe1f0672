#include "cmzdril/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cmzdril/adam.hpp"
#include "cmzdril/checkpoint.hpp"
#include "cmzdril/demos.hpp"
#include "cmzdril/env.hpp"

namespace cmzdril {

namespace {

namespace fs = std::filesystem;

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<EvalRow>& evals) {
  std::vector<double> reward, frechet, mse;
  for (const EvalRow& row : evals) {
    reward.push_back(row.true_reward);
    frechet.push_back(row.frechet);
    mse.push_back(row.mse);
  }
  const auto reward_s = gaussian_smooth(reward);
  const auto frechet_s = gaussian_smooth(frechet);
  const auto mse_s = gaussian_smooth(mse);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,reward_raw,reward_smooth,frechet_raw,frechet_smooth,"
         "mse_raw,mse_smooth\n";
  for (std::size_t i = 0; i < evals.size(); ++i)
    out << evals[i].update << ',' << format_g(reward[i]) << ','
        << format_g(reward_s[i]) << ',' << format_g(frechet[i]) << ','
        << format_g(frechet_s[i]) << ',' << format_g(mse[i]) << ','
        << format_g(mse_s[i]) << '\n';
}

void write_diagnostics_csv(const std::string& path,
                           const std::vector<UpdateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "update,mean_shaped_reward,mean_true_reward,policy_loss,value_loss,"
         "kl,clip_fraction,nll_loss,mean_disagreement\n";
  for (const UpdateRow& r : rows)
    out << r.update << ',' << format_g(r.mean_shaped_reward) << ','
        << format_g(r.mean_true_reward) << ',' << format_g(r.policy_loss)
        << ',' << format_g(r.value_loss) << ',' << format_g(r.kl) << ','
        << format_g(r.clip_fraction) << ',' << format_g(r.nll_loss) << ','
        << format_g(r.mean_disagreement) << '\n';
}

struct RunContext {
  std::unique_ptr<Env> train_env;
  std::unique_ptr<Env> eval_env;
  DemoSet demos;
  EvalReference eval_ref;
  std::uint64_t net_seed = 0;
  std::uint64_t run_seed = 0;
};

RunContext prepare_run(const TrainRunConfig& config,
                       const std::string& run_dir) {
  RunContext ctx;
  ctx.train_env = make_env(config.env_name);
  ctx.eval_env = make_env(config.env_name);

  const std::uint64_t demo_seed =
      derive_seed(config.master_seed, config.trial_index, "demos");
  const std::uint64_t eval_seed =
      derive_seed(config.master_seed, config.trial_index, "eval");
  ctx.net_seed = derive_seed(config.master_seed, config.trial_index, "network");
  ctx.run_seed = derive_seed(config.master_seed, config.trial_index,
                             "run-" + config.condition);

  ctx.demos = collect_demos(*ctx.train_env, config.demo_episodes, demo_seed);
  ctx.eval_ref =
      build_eval_reference(*ctx.eval_env, config.eval_episodes, eval_seed);

  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    std::ofstream snap(run_dir + "/config.txt");
    snap << config_snapshot(config);
    save_demos(ctx.demos, run_dir + "/demos.bin");
  }
  return ctx;
}

EvalRow evaluate(const GaussianPolicy& policy, Env& env,
                 const EvalReference& ref, const DemoSet& eval_demos,
                 int update) {
  EvalRow row;
  row.update = update;
  row.true_reward = eval_mean_true_reward(policy, env, ref);
  row.frechet = eval_frechet(policy, env, ref);
  row.mse = action_mse(policy, eval_demos);
  if (!std::isfinite(row.true_reward) || !std::isfinite(row.frechet) ||
      !std::isfinite(row.mse))
    throw std::runtime_error("evaluation produced a non-finite metric");
  return row;
}

void finish_run(const TrainRunConfig& config, TrainRecord& record,
                const std::string& run_dir, const GaussianPolicy& policy,
                const ValueNet* value_net, const Ensemble* ensemble) {
  fill_final_window(record);
  if (run_dir.empty()) return;
  write_metrics_csv(run_dir + "/metrics.csv", record.evals);
  write_diagnostics_csv(run_dir + "/diagnostics.csv", record.updates);
  save_policy(policy, run_dir + "/policy.ckpt");
  if (value_net) save_value_net(*value_net, run_dir + "/value.ckpt");
  if (ensemble) save_ensemble(*ensemble, run_dir + "/ensemble");
  if (record.aborted) {
    std::ofstream aborted(run_dir + "/aborted");
    aborted << record.abort_reason << '\n';
  } else {
    std::ofstream done(run_dir + "/done");
    done << "condition " << config.condition << "\nfinal_window_rows "
         << record.final_window_rows << "\n";
  }
}

}  // namespace

bool condition_uses_ppo(const std::string& condition) {
  return condition != "bc";
}

bool condition_uses_ensemble(const std::string& condition) {
  return condition == "cmz" || condition == "dril" || condition == "penalty";
}

void fill_final_window(TrainRecord& record) {
  const int rows = static_cast<int>(record.evals.size());
  if (rows == 0) return;
  const int window = std::max(1, (rows + 3) / 4);  // last quarter, ceil
  record.final_window_rows = window;
  double reward = 0.0, frechet = 0.0, mse = 0.0;
  for (int i = rows - window; i < rows; ++i) {
    reward += record.evals[static_cast<std::size_t>(i)].true_reward;
    frechet += record.evals[static_cast<std::size_t>(i)].frechet;
    mse += record.evals[static_cast<std::size_t>(i)].mse;
  }
  record.final_window_reward = reward / window;
  record.final_window_frechet = frechet / window;
  record.final_window_mse = mse / window;
}

TrainRecord run_baseline_bc(const TrainRunConfig& config,
                            const std::string& run_dir) {
  RunContext ctx = prepare_run(config, run_dir);
  TrainRecord record;
  record.condition = config.condition;

  GaussianPolicy policy(ctx.train_env->obs_dim(), ctx.train_env->act_dim(),
                        default_hidden_dims(),
                        derive_seed(ctx.net_seed, 0, "policy"));
  bc_train(policy, ctx.demos, config.bc, derive_seed(ctx.net_seed, 0, "bc"));
  record.phase_log.push_back("bc");

  record.evals.push_back(evaluate(policy, *ctx.eval_env, ctx.eval_ref,
                                  ctx.eval_ref.expert_demos, 0));
  finish_run(config, record, run_dir, policy, nullptr, nullptr);
  return record;
}

TrainRecord run_cmz_dril(const TrainRunConfig& config,
                         const std::string& run_dir) {
  if (config.total_updates < 1)
    throw std::invalid_argument("run_cmz_dril: total_updates must be >= 1");

  RunContext ctx = prepare_run(config, run_dir);
  TrainRecord record;
  record.condition = config.condition;

  // Pretrain the imitator, and the uncertainty ensemble when the reward mode
  // consumes disagreement.
  GaussianPolicy policy(ctx.train_env->obs_dim(), ctx.train_env->act_dim(),
                        default_hidden_dims(),
                        derive_seed(ctx.net_seed, 0, "policy"));
  bc_train(policy, ctx.demos, config.bc, derive_seed(ctx.net_seed, 0, "bc"));
  record.phase_log.push_back("bc");

  std::optional<Ensemble> ensemble;
  ShaperConfig shaper_config = config.shaper;
  shaper_config.mode = parse_shaper_mode(config.condition);
  if (condition_uses_ensemble(config.condition)) {
    ensemble = train_ensemble(ctx.demos, config.ensemble_size,
                              config.ensemble_bc,
                              derive_seed(ctx.net_seed, 0, "ensemble"));
    record.phase_log.push_back("ensemble");
    if (shaper_config.mode == ShaperMode::Dril &&
        shaper_config.dril_threshold < 0.0)
      shaper_config.dril_threshold = calibrate_dril_threshold(
          *ensemble, ctx.demos, shaper_config.dril_quantile);
  }
  RewardShaper shaper(shaper_config);

  ValueNet value_net(ctx.train_env->obs_dim(), default_hidden_dims(),
                     derive_seed(ctx.net_seed, 0, "value"));
  Adam policy_opt(policy.parameters(), {.lr = config.ppo.policy_lr});
  Adam value_opt(value_net.parameters(), {.lr = config.ppo.value_lr});
  Adam nll_opt(policy.parameters(),
               {.lr = config.bc.lr * config.interleave_lr_scale});
  Rng update_rng(derive_seed(ctx.run_seed, 0, "ppo-shuffle"));
  Rng nll_rng(derive_seed(ctx.run_seed, 0, "nll-shuffle"));

  const Mat demo_obs = ctx.demos.stacked_observations();
  const Mat demo_act = ctx.demos.stacked_actions();

  try {
    for (int update = 1; update <= config.total_updates; ++update) {
      const auto batch = collect_rollouts(
          *ctx.train_env, policy, value_net, shaper,
          ensemble ? &*ensemble : nullptr, config.ppo.rollout_steps,
          derive_seed(ctx.run_seed, static_cast<std::uint64_t>(update),
                      "rollout"));
      const PpoDiagnostics diag = ppo_update(policy, value_net, policy_opt,
                                             value_opt, batch, config.ppo,
                                             update_rng);
      record.phase_log.push_back("ppo");

      double nll_loss = 0.0;
      for (int pass = 0; pass < config.nll_epochs_per_cycle; ++pass) {
        nll_loss =
            nll_epoch(policy, demo_obs, demo_act, nll_opt, nll_rng, config.bc);
        record.phase_log.push_back("nll");
      }

      UpdateRow row;
      row.update = update;
      row.mean_shaped_reward = diag.mean_shaped_reward;
      row.mean_true_reward = diag.mean_true_reward;
      row.policy_loss = diag.policy_loss;
      row.value_loss = diag.value_loss;
      row.kl = diag.kl;
      row.clip_fraction = diag.clip_fraction;
      row.nll_loss = nll_loss;
      Eigen::Index steps = 0;
      double disagreement_sum = 0.0;
      for (const Trajectory& traj : batch) {
        disagreement_sum += traj.disagreements.sum();
        steps += traj.length();
      }
      row.mean_disagreement = disagreement_sum / static_cast<double>(steps);
      record.updates.push_back(row);

      if (!std::isfinite(row.mean_shaped_reward) ||
          !std::isfinite(row.policy_loss) || !std::isfinite(row.value_loss) ||
          !std::isfinite(nll_loss) || !params_finite(policy.parameters()))
        throw std::runtime_error("non-finite training metric at update " +
                                 std::to_string(update));

      if (update % config.eval_interval == 0 ||
          update == config.total_updates)
        record.evals.push_back(evaluate(policy, *ctx.eval_env, ctx.eval_ref,
                                        ctx.eval_ref.expert_demos, update));
    }
  } catch (const std::exception& e) {
    record.aborted = true;
    record.abort_reason = e.what();
  }

  finish_run(config, record, run_dir, policy, &value_net,
             ensemble ? &*ensemble : nullptr);
  return record;
}

TrainRecord run_condition(const TrainRunConfig& config,
                          const std::string& run_dir) {
  if (config.condition == "bc") return run_baseline_bc(config, run_dir);
  return run_cmz_dril(config, run_dir);
}

std::optional<TrainRecord> load_finished_run(const std::string& run_dir,
                                             const std::string& condition) {
  if (!fs::exists(run_dir + "/done") || !fs::exists(run_dir + "/metrics.csv"))
    return std::nullopt;
  std::ifstream in(run_dir + "/metrics.csv");
  if (!in) return std::nullopt;
  TrainRecord record;
  record.condition = condition;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EvalRow row;
    double skip;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    if (!(fields >> row.update >> row.true_reward >> skip >> row.frechet >>
          skip >> row.mse))
      return std::nullopt;
    record.evals.push_back(row);
  }
  if (record.evals.empty()) return std::nullopt;
  fill_final_window(record);
  return record;
}

double SuiteEntry::mean_final_reward() const {
  double sum = 0.0;
  for (const TrainRecord& r : trials) sum += r.final_window_reward;
  return sum / static_cast<double>(trials.size());
}

double SuiteEntry::std_final_reward() const {
  if (trials.size() < 2) return 0.0;
  const double mean = mean_final_reward();
  double ss = 0.0;
  for (const TrainRecord& r : trials) {
    const double d = r.final_window_reward - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(trials.size() - 1));
}

double SuiteEntry::mean_final_frechet() const {
  double sum = 0.0;
  for (const TrainRecord& r : trials) sum += r.final_window_frechet;
  return sum / static_cast<double>(trials.size());
}

double SuiteEntry::mean_final_mse() const {
  double sum = 0.0;
  for (const TrainRecord& r : trials) sum += r.final_window_mse;
  return sum / static_cast<double>(trials.size());
}

SuiteResult run_condition_suite(const TrainRunConfig& base,
                                const std::vector<std::string>& conditions,
                                int n_trials, const std::string& out_dir,
                                int workers) {
  if (n_trials < 1)
    throw std::invalid_argument("run_condition_suite: n_trials must be >= 1");
  if (conditions.empty())
    throw std::invalid_argument("run_condition_suite: no conditions");

  SuiteResult result;
  result.env_name = base.env_name;
  result.n_trials = n_trials;
  result.entries.resize(conditions.size());
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    result.entries[c].condition = conditions[c];
    result.entries[c].trials.resize(static_cast<std::size_t>(n_trials));
  }

  struct Job {
    std::size_t condition_index;
    int trial;
  };
  std::vector<Job> jobs;
  for (int t = 0; t < n_trials; ++t)
    for (std::size_t c = 0; c < conditions.size(); ++c)
      jobs.push_back({c, t});

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size() || failed.load()) return;
      const Job job = jobs[i];
      TrainRunConfig config = base;
      config.condition = conditions[job.condition_index];
      config.trial_index = static_cast<std::uint64_t>(job.trial);
      std::string run_dir;
      if (!out_dir.empty()) {
        char trial_name[32];
        std::snprintf(trial_name, sizeof(trial_name), "trial_%03d", job.trial);
        run_dir = out_dir + "/" + trial_name + "/" + config.condition;
      }
      try {
        std::optional<TrainRecord> record;
        if (!run_dir.empty())
          record = load_finished_run(run_dir, config.condition);
        if (!record) record = run_condition(config, run_dir);
        result.entries[job.condition_index]
            .trials[static_cast<std::size_t>(job.trial)] = std::move(*record);
        std::fprintf(stderr, "[suite] trial %d %s done\n", job.trial,
                     config.condition.c_str());
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };

  const int thread_count = std::max(1, workers);
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load())
    throw std::runtime_error("run_condition_suite: " + first_error);
  return result;
}

std::string config_snapshot(const TrainRunConfig& config) {
  std::ostringstream out;
  out << "env = " << config.env_name << '\n';
  out << "condition = " << config.condition << '\n';
  out << "demo_episodes = " << config.demo_episodes << '\n';
  out << "ensemble_size = " << config.ensemble_size << '\n';
  out << "bc_epochs = " << config.bc.epochs << '\n';
  out << "bc_batch_size = " << config.bc.batch_size << '\n';
  out << "bc_lr = " << format_g(config.bc.lr) << '\n';
  out << "ensemble_epochs = " << config.ensemble_bc.epochs << '\n';
  out << "alpha = " << format_g(config.shaper.alpha) << '\n';
  out << "gamma = " << format_g(config.shaper.gamma) << '\n';
  out << "dril_quantile = " << format_g(config.shaper.dril_quantile) << '\n';
  out << "reset_average_per_episode = "
      << (config.shaper.reset_average_per_episode ? 1 : 0) << '\n';
  out << "discount = " << format_g(config.ppo.discount) << '\n';
  out << "gae_lambda = " << format_g(config.ppo.gae_lambda) << '\n';
  out << "clip_epsilon = " << format_g(config.ppo.clip_epsilon) << '\n';
  out << "ppo_epochs = " << config.ppo.epochs << '\n';
  out << "minibatch_size = " << config.ppo.minibatch_size << '\n';
  out << "policy_lr = " << format_g(config.ppo.policy_lr) << '\n';
  out << "value_lr = " << format_g(config.ppo.value_lr) << '\n';
  out << "entropy_coef = " << format_g(config.ppo.entropy_coef) << '\n';
  out << "value_coef = " << format_g(config.ppo.value_coef) << '\n';
  out << "rollout_steps = " << config.ppo.rollout_steps << '\n';
  out << "target_kl = " << format_g(config.ppo.target_kl) << '\n';
  out << "nll_epochs_per_cycle = " << config.nll_epochs_per_cycle << '\n';
  out << "interleave_lr_scale = " << format_g(config.interleave_lr_scale)
      << '\n';
  out << "total_updates = " << config.total_updates << '\n';
  out << "eval_episodes = " << config.eval_episodes << '\n';
  out << "eval_interval = " << config.eval_interval << '\n';
  out << "seed = " << config.master_seed << '\n';
  out << "trial_index = " << config.trial_index << '\n';
  return out.str();
}

}  // namespace cmzdril
