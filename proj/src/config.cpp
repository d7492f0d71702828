#include "fusiongan/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fusiongan {

namespace {

using nlohmann::json;

json to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  return json{{"corpus_a", cfg.corpus_a},
              {"corpus_b", cfg.corpus_b},
              {"out_dir", cfg.out_dir},
              {"T", t.T},
              {"batch_size", t.batch_size},
              {"alpha_gen", t.alpha_gen},
              {"alpha_critic", t.alpha_critic},
              {"n_rollouts", t.n_rollouts},
              {"pretrain_mle_epochs", t.pretrain_mle_epochs},
              {"pretrain_classifier_steps", t.pretrain_classifier_steps},
              {"pretrain_adv_iters", t.pretrain_adv_iters},
              {"fusion_iters", t.fusion_iters},
              {"critic_steps_per_gen_step", t.critic_steps_per_gen_step},
              {"lambda_balance", t.lambda_balance},
              {"clip_bound", t.clip_bound},
              {"seed", t.seed},
              {"generator_sign_convention", to_string(t.sign_convention)},
              {"log_eps", t.log_eps},
              {"baseline_decay", t.baseline_decay},
              {"pretrain_convergence_tol", t.pretrain_convergence_tol},
              {"fusion_convergence_tol", t.fusion_convergence_tol},
              {"embedding_dim", t.embedding_dim},
              {"hidden_dim", t.hidden_dim},
              {"critic_filters", t.critic_filters},
              {"critic_widths", t.critic_widths},
              {"eval_batch", t.eval_batch},
              {"rl_iters", t.rl_iters},
              {"emd_ref_mass", t.emd_ref_mass},
              {"threads", t.threads}};
}

template <class T>
void read_key(const json& j, const std::string& key, T& into) {
  try {
    j.at(key).get_to(into);
  } catch (const json::exception& e) {
    throw InputError("config key `" + key + "`: " + e.what());
  }
}

void apply_json(RunConfig& cfg, const json& j) {
  TrainConfig& t = cfg.train;
  for (const auto& [key, value] : j.items()) {
    if (key == "corpus_a") read_key(j, key, cfg.corpus_a);
    else if (key == "corpus_b") read_key(j, key, cfg.corpus_b);
    else if (key == "out_dir") read_key(j, key, cfg.out_dir);
    else if (key == "T") read_key(j, key, t.T);
    else if (key == "batch_size") read_key(j, key, t.batch_size);
    else if (key == "alpha_gen") read_key(j, key, t.alpha_gen);
    else if (key == "alpha_critic") read_key(j, key, t.alpha_critic);
    else if (key == "n_rollouts") read_key(j, key, t.n_rollouts);
    else if (key == "pretrain_mle_epochs") read_key(j, key, t.pretrain_mle_epochs);
    else if (key == "pretrain_classifier_steps")
      read_key(j, key, t.pretrain_classifier_steps);
    else if (key == "pretrain_adv_iters") read_key(j, key, t.pretrain_adv_iters);
    else if (key == "fusion_iters") read_key(j, key, t.fusion_iters);
    else if (key == "critic_steps_per_gen_step")
      read_key(j, key, t.critic_steps_per_gen_step);
    else if (key == "lambda_balance") read_key(j, key, t.lambda_balance);
    else if (key == "clip_bound") read_key(j, key, t.clip_bound);
    else if (key == "seed") read_key(j, key, t.seed);
    else if (key == "generator_sign_convention") {
      std::string name;
      read_key(j, key, name);
      t.sign_convention = parse_sign_convention(name);
    } else if (key == "log_eps") read_key(j, key, t.log_eps);
    else if (key == "baseline_decay") read_key(j, key, t.baseline_decay);
    else if (key == "pretrain_convergence_tol")
      read_key(j, key, t.pretrain_convergence_tol);
    else if (key == "fusion_convergence_tol") read_key(j, key, t.fusion_convergence_tol);
    else if (key == "embedding_dim") read_key(j, key, t.embedding_dim);
    else if (key == "hidden_dim") read_key(j, key, t.hidden_dim);
    else if (key == "critic_filters") read_key(j, key, t.critic_filters);
    else if (key == "critic_widths") read_key(j, key, t.critic_widths);
    else if (key == "eval_batch") read_key(j, key, t.eval_batch);
    else if (key == "rl_iters") read_key(j, key, t.rl_iters);
    else if (key == "emd_ref_mass") read_key(j, key, t.emd_ref_mass);
    else if (key == "threads") read_key(j, key, t.threads);
    else throw InputError("unknown config key `" + key + "`");
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw InputError(path.string() + ": config must be a JSON object");
  RunConfig cfg;
  apply_json(cfg, j);
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InputError("override must look like key=value, got `" + assignment + "`");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings like file paths or `minmax`
  }
  apply_json(cfg, json{{key, value}});
}

std::string run_config_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write config " + path.string());
  out << run_config_json(cfg);
  if (!out) throw InputError("write failed for " + path.string());
}

std::string run_config_help() {
  std::ostringstream os;
  os << "Config keys and defaults (JSON file, overridable with --set key=value):\n";
  const json j = to_json(RunConfig{});
  for (const auto& [key, value] : j.items()) os << "  " << key << " = " << value << "\n";
  return os.str();
}

}  // namespace fusiongan
