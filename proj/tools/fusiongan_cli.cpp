/**
 * @file fusiongan_cli.cpp
 * @brief Operator entry point: synth | pretrain | fuse | generate |
 *        baseline | eval. Exit codes: 0 ok, 1 usage/config error,
 *        2 numeric divergence.
 */
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fusiongan/baselines.hpp"
#include "fusiongan/checkpoint.hpp"
#include "fusiongan/config.hpp"
#include "fusiongan/eval.hpp"
#include "fusiongan/fusion.hpp"

namespace fs = std::filesystem;
namespace fg = fusiongan;

namespace {

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_buf{};
  localtime_r(&now, &tm_buf);
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm_buf);
  return buf;
}

fg::RunConfig resolve_config(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  fg::RunConfig cfg;
  if (!config_path.empty()) cfg = fg::load_run_config(config_path);
  for (const auto& s : overrides) fg::apply_override(cfg, s);
  cfg.train.validate();
  fg::set_thread_budget(cfg.train.threads);
  return cfg;
}

fs::path ensure_out_dir(const fg::RunConfig& cfg, const std::string& command) {
  fs::path dir = cfg.out_dir.empty() ? fs::path("runs") / (command + "-" + timestamp())
                                     : fs::path(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

void require_absent(const fs::path& path) {
  if (fs::exists(path))
    throw fg::InputError("refusing to overwrite existing checkpoint " + path.string());
}

struct SharedCorpora {
  fg::Corpus a, b, f;
};

SharedCorpora load_shared(const fg::RunConfig& cfg) {
  if (cfg.corpus_a.empty() || cfg.corpus_b.empty())
    throw fg::InputError("config must set corpus_a and corpus_b");
  auto [a, b] = fg::merge_to_shared(fg::load_corpus(cfg.corpus_a),
                                    fg::load_corpus(cfg.corpus_b));
  if (a.T != cfg.train.T)
    throw fg::InputError("corpora have T=" + std::to_string(a.T) +
                         " but the config says T=" + std::to_string(cfg.train.T));
  SharedCorpora out;
  out.f = fg::union_corpus(a, b, 'F');
  out.a = std::move(a);
  out.b = std::move(b);
  return out;
}

void run_synth(const std::string& grammar, int n, int T, std::uint64_t seed,
               const std::string& out, const std::string& domain) {
  fg::Corpus corpus = fg::synth_corpus(fg::parse_grammar(grammar), n, T, seed);
  if (!domain.empty()) {
    if (domain.size() != 1 || (domain[0] != 'A' && domain[0] != 'B' && domain[0] != 'F'))
      throw fg::InputError("--domain must be A, B or F");
    corpus.domain_label = domain[0];
  }
  fg::save_corpus(corpus, out);
  std::cout << "wrote " << corpus.sequences.size() << " sequences (V="
            << corpus.vocab.size() << ", T=" << corpus.T << ") to " << out << "\n";
}

void run_pretrain(const fg::RunConfig& cfg, const std::string& domain_arg) {
  if (domain_arg.size() != 1 ||
      (domain_arg[0] != 'A' && domain_arg[0] != 'B' && domain_arg[0] != 'F'))
    throw fg::InputError("--domain must be A, B or F");
  const char domain = domain_arg[0];
  const fs::path out = ensure_out_dir(cfg, "pretrain");
  const fs::path ckpt = out / (std::string(1, domain) + ".ckpt");
  require_absent(ckpt);

  SharedCorpora corpora = load_shared(cfg);
  fg::Corpus corpus = domain == 'A' ? std::move(corpora.a)
                      : domain == 'B' ? std::move(corpora.b)
                                      : std::move(corpora.f);
  fg::Rng rng(fg::split_seed(cfg.train.seed, static_cast<std::uint64_t>(domain)));
  fg::DomainBundle bundle = fg::make_bundle(domain, std::move(corpus), cfg.train, rng);
  std::vector<fg::LogRow> log;
  fg::pretrain_pipeline(bundle, cfg.train, rng, &log);

  fg::save_bundle(bundle, cfg.train, ckpt);
  fg::write_log_tsv(log, out / ("pretrain_" + std::string(1, domain) + ".log.tsv"));
  fg::save_run_config(cfg, out / "config.json");
  std::cout << "pretrained domain " << domain << " -> " << ckpt.string() << "\n";
}

void run_fuse(const fg::RunConfig& cfg, const std::string& ckpt_a,
              const std::string& ckpt_b, const std::string& ckpt_f) {
  SharedCorpora corpora = load_shared(cfg);
  auto load_side = [&](const std::string& path, char label, const fg::Corpus& corpus) {
    int T = 0;
    fg::DomainBundle b = fg::load_bundle(path, &T);
    if (b.label != label)
      throw fg::InputError(path + " holds domain " + std::string(1, b.label) +
                           ", expected " + std::string(1, label));
    if (T != cfg.train.T) throw fg::InputError(path + " was trained with a different T");
    if (!(b.corpus.vocab == corpus.vocab))
      throw fg::InputError(path + " vocabulary does not match the corpora");
    b.corpus = corpus;
    return b;
  };
  fg::Trio trio = fg::make_trio(load_side(ckpt_a, 'A', corpora.a),
                                load_side(ckpt_b, 'B', corpora.b),
                                load_side(ckpt_f, 'F', corpora.f), cfg.train);

  const fs::path out = ensure_out_dir(cfg, "fuse");
  const fs::path ckpt = out / "trio.ckpt";
  require_absent(ckpt);

  fg::Rng rng(fg::split_seed(cfg.train.seed, static_cast<std::uint64_t>('T')));
  std::vector<fg::LogRow> log;
  fg::FusionHistory history;
  bool diverged = false;
  std::string divergence_message;
  try {
    history = fg::fusion_train(trio, rng, &log);
  } catch (const fg::NumericError& e) {
    diverged = true;
    divergence_message = e.what();
  }
  fg::save_trio(trio.a, trio.b, trio.f, cfg.train, ckpt);
  fg::write_log_tsv(log, out / "fusion.log.tsv");
  fg::save_run_config(cfg, out / "config.json");

  nlohmann::json summary;
  summary["iterations_completed"] = trio.iteration;
  summary["converged_early"] = history.converged_early;
  summary["diverged"] = diverged;
  if (!log.empty() && trio.iteration > 0) {
    nlohmann::json final_row;
    for (auto it = log.rbegin(); it != log.rend() && it->iter == trio.iteration; ++it)
      final_row[it->metric] = it->value;
    summary["final"] = final_row;
  }
  std::ofstream summary_out(out / "summary.json", std::ios::binary);
  summary_out << summary.dump(2) << "\n";

  if (diverged) throw fg::NumericError(divergence_message + " (last good state saved)");
  std::cout << "fusion finished after " << trio.iteration << " iterations -> "
            << ckpt.string() << "\n";
}

void run_generate(const std::string& ckpt, int n, std::uint64_t seed,
                  const std::string& out, const std::string& bundle_sel) {
  fg::CheckpointData raw = fg::load_checkpoint(ckpt);
  const std::string kind =
      raw.meta.count("kind") ? raw.meta.at("kind") : std::string("bundle");
  fg::DomainBundle bundle;
  int T = 0;
  if (kind == "bundle") {
    bundle = fg::load_bundle(ckpt, &T);
  } else if (kind == "trio") {
    fg::TrioCheckpoint trio = fg::load_trio(ckpt);
    T = trio.T;
    const char want = bundle_sel.empty() ? 'F' : bundle_sel[0];
    if (want == 'A') bundle = std::move(trio.a);
    else if (want == 'B') bundle = std::move(trio.b);
    else if (want == 'F') bundle = std::move(trio.f);
    else throw fg::InputError("--bundle must be A, B or F");
  } else {
    throw fg::InputError(ckpt + ": unknown checkpoint kind `" + kind + "`");
  }
  if (n < 1) throw fg::InputError("--n must be >= 1");
  fg::Rng rng(seed);
  fg::Corpus corpus;
  corpus.domain_label = bundle.label;
  corpus.T = T;
  corpus.vocab = bundle.corpus.vocab;
  corpus.sequences = fg::generator_sample_batch(bundle.generator, n, T, rng).first;
  fg::save_corpus(corpus, out);
  std::cout << "sampled " << n << " sequences from " << bundle.label << " -> " << out
            << "\n";
}

void run_baseline(const fg::RunConfig& cfg, const std::string& kind_name, int n,
                  const std::string& out, const std::string& ckpt_a,
                  const std::string& ckpt_b) {
  const fg::BaselineKind kind = fg::parse_baseline(kind_name);
  if (n < 1) throw fg::InputError("--n must be >= 1");
  fg::Rng rng(fg::split_seed(cfg.train.seed,
                             0x6261736500ULL + static_cast<std::uint64_t>(kind)));
  fg::Corpus result;
  result.domain_label = 'F';
  result.T = cfg.train.T;
  if (kind == fg::BaselineKind::kRL) {
    if (ckpt_a.empty() || ckpt_b.empty())
      throw fg::InputError("baseline rl needs --ckpt-a and --ckpt-b");
    int ta = 0, tb = 0;
    fg::DomainBundle a = fg::load_bundle(ckpt_a, &ta);
    fg::DomainBundle b = fg::load_bundle(ckpt_b, &tb);
    if (ta != cfg.train.T || tb != cfg.train.T)
      throw fg::InputError("rl checkpoints were trained with a different T");
    if (!(a.corpus.vocab == b.corpus.vocab))
      throw fg::InputError("rl checkpoints do not share a vocabulary");
    auto [gen_a, gen_b] = fg::rl_baseline(a, b, cfg.train, rng);
    const int half = n / 2;
    result.vocab = a.corpus.vocab;
    result.sequences =
        fg::generator_sample_batch(gen_a, half, cfg.train.T, rng).first;
    auto rest = fg::generator_sample_batch(gen_b, n - half, cfg.train.T, rng).first;
    result.sequences.insert(result.sequences.end(), rest.begin(), rest.end());
  } else {
    SharedCorpora corpora = load_shared(cfg);
    result.vocab = corpora.f.vocab;
    switch (kind) {
      case fg::BaselineKind::kRM:
        result.sequences =
            fg::rm_generate(corpora.f.vocab, corpora.f, n, cfg.train.T, rng);
        break;
      case fg::BaselineKind::kMC:
        result.sequences =
            fg::mc_generate(corpora.f.vocab, corpora.f, n, cfg.train.T, rng);
        break;
      case fg::BaselineKind::kMLE: {
        auto gen = fg::mle_baseline(corpora.f, cfg.train, rng);
        result.sequences = fg::generator_sample_batch(gen, n, cfg.train.T, rng).first;
        break;
      }
      case fg::BaselineKind::kGAN: {
        auto bundle = fg::gan_baseline(corpora.f, cfg.train, rng);
        result.sequences =
            fg::generator_sample_batch(bundle.generator, n, cfg.train.T, rng).first;
        break;
      }
      default: break;
    }
  }
  fg::save_corpus(result, out);
  std::cout << "baseline " << kind_name << ": " << n << " sequences -> " << out << "\n";
}

void run_eval(const std::string& gen_path, const std::string& a_path,
              const std::string& b_path, const std::string& out_dir, double ref_mass) {
  const fg::Corpus gen = fg::load_corpus(gen_path);
  const fg::Corpus a = fg::load_corpus(a_path);
  const fg::Corpus b = fg::load_corpus(b_path);
  const fg::SystemReport report = fg::evaluate_system(gen, a, b, ref_mass);
  const fs::path out(out_dir);
  fs::create_directories(out);
  fg::write_report_json(report, out / "report.json");
  fg::write_histogram_csv(report.dd_gen, out / "hist_gen_dd.csv");
  fg::write_histogram_csv(report.dd_a, out / "hist_a_dd.csv");
  fg::write_histogram_csv(report.dd_b, out / "hist_b_dd.csv");
  fg::write_histogram_csv(report.npd_gen, out / "hist_gen_npd.csv");
  fg::write_histogram_csv(report.npd_a, out / "hist_a_npd.csv");
  fg::write_histogram_csv(report.npd_b, out / "hist_b_npd.csv");
  for (const auto& row : report.rows)
    std::cout << row.metric << " " << row.histogram_kind << ": diff=" << row.diff
              << " ratio=" << row.ratio << "\n";
  std::cout << "report -> " << (out / "report.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-domain adversarial melody fusion: train two source-genre "
               "models plus a third generator scored between them, with baselines "
               "and distribution-distance evaluation."};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus file");
  std::string sy_grammar, sy_out, sy_domain;
  int sy_n = 500, sy_T = 32;
  std::uint64_t sy_seed = 1;
  synth->add_option("--grammar", sy_grammar, "arpeggio | stepwise")->required();
  synth->add_option("--n", sy_n, "number of sequences");
  synth->add_option("--T", sy_T, "sequence length");
  synth->add_option("--seed", sy_seed, "RNG seed");
  synth->add_option("--out", sy_out, "corpus file to write")->required();
  synth->add_option("--domain", sy_domain, "domain label override (A|B|F)");

  auto add_config_opts = [](CLI::App* sub, std::string& path,
                            std::vector<std::string>& sets) {
    sub->add_option("--config", path, "JSON config file");
    sub->add_option("--set", sets, "config override key=value (repeatable)");
    sub->footer(fg::run_config_help());
  };

  // pretrain
  auto* pretrain = app.add_subcommand(
      "pretrain", "MLE + classifier + adversarial pre-training for one domain");
  std::string pt_config, pt_domain;
  std::vector<std::string> pt_sets;
  add_config_opts(pretrain, pt_config, pt_sets);
  pretrain->add_option("--domain", pt_domain, "A | B | F")->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Three-domain fusion training");
  std::string fu_config, fu_a, fu_b, fu_f;
  std::vector<std::string> fu_sets;
  add_config_opts(fuse, fu_config, fu_sets);
  fuse->add_option("--ckpt-a", fu_a, "pre-trained A bundle checkpoint")->required();
  fuse->add_option("--ckpt-b", fu_b, "pre-trained B bundle checkpoint")->required();
  fuse->add_option("--ckpt-f", fu_f, "pre-trained F bundle checkpoint")->required();

  // generate
  auto* generate = app.add_subcommand("generate", "Sample sequences from a checkpoint");
  std::string ge_ckpt, ge_out, ge_bundle;
  int ge_n = 500;
  std::uint64_t ge_seed = 1;
  generate->add_option("--ckpt", ge_ckpt, "bundle or trio checkpoint")->required();
  generate->add_option("--n", ge_n, "number of sequences");
  generate->add_option("--seed", ge_seed, "RNG seed");
  generate->add_option("--out", ge_out, "corpus file to write")->required();
  generate->add_option("--bundle", ge_bundle, "which trio bundle to sample (A|B|F)");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Run one baseline end to end");
  std::string bl_config, bl_kind, bl_out, bl_a, bl_b;
  std::vector<std::string> bl_sets;
  int bl_n = 500;
  add_config_opts(baseline, bl_config, bl_sets);
  baseline->add_option("--kind", bl_kind, "rm | mc | mle | gan | rl")->required();
  baseline->add_option("--n", bl_n, "number of sequences to emit");
  baseline->add_option("--out", bl_out, "corpus file to write")->required();
  baseline->add_option("--ckpt-a", bl_a, "pre-trained A checkpoint (rl only)");
  baseline->add_option("--ckpt-b", bl_b, "pre-trained B checkpoint (rl only)");

  // eval
  auto* eval = app.add_subcommand("eval", "Distribution-distance report");
  std::string ev_gen, ev_a, ev_b, ev_out = "eval";
  double ev_ref = 1e4;
  eval->add_option("--gen", ev_gen, "generated corpus file")->required();
  eval->add_option("--a", ev_a, "domain A corpus file")->required();
  eval->add_option("--b", ev_b, "domain B corpus file")->required();
  eval->add_option("--out", ev_out, "output directory");
  eval->add_option("--ref-mass", ev_ref, "common histogram mass for the distances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message or the help text
    return code == 0 ? 0 : 1;     // usage errors exit 1
  }

  try {
    if (synth->parsed()) {
      run_synth(sy_grammar, sy_n, sy_T, sy_seed, sy_out, sy_domain);
    } else if (pretrain->parsed()) {
      run_pretrain(resolve_config(pt_config, pt_sets), pt_domain);
    } else if (fuse->parsed()) {
      run_fuse(resolve_config(fu_config, fu_sets), fu_a, fu_b, fu_f);
    } else if (generate->parsed()) {
      run_generate(ge_ckpt, ge_n, ge_seed, ge_out, ge_bundle);
    } else if (baseline->parsed()) {
      run_baseline(resolve_config(bl_config, bl_sets), bl_kind, bl_n, bl_out, bl_a, bl_b);
    } else if (eval->parsed()) {
      run_eval(ev_gen, ev_a, ev_b, ev_out, ev_ref);
    }
  } catch (const fg::NumericError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return 2;
  } catch (const fg::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
