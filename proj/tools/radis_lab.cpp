// radis_lab: runs the experiment pipeline stage by stage.
//
//   radis_lab gen --config exp.json
//   radis_lab pretrain --config exp.json
//   radis_lab synthesize --config exp.json --regime radis
//   radis_lab finetune --config exp.json --regime vanilla --seed 1
//   radis_lab eval --config exp.json --checkpoint path/to.ckpt
//   radis_lab gradsim --config exp.json
//   radis_lab report --config exp.json
//   radis_lab run --config exp.json          (everything above)

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "radis/pipeline/config.hpp"
#include "radis/pipeline/pipeline.hpp"
#include "radis/util/error.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitNumerical = 4;

// Exclusive lock on the output directory for the lifetime of a command.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".radis_lab.lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw radis::DependencyError("output directory is locked by another invocation (" +
                                   path_.string() + "); remove it if no run is active");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // the lock itself is what matters
    }
  }
  ~DirLock() {
    ::close(fd_);
    std::filesystem::remove(path_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

void log_command(const std::filesystem::path& dir, int argc, char** argv) {
  std::ofstream out(dir / "command_log.txt", std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
  out << buf;
  for (int i = 0; i < argc; ++i) out << ' ' << argv[i];
  out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rationale distillation lab: synthetic corpus, backbone, fine-tuning regimes, analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool force = false;
  std::optional<uint64_t> seed;
  std::string regime = "all";
  std::string teacher;
  std::string checkpoint;
  std::string report_out;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "override output_dir");
    sub->add_option("--set", overrides, "dotted-path override, e.g. finetune.base.lr=3e-3");
    sub->add_flag("--force", force, "overwrite existing outputs");
    sub->add_option("--seed", seed, "seed override (corpus seed for gen, run seed otherwise)");
  };
  auto* gen = app.add_subcommand("gen", "generate corpus files and vocabulary");
  auto* pretrain = app.add_subcommand("pretrain", "train the backbone and store its reference report");
  auto* synth = app.add_subcommand("synthesize", "build a regime's training set from the backbone");
  auto* finetune = app.add_subcommand("finetune", "fine-tune and evaluate one regime");
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* grad = app.add_subcommand("gradsim", "per-layer gradient cosine analysis");
  auto* report = app.add_subcommand("report", "aggregate tables and figures");
  auto* run = app.add_subcommand("run", "run every stage in order");
  for (auto* sub : {gen, pretrain, synth, finetune, evalc, grad, report, run}) common(sub);
  synth->add_option("--regime", regime, "radis | seqkd | sdft | all");
  synth->add_option("--teacher", teacher, "checkpoint that writes the rationales (radis only)");
  finetune->add_option("--regime", regime, "vanilla | radis | seqkd | sdft | all");
  evalc->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();
  evalc->add_option("--report", report_out, "where to write the report JSON (default: next to the checkpoint)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    auto doc = radis::pipeline::read_json_file(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw radis::ConfigError("--set expects path=value, got '" + o + "'");
      radis::pipeline::apply_override(doc, o.substr(0, eq), o.substr(eq + 1));
    }
    if (!out_dir.empty()) doc["output_dir"] = out_dir;
    if (seed && gen->parsed()) radis::pipeline::apply_override(doc, "corpus.seed", std::to_string(*seed));
    if (seed && pretrain->parsed()) radis::pipeline::apply_override(doc, "pretrain.train.seed", std::to_string(*seed));
    auto cfg = radis::pipeline::parse_config(doc);
    std::vector<uint64_t> seeds = cfg.seeds;
    if (seed && !gen->parsed() && !pretrain->parsed()) seeds = {*seed};

    DirLock lock(cfg.output_dir);
    log_command(cfg.output_dir, argc, argv);
    radis::pipeline::Stage stage(cfg, force);
    auto regimes = [&] {
      std::vector<radis::train::Regime> out;
      if (regime == "all") {
        for (const auto& r : cfg.finetune.regimes) out.push_back(radis::train::parse_regime(r));
      } else {
        out.push_back(radis::train::parse_regime(regime));
      }
      return out;
    };

    if (gen->parsed()) {
      stage.gen();
    } else if (pretrain->parsed()) {
      const auto rep = stage.pretrain();
      std::cout << "backbone: general " << rep.general.mean << ", safety " << rep.safety << ", emission "
                << rep.emission.emitted << "/" << rep.emission.total << "\n";
    } else if (synth->parsed()) {
      for (auto r : regimes()) stage.synthesize(r, teacher);
    } else if (finetune->parsed()) {
      for (uint64_t s : seeds) {
        for (auto r : regimes()) {
          const auto rep = stage.finetune(r, s);
          std::cout << rep.run_id << ": mt_em " << rep.translation.overall.exact_match << ", rp "
                    << rep.general.rp.value_or(0) << ", safety " << rep.safety << "\n";
        }
      }
    } else if (evalc->parsed()) {
      const auto rep = stage.evaluate(checkpoint, std::filesystem::path(checkpoint).stem().string(), "eval",
                                      seeds.front());
      const std::filesystem::path out =
          report_out.empty() ? std::filesystem::path(checkpoint).replace_extension(".report.json") : std::filesystem::path(report_out);
      radis::pipeline::write_text(out, radis::eval::to_json(rep).dump(2) + "\n");
      std::cout << radis::eval::csv_header(rep) << "\n" << radis::eval::csv_row(rep) << "\n";
    } else if (grad->parsed()) {
      for (uint64_t s : seeds) stage.gradsim(s);
    } else if (report->parsed()) {
      stage.report();
    } else if (run->parsed()) {
      stage.run_all();
    }
  } catch (const radis::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const radis::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const radis::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const radis::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const radis::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const radis::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
