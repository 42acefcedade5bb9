#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/candidates/generate.hpp"
#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/dataset/ingest.hpp"
#include "chairgan/dataset/manifest.hpp"
#include "chairgan/dataset/pairs.hpp"
#include "chairgan/dataset/synth_corpus.hpp"
#include "chairgan/superres/trainer.hpp"
#include "chairgan/synthesis/config.hpp"
#include "chairgan/synthesis/trainer.hpp"

namespace chairgan::gateway {

struct CorpusSource {
  /// "synthetic" renders synth_chair_corpus(count, hr_resolution, seed);
  /// "directory" ingests `directory`.
  std::string kind = "synthetic";
  std::string directory;
  std::size_t count = 128;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  std::filesystem::path work_dir = "pipeline";
  CorpusSource corpus;
  int hr_resolution = 256;
  int synthesis_resolution = 64;
  int sr_factor = 4;
  std::uint64_t split_seed = 7;
  synthesis::SynthesisConfig synthesis = synthesis::SynthesisConfig::desk(64);
  std::uint64_t gan_epochs = 1;
  std::optional<std::uint64_t> gan_max_steps;
  superres::SRConfig sr = superres::SRConfig::desk();
  candidates::GenerateOptions generate;

  void validate() const {
    if (sr_factor != superres::kScaleFactor) throw ConfigError("pipeline: sr factor must be 4");
    if (synthesis_resolution * sr_factor != hr_resolution)
      throw ConfigError("pipeline: synthesis resolution " + std::to_string(synthesis_resolution) + " x " +
                        std::to_string(sr_factor) + " != hr resolution " + std::to_string(hr_resolution));
    if (synthesis.resolution() != synthesis_resolution)
      throw ConfigError("pipeline: generator produces " + std::to_string(synthesis.resolution()) + "px, expected " +
                        std::to_string(synthesis_resolution));
    if (corpus.kind != "synthetic" && corpus.kind != "directory") throw ConfigError("pipeline: unknown corpus kind " + corpus.kind);
    if (corpus.kind == "directory" && corpus.directory.empty()) throw ConfigError("pipeline: corpus directory not set");
    if (generate.count < 1) throw ConfigError("pipeline: candidate count must be >= 1");
    synthesis.validate();
    sr.validate();
  }
};

inline void to_json(nlohmann::json& j, const CorpusSource& c) {
  j = {{"kind", c.kind}, {"directory", c.directory}, {"count", c.count}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, CorpusSource& c) {
  c.kind = j.value("kind", c.kind);
  c.directory = j.value("directory", c.directory);
  c.count = j.value("count", c.count);
  c.seed = j.value("seed", c.seed);
}
inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"work_dir", c.work_dir.string()},
       {"corpus", c.corpus},
       {"hr_resolution", c.hr_resolution},
       {"synthesis_resolution", c.synthesis_resolution},
       {"sr_factor", c.sr_factor},
       {"split_seed", c.split_seed},
       {"synthesis", c.synthesis},
       {"gan_epochs", c.gan_epochs},
       {"gan_max_steps", c.gan_max_steps ? nlohmann::json(*c.gan_max_steps) : nlohmann::json(nullptr)},
       {"sr", c.sr},
       {"generate", c.generate}};
}
inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c.work_dir = j.value("work_dir", c.work_dir.string());
  c.corpus = j.value("corpus", c.corpus);
  c.hr_resolution = j.value("hr_resolution", c.hr_resolution);
  c.synthesis_resolution = j.value("synthesis_resolution", c.synthesis_resolution);
  c.sr_factor = j.value("sr_factor", c.sr_factor);
  c.split_seed = j.value("split_seed", c.split_seed);
  if (j.contains("synthesis")) c.synthesis = j.at("synthesis").get<synthesis::SynthesisConfig>();
  c.gan_epochs = j.value("gan_epochs", c.gan_epochs);
  if (j.contains("gan_max_steps"))
    c.gan_max_steps = j.at("gan_max_steps").is_null() ? std::nullopt
                                                      : std::optional<std::uint64_t>(j.at("gan_max_steps").get<std::uint64_t>());
  if (j.contains("sr")) c.sr = j.at("sr").get<superres::SRConfig>();
  c.generate = j.value("generate", c.generate);
}

struct Artifact {
  std::string path;  // relative to the work directory
  std::string sha256;
  friend bool operator==(const Artifact&, const Artifact&) = default;
};

struct StageSummary {
  std::string name;
  bool resumed = false;
  std::vector<Artifact> artifacts;
};

struct PipelineSummary {
  std::filesystem::path work_dir;
  std::vector<StageSummary> stages;

  const StageSummary& stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return s;
    throw NotFound("no stage " + name);
  }
};

inline nlohmann::json to_json(const PipelineSummary& s) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : s.stages) {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : st.artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}});
    stages.push_back({{"stage", st.name}, {"resumed", st.resumed}, {"artifacts", arts}});
  }
  return {{"work_dir", s.work_dir.string()}, {"stages", stages}};
}

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "train-gan", "make-pairs", "finetune-sr", "generate"};
  return names;
}

namespace detail {

namespace fs = std::filesystem;

/// A stage is skipped when its record exists, was produced from the same
/// inputs, and every listed artifact still has its recorded hash.
inline std::optional<std::vector<Artifact>> completed(const fs::path& work, const std::string& stage,
                                                      const std::string& fingerprint) {
  const auto rec = work / "stages" / (stage + ".json");
  if (!fs::exists(rec)) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(rec));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (j.value("fingerprint", "") != fingerprint) return std::nullopt;
  std::vector<Artifact> arts;
  for (const auto& a : j.at("artifacts")) {
    Artifact art{a.at("path").get<std::string>(), a.at("sha256").get<std::string>()};
    if (!fs::is_regular_file(work / art.path) || file_sha256(work / art.path) != art.sha256) return std::nullopt;
    arts.push_back(std::move(art));
  }
  return arts;
}

inline std::vector<Artifact> record(const fs::path& work, const std::string& stage, const std::string& fingerprint,
                                    const std::vector<std::string>& rel_paths) {
  std::vector<Artifact> arts;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : rel_paths) {
    arts.push_back({p, file_sha256(work / p)});
    list.push_back({{"path", p}, {"sha256", arts.back().sha256}});
  }
  fs::create_directories(work / "stages");
  write_text_file(work / "stages" / (stage + ".json"),
                  nlohmann::json{{"stage", stage}, {"fingerprint", fingerprint}, {"artifacts", list}}.dump(2) + "\n");
  return arts;
}

inline std::string fingerprint(const nlohmann::json& inputs, const std::vector<Artifact>& upstream) {
  nlohmann::json j = {{"inputs", inputs}, {"upstream", nlohmann::json::array()}};
  for (const auto& a : upstream) j["upstream"].push_back(a.sha256);
  return sha256_hex(j.dump());
}

}  // namespace detail

using StageObserver = std::function<void(const StageSummary&)>;

/// ingest -> train-gan -> make-pairs -> finetune-sr -> generate. Each stage
/// writes its artifacts under work_dir and a record in work_dir/stages; a
/// rerun skips stages whose inputs and outputs are unchanged. A failing
/// stage raises PipelineError naming it and leaves earlier artifacts intact.
inline PipelineSummary run_pipeline(const PipelineConfig& cfg, const StageObserver& observe = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  const fs::path work = cfg.work_dir;
  std::error_code ec;
  fs::create_directories(work, ec);
  if (ec) throw IoError("cannot create " + work.string());

  PipelineSummary summary{work, {}};
  std::vector<Artifact> upstream;
  auto run_stage = [&](const std::string& name, const nlohmann::json& inputs, const std::function<std::vector<std::string>()>& body) {
    const std::string fp = detail::fingerprint(inputs, upstream);
    StageSummary st{name, false, {}};
    if (auto done = detail::completed(work, name, fp)) {
      st.resumed = true;
      st.artifacts = std::move(*done);
    } else {
      try {
        st.artifacts = detail::record(work, name, fp, body());
      } catch (const Error& e) {
        throw PipelineError(name, e.what(), e.code());
      } catch (const std::exception& e) {
        throw PipelineError(name, e.what(), "error");
      }
    }
    upstream = st.artifacts;
    if (observe) observe(st);
    summary.stages.push_back(std::move(st));
  };

  run_stage("ingest", {{"corpus", cfg.corpus}, {"hr_resolution", cfg.hr_resolution}, {"split_seed", cfg.split_seed}}, [&] {
    dataset::DatasetManifest m;
    if (cfg.corpus.kind == "synthetic") {
      fs::remove_all(work / "corpus");
      dataset::synth_chair_corpus(cfg.corpus.count, cfg.hr_resolution, cfg.corpus.seed, work / "corpus");
      m = dataset::ingest_corpus(work / "corpus", cfg.hr_resolution, cfg.split_seed);
    } else {
      m = dataset::ingest_corpus(cfg.corpus.directory, cfg.hr_resolution, cfg.split_seed);
    }
    fs::create_directories(work / "dataset");
    dataset::save_manifest(work / "dataset" / "manifest.json", m);
    return std::vector<std::string>{"dataset/manifest.json"};
  });

  run_stage("train-gan",
            {{"synthesis", cfg.synthesis},
             {"epochs", cfg.gan_epochs},
             {"max_steps", cfg.gan_max_steps ? nlohmann::json(*cfg.gan_max_steps) : nlohmann::json(nullptr)}},
            [&] {
              const auto m = dataset::load_manifest(work / "dataset" / "manifest.json");
              fs::remove_all(work / "gan");
              synthesis::TrainOptions opts;
              opts.epochs = cfg.gan_epochs;
              opts.max_steps = cfg.gan_max_steps;
              const auto r = synthesis::train_synthesis<float>(cfg.synthesis, m, work / "gan", opts);
              if (r.state.diverged) throw TrainingDiverged("synthesis training diverged at step " + std::to_string(r.state.step));
              return std::vector<std::string>{"gan/final.ckpt", "gan/loss_history.csv"};
            });
  const auto gan_artifacts = upstream;

  run_stage("make-pairs", {{"hr_resolution", cfg.hr_resolution}, {"factor", cfg.sr_factor}, {"manifest", summary.stages[0].artifacts.front().sha256}}, [&] {
    const auto m = dataset::load_manifest(work / "dataset" / "manifest.json");
    fs::remove_all(work / "pairs");
    dataset::save_pairs(work / "pairs", dataset::make_sr_pairs(m, cfg.hr_resolution, cfg.sr_factor), m, cfg.sr_factor);
    return std::vector<std::string>{"pairs/pairs.json"};
  });

  run_stage("finetune-sr", {{"sr", cfg.sr}}, [&] {
    const auto pairs = dataset::load_pairs(work / "pairs" / "pairs.json");
    fs::remove_all(work / "sr");
    const auto r = superres::finetune_sr<float>(cfg.sr, pairs.train, work / "sr");
    if (r.state.diverged) throw TrainingDiverged("sr fine-tuning diverged at step " + std::to_string(r.state.step));
    return std::vector<std::string>{"sr/sr_final.ckpt", "sr/sr_loss_history.csv"};
  });

  upstream.insert(upstream.end(), gan_artifacts.begin(), gan_artifacts.end());
  run_stage("generate", {{"generate", cfg.generate}}, [&] {
    fs::remove_all(work / "catalog");
    auto models = candidates::load_models(work / "gan" / "final.ckpt", work / "sr" / "sr_final.ckpt");
    candidates::generate_candidates(models, work / "catalog", cfg.generate);
    return std::vector<std::string>{"catalog/catalog.jsonl", "catalog/catalog.json"};
  });
  return summary;
}

}  // namespace chairgan::gateway
