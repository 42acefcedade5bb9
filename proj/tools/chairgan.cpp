// chairgan: command-line front end for the chair design pipeline.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chairgan/candidates/catalog.hpp"
#include "chairgan/candidates/generate.hpp"
#include "chairgan/candidates/navigation.hpp"
#include "chairgan/dataset/ingest.hpp"
#include "chairgan/dataset/manifest.hpp"
#include "chairgan/dataset/pairs.hpp"
#include "chairgan/dataset/synth_corpus.hpp"
#include "chairgan/gateway/http.hpp"
#include "chairgan/gateway/pipeline.hpp"
#include "chairgan/gateway/service.hpp"
#include "chairgan/superres/evaluate.hpp"
#include "chairgan/superres/trainer.hpp"
#include "chairgan/synthesis/trainer.hpp"

namespace fs = std::filesystem;
using namespace chairgan;

namespace {


/// Relative paths resolve against $CHAIRGAN_DATA_ROOT when it is set.
fs::path data_path(const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("CHAIRGAN_DATA_ROOT"); root && *root) return fs::path(root) / path;
  return path;
}

nlohmann::json read_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_text_file(data_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string id; std::getline(ss, id, ',');)
    if (!id.empty()) out.push_back(id);
  return out;
}

dataset::DatasetManifest corpus_manifest(const std::string& corpus, int resolution, std::uint64_t seed) {
  const fs::path p = data_path(corpus);
  if (fs::is_directory(p)) return dataset::ingest_corpus(p, resolution, seed);
  return dataset::load_manifest(p);
}

std::atomic<gateway::HttpServer*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chairgan: chair design synthesis, super-resolution and curation"};
  app.require_subcommand(1);
  // Commands without their own JSON --config read option values from a TOML
  // file with one [command] section each; flags given on the command line win.
  app.set_config("--config", "", "TOML file of option values, one [command] section per command");
  app.fallthrough();

  // synth-corpus
  std::size_t sc_count = 512;
  int sc_res = 32;
  std::uint64_t sc_seed = 1;
  std::string sc_out;
  auto* sc = app.add_subcommand("synth-corpus", "Render a procedural chair corpus and write its manifest");
  sc->add_option("--count", sc_count, "Number of images")->capture_default_str();
  sc->add_option("--resolution", sc_res, "Image side in pixels")->capture_default_str();
  sc->add_option("--seed", sc_seed)->capture_default_str();
  sc->add_option("--out", sc_out, "Output directory")->required();

  // ingest
  std::string in_corpus, in_out;
  int in_res = 64;
  std::uint64_t in_seed = 7;
  auto* ing = app.add_subcommand("ingest", "Scan an image directory and write a dataset manifest");
  ing->add_option("--corpus", in_corpus, "Image directory")->required();
  ing->add_option("--resolution", in_res)->capture_default_str();
  ing->add_option("--seed", in_seed, "Split seed")->capture_default_str();
  ing->add_option("--out", in_out, "Manifest path")->required();

  // make-pairs
  std::string mp_manifest, mp_out;
  int mp_res = 256, mp_factor = 4;
  auto* mp = app.add_subcommand("make-pairs", "Build low/high resolution pairs from a manifest");
  mp->add_option("--manifest", mp_manifest)->required();
  mp->add_option("--resolution", mp_res, "High-resolution side")->capture_default_str();
  mp->add_option("--factor", mp_factor)->capture_default_str();
  mp->add_option("--out", mp_out, "Output directory")->required();

  // train-gan
  std::string tg_config, tg_corpus, tg_out, tg_resume;
  std::optional<std::uint64_t> tg_epochs, tg_max_steps, tg_seed;
  std::optional<int> tg_batch, tg_res, tg_base;
  std::optional<double> tg_lr, tg_beta1;
  auto* tg = app.add_subcommand("train-gan", "Train the image synthesis networks");
  tg->add_option("--config", tg_config, "JSON synthesis config; flags override it");
  tg->add_option("--corpus", tg_corpus, "Manifest file or image directory")->required();
  tg->add_option("--epochs", tg_epochs);
  tg->add_option("--max-steps", tg_max_steps);
  tg->add_option("--batch-size", tg_batch);
  tg->add_option("--lr", tg_lr, "Adam learning rate for both networks");
  tg->add_option("--beta1", tg_beta1, "Adam beta1 for both networks");
  tg->add_option("--seed", tg_seed);
  tg->add_option("--resolution", tg_res, "Output side, 4 * 2^stages");
  tg->add_option("--base-channels", tg_base);
  tg->add_option("--resume", tg_resume, "Checkpoint to continue from");
  tg->add_option("--out", tg_out, "Checkpoint directory")->required();

  // finetune-sr
  std::string fs_config, fs_pairs, fs_out, fs_warm, fs_resume, fs_weights;
  std::optional<std::uint64_t> fs_warmup, fs_adv, fs_seed;
  std::optional<double> fs_weight;
  auto* fsr = app.add_subcommand("finetune-sr", "Fine-tune the x4 super-resolution network");
  fsr->add_option("--config", fs_config, "JSON superres config; flags override it");
  fsr->add_option("--pairs", fs_pairs, "pairs.json from make-pairs")->required();
  fsr->add_option("--warmup-steps", fs_warmup, "Content-only steps");
  fsr->add_option("--adv-steps", fs_adv, "Adversarial steps");
  fsr->add_option("--adv-weight", fs_weight);
  fsr->add_option("--seed", fs_seed);
  fsr->add_option("--warm-start", fs_warm, "Superres checkpoint to initialise the generator from");
  fsr->add_option("--resume", fs_resume);
  fsr->add_option("--vgg19-weights", fs_weights, "Use VGG19 block 5 conv 4 features from this weights container");
  fsr->add_option("--out", fs_out, "Checkpoint directory")->required();

  // eval-sr
  std::string ev_ckpt, ev_pairs, ev_split = "holdout";
  auto* ev = app.add_subcommand("eval-sr", "PSNR of a superres checkpoint against nearest and bicubic baselines");
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--pairs", ev_pairs)->required();
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"holdout", "train"}))->capture_default_str();

  // generate
  std::string gn_gen, gn_sr, gn_out, gn_created;
  std::size_t gn_count = 64, gn_batch = 16;
  std::uint64_t gn_seed = 9;
  auto* gn = app.add_subcommand("generate", "Generate a candidate catalog");
  gn->add_option("--count", gn_count)->capture_default_str();
  gn->add_option("--seed", gn_seed)->capture_default_str();
  gn->add_option("--batch", gn_batch)->capture_default_str();
  gn->add_option("--gen-ckpt", gn_gen)->required();
  gn->add_option("--sr-ckpt", gn_sr)->required();
  gn->add_option("--created-at", gn_created, "Timestamp stored in records (default: now, UTC)");
  gn->add_option("--out", gn_out, "Catalog directory")->required();

  // grid
  std::string gr_catalog, gr_ids, gr_out;
  int gr_columns = 3;
  auto* gr = app.add_subcommand("grid", "Tile candidate images into one sheet");
  gr->add_option("--catalog", gr_catalog)->required();
  gr->add_option("--ids", gr_ids, "Comma-separated candidate ids")->required();
  gr->add_option("--columns", gr_columns)->capture_default_str();
  gr->add_option("--out", gr_out, "PNG path")->required();

  // interp
  std::string ip_catalog, ip_from, ip_to, ip_mode = "linear", ip_gen, ip_sr, ip_out;
  int ip_steps = 5;
  auto* ip = app.add_subcommand("interp", "Render a latent interpolation between two candidates");
  ip->add_option("--catalog", ip_catalog)->required();
  ip->add_option("--from-id", ip_from)->required();
  ip->add_option("--to-id", ip_to)->required();
  ip->add_option("--steps", ip_steps)->capture_default_str();
  ip->add_option("--mode", ip_mode)->check(CLI::IsMember({"linear", "spherical"}))->capture_default_str();
  ip->add_option("--gen-ckpt", ip_gen)->required();
  ip->add_option("--sr-ckpt", ip_sr)->required();
  ip->add_option("--out", ip_out, "Frame directory")->required();

  // serve
  std::string sv_catalog, sv_gen, sv_sr, sv_sel = "selections", sv_frames = "frames", sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* sv = app.add_subcommand("serve", "Serve the studio HTTP API");
  sv->add_option("--catalog", sv_catalog)->required();
  sv->add_option("--gen-ckpt", sv_gen)->required();
  sv->add_option("--sr-ckpt", sv_sr)->required();
  sv->add_option("--selections", sv_sel)->capture_default_str();
  sv->add_option("--frames", sv_frames)->capture_default_str();
  sv->add_option("--host", sv_host)->capture_default_str();
  sv->add_option("--port", sv_port)->capture_default_str();

  // pipeline
  std::string pl_config, pl_work;
  auto* pl = app.add_subcommand("pipeline", "Run ingest, train-gan, make-pairs, finetune-sr and generate");
  pl->add_option("--config", pl_config, "JSON pipeline config");
  pl->add_option("--work-dir", pl_work, "Overrides work_dir from the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sc) {
      const auto m = dataset::synth_chair_corpus(sc_count, sc_res, sc_seed, data_path(sc_out));
      dataset::save_manifest(data_path(sc_out) / "manifest.json", m);
      std::cout << m.records.size() << " images, " << m.train.size() << " train / " << m.holdout.size() << " holdout\n";
    } else if (*ing) {
      const auto m = dataset::ingest_corpus(data_path(in_corpus), in_res, in_seed);
      dataset::save_manifest(data_path(in_out), m);
      std::cout << m.records.size() << " images (" << m.skipped << " skipped), " << m.train.size()
                << " train / " << m.holdout.size() << " holdout\n";
    } else if (*mp) {
      const auto m = dataset::load_manifest(data_path(mp_manifest));
      const auto set = dataset::make_sr_pairs(m, mp_res, mp_factor);
      dataset::save_pairs(data_path(mp_out), set, m, mp_factor);
      std::cout << set.pairs.size() << " pairs (" << set.skipped << " skipped)\n";
    } else if (*tg) {
      auto cfg = synthesis::SynthesisConfig::desk();
      if (!tg_config.empty()) cfg = read_config(tg_config).get<synthesis::SynthesisConfig>();
      if (tg_res) {
        const auto base = tg_base.value_or(cfg.generator.base_channels);
        auto d = synthesis::SynthesisConfig::desk(*tg_res, base);
        cfg.generator.stages = d.generator.stages;
        cfg.discriminator.stages = d.discriminator.stages;
      }
      if (tg_base) cfg.generator.base_channels = *tg_base;
      if (tg_batch) cfg.batch_size = *tg_batch;
      if (tg_lr) cfg.gen_adam.lr = cfg.disc_adam.lr = *tg_lr;
      if (tg_beta1) cfg.gen_adam.beta1 = cfg.disc_adam.beta1 = *tg_beta1;
      if (tg_seed) cfg.seed = *tg_seed;
      synthesis::TrainOptions opts;
      opts.epochs = tg_epochs.value_or(1);
      opts.max_steps = tg_max_steps;
      if (!tg_resume.empty()) opts.resume_from = data_path(tg_resume);
      opts.verbose = true;
      const auto m = corpus_manifest(tg_corpus, cfg.resolution(), cfg.seed);
      const auto r = synthesis::train_synthesis<float>(cfg, m, data_path(tg_out), opts);
      std::cout << "steps " << r.state.step << (r.state.diverged ? " (diverged)" : "") << "\ncheckpoint "
                << r.checkpoint.path.string() << "\nsha256 " << r.checkpoint.hash << "\n";
      return r.state.diverged ? 3 : 0;
    } else if (*fsr) {
      auto cfg = superres::SRConfig::desk();
      if (!fs_config.empty()) cfg = read_config(fs_config).get<superres::SRConfig>();
      if (!fs_weights.empty()) {
        cfg.extractor = superres::ExtractorConfig::vgg19(data_path(fs_weights).string());
        cfg.content_layer = {5, 4, false};
      }
      if (fs_warmup) cfg.content_only_steps = *fs_warmup;
      if (fs_adv) cfg.adversarial_steps = *fs_adv;
      if (fs_weight) cfg.adversarial_weight = *fs_weight;
      if (fs_seed) cfg.seed = *fs_seed;
      superres::FinetuneOptions opts;
      if (!fs_warm.empty()) opts.warm_start = data_path(fs_warm);
      if (!fs_resume.empty()) opts.resume_from = data_path(fs_resume);
      opts.verbose = true;
      const auto pairs = dataset::load_pairs(data_path(fs_pairs));
      const auto r = superres::finetune_sr<float>(cfg, pairs.train, data_path(fs_out), opts);
      std::cout << "steps " << r.state.step << (r.state.diverged ? " (diverged)" : "") << "\ncheckpoint "
                << r.checkpoint.path.string() << "\nsha256 " << r.checkpoint.hash << "\n";
      return r.state.diverged ? 3 : 0;
    } else if (*ev) {
      auto gen = superres::load_sr_generator<float>(data_path(ev_ckpt));
      const auto pairs = dataset::load_pairs(data_path(ev_pairs));
      const auto report = superres::evaluate_sr(gen, ev_split == "holdout" ? pairs.holdout : pairs.train);
      std::cout << superres::to_json(report).dump(2) << "\n";
    } else if (*gn) {
      auto models = candidates::load_models(data_path(gn_gen), data_path(gn_sr));
      candidates::GenerateOptions opts;
      opts.count = gn_count;
      opts.seed = gn_seed;
      opts.batch_size = gn_batch;
      opts.created_at = gn_created.empty() ? gateway::utc_timestamp() : gn_created;
      const auto cat = candidates::generate_candidates(models, data_path(gn_out), opts);
      std::cout << cat.size() << " candidates in " << cat.dir().string() << "\n";
    } else if (*gr) {
      const auto cat = candidates::load_catalog(data_path(gr_catalog));
      write_png(data_path(gr_out), candidates::export_grid(cat, split_ids(gr_ids), gr_columns));
    } else if (*ip) {
      const auto cat = candidates::load_catalog(data_path(ip_catalog));
      auto models = candidates::load_models(data_path(ip_gen), data_path(ip_sr));
      const auto path = candidates::interpolate_latents(cat.at(ip_from).latent, cat.at(ip_to).latent, ip_steps,
                                                        candidates::parse_interp_mode(ip_mode));
      const auto frames = candidates::render(models, path);
      fs::create_directories(data_path(ip_out));
      for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
        write_png(data_path(ip_out) / name, frames[i].sr);
      }
      std::cout << frames.size() << " frames in " << data_path(ip_out).string() << "\n";
    } else if (*sv) {
      gateway::ServiceConfig cfg{data_path(sv_catalog), data_path(sv_gen), data_path(sv_sr), data_path(sv_sel),
                                 data_path(sv_frames)};
      gateway::Service service(cfg);
      gateway::HttpServer server(service);
      const int port = server.bind(sv_host, sv_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << service.catalog_size() << " candidates on http://" << sv_host << ":" << port << "\n"
                << std::flush;
      server.listen();
      g_server = nullptr;
    } else if (*pl) {
      auto cfg = read_config(pl_config).get<gateway::PipelineConfig>();
      if (!pl_work.empty()) cfg.work_dir = pl_work;
      cfg.work_dir = data_path(cfg.work_dir.string());
      const auto summary = gateway::run_pipeline(cfg, [](const gateway::StageSummary& s) {
        std::cerr << "stage " << s.name << (s.resumed ? " (up to date)" : " done") << "\n";
      });
      std::cout << gateway::to_json(summary).dump(2) << "\n";
    }
  } catch (const PipelineError& e) {
    std::cerr << "error [" << e.cause_code() << "] " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
