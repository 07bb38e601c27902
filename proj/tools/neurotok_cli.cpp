// Batch command-line surface for the toolkit: synthetic corpus generation,
// preprocessing, tokenizer training, masked pre-training, and analysis
// reports. Every subcommand takes an optional JSON config plus --seed and
// emits machine-readable outputs only.

#include "neurotok/checkpoint.hpp"
#include "neurotok/har_pretrain.hpp"
#include "neurotok/importance.hpp"
#include "neurotok/metrics.hpp"
#include "neurotok/preprocess.hpp"
#include "neurotok/signal_io.hpp"
#include "neurotok/synth.hpp"
#include "neurotok/tokenizer_train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neurotok;

namespace {

struct FullConfig {
  ModelConfig model;
  TrainConfig train;
};

FullConfig load_config(const std::string& path, std::optional<uint64_t> seed_override) {
  FullConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) raise(Err::MalformedConfig, "cannot open config " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      raise(Err::MalformedConfig, std::string("config parse failure: ") + e.what());
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("embed_dim", cfg.model.embed_dim);
    get("encoder_layers", cfg.model.encoder_layers);
    get("heads", cfg.model.heads);
    get("ffn_dim", cfg.model.ffn_dim);
    get("decoder_layers", cfg.model.decoder_layers);
    get("patch_len", cfg.model.patch_len);
    get("rvq_layers", cfg.model.rvq_layers);
    get("codebook_size", cfg.model.codebook_size);
    get("code_dim", cfg.model.code_dim);
    get("mask_ratio", cfg.model.mask_ratio);
    get("seed", cfg.model.seed);
    get("epochs", cfg.train.epochs);
    get("batch_size", cfg.train.batch_size);
    get("lr", cfg.train.lr);
    get("weight_decay", cfg.train.weight_decay);
    get("warmup_epochs", cfg.train.warmup_epochs);
    get("min_lr", cfg.train.min_lr);
    get("adam_beta1", cfg.train.adam_beta1);
    get("adam_beta2", cfg.train.adam_beta2);
    get("adam_eps", cfg.train.adam_eps);
    get("commitment_beta", cfg.train.commitment_beta);
    get("phase_cosine_loss", cfg.train.phase_cosine_loss);
    get("symmetric_loss", cfg.train.symmetric_loss);
    cfg.train.seed = cfg.model.seed;
  }
  if (seed_override) {
    cfg.model.seed = *seed_override;
    cfg.train.seed = *seed_override;
  }
  return cfg;
}

std::vector<std::string> list_segment_files(const std::string& data) {
  std::vector<std::string> files;
  fs::path p(data);
  if (fs::is_directory(p)) {
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.path().extension() == ".bin") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
  } else if (fs::exists(p)) {
    files.push_back(data);
  }
  if (files.empty()) raise(Err::IoFailure, "no segment files under " + data);
  return files;
}

TokenizerCorpus load_corpus(const std::string& data, int patch_len) {
  std::vector<PatchGrid> grids;
  double rate = 0.0;
  for (const std::string& f : list_segment_files(data)) {
    Recording rec = load_recording(f, RecordingFormat::bin);
    rate = rec.sample_rate_hz;
    Segment seg{rec.samples, rec.sample_rate_hz};
    grids.push_back(patchify(seg, patch_len));
  }
  return prepare_corpus(std::move(grids), rate);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::IoFailure, "cannot open " + path + " for writing");
  out << text;
  if (!out) raise(Err::IoFailure, "short write to " + path);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json recon_to_json(const ReconSummary& s) {
  auto triple = [](const ReconTriple& t) {
    return json{{"mse", t.mse}, {"pearson_r", t.pearson_r}, {"snr_db", t.snr_db}};
  };
  return json{{"time", triple(s.time)},
              {"amplitude", triple(s.amplitude)},
              {"phase", triple(s.phase)}};
}

int run_gen_synth(const SynthSpec& spec, const std::string& out_path) {
  SynthResult result = gen_synth(spec);
  save_recording(result.recording, out_path);
  json sidecar;
  sidecar["seed"] = spec.seed;
  sidecar["channels"] = spec.channels;
  sidecar["minutes"] = spec.minutes;
  sidecar["sample_rate_hz"] = spec.sample_rate_hz;
  json inf = json::array();
  for (const auto& [c, a] : result.informative) inf.push_back(json::array({c, a}));
  sidecar["informative"] = inf;
  write_text(out_path + ".sidecar.json", sidecar.dump() + "\n");
  return 0;
}

int run_preprocess(const std::string& in_path, const std::string& out_dir, double band_lo,
                   double band_hi, double notch_hz, double resample_hz, double window_s,
                   double amp_thresh, double trim_s, double norm_scale) {
  Recording rec = load_recording(in_path, RecordingFormat::bin);
  if (trim_s > 0.0) rec = trim_boundaries(rec, trim_s);
  rec = bandpass(rec, band_lo, band_hi);
  rec = notch(rec, notch_hz);
  rec = resample(rec, resample_hz);
  const int windows =
      static_cast<int>(rec.length() / std::lround(window_s * rec.sample_rate_hz));
  std::vector<Segment> kept = segment_and_reject(rec, window_s, amp_thresh);

  fs::create_directories(out_dir);
  json manifest;
  manifest["windows"] = windows;
  manifest["kept"] = kept.size();
  manifest["rejected"] = windows - static_cast<int>(kept.size());
  manifest["sample_rate_hz"] = rec.sample_rate_hz;
  json names = json::array();
  for (size_t i = 0; i < kept.size(); ++i) {
    Segment norm = normalize(kept[i], norm_scale);
    char name[32];
    std::snprintf(name, sizeof(name), "seg_%04zu.bin", i);
    Recording seg_rec;
    seg_rec.sample_rate_hz = norm.sample_rate_hz;
    seg_rec.channel_labels = default_channel_labels(norm.channels());
    seg_rec.samples = norm.data;
    save_recording(seg_rec, (fs::path(out_dir) / name).string());
    names.push_back(name);
  }
  manifest["segments"] = names;
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump() + "\n");
  return 0;
}

std::string tokenizer_history_line(const TokenizerEpochRecord& rec) {
  json j;
  j["epoch"] = rec.epoch;
  j["l_time"] = rec.losses.l_time;
  j["l_freq_amp"] = rec.losses.l_freq_amp;
  j["l_freq_phase"] = rec.losses.l_freq_phase;
  j["l_commit"] = rec.losses.l_commit;
  j["l_total"] = rec.losses.l_total;
  j["lr"] = rec.lr;
  j["unused_time"] = rec.unused_time;
  j["unused_freq"] = rec.unused_freq;
  return j.dump();
}

int run_train_tokenizer(const FullConfig& cfg, const std::string& data, const std::string& out,
                        const std::string& history_path) {
  TokenizerCorpus corpus = load_corpus(data, cfg.model.patch_len);
  TokenizerTrainResult result = train_tokenizer(corpus, cfg.model, cfg.train);
  save_tokenizer_checkpoint(out, result.model, result.time_stack, result.freq_stack);
  std::string lines;
  for (const auto& rec : result.history) lines += tokenizer_history_line(rec) + "\n";
  write_text(history_path, lines);
  return 0;
}

int run_pretrain(const FullConfig& cfg, const std::string& data, const std::string& tok_path,
                 const std::string& out, const std::string& history_path) {
  TokenizerCheckpoint ckpt = load_tokenizer_checkpoint(tok_path);
  TokenizerModel tokenizer = tokenizer_from_checkpoint(ckpt);
  // pre-training reuses the tokenizer's model geometry; schedule, seed and
  // mask ratio come from the active config
  tokenizer.cfg.seed = cfg.model.seed;
  tokenizer.cfg.mask_ratio = cfg.model.mask_ratio;
  TokenizerCorpus corpus = load_corpus(data, tokenizer.cfg.patch_len);
  PretrainResult result = pretrain(corpus, tokenizer, ckpt.time_stack, ckpt.freq_stack, cfg.train);
  save_pretrain_checkpoint(out, result.model);
  std::string lines;
  for (const auto& rec : result.history) {
    json j;
    j["epoch"] = rec.epoch;
    j["l_har"] = rec.l_har;
    j["lr"] = rec.lr;
    j["w"] = rec.w;
    j["ce_time"] = rec.ce_time;
    j["ce_freq"] = rec.ce_freq;
    j["acc_time"] = rec.acc_time;
    j["acc_freq"] = rec.acc_freq;
    lines += j.dump() + "\n";
  }
  write_text(history_path, lines);
  return 0;
}

int run_score(const std::string& in_path, const std::string& out_path, int patch_len) {
  Recording rec = load_recording(in_path, RecordingFormat::bin);
  Segment seg{rec.samples, rec.sample_rate_hz};
  PatchGrid grid = patchify(seg, patch_len);
  ImportanceMap map = score_grid(grid, rec.sample_rate_hz);

  std::string csv =
      "channel,index,raw_neural,raw_clean,raw_complexity,raw_irreg,raw_mobility,"
      "norm_neural,norm_clean,norm_complexity,norm_irreg,norm_mobility,aggregate\n";
  for (int i = 0; i < map.size(); ++i) {
    auto [c, a] = grid.unflatten(i);
    const RawScores& r = map.raw[i];
    csv += std::to_string(c) + "," + std::to_string(a) + "," + fmt(r.neural) + "," +
           fmt(r.clean) + "," + fmt(r.complexity) + "," + fmt(r.irreg) + "," + fmt(r.mobility);
    for (int m = 0; m < 5; ++m) csv += "," + fmt(map.normalized(i, m));
    csv += "," + fmt(map.aggregate[i]) + "\n";
  }
  write_text(out_path, csv);
  return 0;
}

int run_reconstruct(const std::string& data, const std::string& ckpt_path,
                    const std::string& out_path) {
  TokenizerCheckpoint ckpt = load_tokenizer_checkpoint(ckpt_path);
  TokenizerModel model = tokenizer_from_checkpoint(ckpt);
  TokenizerCorpus corpus = load_corpus(data, model.cfg.patch_len);
  ReconSummary summary = evaluate_reconstruction(model, ckpt.time_stack, ckpt.freq_stack, corpus);
  write_text(out_path, recon_to_json(summary).dump() + "\n");
  return 0;
}

int run_analyze_codebook(const std::string& data, const std::string& ckpt_path,
                         const std::string& out_path) {
  TokenizerCheckpoint ckpt = load_tokenizer_checkpoint(ckpt_path);
  TokenizerModel model = tokenizer_from_checkpoint(ckpt);
  TokenizerCorpus corpus = load_corpus(data, model.cfg.patch_len);

  const int depth = model.cfg.rvq_layers;
  const int k_codes = model.cfg.codebook_size;
  std::vector<std::vector<int64_t>> counts_t(depth, std::vector<int64_t>(k_codes, 0));
  std::vector<std::vector<int64_t>> counts_f(depth, std::vector<int64_t>(k_codes, 0));
  for (const PatchGrid& grid : corpus.grids) {
    TokenGrid tokens = tokenize_grid(model, ckpt.time_stack, ckpt.freq_stack, grid);
    for (Eigen::Index i = 0; i < tokens.time_codes.rows(); ++i)
      for (int l = 0; l < depth; ++l) {
        counts_t[l][tokens.time_codes(i, l)] += 1;
        counts_f[l][tokens.freq_codes(i, l)] += 1;
      }
  }

  json out;
  for (int domain = 0; domain < 2; ++domain) {
    json layers = json::array();
    for (int l = 0; l < depth; ++l) {
      CodebookStats st = codebook_stats(domain == 0 ? counts_t[l] : counts_f[l], k_codes);
      layers.push_back(json{{"layer", l},
                            {"unused", st.unused_count},
                            {"normalized_entropy", st.normalized_entropy},
                            {"gini", st.gini},
                            {"top10_contribution", st.top10_contribution}});
    }
    out[domain == 0 ? "time" : "freq"] = layers;
  }
  write_text(out_path, out.dump() + "\n");
  return 0;
}

int run_mask_report(const std::string& data, double w, double ratio, double tau, int draws,
                    uint64_t seed, int patch_len, const std::string& out_path) {
  std::vector<PatchGrid> grids;
  double rate = 0.0;
  for (const std::string& f : list_segment_files(data)) {
    Recording rec = load_recording(f, RecordingFormat::bin);
    rate = rec.sample_rate_hz;
    grids.push_back(patchify(Segment{rec.samples, rec.sample_rate_hz}, patch_len));
  }

  Rng rng = Rng(seed).stream("mask-report");
  double gap_sum = 0.0, masked_sum = 0.0, visible_sum = 0.0;
  int n_reports = 0;
  for (const PatchGrid& grid : grids) {
    ImportanceMap map = score_grid(grid, rate);
    for (int d = 0; d < draws; ++d) {
      MaskPlan plan = sample_mask(map, ratio, w, tau, rng);
      MaskReport rep = mask_report(map, plan);
      gap_sum += rep.gap;
      masked_sum += rep.mean_masked;
      visible_sum += rep.mean_visible;
      ++n_reports;
    }
  }
  json out;
  out["draws"] = draws;
  out["w"] = w;
  out["tau"] = tau;
  out["mask_ratio"] = ratio;
  out["mean_masked"] = masked_sum / n_reports;
  out["mean_visible"] = visible_sum / n_reports;
  out["gap"] = gap_sum / n_reports;
  out["relative_increase"] = (gap_sum / n_reports) / std::max(visible_sum / n_reports, 1e-12);
  write_text(out_path, out.dump() + "\n");
  return 0;
}

int run_depth_sweep(const FullConfig& cfg, const std::string& data,
                    const std::vector<int>& depths, const std::string& out_path) {
  TokenizerCorpus corpus = load_corpus(data, cfg.model.patch_len);
  std::vector<DepthResult> results = rvq_depth_sweep(corpus, cfg.model, cfg.train, depths);
  json arr = json::array();
  for (const DepthResult& r : results)
    arr.push_back(json{{"depth", r.depth}, {"recon", recon_to_json(r.recon)}});
  write_text(out_path, json{{"results", arr}}.dump() + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural-signal tokenization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed_override;

  auto* gen = app.add_subcommand("gen-synth", "generate a deterministic synthetic recording");
  SynthSpec synth_spec;
  std::string gen_out;
  gen->add_option("--seed", synth_spec.seed);
  gen->add_option("--minutes", synth_spec.minutes);
  gen->add_option("--channels", synth_spec.channels);
  gen->add_option("--rate", synth_spec.sample_rate_hz);
  gen->add_option("--spike-density", synth_spec.spike_density);
  gen->add_option("--spike-amp", synth_spec.spike_amp_uv);
  gen->add_option("--burst-density", synth_spec.burst_density);
  gen->add_option("--transient-density", synth_spec.transient_density);
  gen->add_option("--out", gen_out)->required();

  auto* pre = app.add_subcommand("preprocess", "filter, resample, window, reject, normalize");
  std::string pre_in, pre_out, band = "0.3:75";
  double notch_hz = 60.0, resample_hz = 200.0, window_s = 30.0, amp_thresh = 100.0, trim_s = 60.0;
  double norm_scale = 100.0;
  pre->add_option("--in", pre_in)->required();
  pre->add_option("--out", pre_out)->required();
  pre->add_option("--band", band);
  pre->add_option("--notch", notch_hz);
  pre->add_option("--resample", resample_hz);
  pre->add_option("--window", window_s);
  pre->add_option("--amp-thresh", amp_thresh);
  pre->add_option("--trim", trim_s);
  pre->add_option("--norm-scale", norm_scale);

  auto* tok = app.add_subcommand("train-tokenizer", "train the dual-domain tokenizer");
  std::string tok_data, tok_out = "tokenizer.ckpt", tok_hist = "tokenizer_history.jsonl";
  tok->add_option("--data", tok_data)->required();
  tok->add_option("--config", config_path);
  tok->add_option("--seed", seed_override);
  tok->add_option("--out", tok_out);
  tok->add_option("--history", tok_hist);

  auto* pt = app.add_subcommand("pretrain", "masked pre-training over frozen tokenizer codes");
  std::string pt_data, pt_tok, pt_out = "pretrain.ckpt", pt_hist = "pretrain_history.jsonl";
  pt->add_option("--data", pt_data)->required();
  pt->add_option("--tokenizer", pt_tok)->required();
  pt->add_option("--config", config_path);
  pt->add_option("--seed", seed_override);
  pt->add_option("--out", pt_out);
  pt->add_option("--history", pt_hist);

  auto* sc = app.add_subcommand("score", "per-patch importance score table");
  std::string sc_in, sc_out = "scores.csv";
  int sc_patch_len = 200;
  sc->add_option("--in", sc_in)->required();
  sc->add_option("--out", sc_out);
  sc->add_option("--patch-len", sc_patch_len);

  auto* rc = app.add_subcommand("reconstruct", "tokenize-decode fidelity report");
  std::string rc_data, rc_ckpt, rc_out = "recon.json";
  rc->add_option("--data", rc_data)->required();
  rc->add_option("--checkpoint", rc_ckpt)->required();
  rc->add_option("--out", rc_out);

  auto* ac = app.add_subcommand("analyze-codebook", "codebook utilization statistics");
  std::string ac_data, ac_ckpt, ac_out = "codebook.json";
  ac->add_option("--data", ac_data)->required();
  ac->add_option("--checkpoint", ac_ckpt)->required();
  ac->add_option("--out", ac_out);

  auto* mr = app.add_subcommand("mask-report", "masked-vs-visible score distribution");
  std::string mr_data, mr_out = "mask_report.json";
  double mr_w = 0.7, mr_ratio = 0.5, mr_tau = 0.8;
  int mr_draws = 1000, mr_patch_len = 200;
  uint64_t mr_seed = 7;
  mr->add_option("--data", mr_data)->required();
  mr->add_option("--w", mr_w);
  mr->add_option("--ratio", mr_ratio);
  mr->add_option("--tau", mr_tau);
  mr->add_option("--draws", mr_draws);
  mr->add_option("--seed", mr_seed);
  mr->add_option("--patch-len", mr_patch_len);
  mr->add_option("--out", mr_out);

  auto* ds = app.add_subcommand("depth-sweep", "train tokenizers at several rvq depths");
  std::string ds_data, ds_out = "depth_sweep.json", ds_depths = "1,2,3";
  ds->add_option("--data", ds_data)->required();
  ds->add_option("--config", config_path);
  ds->add_option("--seed", seed_override);
  ds->add_option("--depths", ds_depths);
  ds->add_option("--out", ds_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_synth(synth_spec, gen_out);
    if (pre->parsed()) {
      const auto colon = band.find(':');
      if (colon == std::string::npos)
        raise(Err::MalformedConfig, "--band must look like low:high");
      const double lo = std::stod(band.substr(0, colon));
      const double hi = std::stod(band.substr(colon + 1));
      return run_preprocess(pre_in, pre_out, lo, hi, notch_hz, resample_hz, window_s, amp_thresh,
                            trim_s, norm_scale);
    }
    if (tok->parsed())
      return run_train_tokenizer(load_config(config_path, seed_override), tok_data, tok_out,
                                 tok_hist);
    if (pt->parsed())
      return run_pretrain(load_config(config_path, seed_override), pt_data, pt_tok, pt_out,
                          pt_hist);
    if (sc->parsed()) return run_score(sc_in, sc_out, sc_patch_len);
    if (rc->parsed()) return run_reconstruct(rc_data, rc_ckpt, rc_out);
    if (ac->parsed()) return run_analyze_codebook(ac_data, ac_ckpt, ac_out);
    if (mr->parsed())
      return run_mask_report(mr_data, mr_w, mr_ratio, mr_tau, mr_draws, mr_seed, mr_patch_len,
                             mr_out);
    if (ds->parsed()) {
      std::vector<int> depths;
      std::stringstream ss(ds_depths);
      std::string item;
      while (std::getline(ss, item, ',')) depths.push_back(std::stoi(item));
      return run_depth_sweep(load_config(config_path, seed_override), ds_data, depths, ds_out);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == Err::MalformedConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "Unhandled: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
