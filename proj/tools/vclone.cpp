#include "vclone/config.hpp"
#include "vclone/corpus.hpp"
#include "vclone/csv.hpp"
#include "vclone/denoise.hpp"
#include "vclone/metrics.hpp"
#include "vclone/model_io.hpp"
#include "vclone/pipeline.hpp"
#include "vclone/speaker_library.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace vclone;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  Config load() const {
    Config cfg = config_path.empty() ? Config{} : parse_config(config_path);
    if (seed) cfg.seed = *seed;
    return cfg;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "overrides the config seed");
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  return out;
}

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt(m(r, c));
    out << '\n';
  }
}

EncoderModel load_encoder(const fs::path& p) {
  return encoder_from_checkpoint(load_checkpoint(p, kEncoderKind));
}

std::vector<LibraryEntry> library_entries(const std::map<std::string, Dvector>& dvectors,
                                          const fs::path& speakers_csv) {
  std::map<std::string, LibraryEntry> meta;
  if (!speakers_csv.empty()) {
    const auto rows = read_csv(speakers_csv);
    if (rows.empty() || rows.front().size() < 3 || rows.front()[0] != "speaker_id" ||
        rows.front()[1] != "accent" || rows.front()[2] != "gender") {
      throw Error(ErrorCode::malformed_config,
                  speakers_csv.string() + ": header must start with speaker_id,accent,gender");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() >= 3) meta[rows[i][0]] = {rows[i][0], rows[i][1], rows[i][2]};
    }
  }
  std::vector<LibraryEntry> entries;
  for (const auto& [id, d] : dvectors) {
    auto it = meta.find(id);
    entries.push_back(it != meta.end() ? it->second : LibraryEntry{id, "western", "U"});
  }
  return entries;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-conditioned voice cloning toolkit"};
  app.require_subcommand(1);
  Common common;

  // make-corpus
  fs::path corpus_out;
  std::optional<int> corpus_speakers, corpus_utterances;
  std::optional<double> corpus_duration;
  auto* make_corpus = app.add_subcommand("make-corpus", "Write the synthetic toy corpus");
  add_common(make_corpus, common);
  make_corpus->add_option("--out", corpus_out, "output directory")->required();
  make_corpus->add_option("--speakers", corpus_speakers);
  make_corpus->add_option("--utterances", corpus_utterances);
  make_corpus->add_option("--duration", corpus_duration, "seconds per utterance");

  // features
  fs::path feat_wav, feat_out;
  std::string feat_kind = "encoder";
  auto* features = app.add_subcommand("features", "Write encoder features or unit-range mels as CSV");
  add_common(features, common);
  features->add_option("--wav", feat_wav)->required()->check(CLI::ExistingFile);
  features->add_option("--out", feat_out)->required();
  features->add_option("--kind", feat_kind)->check(CLI::IsMember({"encoder", "mel"}));

  // train-encoder
  fs::path manifest, model_out, log_out;
  std::optional<int> steps;
  auto* train_enc = app.add_subcommand("train-encoder", "Train the speaker encoder with GE2E");
  add_common(train_enc, common);
  train_enc->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  train_enc->add_option("--out", model_out)->required();
  train_enc->add_option("--log", log_out, "loss log CSV step,loss,w,b");
  train_enc->add_option("--steps", steps);

  // embed
  fs::path encoder_path, wav_path, dvec_out;
  auto* embed = app.add_subcommand("embed", "Print the d-vector of a recording");
  add_common(embed, common);
  embed->add_option("--encoder", encoder_path)->required()->check(CLI::ExistingFile);
  embed->add_option("--wav", wav_path)->required()->check(CLI::ExistingFile);
  embed->add_option("--out", dvec_out, "also save as a .dvec checkpoint");

  // verify
  fs::path wav_a, wav_b;
  std::optional<double> threshold;
  auto* verify = app.add_subcommand("verify", "Cosine speaker verification of two recordings");
  add_common(verify, common);
  verify->add_option("--encoder", encoder_path)->required()->check(CLI::ExistingFile);
  verify->add_option("--a", wav_a)->required()->check(CLI::ExistingFile);
  verify->add_option("--b", wav_b)->required()->check(CLI::ExistingFile);
  verify->add_option("--threshold", threshold);

  // train-synth
  auto* train_synth = app.add_subcommand("train-synth", "Train the text-to-mel synthesizer");
  add_common(train_synth, common);
  train_synth->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  train_synth->add_option("--encoder", encoder_path)->required()->check(CLI::ExistingFile);
  train_synth->add_option("--out", model_out)->required();
  train_synth->add_option("--log", log_out, "loss log CSV step,loss");
  train_synth->add_option("--steps", steps);

  // train-vocoder
  auto* train_voc = app.add_subcommand("train-vocoder", "Train the autoregressive vocoder");
  add_common(train_voc, common);
  train_voc->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  train_voc->add_option("--out", model_out)->required();
  train_voc->add_option("--log", log_out, "loss log CSV step,loss");
  train_voc->add_option("--steps", steps);

  // build-library
  fs::path speakers_csv, library_dir;
  auto* build_lib = app.add_subcommand("build-library", "Store per-speaker d-vectors as a voice library");
  add_common(build_lib, common);
  build_lib->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  build_lib->add_option("--encoder", encoder_path)->required()->check(CLI::ExistingFile);
  build_lib->add_option("--speakers", speakers_csv, "speakers.csv with accent and gender")
      ->check(CLI::ExistingFile);
  build_lib->add_option("--out", library_dir)->required();

  // clone
  std::string text, speaker_id;
  fs::path reference, synth_path, vocoder_path, wav_out, noise_clip;
  bool use_denoise = false;
  std::optional<int> max_frames;
  std::optional<double> gate_k, mask_floor;
  auto* clone = app.add_subcommand("clone", "Speak text in a reference or library voice");
  add_common(clone, common);
  clone->add_option("--text", text)->required();
  auto* ref_opt = clone->add_option("--reference", reference)->check(CLI::ExistingFile);
  auto* lib_opt = clone->add_option("--library", library_dir)->check(CLI::ExistingDirectory);
  clone->add_option("--speaker", speaker_id, "library speaker id")->needs(lib_opt);
  ref_opt->excludes(lib_opt);
  clone->add_option("--encoder", encoder_path)->required()->check(CLI::ExistingFile);
  clone->add_option("--synth", synth_path)->required()->check(CLI::ExistingFile);
  clone->add_option("--vocoder", vocoder_path)->required()->check(CLI::ExistingFile);
  clone->add_option("--out", wav_out)->required();
  auto* denoise_flag = clone->add_flag("--denoise", use_denoise, "gate the output against --noise-clip");
  auto* clone_noise = clone->add_option("--noise-clip", noise_clip)->check(CLI::ExistingFile);
  denoise_flag->needs(clone_noise);
  clone->add_option("--max-frames", max_frames);
  clone->add_option("--gate-k", gate_k);
  clone->add_option("--mask-floor", mask_floor);

  // denoise
  fs::path in_wav;
  auto* denoise_cmd = app.add_subcommand("denoise", "Spectral-gate a recording with a noise clip");
  add_common(denoise_cmd, common);
  denoise_cmd->add_option("--in", in_wav)->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--noise-clip", noise_clip)->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--out", wav_out)->required();
  denoise_cmd->add_option("--gate-k", gate_k);
  denoise_cmd->add_option("--mask-floor", mask_floor);

  // score
  fs::path score_in, report_out;
  auto* score = app.add_subcommand("score", "GPE, SD and MOS report, one row per speaker");
  add_common(score, common);
  score->add_option("--input", score_in, "accent,dataset,speaker_id,gender,ref_wav,test_wav[,ratings_csv]")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--out", report_out, "report CSV (default stdout)");

  // mos-report
  fs::path ratings;
  auto* mos = app.add_subcommand("mos-report", "Aggregate listener ratings into a MOS");
  add_common(mos, common);
  mos->add_option("--ratings", ratings, "label,locale,source")->required()->check(CLI::ExistingFile);

  // project
  fs::path scatter_out;
  auto* project = app.add_subcommand("project", "2-D projection of utterance d-vectors");
  add_common(project, common);
  project->add_option("--encoder", encoder_path)->required()->check(CLI::ExistingFile);
  project->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  project->add_option("--out", scatter_out, "CSV x,y,speaker_id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    Config cfg = common.load();
    if (gate_k) cfg.gate_k = *gate_k;
    if (mask_floor) cfg.mask_floor = *mask_floor;
    cfg.validate();

    if (*make_corpus) {
      if (corpus_speakers) cfg.corpus_speakers = *corpus_speakers;
      if (corpus_utterances) cfg.corpus_utterances = *corpus_utterances;
      if (corpus_duration) cfg.corpus_duration_s = *corpus_duration;
      cfg.validate();
      const ToyCorpus c = build_toy_corpus(corpus_out, cfg.corpus());
      std::cout << "wrote " << c.all.size() << " utterances from " << c.speakers.size()
                << " speakers to " << corpus_out.string() << '\n';

    } else if (*features) {
      const Waveform w = load_wav_at(feat_wav, cfg);
      if (feat_kind == "mel") {
        write_matrix_csv(feat_out, extract_unit_mel(w, cfg.synth_features()).frames);
      } else {
        write_matrix_csv(feat_out, extract_features(w, cfg.encoder_features()).frames);
      }

    } else if (*train_enc) {
      EncoderTrainConfig tc = cfg.encoder_training();
      if (steps) tc.steps = *steps;
      const auto corpus = load_speaker_features(read_manifest(manifest), cfg);
      const EncoderTrainResult r = train_encoder(corpus, tc);
      EncoderModel m = r.model;
      m.mode = cfg.encoder_features().mode;
      save_checkpoint(model_out, to_checkpoint(m));
      if (!log_out.empty()) {
        auto out = open_out(log_out);
        write_csv_row(out, {"step", "loss", "w", "b"});
        for (const auto& e : r.log) {
          write_csv_row(out, {std::to_string(e.step), fmt(e.loss), fmt(e.scale_w), fmt(e.bias_b)});
        }
      }
      std::cout << "final loss " << fmt(r.log.empty() ? 0.0 : r.log.back().loss, "%.6f") << '\n';

    } else if (*embed) {
      const EncoderModel m = load_encoder(encoder_path);
      const Dvector d = embed_wav(m, load_wav_at(wav_path, cfg), cfg);
      for (Index i = 0; i < d.size(); ++i) std::cout << (i ? "," : "") << fmt(d.values[i]);
      std::cout << '\n';
      if (!dvec_out.empty()) save_checkpoint(dvec_out, to_checkpoint(d));

    } else if (*verify) {
      const EncoderModel m = load_encoder(encoder_path);
      const Dvector a = embed_wav(m, load_wav_at(wav_a, cfg), cfg);
      const Dvector b = embed_wav(m, load_wav_at(wav_b, cfg), cfg);
      const Verification v = cosine_verify(a, b, threshold.value_or(cfg.verify_threshold));
      std::cout << "similarity " << fmt(v.similarity, "%.6f") << ' '
                << (v.accepted ? "accepted" : "rejected") << '\n';

    } else if (*train_synth) {
      const EncoderModel enc = load_encoder(encoder_path);
      SynthTrainConfig tc = cfg.synth_training();
      if (steps) tc.steps = *steps;
      const auto pairs = build_synth_pairs(read_manifest(manifest), enc, cfg);
      const SynthTrainResult r = train_synthesizer(pairs, tc);
      save_checkpoint(model_out, to_checkpoint(r.params));
      if (!log_out.empty()) {
        auto out = open_out(log_out);
        write_csv_row(out, {"step", "loss"});
        for (const auto& e : r.log) write_csv_row(out, {std::to_string(e.step), fmt(e.loss)});
      }
      std::cout << "final loss " << fmt(r.log.empty() ? 0.0 : r.log.back().loss, "%.6f") << '\n';

    } else if (*train_voc) {
      VocoderTrainConfig tc = cfg.vocoder_training();
      if (steps) tc.steps = *steps;
      const auto pairs = build_vocoder_pairs(read_manifest(manifest), cfg);
      const VocoderTrainResult r = train_vocoder(pairs, tc);
      save_checkpoint(model_out, to_checkpoint(r.params));
      if (!log_out.empty()) {
        auto out = open_out(log_out);
        write_csv_row(out, {"step", "loss"});
        for (const auto& e : r.log) write_csv_row(out, {std::to_string(e.step), fmt(e.loss)});
      }
      std::cout << "final loss " << fmt(r.log.empty() ? 0.0 : r.log.back().loss, "%.6f") << '\n';

    } else if (*build_lib) {
      const EncoderModel enc = load_encoder(encoder_path);
      const auto dvectors = speaker_dvectors(read_manifest(manifest), enc, cfg);
      SpeakerLibrary::save(library_dir, library_entries(dvectors, speakers_csv), dvectors);
      std::cout << "stored " << dvectors.size() << " voices in " << library_dir.string() << '\n';

    } else if (*clone) {
      CloneRequest req;
      req.text = text;
      if (!reference.empty()) {
        req.reference_wav = reference;
      } else if (!library_dir.empty()) {
        if (speaker_id.empty()) throw CLI::RequiredError("--speaker");
        req.library_dir = library_dir;
        req.speaker_id = speaker_id;
      } else {
        throw CLI::RequiredError("--reference or --library");
      }
      if (use_denoise) req.noise_clip = noise_clip;
      req.max_frames = max_frames.value_or(cfg.synth_max_frames);
      const CloneModels models = CloneModels::load(encoder_path, synth_path, vocoder_path);
      const CloneResult r = run_clone_pipeline(req, models, cfg);
      if (wav_out.has_parent_path()) fs::create_directories(wav_out.parent_path());
      write_wav(r.audio, wav_out);
      std::cout << "wrote " << r.audio.size() << " samples to " << wav_out.string() << '\n';

    } else if (*denoise_cmd) {
      const Waveform w = load_wav_at(in_wav, cfg);
      const Waveform noise = load_wav_at(noise_clip, cfg);
      if (wav_out.has_parent_path()) fs::create_directories(wav_out.parent_path());
      write_wav(denoise(w, noise, cfg.denoise_frame(), cfg.gate()), wav_out);

    } else if (*score) {
      const ScoreReport report = score_report(read_score_inputs(score_in), cfg.scoring());
      for (const auto& row : report.rows) {
        if (!row.error.empty()) std::cerr << "warning: " << row.speaker_id << ": " << row.error << '\n';
      }
      if (report_out.empty()) {
        write_report(std::cout, report);
      } else {
        auto out = open_out(report_out);
        write_report(out, report);
      }

    } else if (*mos) {
      std::cout << aggregate_mos(read_ratings(ratings)) << '\n';

    } else if (*project) {
      const EncoderModel enc = load_encoder(encoder_path);
      const auto entries = read_manifest(manifest);
      std::vector<Dvector> ds;
      for (const auto& e : entries) ds.push_back(embed_wav(enc, load_wav_at(e.wav_path, cfg), cfg));
      const Matrix xy = project_2d(ds);
      auto out = open_out(scatter_out);
      write_csv_row(out, {"x", "y", "speaker_id"});
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto r = static_cast<Index>(i);
        write_csv_row(out, {fmt(xy(r, 0)), fmt(xy(r, 1)), entries[i].speaker_id});
      }
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
