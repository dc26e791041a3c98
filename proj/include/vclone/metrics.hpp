#pragma once

#include "vclone/dsp.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace vclone {

struct PitchParams {
  double f_min_hz = 50.0;
  double f_max_hz = 500.0;
  double voicing_threshold = 0.5;
  double min_rms = 1e-4;
};

struct PitchTrack {
  Vector f0_hz;  // 0 when unvoiced
  std::vector<bool> voiced;
  FrameParams params;

  Index size() const { return f0_hz.size(); }
  Index voiced_count() const;
};

/// Normalized autocorrelation per (unwindowed) frame. The chosen lag is the first
/// local maximum reaching 90% of the best one, refined by a parabola.
PitchTrack track_pitch(const Waveform& w, const FrameParams& p, const PitchParams& pp = {});

struct GpeResult {
  double percent = 0.0;
  Index jointly_voiced = 0;

  /// True when no frame was voiced in both tracks.
  bool warning() const { return jointly_voiced == 0; }
};

/// Tracks are trimmed to the shorter one. Deviation is relative to the reference.
GpeResult gpe(const PitchTrack& reference, const PitchTrack& test, double deviation = 0.2);

/// Frame-averaged RMS log-spectral distance in dB. Signals are trimmed to the
/// common length.
double spectral_distortion(const Waveform& ref, const Waveform& test, const FrameParams& p);

enum class RatingLabel { very_similar, moderately_similar, slightly_similar, not_at_all_similar };

struct RatingRecord {
  RatingLabel label = RatingLabel::very_similar;
  std::string locale;
  std::string source;
};

/// Accepts "Very similar", "very_similar", etc. in any case.
RatingLabel parse_rating_label(std::string_view text);
std::string_view to_string(RatingLabel label);
/// Midpoint of the label's MOS band.
double band_midpoint(RatingLabel label);

double aggregate_mos(const std::vector<RatingRecord>& records);

/// Header `label,locale,source`.
std::vector<RatingRecord> read_ratings(const std::filesystem::path& path);

struct ScoreRow {
  std::string accent;
  std::string dataset;
  std::string speaker_id;
  std::string gender;
  std::optional<double> mos;
  std::optional<double> gpe;
  std::optional<double> sd;
  std::string error;  // nonempty when the row could not be scored
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
};

inline constexpr std::string_view kReportHeader = "accent,dataset,speaker_id,gender,mos,gpe,sd";

/// One CSV line without the newline. Numbers use two decimals; a missing MOS is
/// empty and a failed row shows NA for every value.
std::string format_report_row(const ScoreRow& row);
void write_report(std::ostream& out, const ScoreReport& report);

struct ScoreInput {
  std::string accent;
  std::string dataset;
  std::string speaker_id;
  std::string gender;
  std::filesystem::path ref_wav;
  std::filesystem::path test_wav;
  std::filesystem::path ratings;  // empty when absent
};

struct ScoreConfig {
  FrameParams frame;
  PitchParams pitch;
  double gpe_deviation = 0.2;
};

/// Failures are recorded per row; the report always covers every input.
ScoreReport score_report(const std::vector<ScoreInput>& inputs, const ScoreConfig& cfg = {});

/// Header `accent,dataset,speaker_id,gender,ref_wav,test_wav[,ratings_csv]`.
/// Relative paths resolve against the file's directory.
std::vector<ScoreInput> read_score_inputs(const std::filesystem::path& path);

}  // namespace vclone
