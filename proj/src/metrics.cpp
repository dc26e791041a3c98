#include "vclone/metrics.hpp"

#include "vclone/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace vclone {

Index PitchTrack::voiced_count() const {
  return static_cast<Index>(std::count(voiced.begin(), voiced.end(), true));
}

namespace {

// Correlation of x[0, n - lag) with x[lag, n), normalized by both energies.
double normalized_autocorr(const Eigen::Ref<const Vector>& x, Index lag) {
  const Index n = x.size() - lag;
  const auto a = x.head(n);
  const auto b = x.segment(lag, n);
  const double denom = std::sqrt(a.squaredNorm() * b.squaredNorm());
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

}  // namespace

PitchTrack track_pitch(const Waveform& w, const FrameParams& p, const PitchParams& pp) {
  p.validate();
  if (!(pp.f_min_hz > 0.0 && pp.f_max_hz > pp.f_min_hz)) {
    throw Error(ErrorCode::invalid_argument, "pitch band must satisfy 0 < f_min < f_max");
  }
  const double rate = w.sample_rate_hz;
  const Index lo = std::max<Index>(2, static_cast<Index>(std::floor(rate / pp.f_max_hz)));
  const Index hi = std::min<Index>(p.window_length - 2,
                                   static_cast<Index>(std::ceil(rate / pp.f_min_hz)));
  if (hi <= lo) {
    throw Error(ErrorCode::invalid_argument, "pitch: window too short for the lag range");
  }

  const Index frames = frame_count(w.size(), p);
  PitchTrack track;
  track.params = p;
  track.f0_hz = Vector::Zero(frames);
  track.voiced.assign(static_cast<std::size_t>(frames), false);
  Vector r(hi + 2);
  for (Index f = 0; f < frames; ++f) {
    const auto x = w.samples.segment(f * p.hop, p.window_length);
    if (std::sqrt(x.squaredNorm() / double(x.size())) <= pp.min_rms) continue;
    for (Index lag = lo - 1; lag <= hi + 1; ++lag) r[lag] = normalized_autocorr(x, lag);

    const double best = r.segment(lo, hi - lo + 1).maxCoeff();
    if (!(best > pp.voicing_threshold)) continue;
    Index pick = -1;
    for (Index lag = lo; lag <= hi; ++lag) {
      if (r[lag] >= 0.9 * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        pick = lag;
        break;
      }
    }
    if (pick < 0) continue;
    const double curve = r[pick - 1] - 2.0 * r[pick] + r[pick + 1];
    const double shift = curve < 0.0 ? 0.5 * (r[pick - 1] - r[pick + 1]) / curve : 0.0;
    const double f0 = rate / (static_cast<double>(pick) + shift);
    track.f0_hz[f] = std::clamp(f0, pp.f_min_hz, pp.f_max_hz);
    track.voiced[static_cast<std::size_t>(f)] = true;
  }
  return track;
}

GpeResult gpe(const PitchTrack& reference, const PitchTrack& test, double deviation) {
  const Index n = std::min(reference.size(), test.size());
  GpeResult result;
  Index gross = 0;
  for (Index f = 0; f < n; ++f) {
    const auto i = static_cast<std::size_t>(f);
    if (!reference.voiced[i] || !test.voiced[i]) continue;
    ++result.jointly_voiced;
    const double ref = reference.f0_hz[f];
    if (std::abs(test.f0_hz[f] - ref) / ref > deviation) ++gross;
  }
  if (result.jointly_voiced > 0) {
    result.percent = 100.0 * static_cast<double>(gross) / static_cast<double>(result.jointly_voiced);
  }
  return result;
}

double spectral_distortion(const Waveform& ref, const Waveform& test, const FrameParams& p) {
  const Index n = std::min(ref.size(), test.size());
  Waveform a = ref;
  Waveform b = test;
  a.samples.conservativeResize(n);
  b.samples.conservativeResize(n);
  const ComplexSpectrogram sa = stft(a, p);
  const ComplexSpectrogram sb = stft(b, p);
  if (sa.num_frames() == 0) {
    throw Error(ErrorCode::invalid_argument, "spectral distortion: common length " +
                                                 std::to_string(n) + " is shorter than a window");
  }
  constexpr double eps = 1e-10;
  const Eigen::ArrayXXd la = 20.0 * (sa.frames.cwiseAbs().array() + eps).log10();
  const Eigen::ArrayXXd lb = 20.0 * (sb.frames.cwiseAbs().array() + eps).log10();
  const Eigen::ArrayXd per_frame = ((la - lb).square().rowwise().mean()).sqrt();
  return per_frame.mean();
}

RatingLabel parse_rating_label(std::string_view text) {
  std::string norm;
  bool pending_space = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u) || c == '_' || c == '-') {
      pending_space = !norm.empty();
      continue;
    }
    if (pending_space) norm.push_back(' ');
    pending_space = false;
    norm.push_back(static_cast<char>(std::tolower(u)));
  }
  if (norm == "very similar") return RatingLabel::very_similar;
  if (norm == "moderately similar") return RatingLabel::moderately_similar;
  if (norm == "slightly similar") return RatingLabel::slightly_similar;
  if (norm == "not at all similar") return RatingLabel::not_at_all_similar;
  throw Error(ErrorCode::invalid_argument, "unknown rating label '" + std::string(text) + "'");
}

std::string_view to_string(RatingLabel label) {
  switch (label) {
    case RatingLabel::very_similar: return "very_similar";
    case RatingLabel::moderately_similar: return "moderately_similar";
    case RatingLabel::slightly_similar: return "slightly_similar";
    case RatingLabel::not_at_all_similar: return "not_at_all_similar";
  }
  return "unknown";
}

double band_midpoint(RatingLabel label) {
  switch (label) {
    case RatingLabel::very_similar: return 4.5;
    case RatingLabel::moderately_similar: return 3.5;
    case RatingLabel::slightly_similar: return 2.5;
    case RatingLabel::not_at_all_similar: return 1.5;
  }
  return 0.0;
}

double aggregate_mos(const std::vector<RatingRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::invalid_argument, "aggregate_mos: no ratings");
  double sum = 0.0;
  for (const auto& r : records) sum += band_midpoint(r.label);
  return sum / static_cast<double>(records.size());
}

std::vector<RatingRecord> read_ratings(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows.front() != CsvRow{"label", "locale", "source"}) {
    throw Error(ErrorCode::malformed_config,
                "ratings header must be label,locale,source: " + path.string());
  }
  std::vector<RatingRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 3) {
      throw Error(ErrorCode::malformed_config,
                  path.string() + ": row " + std::to_string(i) + " needs 3 fields");
    }
    records.push_back({parse_rating_label(row[0]), row[1], row[2]});
  }
  return records;
}

std::string format_report_row(const ScoreRow& row) {
  auto fixed2 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  CsvRow fields{row.accent, row.dataset, row.speaker_id, row.gender};
  if (!row.error.empty()) {
    fields.insert(fields.end(), {"NA", "NA", "NA"});
  } else {
    fields.push_back(row.mos ? fixed2(*row.mos) : "");
    fields.push_back(row.gpe ? fixed2(*row.gpe) : "NA");
    fields.push_back(row.sd ? fixed2(*row.sd) : "NA");
  }
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line.push_back(',');
    line += csv_escape(fields[i]);
  }
  return line;
}

void write_report(std::ostream& out, const ScoreReport& report) {
  out << kReportHeader << '\n';
  for (const auto& row : report.rows) out << format_report_row(row) << '\n';
}

ScoreReport score_report(const std::vector<ScoreInput>& inputs, const ScoreConfig& cfg) {
  ScoreReport report;
  for (const auto& in : inputs) {
    ScoreRow row{in.accent, in.dataset, in.speaker_id, in.gender, {}, {}, {}, {}};
    try {
      const Waveform ref = load_wav(in.ref_wav);
      const Waveform test = load_wav(in.test_wav);
      if (ref.sample_rate_hz != test.sample_rate_hz) {
        throw Error(ErrorCode::sample_rate_mismatch, "reference and test sample rates differ");
      }
      const PitchTrack tr = track_pitch(ref, cfg.frame, cfg.pitch);
      const PitchTrack tt = track_pitch(test, cfg.frame, cfg.pitch);
      row.gpe = gpe(tr, tt, cfg.gpe_deviation).percent;
      row.sd = spectral_distortion(ref, test, cfg.frame);
      if (!in.ratings.empty()) row.mos = aggregate_mos(read_ratings(in.ratings));
    } catch (const std::exception& e) {
      row.mos.reset();
      row.gpe.reset();
      row.sd.reset();
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<ScoreInput> read_score_inputs(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  const CsvRow base{"accent", "dataset", "speaker_id", "gender", "ref_wav", "test_wav"};
  CsvRow with_ratings = base;
  with_ratings.push_back("ratings_csv");
  if (rows.empty() || (rows.front() != base && rows.front() != with_ratings)) {
    throw Error(ErrorCode::malformed_config,
                "score input header must be accent,dataset,speaker_id,gender,ref_wav,test_wav"
                "[,ratings_csv]: " + path.string());
  }
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path f = p;
    return f.is_relative() ? dir / f : f;
  };
  std::vector<ScoreInput> inputs;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 6 && row.size() != 7) {
      throw Error(ErrorCode::malformed_config,
                  path.string() + ": row " + std::to_string(i) + " needs 6 or 7 fields");
    }
    ScoreInput in{row[0], row[1], row[2], row[3], resolve(row[4]), resolve(row[5]), {}};
    if (row.size() == 7 && !row[6].empty()) in.ratings = resolve(row[6]);
    inputs.push_back(std::move(in));
  }
  return inputs;
}

}  // namespace vclone
