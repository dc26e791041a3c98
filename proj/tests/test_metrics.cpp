#include "support.hpp"
#include "vclone/metrics.hpp"

#include <doctest.h>

#include <sstream>

using namespace vclone;
using namespace vclone::testing;

namespace {

const FrameParams kFrame{400, 160, 512};

PitchTrack manual_track(std::vector<double> f0) {
  PitchTrack t;
  t.f0_hz = Eigen::Map<Vector>(f0.data(), Index(f0.size()));
  for (double f : f0) t.voiced.push_back(f > 0.0);
  t.params = kFrame;
  return t;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("pitch of pure tones") {
  for (double hz : {100.0, 200.0, 300.0, 400.0}) {
    CAPTURE(hz);
    const PitchTrack t = track_pitch(sine(hz, 16000, 0.5), kFrame);
    REQUIRE(t.size() == frame_count(16000, kFrame));
    CHECK(t.voiced_count() == t.size());
    for (Index i = 0; i < t.size(); ++i) CHECK(std::abs(t.f0_hz[i] - hz) / hz < 0.01);
  }
}

TEST_CASE("pitch of a harmonic tone follows the fundamental") {
  Waveform w = sine(150, 16000, 0.3);
  w.samples += sine(300, 16000, 0.2).samples + sine(450, 16000, 0.15).samples;
  const PitchTrack t = track_pitch(w, kFrame);
  for (Index i = 0; i < t.size(); ++i) CHECK(std::abs(t.f0_hz[i] - 150.0) / 150.0 < 0.01);
}

TEST_CASE("silence and noise") {
  Waveform z;
  z.samples = Vector::Zero(8000);
  const PitchTrack t = track_pitch(z, kFrame);
  CHECK(t.voiced_count() == 0);
  CHECK(t.f0_hz.cwiseAbs().maxCoeff() == 0.0);

  const PitchTrack n = track_pitch(white_noise(16000, 0.3, 5), kFrame);
  for (Index i = 0; i < n.size(); ++i) {
    const double f = n.f0_hz[i];
    CHECK((f == 0.0 || (f >= 50.0 && f <= 500.0)));
    CHECK(n.voiced[i] == (f > 0.0));
  }
}

TEST_CASE("gross pitch error fixtures") {
  const PitchTrack a = track_pitch(sine(200, 16000), kFrame);
  const PitchTrack b = track_pitch(sine(260, 16000), kFrame);
  const PitchTrack c = track_pitch(sine(220, 16000), kFrame);
  const GpeResult self = gpe(a, a);
  CHECK(self.percent == 0.0);
  CHECK_FALSE(self.warning());
  CHECK(gpe(a, b).percent == doctest::Approx(100.0));
  CHECK(gpe(b, a).percent == doctest::Approx(100.0));
  CHECK(gpe(a, c).percent == doctest::Approx(0.0));
}

TEST_CASE("deviation is relative to the reference") {
  const PitchTrack lo = manual_track({200, 200, 200, 200});
  const PitchTrack hi = manual_track({250, 250, 250, 250});
  CHECK(gpe(lo, hi).percent == 100.0);  // 50 / 200 = 25%
  CHECK(gpe(hi, lo).percent == 0.0);    // 50 / 250 = 20%, not above
}

TEST_CASE("only jointly voiced frames count") {
  const PitchTrack ref = manual_track({200, 0, 200, 200, 0});
  const PitchTrack test = manual_track({300, 300, 0, 200, 0, 210});
  const GpeResult r = gpe(ref, test);
  CHECK(r.jointly_voiced == 2);
  CHECK(r.percent == doctest::Approx(50.0));

  const GpeResult none = gpe(manual_track({200, 0}), manual_track({0, 200}));
  CHECK(none.percent == 0.0);
  CHECK(none.warning());
}

TEST_CASE("spectral distortion oracles") {
  const Waveform x = white_noise(16000, 0.01, 3);
  CHECK(spectral_distortion(x, x, kFrame) == 0.0);
  for (double c : {0.5, 2.0, 10.0}) {
    Waveform y = x;
    y.samples *= c;
    CAPTURE(c);
    CHECK(std::abs(spectral_distortion(x, y, kFrame) - std::abs(20.0 * std::log10(c))) < 0.05);
  }
  CHECK(spectral_distortion(x, white_noise(16000, 0.01, 4), kFrame) > 0.0);

  Waveform shorter = x;
  shorter.samples.conservativeResize(12000);
  CHECK(spectral_distortion(x, shorter, kFrame) == 0.0);
  shorter.samples.conservativeResize(100);
  CHECK_THROWS_AS(spectral_distortion(x, shorter, kFrame), Error);
}

TEST_CASE("rating labels") {
  CHECK(parse_rating_label("Very similar") == RatingLabel::very_similar);
  CHECK(parse_rating_label("very_similar") == RatingLabel::very_similar);
  CHECK(parse_rating_label("MODERATELY SIMILAR") == RatingLabel::moderately_similar);
  CHECK(parse_rating_label("slightly-similar") == RatingLabel::slightly_similar);
  CHECK(parse_rating_label("Not at all similar") == RatingLabel::not_at_all_similar);
  CHECK_THROWS_AS(parse_rating_label("kind of similar"), Error);
  for (auto l : {RatingLabel::very_similar, RatingLabel::moderately_similar,
                 RatingLabel::slightly_similar, RatingLabel::not_at_all_similar})
    CHECK(parse_rating_label(to_string(l)) == l);
}

TEST_CASE("band midpoints sit inside their bands") {
  // very: 5..4, moderately: 4..3, slightly: 3..2, not at all: below 2
  CHECK(band_midpoint(RatingLabel::very_similar) == 4.5);
  CHECK(band_midpoint(RatingLabel::moderately_similar) == 3.5);
  CHECK(band_midpoint(RatingLabel::slightly_similar) == 2.5);
  CHECK(band_midpoint(RatingLabel::not_at_all_similar) == 1.5);
}

TEST_CASE("mos aggregation") {
  const RatingRecord very{RatingLabel::very_similar, "GB", "s"};
  const RatingRecord moderate{RatingLabel::moderately_similar, "IN", "s"};
  CHECK(aggregate_mos(std::vector<RatingRecord>(11, very)) == 4.5);
  CHECK(aggregate_mos({very, very, moderate}) == doctest::Approx(4.1667).epsilon(1e-4 / 4.1667));
  CHECK_THROWS_AS(aggregate_mos({}), Error);

  Rng rng(3);
  std::uniform_int_distribution<int> label(0, 3), count(1, 30);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RatingRecord> rs;
    for (int i = count(rng); i > 0; --i) rs.push_back({static_cast<RatingLabel>(label(rng)), "", ""});
    const double mos = aggregate_mos(rs);
    CHECK(mos >= 1.5);
    CHECK(mos <= 4.5);
  }
}

TEST_CASE("ratings file") {
  TempDir dir("ratings");
  write_file(dir / "r.csv", "label,locale,source\nVery similar,IN,a\nSlightly similar,GB,b\n");
  const auto rs = read_ratings(dir / "r.csv");
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].label == RatingLabel::very_similar);
  CHECK(rs[1].locale == "GB");
  CHECK(aggregate_mos(rs) == 3.5);

  write_file(dir / "bad.csv", "grade,locale\n4,IN\n");
  CHECK_THROWS_AS(read_ratings(dir / "bad.csv"), Error);
}

TEST_CASE("report format") {
  CHECK(kReportHeader == "accent,dataset,speaker_id,gender,mos,gpe,sd");
  const ScoreRow p230{"Western", "VCTK", "p230", "F", 4.64, 1.95, 3.38, ""};
  CHECK(format_report_row(p230) == "Western,VCTK,p230,F,4.64,1.95,3.38");

  ScoreRow no_mos = p230;
  no_mos.mos.reset();
  CHECK(format_report_row(no_mos) == "Western,VCTK,p230,F,,1.95,3.38");

  ScoreRow failed{"Indian", "IndicTTS", "x", "M", {}, {}, {}, "cannot open"};
  CHECK(format_report_row(failed) == "Indian,IndicTTS,x,M,NA,NA,NA");

  std::ostringstream out;
  write_report(out, {{p230, failed}});
  CHECK(out.str() ==
        "accent,dataset,speaker_id,gender,mos,gpe,sd\n"
        "Western,VCTK,p230,F,4.64,1.95,3.38\n"
        "Indian,IndicTTS,x,M,NA,NA,NA\n");
}

TEST_CASE("scoring a recording against itself") {
  TempDir dir("score");
  Waveform w = sine(180, 16000, 0.3);
  w.samples += white_noise(16000, 0.01, 1).samples;
  write_wav(w, dir / "ref.wav");
  write_wav(sine(180, 16000, 0.3), dir / "other.wav");
  write_file(dir / "ratings.csv", "label,locale,source\nvery similar,IN,x\nmoderately similar,GB,y\n");
  write_file(dir / "inputs.csv",
             "accent,dataset,speaker_id,gender,ref_wav,test_wav,ratings_csv\n"
             "Western,VCTK,p1,F,ref.wav,ref.wav,ratings.csv\n"
             "Indian,IndicTTS,p2,M,ref.wav,missing.wav,\n"
             "Western,VCTK,p3,M,ref.wav,other.wav,\n");
  const auto inputs = read_score_inputs(dir / "inputs.csv");
  REQUIRE(inputs.size() == 3);
  CHECK(inputs[0].test_wav == dir / "ref.wav");

  const ScoreReport report = score_report(inputs);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].error.empty());
  CHECK(*report.rows[0].gpe == 0.0);
  CHECK(*report.rows[0].sd == 0.0);
  CHECK(*report.rows[0].mos == 4.0);
  CHECK(format_report_row(report.rows[0]) == "Western,VCTK,p1,F,4.00,0.00,0.00");
  CHECK_FALSE(report.rows[1].error.empty());
  CHECK(format_report_row(report.rows[1]) == "Indian,IndicTTS,p2,M,NA,NA,NA");
  CHECK(report.rows[2].error.empty());
  CHECK(*report.rows[2].gpe >= 0.0);
  CHECK(*report.rows[2].gpe <= 100.0);
  CHECK(*report.rows[2].sd > 0.0);
}

}  // TEST_SUITE
