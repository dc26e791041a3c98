#include "vclone/speaker_library.hpp"

#include "vclone/csv.hpp"
#include "vclone/model_io.hpp"

#include <fstream>

namespace vclone {

namespace {

const CsvRow kIndexHeader{"speaker_id", "accent", "gender"};

void check_entry(const LibraryEntry& e) {
  if (e.speaker_id.empty() || e.speaker_id.find_first_of("/\\") != std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "invalid speaker id '" + e.speaker_id + "'");
  }
  if (e.accent != "western" && e.accent != "indian") {
    throw Error(ErrorCode::invalid_argument,
                "speaker " + e.speaker_id + ": accent must be western or indian, got '" + e.accent + "'");
  }
}

}  // namespace

SpeakerLibrary SpeakerLibrary::load(const std::filesystem::path& dir) {
  const auto rows = read_csv(dir / "index.csv");
  if (rows.empty() || rows.front() != kIndexHeader) {
    throw Error(ErrorCode::malformed_config, (dir / "index.csv").string() +
                                                 ": header must be speaker_id,accent,gender");
  }
  SpeakerLibrary lib;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 1 && rows[i][0].empty()) continue;
    if (rows[i].size() != 3) {
      throw Error(ErrorCode::malformed_config, "library index row " + std::to_string(i) + " needs 3 fields");
    }
    LibraryEntry e{rows[i][0], rows[i][1], rows[i][2]};
    check_entry(e);
    if (lib.dvectors_.count(e.speaker_id)) {
      throw Error(ErrorCode::duplicate_name, "library lists " + e.speaker_id + " twice");
    }
    const Checkpoint ckpt = load_checkpoint(dir / (e.speaker_id + ".dvec"), kDvectorKind);
    lib.dvectors_.emplace(e.speaker_id, dvector_from_checkpoint(ckpt));
    lib.entries_.push_back(std::move(e));
  }
  return lib;
}

void SpeakerLibrary::save(const std::filesystem::path& dir, const std::vector<LibraryEntry>& entries,
                          const std::map<std::string, Dvector>& dvectors) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& e : entries) {
    check_entry(e);
    const auto it = dvectors.find(e.speaker_id);
    if (it == dvectors.end()) {
      throw Error(ErrorCode::unknown_speaker, "no d-vector for " + e.speaker_id);
    }
    save_checkpoint(dir / (e.speaker_id + ".dvec"), to_checkpoint(it->second));
  }
  std::ofstream index(dir / "index.csv", std::ios::binary);
  if (!index) throw Error(ErrorCode::io, "cannot write " + (dir / "index.csv").string());
  write_csv_row(index, kIndexHeader);
  for (const auto& e : entries) write_csv_row(index, {e.speaker_id, e.accent, e.gender});
}

std::vector<std::string> SpeakerLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.speaker_id);
  return out;
}

const Dvector& SpeakerLibrary::dvector(const std::string& speaker_id) const {
  const auto it = dvectors_.find(speaker_id);
  if (it == dvectors_.end()) {
    std::string available;
    for (const auto& e : entries_) available += (available.empty() ? "" : ", ") + e.speaker_id;
    throw Error(ErrorCode::unknown_speaker,
                "unknown speaker '" + speaker_id + "'; available: " + available);
  }
  return it->second;
}

}  // namespace vclone
