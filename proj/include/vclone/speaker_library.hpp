#pragma once

#include "vclone/encoder.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vclone {

struct LibraryEntry {
  std::string speaker_id;
  std::string accent;  // western | indian
  std::string gender;
};

/// A directory of `<speaker_id>.dvec` checkpoints plus `index.csv`
/// (`speaker_id,accent,gender`).
class SpeakerLibrary {
 public:
  /// Reads the index and every referenced d-vector.
  static SpeakerLibrary load(const std::filesystem::path& dir);

  /// Writes the d-vectors and the index, replacing an existing index.
  static void save(const std::filesystem::path& dir, const std::vector<LibraryEntry>& entries,
                   const std::map<std::string, Dvector>& dvectors);

  const std::vector<LibraryEntry>& entries() const { return entries_; }
  std::vector<std::string> ids() const;
  /// Throws unknown_speaker listing the available ids.
  const Dvector& dvector(const std::string& speaker_id) const;

 private:
  std::vector<LibraryEntry> entries_;
  std::map<std::string, Dvector> dvectors_;
};

}  // namespace vclone
