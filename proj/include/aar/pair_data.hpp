#ifndef AAR_PAIR_DATA_HPP
#define AAR_PAIR_DATA_HPP

#include "aar/common.hpp"
#include "aar/embedding_store.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aar {

enum class Split : std::uint8_t { Train = 1, Validation = 2 };

/// Bit set over Split values.
using SplitMask = std::uint8_t;

constexpr SplitMask mask_of(Split s) { return static_cast<SplitMask>(s); }

Split parse_split(const std::string& s);
const char* to_string(Split s);

struct QuestionRecord {
  std::string question_id;
  std::string question_text;
  std::vector<std::string> gold_passage_ids;
  std::string gold_answer;
  Split split = Split::Validation;
  /// Every passage shown with the question (gold and distractors). Optional in
  /// the interchange format; empty means "gold passages only".
  std::vector<std::string> context_passage_ids;
};

/// JSON lines, one record per line, keys named exactly as the struct fields;
/// split is "train" or "validation".
std::vector<QuestionRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<QuestionRecord>& records);
nlohmann::json record_to_json(const QuestionRecord& r);
QuestionRecord record_from_json(const nlohmann::json& j);

enum class Provenance { Cooccurrence, Shuffled, SimilarPositives, Synthetic };
const char* to_string(Provenance p);

struct AssocPair {
  std::string first;
  std::string second;
  SplitMask splits = 0;  // splits of the records that produced the pair

  friend bool operator==(const AssocPair&, const AssocPair&) = default;
};

struct AssocPairSet {
  std::vector<AssocPair> pairs;
  Provenance provenance = Provenance::Cooccurrence;
  SplitMask source_splits = 0;

  std::size_t size() const { return pairs.size(); }
};

/// Lexicographically ordered pair, the canonical unordered form.
AssocPair canonical_pair(const std::string& a, const std::string& b, SplitMask splits = 0);

struct ExtractStats {
  std::size_t skipped_records = 0;
};

/// All C(h, 2) gold pairs per record, deduplicated across records in first-seen
/// order; split bits of duplicates are merged. Records with fewer than two gold
/// passages are skipped and counted.
AssocPairSet extract_pairs(const std::vector<QuestionRecord>& records,
                           ExtractStats* stats = nullptr);

enum class SplitMode { Transductive, Inductive };
SplitMode parse_split_mode(const std::string& s);

/// Transductive keeps every pair; inductive keeps pairs seen in a train record.
AssocPairSet split_policy(const AssocPairSet& pairs, SplitMode mode);

/// Permutes the second elements with a seeded shuffle and re-rolls self-pairs
/// and duplicate pairs. Left and right multisets are preserved.
AssocPairSet shuffle_pairs(const AssocPairSet& pairs, std::uint64_t seed);

/// Each passage paired with its nearest other passage; the unique pairs ranked
/// by similarity (ties by canonical ids) and the top `count` kept.
AssocPairSet similar_positive_pairs(const EmbeddingMatrix& m, std::size_t count);

/// All fractions are over distinct ids / distinct pairs of the validation side.
struct OverlapStats {
  double passage_overlap = 0;  // validation context ids found in any train context
  double title_overlap = 0;    // validation gold ids found among train gold ids
  double pair_overlap = 0;     // validation pairs that are exact train pairs
};

OverlapStats overlap_stats(const std::vector<QuestionRecord>& train,
                           const std::vector<QuestionRecord>& validation);

/// Pairs as "first<TAB>second" lines.
void save_pairs(const std::filesystem::path& path, const AssocPairSet& pairs);
AssocPairSet load_pairs(const std::filesystem::path& path);

/// Throws UnknownId for the first unresolvable id.
void check_resolvable(const AssocPairSet& pairs, const EmbeddingMatrix& corpus);

}  // namespace aar

#endif  // AAR_PAIR_DATA_HPP
