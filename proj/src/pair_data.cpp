#include "aar/pair_data.hpp"

#include "aar/dense_index.hpp"
#include "aar/io.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace aar {

namespace {

std::string pair_key(const std::string& a, const std::string& b) {
  // Ids never contain '\0'; the key is order-insensitive.
  return a < b ? a + '\0' + b : b + '\0' + a;
}

}  // namespace

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "val" || s == "dev") return Split::Validation;
  throw Error(ErrorKind::InvalidArgument, "unknown split '" + s + "'");
}

const char* to_string(Split s) { return s == Split::Train ? "train" : "validation"; }

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Cooccurrence: return "cooccurrence";
    case Provenance::Shuffled: return "shuffled";
    case Provenance::SimilarPositives: return "similar_positives";
    case Provenance::Synthetic: return "synthetic";
  }
  return "unknown";
}

nlohmann::json record_to_json(const QuestionRecord& r) {
  nlohmann::json j = {{"question_id", r.question_id},
                      {"question_text", r.question_text},
                      {"gold_passage_ids", r.gold_passage_ids},
                      {"gold_answer", r.gold_answer},
                      {"split", to_string(r.split)}};
  if (!r.context_passage_ids.empty()) j["context_passage_ids"] = r.context_passage_ids;
  return j;
}

QuestionRecord record_from_json(const nlohmann::json& j) {
  QuestionRecord r;
  try {
    r.question_id = j.at("question_id").get<std::string>();
    r.question_text = j.value("question_text", std::string{});
    r.gold_passage_ids = j.at("gold_passage_ids").get<std::vector<std::string>>();
    r.gold_answer = j.value("gold_answer", std::string{});
    r.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("context_passage_ids")) {
      r.context_passage_ids = j.at("context_passage_ids").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptFile, std::string("bad question record: ") + e.what());
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : r.gold_passage_ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorKind::DuplicateId,
                  "record '" + r.question_id + "' lists gold passage '" + id + "' twice");
    }
  }
  return r;
}

std::vector<QuestionRecord> load_records(const std::filesystem::path& path) {
  std::vector<QuestionRecord> records;
  for (const auto& j : io::read_json_lines(path)) records.push_back(record_from_json(j));
  return records;
}

void save_records(const std::filesystem::path& path, const std::vector<QuestionRecord>& records) {
  std::vector<nlohmann::json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(record_to_json(r));
  io::write_text_atomic(path, io::to_json_lines(rows));
}

AssocPair canonical_pair(const std::string& a, const std::string& b, SplitMask splits) {
  return a < b ? AssocPair{a, b, splits} : AssocPair{b, a, splits};
}

AssocPairSet extract_pairs(const std::vector<QuestionRecord>& records, ExtractStats* stats) {
  AssocPairSet out;
  out.provenance = Provenance::Cooccurrence;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    const auto& gold = r.gold_passage_ids;
    if (gold.size() < 2) {
      ++skipped;
      continue;
    }
    const SplitMask bit = mask_of(r.split);
    out.source_splits |= bit;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      for (std::size_t j = i + 1; j < gold.size(); ++j) {
        if (gold[i] == gold[j]) continue;
        auto [it, inserted] = index.emplace(pair_key(gold[i], gold[j]), out.pairs.size());
        if (inserted) {
          out.pairs.push_back(canonical_pair(gold[i], gold[j], bit));
        } else {
          out.pairs[it->second].splits |= bit;
        }
      }
    }
  }
  if (stats) stats->skipped_records = skipped;
  return out;
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "transductive") return SplitMode::Transductive;
  if (s == "inductive") return SplitMode::Inductive;
  throw Error(ErrorKind::InvalidArgument, "unknown split mode '" + s + "'");
}

AssocPairSet split_policy(const AssocPairSet& pairs, SplitMode mode) {
  if (mode == SplitMode::Transductive) return pairs;
  AssocPairSet out;
  out.provenance = pairs.provenance;
  for (const auto& p : pairs.pairs) {
    if (p.splits & mask_of(Split::Train)) {
      out.pairs.push_back(p);
      out.pairs.back().splits = mask_of(Split::Train);
    }
  }
  out.source_splits = out.pairs.empty() ? 0 : mask_of(Split::Train);
  return out;
}

AssocPairSet shuffle_pairs(const AssocPairSet& pairs, std::uint64_t seed) {
  const std::size_t n = pairs.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "shuffle_pairs needs at least 2 pairs");

  std::mt19937_64 rng(seed);
  std::vector<std::string> right;
  right.reserve(n);
  for (const auto& p : pairs.pairs) right.push_back(p.second);
  std::shuffle(right.begin(), right.end(), rng);

  const auto& left = pairs.pairs;
  std::unordered_map<std::string, std::size_t> key_count;
  for (std::size_t i = 0; i < n; ++i) ++key_count[pair_key(left[i].first, right[i])];
  auto is_bad = [&](std::size_t i) {
    return left[i].first == right[i] || key_count[pair_key(left[i].first, right[i])] > 1;
  };

  // Re-roll offending positions by swapping right elements with random partners;
  // a swap is kept only when it does not make the partner bad.
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t max_attempts = 1000 * n + 1000;
  std::size_t attempts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (is_bad(i)) {
      if (++attempts > max_attempts) {
        throw Error(ErrorKind::Infeasible, "cannot shuffle pairs without self or duplicate pairs");
      }
      const std::size_t j = pick(rng);
      if (j == i) continue;
      --key_count[pair_key(left[i].first, right[i])];
      --key_count[pair_key(left[j].first, right[j])];
      std::swap(right[i], right[j]);
      ++key_count[pair_key(left[i].first, right[i])];
      ++key_count[pair_key(left[j].first, right[j])];
      if (is_bad(j) && j < i) {
        // Undo: the partner was already settled.
        --key_count[pair_key(left[i].first, right[i])];
        --key_count[pair_key(left[j].first, right[j])];
        std::swap(right[i], right[j]);
        ++key_count[pair_key(left[i].first, right[i])];
        ++key_count[pair_key(left[j].first, right[j])];
      }
    }
  }

  AssocPairSet out;
  out.provenance = Provenance::Shuffled;
  out.source_splits = pairs.source_splits;
  out.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.pairs.push_back({left[i].first, right[i], left[i].splits});
  }
  return out;
}

AssocPairSet similar_positive_pairs(const EmbeddingMatrix& m, std::size_t count) {
  AssocPairSet out;
  out.provenance = Provenance::SimilarPositives;
  if (count == 0) return out;
  if (!m.normalized) {
    throw Error(ErrorKind::InvalidArgument, "similar_positive_pairs needs a normalized matrix");
  }
  if (m.rows() < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 passages");

  struct Scored {
    float score;
    AssocPair pair;
  };
  std::vector<Scored> scored;
  std::unordered_set<std::string> seen;
  for (Index i = 0; i < m.rows(); ++i) {
    const auto pool = top_k(m.row(i), m, 2);
    const auto& nn = pool.candidates[0].passage_row != i ? pool.candidates[0]
                                                         : pool.candidates[1];
    const auto& a = m.ids.id(i);
    const auto& b = m.ids.id(nn.passage_row);
    if (seen.insert(pair_key(a, b)).second) scored.push_back({nn.score, canonical_pair(a, b)});
  }
  if (count > scored.size()) {
    throw Error(ErrorKind::OutOfRange, "requested " + std::to_string(count) +
                                           " similar pairs but only " +
                                           std::to_string(scored.size()) + " exist");
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.pair.first != y.pair.first) return x.pair.first < y.pair.first;
    return x.pair.second < y.pair.second;
  });
  for (std::size_t i = 0; i < count; ++i) out.pairs.push_back(std::move(scored[i].pair));
  return out;
}

OverlapStats overlap_stats(const std::vector<QuestionRecord>& train,
                           const std::vector<QuestionRecord>& validation) {
  auto contexts = [](const std::vector<QuestionRecord>& rs) {
    std::set<std::string> ids;
    for (const auto& r : rs) {
      ids.insert(r.gold_passage_ids.begin(), r.gold_passage_ids.end());
      ids.insert(r.context_passage_ids.begin(), r.context_passage_ids.end());
    }
    return ids;
  };
  auto golds = [](const std::vector<QuestionRecord>& rs) {
    std::set<std::string> ids;
    for (const auto& r : rs) ids.insert(r.gold_passage_ids.begin(), r.gold_passage_ids.end());
    return ids;
  };
  auto pair_keys = [](const std::vector<QuestionRecord>& rs) {
    std::set<std::string> keys;
    for (const auto& p : extract_pairs(rs).pairs) keys.insert(pair_key(p.first, p.second));
    return keys;
  };
  auto fraction = [](const std::set<std::string>& of, const std::set<std::string>& in) {
    if (of.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& x : of) hit += in.count(x);
    return static_cast<double>(hit) / static_cast<double>(of.size());
  };
  return {fraction(contexts(validation), contexts(train)), fraction(golds(validation), golds(train)),
          fraction(pair_keys(validation), pair_keys(train))};
}

void save_pairs(const std::filesystem::path& path, const AssocPairSet& pairs) {
  std::string text;
  for (const auto& p : pairs.pairs) {
    text += p.first;
    text += '\t';
    text += p.second;
    text += '\n';
  }
  io::write_text_atomic(path, text);
}

AssocPairSet load_pairs(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  AssocPairSet out;
  out.provenance = Provenance::Cooccurrence;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorKind::CorruptFile,
                  path.string() + ":" + std::to_string(lineno) + ": expected two tab-separated ids");
    }
    out.pairs.push_back({line.substr(0, tab), line.substr(tab + 1), 0});
  }
  return out;
}

void check_resolvable(const AssocPairSet& pairs, const EmbeddingMatrix& corpus) {
  for (const auto& p : pairs.pairs) {
    corpus.ids.row(p.first);
    corpus.ids.row(p.second);
  }
}

}  // namespace aar
