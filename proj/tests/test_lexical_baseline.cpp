#include "aar/lexical_baseline.hpp"
#include "support.hpp"

#include <set>

using namespace aar;

namespace {

using Corpus = std::vector<std::pair<std::string, std::string>>;

const Corpus kFive = {{"p0", "apple banana"},
                      {"p1", "Apple apple, cherry date"},
                      {"p2", "cherry"},
                      {"p3", "egg fig"},
                      {"p4", "grape"}};

CandidatePool pool_of(std::vector<std::pair<Index, float>> rows) {
  CandidatePool pool;
  for (auto [r, s] : rows) pool.candidates.push_back({r, s});
  return pool;
}

Corpus random_corpus(std::mt19937_64& rng, int docs, int vocab) {
  std::uniform_int_distribution<int> len(1, 12), word(0, vocab - 1);
  Corpus out;
  for (int i = 0; i < docs; ++i) {
    std::string text;
    for (int t = len(rng); t > 0; --t) text += "w" + std::to_string(word(rng)) + " ";
    out.push_back({"d" + std::to_string(i), text});
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Hello, World! x86-64") == std::vector<std::string>{"hello", "world", "x86", "64"});
  CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("index statistics") {
  SUBCASE("single doc counts") {
    const auto idx = build_lexical_index({{"d", "a b b"}});
    CHECK(idx.term_freqs[0] == std::unordered_map<std::string, int>{{"a", 1}, {"b", 2}});
    CHECK(idx.doc_lengths[0] == 3);
  }
  SUBCASE("average length") {
    const auto idx = build_lexical_index({{"x", "a b"}, {"y", "c d e f"}});
    CHECK(idx.avg_doc_length == 3.0);
  }
  SUBCASE("document frequencies match a recount") {
    std::mt19937_64 rng(4);
    const auto corpus = random_corpus(rng, 20, 15);
    const auto idx = build_lexical_index(corpus);
    std::unordered_map<std::string, int> df;
    for (const auto& [id, text] : corpus) {
      const auto toks = tokenize(text);
      for (const auto& t : std::set<std::string>(toks.begin(), toks.end())) ++df[t];
    }
    CHECK(idx.doc_freqs == df);
    for (const auto& [t, n] : idx.doc_freqs) CHECK(n <= idx.size());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(build_lexical_index({}), Error);
    CHECK_THROWS_AS(build_lexical_index({{"a", "!!"}}), Error);
    CHECK_THROWS_AS(build_lexical_index({{"a", "x"}}, 0.0), Error);
    CHECK_THROWS_AS(build_lexical_index({{"a", "x"}}, 1.2, 1.5), Error);
  }
}

TEST_CASE("bm25_score") {
  const auto idx = build_lexical_index(kFive);
  SUBCASE("hand-computed single term") {
    // N=5, df(cherry)=2, lengths 2 4 1 2 1 so avg 2.
    const double idf = std::log(3.5 / 2.5);
    CHECK(bm25_score(idx, "cherry", "p1") == doctest::Approx(idf * 2.2 / (1 + 1.2 * 1.75)).epsilon(1e-12));
    CHECK(bm25_score(idx, "cherry", "p2") == doctest::Approx(idf * 2.2 / (1 + 1.2 * 0.625)).epsilon(1e-12));
    CHECK(bm25_score(idx, "cherry", "p2") == doctest::Approx(0.42300).epsilon(1e-4));
  }
  SUBCASE("absent terms and empty queries") {
    CHECK(bm25_score(idx, "cherry", "p0") == 0.0);
    CHECK(bm25_score(idx, "banana zebra", "p0") == bm25_score(idx, "banana", "p0"));
    CHECK(bm25_score(idx, "", "p0") == 0.0);
  }
  SUBCASE("repeated query terms count twice") {
    CHECK(bm25_score(idx, "cherry cherry", "p2") == doctest::Approx(2 * bm25_score(idx, "cherry", "p2")));
  }
  SUBCASE("idf is clamped at zero") {
    const auto small = build_lexical_index({{"a", "x y"}, {"b", "x z"}, {"c", "w"}});
    CHECK(small.idf("x") == 0.0);
    CHECK(bm25_score(small, "x", "a") == 0.0);
    CHECK(small.idf("unseen") == 0.0);
  }
  SUBCASE("unknown passage") {
    try {
      bm25_score(idx, "x", "p9");
      FAIL("expected UnknownId");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownId);
    }
  }
}

TEST_CASE("bm25 properties") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = random_corpus(rng, 15, 10);
    const auto idx = build_lexical_index(corpus);
    for (const auto& [qid, qtext] : random_corpus(rng, 5, 12)) {
      for (const auto& [id, text] : corpus) CHECK(bm25_score(idx, qtext, id) >= 0.0);
    }
    corpus.push_back({"extra", "unrelated vocabulary only"});
    const auto grown = build_lexical_index(corpus);
    for (Index i = 0; i < idx.size(); ++i) {
      CHECK(grown.term_freqs[static_cast<std::size_t>(i)] == idx.term_freqs[static_cast<std::size_t>(i)]);
      CHECK(grown.doc_lengths[static_cast<std::size_t>(i)] == idx.doc_lengths[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("bm25_rerank") {
  const auto idx = build_lexical_index(kFive);
  const auto passages = aar::test::unit_matrix(5, 4, 1, "p");
  const auto pool = pool_of({{0, 0.80f}, {1, 0.78f}, {2, 0.70f}, {3, 0.20f}});

  SUBCASE("lambda 0 keeps dense order") {
    const auto out = bm25_rerank(pool, "cherry", idx, passages, 0.0, 4);
    for (int i = 0; i < 4; ++i) CHECK(out[i].passage_row == pool.candidates[i].passage_row);
  }
  SUBCASE("lambda 1 with a verbatim passage query") {
    const auto out = bm25_rerank(pool, "egg fig", idx, passages, 1.0, 4);
    CHECK(out[0].passage_row == 3);
    CHECK(out[0].assoc == 1.0f);
  }
  SUBCASE("lambda 0.1 hand blend") {
    // Normalized BM25 over the pool: p0 0, p1 s1/s2, p2 1, p3 0.
    const double ratio = (1 + 1.2 * 0.625) / (1 + 1.2 * 1.75);
    const auto out = bm25_rerank(pool, "cherry", idx, passages, 0.1, 3);
    REQUIRE(out.size() == 3);
    CHECK(out[0].passage_row == 1);
    CHECK(out[1].passage_row == 2);
    CHECK(out[2].passage_row == 0);
    CHECK(out[0].blended == doctest::Approx(0.9 * 0.78 + 0.1 * ratio).epsilon(1e-6));
    CHECK(out[1].blended == doctest::Approx(0.9 * 0.70 + 0.1).epsilon(1e-6));
    CHECK(out[2].blended == doctest::Approx(0.72).epsilon(1e-6));
  }
  SUBCASE("constant scores normalize to zero") {
    const auto out = bm25_rerank(pool, "zebra", idx, passages, 0.5, 4);
    for (const auto& c : out) CHECK(c.assoc == 0.0f);
    CHECK(out[0].passage_row == 0);
  }
}
