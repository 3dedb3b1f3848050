#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dolores/corpus.hpp>

#include <cmath>
#include <random>

using namespace dolores;

namespace {

std::vector<Document> mini_corpus() {
    return {
        {"earle-coe", "Earle Coe",
         "The son of Earle Coe is Reggie Coe.\nThe date of birth of Earle Coe is "
         "0984-05-03."},
        {"reggie-coe", "Reggie Coe", "The wife of Reggie Coe is Lissa Coe."},
        {"lissa-coe", "Lissa Coe", "The friend of Lissa Coe is Bobbie Luu."},
        {"bobbie-luu", "Bobbie Luu", "The occupation of Bobbie Luu is florist."},
    };
}

/// Independent BM25 oracle: recomputes everything from the raw documents
/// without touching CorpusIndex internals.
std::vector<std::string> brute_force_top_k(const std::vector<Document>& docs,
                                           const std::string& query, int k) {
    const double k1 = 1.2, b = 0.75;
    size_t n = docs.size();
    std::vector<std::map<std::string, int>> tf(n);
    for (size_t i = 0; i < n; ++i) {
        for (const std::string& t : corpus_terms(docs[i].title)) tf[i][t] += 2;
        for (const std::string& t : corpus_terms(docs[i].body)) tf[i][t] += 1;
    }
    std::map<std::string, int> df;
    for (size_t i = 0; i < n; ++i)
        for (const auto& [term, cnt] : tf[i]) df[term] += 1;
    std::vector<double> len(n, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        for (const auto& [term, cnt] : tf[i]) len[i] += cnt;
        total += len[i];
    }
    double avg = n == 0 ? 1.0 : std::max(total / double(n), 1e-9);

    std::vector<std::pair<double, size_t>> scored;
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const std::string& term : corpus_terms(query)) {
            auto it = tf[i].find(term);
            if (it == tf[i].end()) continue;
            double f = it->second;
            double idf =
                std::log((double(n) - df[term] + 0.5) / (df[term] + 0.5) + 1.0);
            s += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len[i] / avg));
        }
        if (s > 0.0) scored.emplace_back(s, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [&](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return docs[x.second].id < docs[y.second].id;
    });
    std::vector<std::string> ids;
    for (size_t i = 0; i < scored.size() && (int)i < k; ++i)
        ids.push_back(docs[scored[i].second].id);
    return ids;
}

std::vector<Document> random_corpus(std::mt19937& rng) {
    static const std::vector<std::string> words = {
        "beach", "volleyball", "court", "score", "match",  "city",  "bay",
        "engineer", "florist",  "coe",   "luu",   "friend", "birth", "game"};
    int n = 1 + int(rng() % 12);
    std::vector<Document> docs;
    for (int i = 0; i < n; ++i) {
        Document d;
        d.id = "doc-" + std::to_string(i);
        d.title = words[rng() % words.size()] + " " + std::to_string(i);
        int len = int(rng() % 30);
        for (int w = 0; w < len; ++w) d.body += words[rng() % words.size()] + " ";
        docs.push_back(std::move(d));
    }
    return docs;
}

std::string random_query(std::mt19937& rng) {
    static const std::vector<std::string> words = {"beach", "score", "coe",
                                                   "florist", "city", "absent"};
    std::string q;
    int len = 1 + int(rng() % 3);
    for (int i = 0; i < len; ++i) q += words[rng() % words.size()] + " ";
    return q;
}

}  // namespace

TEST_CASE("build_index uniqueness invariants") {
    CHECK_NOTHROW(build_index(mini_corpus()));
    auto dup_id = mini_corpus();
    dup_id[1].id = dup_id[0].id;
    CHECK_THROWS_AS(build_index(dup_id), DuplicateId);
    auto dup_title = mini_corpus();
    dup_title[1].title = dup_title[0].title;
    try {
        build_index(dup_title);
        FAIL("expected DuplicateTitle");
    } catch (const DuplicateTitle& e) {
        CHECK(std::string(e.what()).find("Earle Coe") != std::string::npos);
    }
}

TEST_CASE("basic search behavior") {
    CorpusIndex index = build_index(mini_corpus());
    SUBCASE("attribute-style query ranks the matching article first") {
        auto hits = search(index, "0984-05-03");
        REQUIRE(!hits.empty());
        CHECK(hits[0].document.title == "Earle Coe");
    }
    SUBCASE("k larger than corpus returns the whole ranked corpus") {
        auto hits = search(index, "Coe", 50);
        CHECK(hits.size() == 3);  // Bobbie Luu's article also mentions no Coe
    }
    SUBCASE("query with no indexed terms") {
        CHECK(search(index, "zzz qqq").empty());
        CHECK(search(index, "").empty());
    }
    SUBCASE("empty corpus") {
        CorpusIndex empty = build_index({});
        CHECK(search(empty, "anything").empty());
    }
}

TEST_CASE("retrieve_article exactness and suggestions") {
    CorpusIndex index = build_index(mini_corpus());
    CHECK(retrieve_article(index, "Earle Coe").body.find(
              "The son of Earle Coe is Reggie Coe.") != std::string::npos);
    SUBCASE("case-sensitive miss suggests the real title") {
        try {
            retrieve_article(index, "earle coe");
            FAIL("expected NotFound");
        } catch (const NotFound& e) {
            REQUIRE(e.suggestions.size() == 3);
            CHECK(e.suggestions[0] == "Earle Coe");
        }
    }
    SUBCASE("empty corpus has no suggestions") {
        CorpusIndex empty = build_index({});
        try {
            retrieve_article(empty, "Anyone");
            FAIL("expected NotFound");
        } catch (const NotFound& e) {
            CHECK(e.suggestions.empty());
        }
    }
    SUBCASE("totality: every indexed title retrieves its own document") {
        for (const Document& d : mini_corpus())
            CHECK(retrieve_article(index, d.title) == d);
    }
}

TEST_CASE("oracle equivalence on generated corpora") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Document> docs = random_corpus(rng);
        CorpusIndex index = build_index(docs);
        std::string query = random_query(rng);
        int k = 1 + int(rng() % 6);
        auto hits = search(index, query, k);
        std::vector<std::string> got;
        for (const auto& h : hits) got.push_back(h.document.id);
        CHECK(got == brute_force_top_k(docs, query, k));
    }
}

TEST_CASE("monotone k: top-k is a prefix of top-(k+1)") {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Document> docs = random_corpus(rng);
        CorpusIndex index = build_index(docs);
        std::string query = random_query(rng);
        for (int k = 1; k < 6; ++k) {
            auto small = search(index, query, k);
            auto big = search(index, query, k + 1);
            REQUIRE(small.size() <= big.size());
            for (size_t i = 0; i < small.size(); ++i)
                CHECK(small[i].document.id == big[i].document.id);
        }
    }
}

TEST_CASE("hit rendering") {
    SearchHit hit;
    hit.document.title = "Earle Coe";
    hit.document.body = std::string(400, 'x');
    std::string rendered = render_hit(hit, 1);
    CHECK(rendered.rfind("(1) Earle Coe\n", 0) == 0);
    CHECK(rendered.size() == std::string("(1) Earle Coe\n").size() + 300);
}

TEST_CASE("host functions") {
    CorpusIndex index = build_index(mini_corpus());
    HostFunction search_host = make_search_host(index);
    HostFunction retrieve_host = make_retrieve_host(index);

    ValueList args{Value::str("0984-05-03")};
    Kwargs kw;
    Value hits = search_host.fn(args, kw, {});
    REQUIRE(hits.is_list());
    REQUIRE(!hits.as_list().empty());
    CHECK(hits.as_list()[0].as_str().rfind("(1) Earle Coe\n", 0) == 0);

    ValueList title{Value::str("Reggie Coe")};
    Value body = retrieve_host.fn(title, kw, {});
    CHECK(body.as_str() == "The wife of Reggie Coe is Lissa Coe.");

    ValueList bad{Value::str("reggie coe")};
    try {
        retrieve_host.fn(bad, kw, {});
        FAIL("expected RuntimeError");
    } catch (const RuntimeError& e) {
        CHECK(e.kind == ErrKind::HostFailure);
        CHECK(std::string(e.what()).find("Reggie Coe") != std::string::npos);
    }
}

TEST_CASE("directory round-trip") {
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "dolores-corpus-test";
    std::filesystem::remove_all(dir);
    std::vector<Document> docs = mini_corpus();
    save_corpus_dir(docs, dir);
    std::vector<Document> back = load_corpus_dir(dir);
    std::sort(back.begin(), back.end(),
              [](const Document& a, const Document& b) { return a.id < b.id; });
    std::sort(docs.begin(), docs.end(),
              [](const Document& a, const Document& b) { return a.id < b.id; });
    CHECK(back == docs);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_corpus_dir(dir), ConfigError);
}

TEST_CASE("ndjson round-trip") {
    std::vector<Document> docs = mini_corpus();
    CHECK(parse_corpus_ndjson(corpus_ndjson(docs)) == docs);
    CHECK_THROWS_AS(parse_corpus_ndjson("{broken\n"), FormatError);
}
