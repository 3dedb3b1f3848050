#pragma once

// Corpus tools: BM25 lexical search and exact-title article retrieval over a
// local document collection, exposed to agents as host functions.

#include <dolores/errors.hpp>
#include <dolores/interp.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dolores {

struct Document {
    std::string id;
    std::string title;
    std::string body;

    bool operator==(const Document&) const = default;
};

struct DuplicateId : std::runtime_error {
    explicit DuplicateId(const std::string& id)
        : std::runtime_error("duplicate document id: " + id) {}
};

struct DuplicateTitle : std::runtime_error {
    explicit DuplicateTitle(const std::string& title)
        : std::runtime_error("duplicate document title: " + title) {}
};

struct NotFound : std::runtime_error {
    std::vector<std::string> suggestions;  // up to 3 closest titles
    NotFound(const std::string& title, std::vector<std::string> close)
        : std::runtime_error(render(title, close)), suggestions(std::move(close)) {}

private:
    static std::string render(const std::string& title,
                              const std::vector<std::string>& close) {
        std::string msg = "no article titled \"" + title + "\"";
        if (!close.empty()) {
            msg += "; closest titles:";
            for (const std::string& t : close) msg += " \"" + t + "\"";
        }
        return msg;
    }
};

/// Lowercased terms split on non-alphanumerics.
inline std::vector<std::string> corpus_terms(const std::string& text) {
    std::vector<std::string> terms;
    std::string cur;
    for (char c : text) {
        if (std::isalnum((unsigned char)c)) {
            cur += (char)std::tolower((unsigned char)c);
        } else if (!cur.empty()) {
            terms.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) terms.push_back(cur);
    return terms;
}

class CorpusIndex {
public:
    static constexpr double kBm25K1 = 1.2;
    static constexpr double kBm25B = 0.75;
    static constexpr int kTitleWeight = 2;

    const std::vector<Document>& documents() const { return docs_; }
    size_t size() const { return docs_.size(); }

    /// BM25 score of document `doc` for `query_terms`; the same function the
    /// brute-force test oracle calls per document.
    double score(size_t doc, const std::vector<std::string>& query_terms) const {
        double s = 0.0;
        for (const std::string& term : query_terms) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const auto& plist = it->second;
            auto hit = std::lower_bound(
                plist.begin(), plist.end(), doc,
                [](const std::pair<size_t, int>& p, size_t d) { return p.first < d; });
            if (hit == plist.end() || hit->first != doc) continue;
            double tf = hit->second;
            double df = (double)plist.size();
            double idf = std::log((double(docs_.size()) - df + 0.5) / (df + 0.5) + 1.0);
            double norm = kBm25K1 * (1.0 - kBm25B +
                                     kBm25B * lengths_[doc] / average_length_);
            s += idf * tf * (kBm25K1 + 1.0) / (tf + norm);
        }
        return s;
    }

    friend CorpusIndex build_index(std::vector<Document> documents);

private:
    std::vector<Document> docs_;
    // term -> (doc position, weighted term frequency), positions ascending
    std::map<std::string, std::vector<std::pair<size_t, int>>> postings_;
    std::vector<double> lengths_;  // weighted document lengths
    double average_length_ = 1.0;
};

inline CorpusIndex build_index(std::vector<Document> documents) {
    CorpusIndex index;
    std::map<std::string, size_t> seen_ids;
    std::map<std::string, size_t> seen_titles;
    for (const Document& d : documents) {
        if (seen_ids.count(d.id)) throw DuplicateId(d.id);
        if (seen_titles.count(d.title)) throw DuplicateTitle(d.title);
        seen_ids[d.id] = 1;
        seen_titles[d.title] = 1;
    }
    index.docs_ = std::move(documents);
    double total_len = 0.0;
    for (size_t i = 0; i < index.docs_.size(); ++i) {
        std::map<std::string, int> tf;
        for (const std::string& t : corpus_terms(index.docs_[i].title))
            tf[t] += CorpusIndex::kTitleWeight;
        for (const std::string& t : corpus_terms(index.docs_[i].body)) tf[t] += 1;
        double len = 0.0;
        for (const auto& [term, n] : tf) {
            index.postings_[term].emplace_back(i, n);
            len += n;
        }
        index.lengths_.push_back(len);
        total_len += len;
    }
    index.average_length_ =
        index.docs_.empty() ? 1.0 : std::max(total_len / double(index.docs_.size()), 1e-9);
    return index;
}

struct SearchHit {
    Document document;
    double score = 0.0;
};

/// Top-k by BM25; ties broken by ascending document id. Documents matching no
/// query term are omitted.
inline std::vector<SearchHit> search(const CorpusIndex& index, const std::string& query,
                                     int k = 5) {
    if (k < 1) throw ConfigError("search: k must be >= 1");
    std::vector<std::string> terms = corpus_terms(query);
    std::vector<std::pair<double, size_t>> scored;
    for (size_t i = 0; i < index.size(); ++i) {
        double s = index.score(i, terms);
        if (s > 0.0) scored.emplace_back(s, i);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [&](const auto& a, const auto& b) {
                         if (a.first != b.first) return a.first > b.first;
                         return index.documents()[a.second].id <
                                index.documents()[b.second].id;
                     });
    std::vector<SearchHit> hits;
    for (size_t i = 0; i < scored.size() && (int)i < k; ++i)
        hits.push_back({index.documents()[scored[i].second], scored[i].first});
    return hits;
}

inline int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = (int)j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = (int)i;
        for (size_t j = 1; j <= b.size(); ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Exact, case-sensitive title match; a miss lists the 3 closest titles.
inline const Document& retrieve_article(const CorpusIndex& index,
                                        const std::string& title) {
    for (const Document& d : index.documents())
        if (d.title == title) return d;
    std::vector<std::pair<int, std::string>> ranked;
    for (const Document& d : index.documents())
        ranked.emplace_back(edit_distance(title, d.title), d.title);
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> close;
    for (size_t i = 0; i < ranked.size() && i < 3; ++i)
        close.push_back(ranked[i].second);
    throw NotFound(title, std::move(close));
}

/// "(<rank>) <title>\n<first 300 chars of body>" per hit.
inline std::string render_hit(const SearchHit& hit, int rank) {
    return "(" + std::to_string(rank) + ") " + hit.document.title + "\n" +
           hit.document.body.substr(0, 300);
}

// ---------------------------------------------------------------------------
// Host functions for the agent loop

inline HostFunction make_search_host(const CorpusIndex& index, int k = 5) {
    HostFunction h;
    h.name = "search";
    h.signature = "search(query) -> list of hit strings";
    h.doc = "Rank corpus documents against the query; each hit is "
            "\"(rank) title\" plus a body excerpt.";
    h.effect = EffectClass::ToolCall;
    h.min_args = 1;
    h.max_args = 1;
    h.fn = [&index, k](ValueList& a, Kwargs&, Span sp) {
        if (!a[0].is_str())
            throw RuntimeError(ErrKind::TypeMismatch, "search: query must be a string",
                               sp);
        std::vector<SearchHit> hits = search(index, a[0].as_str(), k);
        ValueList out;
        for (size_t i = 0; i < hits.size(); ++i)
            out.push_back(Value::str(render_hit(hits[i], (int)i + 1)));
        return Value::list(std::move(out));
    };
    return h;
}

inline HostFunction make_retrieve_host(const CorpusIndex& index) {
    HostFunction h;
    h.name = "retrieve_article";
    h.signature = "retrieve_article(title) -> str";
    h.doc = "Return the full article with this exact title; a miss suggests "
            "the closest titles.";
    h.effect = EffectClass::ToolCall;
    h.min_args = 1;
    h.max_args = 1;
    h.fn = [&index](ValueList& a, Kwargs&, Span sp) {
        if (!a[0].is_str())
            throw RuntimeError(ErrKind::TypeMismatch,
                               "retrieve_article: title must be a string", sp);
        try {
            return Value::str(retrieve_article(index, a[0].as_str()).body);
        } catch (const NotFound& e) {
            throw RuntimeError(ErrKind::HostFailure, e.what(), sp);
        }
    };
    return h;
}

// ---------------------------------------------------------------------------
// Load/save: a directory of plain-text files (filename = id, first line =
// title, rest = body) or one line-delimited records file.

inline void save_corpus_dir(const std::vector<Document>& docs,
                            const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const Document& d : docs) {
        std::ofstream out(dir / (d.id + ".txt"), std::ios::binary);
        out << d.title << '\n' << d.body;
    }
}

inline std::vector<Document> load_corpus_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("corpus directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        size_t nl = text.find('\n');
        Document d;
        d.id = path.stem().string();
        d.title = nl == std::string::npos ? text : text.substr(0, nl);
        d.body = nl == std::string::npos ? "" : text.substr(nl + 1);
        docs.push_back(std::move(d));
    }
    return docs;
}

inline std::string corpus_ndjson(const std::vector<Document>& docs) {
    std::string out;
    for (const Document& d : docs) {
        nlohmann::json j = {{"id", d.id}, {"title", d.title}, {"body", d.body}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Document> parse_corpus_ndjson(const std::string& text) {
    std::vector<Document> docs;
    size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            docs.push_back({j.at("id").get<std::string>(),
                            j.at("title").get<std::string>(),
                            j.at("body").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(lineno, std::string("bad corpus record: ") + e.what());
        }
    }
    return docs;
}

}  // namespace dolores
