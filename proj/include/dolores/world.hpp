#pragma once

// Synthetic wiki-style worlds: a deterministic family/friendship graph, a
// renderer producing one article per person, a question generator, and a
// brute-force answer oracle over relation chains.

#include <dolores/corpus.hpp>
#include <dolores/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dolores {

inline constexpr int kWorldSchemaVersion = 1;

// relation roles stored on persons, in rendering order
inline const std::vector<std::string>& world_roles() {
    static const std::vector<std::string> roles = {
        "mother", "father", "son", "daughter", "wife", "husband", "friend"};
    return roles;
}

// derived roles usable in question chains
inline const std::vector<std::string>& derived_roles() {
    static const std::vector<std::string> roles = {"daughter-in-law", "son-in-law"};
    return roles;
}

inline const std::vector<std::string>& world_attributes() {
    static const std::vector<std::string> keys = {"date_of_birth", "occupation",
                                                  "hobby"};
    return keys;
}

struct WorldSpec {
    int size = 50;
    std::uint64_t seed = 1;
    int schema_version = kWorldSchemaVersion;
};

struct Person {
    std::string name;
    std::map<std::string, std::vector<std::string>> relations;  // role -> names
    std::map<std::string, std::string> attributes;
};

struct WorldGraph {
    std::vector<Person> persons;
    int schema_version = kWorldSchemaVersion;

    const Person* find(const std::string& name) const {
        for (const Person& p : persons)
            if (p.name == name) return &p;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Validation

inline std::optional<std::string> validate_world(const WorldGraph& world) {
    std::set<std::string> names;
    std::set<std::string> dobs;
    auto has_link = [&](const std::string& from, const std::string& role,
                        const std::string& to) {
        const Person* p = world.find(from);
        if (!p) return false;
        auto it = p->relations.find(role);
        if (it == p->relations.end()) return false;
        return std::find(it->second.begin(), it->second.end(), to) != it->second.end();
    };
    static const std::map<std::string, std::vector<std::string>> inverse = {
        {"wife", {"husband"}},       {"husband", {"wife"}},
        {"friend", {"friend"}},      {"mother", {"son", "daughter"}},
        {"father", {"son", "daughter"}}, {"son", {"mother", "father"}},
        {"daughter", {"mother", "father"}}};

    for (const Person& p : world.persons) {
        if (p.name.empty()) return "empty person name";
        if (!names.insert(p.name).second) return "duplicate name " + p.name;
    }
    for (const Person& p : world.persons) {
        for (const auto& [role, targets] : p.relations) {
            if (std::find(world_roles().begin(), world_roles().end(), role) ==
                world_roles().end())
                return "unknown role " + role + " on " + p.name;
            for (const std::string& t : targets) {
                if (!names.count(t))
                    return p.name + " references unknown person " + t;
                if (t == p.name) return p.name + " is their own " + role;
                bool mutual = false;
                for (const std::string& inv : inverse.at(role))
                    if (has_link(t, inv, p.name)) mutual = true;
                if (!mutual)
                    return role + " link " + p.name + " -> " + t + " not mirrored";
            }
        }
        auto dob = p.attributes.find("date_of_birth");
        if (dob == p.attributes.end()) return p.name + " lacks date_of_birth";
        const std::string& d = dob->second;
        if (d.size() != 10 || d[4] != '-' || d[7] != '-' ||
            d.find_first_not_of("0123456789-") != std::string::npos)
            return p.name + " has malformed date " + d;
        if (!dobs.insert(d).second) return "duplicate date of birth " + d;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Generation
//
// Persons are grouped into families (a married couple plus children); some
// children marry across families; friendships are random symmetric edges.
// All randomness flows through one seeded generator with portable bounded
// draws, so a (size, seed) pair always yields the same world bytes.

namespace worldgen {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next() {
        // splitmix64: stable across platforms, unlike the std distributions
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::uint64_t state_;
};

inline const std::vector<std::string>& female_first_names() {
    static const std::vector<std::string> names = {
        "Alycia", "Christina", "Lissa",  "Marisol", "Dorthea", "Yuki",
        "Ilse",   "Priya",     "Noor",   "Cleo",    "Maren",   "Sable",
        "Odette", "Tamsin",    "Vera",   "Lucinda", "Harriet", "Ingrid",
        "Paloma", "Ramona"};
    return names;
}

inline const std::vector<std::string>& male_first_names() {
    static const std::vector<std::string> names = {
        "Earle",  "Reggie", "Christoper", "Bobbie", "Aldous", "Ferdinand",
        "Hollis", "Ignatz", "Jarvis",     "Kelvin", "Lyle",   "Mordecai",
        "Niles",  "Osbert", "Percival",   "Quincy", "Rufus",  "Silas",
        "Thaddeus", "Ulric"};
    return names;
}

inline const std::vector<std::string>& last_names() {
    static const std::vector<std::string> names = {
        "Coe",    "Luu",     "Vance",    "Okafor",  "Brandt", "Castellan",
        "Dray",   "Eversole", "Fenwick", "Grimaldi", "Holt",  "Iverson",
        "Jasper", "Krane",   "Lowell",   "Marsh",   "Nyberg", "Ostrander"};
    return names;
}

inline const std::vector<std::string>& occupations() {
    static const std::vector<std::string> jobs = {
        "petroleum engineer", "florist",   "cartographer", "locksmith",
        "glassblower",        "archivist", "beekeeper",    "typesetter",
        "surveyor",           "milliner"};
    return jobs;
}

inline const std::vector<std::string>& hobbies() {
    static const std::vector<std::string> hs = {
        "beach volleyball", "orienteering", "calligraphy", "birdwatching",
        "chess",            "canoeing",     "astronomy",   "baking"};
    return hs;
}

}  // namespace worldgen

inline WorldGraph generate_world(const WorldSpec& spec) {
    if (spec.size < 2) throw ConfigError("world size must be >= 2");
    if (spec.schema_version != kWorldSchemaVersion)
        throw ConfigError("unsupported world schema version " +
                          std::to_string(spec.schema_version));
    worldgen::Rng rng(spec.seed);
    WorldGraph world;
    world.schema_version = spec.schema_version;

    // unique names: (gender, first, last); family members share the last name
    std::set<std::string> used_names;
    std::vector<bool> is_female;
    auto make_name = [&](bool female, const std::string& last) {
        const auto& pool = female ? worldgen::female_first_names()
                                  : worldgen::male_first_names();
        for (int attempt = 0;; ++attempt) {
            std::string first = pool[rng.below(pool.size())];
            std::string name = first + " " + last;
            if (attempt > 40) name += " " + std::to_string(rng.below(90) + 10);
            if (used_names.insert(name).second) return name;
        }
    };
    auto add_person = [&](bool female, const std::string& last) {
        Person p;
        p.name = make_name(female, last);
        world.persons.push_back(std::move(p));
        is_female.push_back(female);
        return world.persons.size() - 1;
    };
    auto link = [&](size_t a, const std::string& role_ab, size_t b,
                    const std::string& role_ba) {
        world.persons[a].relations[role_ab].push_back(world.persons[b].name);
        world.persons[b].relations[role_ba].push_back(world.persons[a].name);
    };

    // families
    std::vector<size_t> unmarried_f, unmarried_m;
    while ((int)world.persons.size() < spec.size) {
        int remaining = spec.size - (int)world.persons.size();
        int fam = remaining >= 4 ? 2 + (int)rng.below(3) : remaining;  // 2..4
        std::string last = worldgen::last_names()[rng.below(
            worldgen::last_names().size())];
        if (fam >= 2) {
            size_t wife = add_person(true, last);
            size_t husband = add_person(false, last);
            link(wife, "husband", husband, "wife");
            for (int c = 2; c < fam; ++c) {
                bool female = rng.below(2) == 0;
                size_t child = add_person(female, last);
                const char* child_role = female ? "daughter" : "son";
                link(wife, child_role, child, "mother");
                link(husband, child_role, child, "father");
                (female ? unmarried_f : unmarried_m).push_back(child);
            }
        } else {
            add_person(rng.below(2) == 0, last);
        }
    }

    // marry some children across families
    rng.shuffle(unmarried_f);
    rng.shuffle(unmarried_m);
    size_t couples = std::min(unmarried_f.size(), unmarried_m.size());
    for (size_t i = 0; i < couples; ++i)
        if (rng.below(4) != 0)  // most, not all
            link(unmarried_f[i], "husband", unmarried_m[i], "wife");

    // symmetric friendships
    auto are_friends = [&](size_t a, size_t b) {
        const auto& fr = world.persons[a].relations["friend"];
        return std::find(fr.begin(), fr.end(), world.persons[b].name) != fr.end();
    };
    int friend_edges = spec.size / 2 + 1;
    for (int e = 0; e < friend_edges; ++e) {
        size_t a = rng.below(world.persons.size());
        size_t b = rng.below(world.persons.size());
        if (a == b || are_friends(a, b)) continue;
        link(a, "friend", b, "friend");
    }
    for (Person& p : world.persons)
        if (p.relations.count("friend") && p.relations["friend"].empty())
            p.relations.erase("friend");

    // attributes; dates are unique across the world
    std::set<std::string> used_dobs;
    char buf[16];
    for (Person& p : world.persons) {
        for (;;) {
            int year = 900 + (int)rng.below(300);
            int month = 1 + (int)rng.below(12);
            int day = 1 + (int)rng.below(28);
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
            if (used_dobs.insert(buf).second) break;
        }
        p.attributes["date_of_birth"] = buf;
        p.attributes["occupation"] =
            worldgen::occupations()[rng.below(worldgen::occupations().size())];
        p.attributes["hobby"] =
            worldgen::hobbies()[rng.below(worldgen::hobbies().size())];
    }
    return world;
}

// ---------------------------------------------------------------------------
// Article rendering

inline std::string world_slug(const std::string& name) {
    std::string slug;
    for (char c : name) {
        if (std::isalnum((unsigned char)c))
            slug += (char)std::tolower((unsigned char)c);
        else if (!slug.empty() && slug.back() != '-')
            slug += '-';
    }
    while (!slug.empty() && slug.back() == '-') slug.pop_back();
    return slug;
}

inline std::string attribute_words(const std::string& key) {
    std::string words = key;
    std::replace(words.begin(), words.end(), '_', ' ');
    return words;
}

inline std::vector<Document> render_articles(const WorldGraph& world) {
    std::vector<Document> docs;
    for (const Person& p : world.persons) {
        std::string body = "# " + p.name + "\n## Family\n";
        for (const std::string& role : world_roles()) {
            auto it = p.relations.find(role);
            if (it == p.relations.end()) continue;
            for (const std::string& target : it->second)
                body += "The " + role + " of " + p.name + " is " + target + ".\n";
        }
        body += "## Attributes\n";
        for (const std::string& key : world_attributes()) {
            auto it = p.attributes.find(key);
            if (it == p.attributes.end()) continue;
            body += "The " + attribute_words(key) + " of " + p.name + " is " +
                    it->second + ".\n";
        }
        docs.push_back({world_slug(p.name), p.name, body});
    }
    return docs;
}

// ---------------------------------------------------------------------------
// Question chains and the answer oracle

struct Anchor {
    enum class Kind { ByName, ByAttribute };
    Kind kind = Kind::ByName;
    std::string key;    // attribute key for ByAttribute
    std::string value;  // person name or attribute value
};

struct Hop {
    enum class Kind { Relation, Attribute };
    Kind kind = Kind::Relation;
    std::string name;  // role (incl. derived) or attribute key
};

struct Chain {
    Anchor anchor;
    std::vector<Hop> hops;  // length 1..5; an Attribute hop is always last
};

enum class Metric { SetF1, TokenF1, RelaxedNumeric };

struct QuestionSpec {
    Chain chain;
    std::string surface;
    std::set<std::string> gold;
    Metric metric = Metric::SetF1;
};

namespace oracle_detail {

inline std::vector<std::string> relation_targets(const WorldGraph& world,
                                                 const Person& p,
                                                 const std::string& role) {
    // derived roles expand by definition
    if (role == "daughter-in-law" || role == "son-in-law") {
        const char* child_role = role == "daughter-in-law" ? "son" : "daughter";
        const char* spouse_role = role == "daughter-in-law" ? "wife" : "husband";
        std::vector<std::string> out;
        auto kids = p.relations.find(child_role);
        if (kids == p.relations.end()) return out;
        for (const std::string& kid : kids->second) {
            const Person* k = world.find(kid);
            if (!k) continue;
            auto sp = k->relations.find(spouse_role);
            if (sp == k->relations.end()) continue;
            out.insert(out.end(), sp->second.begin(), sp->second.end());
        }
        return out;
    }
    auto it = p.relations.find(role);
    return it == p.relations.end() ? std::vector<std::string>{} : it->second;
}

/// Self-avoiding traversal: a person already on the walk never reappears in
/// a later hop result (this is what keeps friend-of-friend from answering
/// with the start person).
inline void walk(const WorldGraph& world, const Person& p,
                 const std::vector<Hop>& hops, size_t i,
                 std::set<std::string>& path, std::set<std::string>& out) {
    if (i == hops.size()) {
        out.insert(p.name);
        return;
    }
    const Hop& hop = hops[i];
    if (hop.kind == Hop::Kind::Attribute) {
        auto attr = p.attributes.find(hop.name);
        if (attr != p.attributes.end()) out.insert(attr->second);
        return;
    }
    for (const std::string& next : relation_targets(world, p, hop.name)) {
        if (path.count(next)) continue;
        const Person* q = world.find(next);
        if (!q) continue;
        path.insert(next);
        walk(world, *q, hops, i + 1, path, out);
        path.erase(next);
    }
}

}  // namespace oracle_detail

inline std::set<std::string> oracle_answer(const WorldGraph& world,
                                           const Chain& chain) {
    std::set<std::string> out;
    for (const Person& p : world.persons) {
        bool anchored = false;
        if (chain.anchor.kind == Anchor::Kind::ByName) {
            anchored = p.name == chain.anchor.value;
        } else {
            auto it = p.attributes.find(chain.anchor.key);
            anchored = it != p.attributes.end() && it->second == chain.anchor.value;
        }
        if (!anchored) continue;
        std::set<std::string> path{p.name};
        oracle_detail::walk(world, p, chain.hops, 0, path, out);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Question generation

inline std::string render_question(const Chain& chain) {
    std::string anchor_text;
    if (chain.anchor.kind == Anchor::Kind::ByName) {
        anchor_text = chain.anchor.value;
    } else {
        anchor_text = "the person whose " + attribute_words(chain.anchor.key) +
                      " is " + chain.anchor.value;
    }
    std::string inner = anchor_text;
    size_t relation_hops = chain.hops.size();
    bool attr_last = !chain.hops.empty() &&
                     chain.hops.back().kind == Hop::Kind::Attribute;
    if (attr_last) --relation_hops;
    for (size_t i = 0; i < relation_hops; ++i)
        inner = "the " + chain.hops[i].name + " of " + inner;
    if (attr_last)
        return "What is the " + attribute_words(chain.hops.back().name) + " of " +
               inner + "?";
    return "Who is " + inner + "?";
}

struct InfeasibleChain : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::vector<QuestionSpec> generate_questions(const WorldGraph& world,
                                                    int count, std::uint64_t seed,
                                                    int max_hops = 4) {
    if (max_hops < 1 || max_hops > 5)
        throw ConfigError("max_hops must be in [1,5]");
    worldgen::Rng rng(seed ^ 0xabcdef12345ull);
    std::vector<std::string> hop_roles = world_roles();
    for (const std::string& d : derived_roles()) hop_roles.push_back(d);

    std::vector<QuestionSpec> questions;
    for (int q = 0; q < count; ++q) {
        bool produced = false;
        for (int attempt = 0; attempt < 50 && !produced; ++attempt) {
            const Person& anchor_person =
                world.persons[rng.below(world.persons.size())];
            Chain chain;
            if (rng.below(2) == 0) {
                chain.anchor = {Anchor::Kind::ByName, "", anchor_person.name};
            } else {
                chain.anchor = {Anchor::Kind::ByAttribute, "date_of_birth",
                                anchor_person.attributes.at("date_of_birth")};
            }
            int hops = 1 + (int)rng.below((std::uint64_t)max_hops);
            bool attr_last = rng.below(3) == 0;
            int relation_hops = attr_last ? hops - 1 : hops;
            for (int h = 0; h < relation_hops; ++h)
                chain.hops.push_back(
                    {Hop::Kind::Relation, hop_roles[rng.below(hop_roles.size())]});
            if (attr_last)
                chain.hops.push_back(
                    {Hop::Kind::Attribute,
                     world_attributes()[rng.below(world_attributes().size())]});
            if (chain.hops.empty())
                chain.hops.push_back({Hop::Kind::Relation, "friend"});
            std::set<std::string> gold = oracle_answer(world, chain);
            if (gold.empty()) continue;  // InfeasibleChain: resample
            QuestionSpec spec;
            spec.chain = chain;
            spec.surface = render_question(chain);
            spec.gold = gold;
            spec.metric = chain.hops.back().kind == Hop::Kind::Attribute
                              ? Metric::TokenF1
                              : Metric::SetF1;
            questions.push_back(std::move(spec));
            produced = true;
        }
        // after the resample bound the question slot is skipped
    }
    return questions;
}

// ---------------------------------------------------------------------------
// Serialization (line-delimited records)

inline nlohmann::json chain_json(const Chain& chain) {
    nlohmann::json hops = nlohmann::json::array();
    for (const Hop& h : chain.hops)
        hops.push_back({{"kind", h.kind == Hop::Kind::Relation ? "relation"
                                                               : "attribute"},
                        {"name", h.name}});
    return {{"anchor",
             {{"kind", chain.anchor.kind == Anchor::Kind::ByName ? "name"
                                                                 : "attribute"},
              {"key", chain.anchor.key},
              {"value", chain.anchor.value}}},
            {"hops", hops}};
}

inline Chain chain_from_json(const nlohmann::json& j) {
    Chain chain;
    chain.anchor.kind = j.at("anchor").at("kind") == "name"
                            ? Anchor::Kind::ByName
                            : Anchor::Kind::ByAttribute;
    chain.anchor.key = j.at("anchor").value("key", "");
    chain.anchor.value = j.at("anchor").at("value");
    for (const auto& h : j.at("hops"))
        chain.hops.push_back({h.at("kind") == "relation" ? Hop::Kind::Relation
                                                         : Hop::Kind::Attribute,
                              h.at("name")});
    return chain;
}

inline std::string questions_ndjson(const std::vector<QuestionSpec>& questions) {
    std::string out;
    for (const QuestionSpec& q : questions) {
        nlohmann::json gold = nlohmann::json::array();
        for (const std::string& g : q.gold) gold.push_back(g);
        nlohmann::json j = {{"surface", q.surface},
                            {"chain", chain_json(q.chain)},
                            {"gold", gold},
                            {"metric", q.metric == Metric::SetF1 ? "set-f1"
                                       : q.metric == Metric::TokenF1
                                           ? "token-f1"
                                           : "relaxed-numeric"}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<QuestionSpec> parse_questions_ndjson(const std::string& text) {
    std::vector<QuestionSpec> questions;
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
            QuestionSpec q;
            q.surface = j.at("surface");
            q.chain = chain_from_json(j.at("chain"));
            for (const auto& g : j.at("gold")) q.gold.insert(g.get<std::string>());
            std::string metric = j.value("metric", "set-f1");
            q.metric = metric == "token-f1"
                           ? Metric::TokenF1
                           : metric == "relaxed-numeric" ? Metric::RelaxedNumeric
                                                         : Metric::SetF1;
            questions.push_back(std::move(q));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(lineno, std::string("bad question record: ") + e.what());
        }
    }
    return questions;
}

inline std::string world_ndjson(const WorldGraph& world) {
    std::string out;
    nlohmann::json header = {{"schema", world.schema_version},
                             {"persons", world.persons.size()}};
    out += header.dump();
    out += '\n';
    for (const Person& p : world.persons) {
        nlohmann::json j = {{"name", p.name},
                            {"relations", p.relations},
                            {"attributes", p.attributes}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline WorldGraph parse_world_ndjson(const std::string& text) {
    WorldGraph world;
    size_t pos = 0;
    int lineno = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            if (!saw_header) {
                world.schema_version = j.at("schema");
                saw_header = true;
                continue;
            }
            Person p;
            p.name = j.at("name");
            p.relations = j.at("relations")
                              .get<std::map<std::string, std::vector<std::string>>>();
            p.attributes =
                j.at("attributes").get<std::map<std::string, std::string>>();
            world.persons.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(lineno, std::string("bad world record: ") + e.what());
        }
    }
    if (!saw_header) throw FormatError(1, "missing world header record");
    return world;
}

}  // namespace dolores
