#pragma once

// The hand-built Coe/Luu family world used across the harness tests: the
// date-of-birth anchor 0984-05-03 resolves to Earle Coe, whose
// daughter-in-law (wife of son Reggie) is Lissa Coe, whose friend is
// Bobbie Luu.

#include <dolores/world.hpp>

namespace dolores::testing {

inline WorldGraph coe_world() {
    WorldGraph world;
    auto person = [&](const std::string& name, const std::string& dob,
                      const std::string& occupation,
                      const std::string& hobby) -> Person& {
        Person p;
        p.name = name;
        p.attributes = {{"date_of_birth", dob},
                        {"occupation", occupation},
                        {"hobby", hobby}};
        world.persons.push_back(std::move(p));
        return world.persons.back();
    };
    person("Alycia Coe", "0955-02-11", "archivist", "calligraphy");
    person("Christoper Coe", "0953-09-30", "surveyor", "chess");
    person("Earle Coe", "0984-05-03", "petroleum engineer", "beach volleyball");
    person("Christina Coe", "0986-07-19", "cartographer", "astronomy");
    person("Reggie Coe", "1008-01-24", "locksmith", "canoeing");
    person("Lissa Coe", "1009-11-06", "florist", "birdwatching");
    person("Bobbie Luu", "1010-03-15", "beekeeper", "baking");

    auto rel = [&](const std::string& a, const std::string& role,
                   const std::string& b) {
        for (Person& p : world.persons)
            if (p.name == a) p.relations[role].push_back(b);
    };
    auto couple = [&](const std::string& wife, const std::string& husband) {
        rel(wife, "husband", husband);
        rel(husband, "wife", wife);
    };
    auto child = [&](const std::string& mother, const std::string& father,
                     const std::string& kid, bool is_son) {
        rel(mother, is_son ? "son" : "daughter", kid);
        rel(father, is_son ? "son" : "daughter", kid);
        rel(kid, "mother", mother);
        rel(kid, "father", father);
    };
    couple("Alycia Coe", "Christoper Coe");
    couple("Christina Coe", "Earle Coe");
    couple("Lissa Coe", "Reggie Coe");
    child("Alycia Coe", "Christoper Coe", "Earle Coe", true);
    child("Christina Coe", "Earle Coe", "Reggie Coe", true);
    rel("Lissa Coe", "friend", "Bobbie Luu");
    rel("Bobbie Luu", "friend", "Lissa Coe");
    return world;
}

inline std::string coe_question_surface() {
    return "Who is the friend of the daughter-in-law of the person whose "
           "date of birth is 0984-05-03?";
}

/// Recursive scaffold script for the coe question: the root thread anchors
/// via search, then delegates the daughter-in-law hop and the friend hop to
/// lookup children that read articles with retrieve_article.
inline std::string coe_recursive_mock() {
    return R"([RULE label="root" turn=1]
I need the person whose date of birth is 0984-05-03 first.
<repl>
hits = search("0984-05-03")
print(hits[0])
</repl>
[/RULE]
[RULE label="root" turn=2]
The anchor is Earle Coe. His daughter-in-law is the wife of his son.
<repl>
dil = dolores("Who is the daughter-in-law of Earle Coe?", namespace="lookup")
print(dil)
</repl>
[/RULE]
[RULE label="root" turn=3]
Now I need the friend of that person.
<repl>
friend = dolores(f"Who is the friend of {dil}?", namespace="lookup")
print(friend)
</repl>
[/RULE]
[RULE label="root" turn=4]
That completes the chain.
<repl>
FinalAnswer([friend])
</repl>
[/RULE]
[RULE label="root/1" turn=1]
The daughter-in-law is the wife of a son, so I start from the article.
<repl>
article = retrieve_article("Earle Coe")
print(article)
</repl>
[/RULE]
[RULE label="root/1" turn=2]
Extract the son and fetch his article.
<repl>
son = [line.split(" is ")[1][:-1] for line in article.split("\n") if line.startswith("The son of")][0]
son_article = retrieve_article(son)
print(son_article)
</repl>
[/RULE]
[RULE label="root/1" turn=3]
His wife is the daughter-in-law.
<repl>
wife = [line.split(" is ")[1][:-1] for line in son_article.split("\n") if line.startswith("The wife of")][0]
FinalAnswer(wife)
</repl>
[/RULE]
[RULE label="root/2" turn=1]
One article lookup answers this.
<repl>
article = retrieve_article("Lissa Coe")
print(article)
</repl>
[/RULE]
[RULE label="root/2" turn=2]
Read the friend line.
<repl>
friend = [line.split(" is ")[1][:-1] for line in article.split("\n") if line.startswith("The friend of")][0]
FinalAnswer(friend)
</repl>
[/RULE]
)";
}

/// ReAct script for the same question that terminates prematurely: it reads
/// one article and then answers with nothing.
inline std::string coe_react_mock() {
    return R"([RULE label="root" turn=1]
I will search for the date of birth.
Action: {"tool": "search", "query": "0984-05-03", "k": 3}
[/RULE]
[RULE label="root" turn=2]
The top hit is Earle Coe.
Action: {"tool": "retrieve_article", "title": "Earle Coe"}
[/RULE]
[RULE label="root" turn=3]
This is getting long; I will just answer.
Action: {"tool": "final_answer", "answer": []}
[/RULE]
)";
}

inline Chain coe_question_chain() {
    Chain chain;
    chain.anchor = {Anchor::Kind::ByAttribute, "date_of_birth", "0984-05-03"};
    chain.hops = {{Hop::Kind::Relation, "daughter-in-law"},
                  {Hop::Kind::Relation, "friend"}};
    return chain;
}

/// Independent chain oracle: iterative path enumeration over explicit name
/// paths, written without reference to oracle_answer's recursion.
inline std::set<std::string> indep_oracle(const WorldGraph& w, const Chain& c) {
    std::vector<std::vector<std::string>> frontier;
    for (const Person& p : w.persons) {
        bool hit;
        if (c.anchor.kind == Anchor::Kind::ByName) {
            hit = p.name == c.anchor.value;
        } else {
            auto it = p.attributes.find(c.anchor.key);
            hit = it != p.attributes.end() && it->second == c.anchor.value;
        }
        if (hit) frontier.push_back({p.name});
    }
    for (const Hop& hop : c.hops) {
        if (hop.kind == Hop::Kind::Attribute) {
            std::set<std::string> vals;
            for (const auto& path : frontier) {
                const Person* p = w.find(path.back());
                if (!p) continue;
                auto it = p->attributes.find(hop.name);
                if (it != p->attributes.end()) vals.insert(it->second);
            }
            return vals;
        }
        std::vector<std::vector<std::string>> next;
        for (const auto& path : frontier) {
            const Person* p = w.find(path.back());
            if (!p) continue;
            std::vector<std::string> targets;
            if (hop.name == "daughter-in-law" || hop.name == "son-in-law") {
                std::string kid_role =
                    hop.name == "daughter-in-law" ? "son" : "daughter";
                std::string spouse_role =
                    hop.name == "daughter-in-law" ? "wife" : "husband";
                auto kids = p->relations.find(kid_role);
                if (kids != p->relations.end())
                    for (const std::string& kid : kids->second) {
                        const Person* k = w.find(kid);
                        if (!k) continue;
                        auto sp = k->relations.find(spouse_role);
                        if (sp != k->relations.end())
                            for (const std::string& s : sp->second)
                                targets.push_back(s);
                    }
            } else {
                auto it = p->relations.find(hop.name);
                if (it != p->relations.end()) targets = it->second;
            }
            for (const std::string& t : targets) {
                if (std::find(path.begin(), path.end(), t) != path.end())
                    continue;
                std::vector<std::string> np = path;
                np.push_back(t);
                next.push_back(std::move(np));
            }
        }
        frontier = std::move(next);
    }
    std::set<std::string> out;
    for (const auto& path : frontier) out.insert(path.back());
    return out;
}

}  // namespace dolores::testing
