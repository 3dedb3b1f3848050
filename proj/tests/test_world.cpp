#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dolores/world.hpp>

#include "fixtures.hpp"

#include <algorithm>
#include <map>

using namespace dolores;
using dolores::testing::coe_world;
using dolores::testing::coe_question_chain;

namespace {

using dolores::testing::indep_oracle;

Chain name_chain(const std::string& anchor,
                 std::vector<std::string> roles,
                 const std::string& attr = "") {
    Chain chain;
    chain.anchor = {Anchor::Kind::ByName, "", anchor};
    for (const std::string& r : roles)
        chain.hops.push_back({Hop::Kind::Relation, r});
    if (!attr.empty()) chain.hops.push_back({Hop::Kind::Attribute, attr});
    return chain;
}

/// Re-derive the relation multiset from rendered article text.
std::multiset<std::string> relation_lines_of(const std::string& body) {
    std::multiset<std::string> out;
    size_t pos = 0;
    bool in_family = false;
    while (pos < body.size()) {
        size_t nl = body.find('\n', pos);
        std::string line = body.substr(pos, nl - pos);
        pos = nl == std::string::npos ? body.size() : nl + 1;
        if (line == "## Family") { in_family = true; continue; }
        if (line == "## Attributes") { in_family = false; continue; }
        if (in_family && line.rfind("The ", 0) == 0) out.insert(line);
    }
    return out;
}

}  // namespace

TEST_CASE("coe fixture world is valid") {
    WorldGraph world = coe_world();
    auto why = validate_world(world);
    if (why) FAIL("fixture invalid: " << *why);
}

TEST_CASE("oracle fixtures on the coe world") {
    WorldGraph world = coe_world();
    SUBCASE("single hop") {
        CHECK(oracle_answer(world, name_chain("Earle Coe", {"son"})) ==
              std::set<std::string>{"Reggie Coe"});
        CHECK(oracle_answer(world, name_chain("Earle Coe", {"mother"})) ==
              std::set<std::string>{"Alycia Coe"});
    }
    SUBCASE("derived roles") {
        CHECK(oracle_answer(world, name_chain("Earle Coe", {"daughter-in-law"})) ==
              std::set<std::string>{"Lissa Coe"});
        CHECK(oracle_answer(world, name_chain("Christina Coe", {"son-in-law"}))
                  .empty());
    }
    SUBCASE("multi-hop through a date-of-birth anchor") {
        Chain by_path = coe_question_chain();
        CHECK(oracle_answer(world, by_path) ==
              std::set<std::string>{"Bobbie Luu"});
        Chain expanded;
        expanded.anchor = {Anchor::Kind::ByAttribute, "date_of_birth",
                           "0984-05-03"};
        expanded.hops = {{Hop::Kind::Relation, "son"},
                         {Hop::Kind::Relation, "wife"},
                         {Hop::Kind::Relation, "friend"}};
        CHECK(oracle_answer(world, expanded) ==
              std::set<std::string>{"Bobbie Luu"});
    }
    SUBCASE("friend-of-friend excludes the start person") {
        CHECK(oracle_answer(world, name_chain("Lissa Coe", {"friend", "friend"}))
                  .empty());
    }
    SUBCASE("terminal attribute hop") {
        CHECK(oracle_answer(world,
                            name_chain("Earle Coe", {"mother"}, "occupation")) ==
              std::set<std::string>{"archivist"});
    }
    SUBCASE("unmatched anchor yields the empty set") {
        CHECK(oracle_answer(world, name_chain("Nobody Here", {"son"})).empty());
    }
}

TEST_CASE("question surface rendering") {
    CHECK(render_question(coe_question_chain()) ==
          "Who is the friend of the daughter-in-law of the person whose "
          "date of birth is 0984-05-03?");
    CHECK(render_question(name_chain("Earle Coe", {"mother"}, "occupation")) ==
          "What is the occupation of the mother of Earle Coe?");
    CHECK(render_question(name_chain("Earle Coe", {"son"})) ==
          "Who is the son of Earle Coe?");
}

TEST_CASE("article rendering") {
    WorldGraph world = coe_world();
    std::vector<Document> docs = render_articles(world);
    REQUIRE(docs.size() == world.persons.size());
    const Document* earle = nullptr;
    for (const Document& d : docs)
        if (d.title == "Earle Coe") earle = &d;
    REQUIRE(earle != nullptr);
    CHECK(earle->id == "earle-coe");
    CHECK(earle->body.rfind("# Earle Coe\n## Family\n", 0) == 0);
    CHECK(earle->body.find("The son of Earle Coe is Reggie Coe.\n") !=
          std::string::npos);
    CHECK(earle->body.find("The wife of Earle Coe is Christina Coe.\n") !=
          std::string::npos);
    CHECK(earle->body.find("## Attributes\n") != std::string::npos);
    CHECK(earle->body.find(
              "The date of birth of Earle Coe is 0984-05-03.\n") !=
          std::string::npos);
    CHECK(earle->body.find(
              "The occupation of Earle Coe is petroleum engineer.\n") !=
          std::string::npos);
}

TEST_CASE("article relation lines round-trip the graph") {
    WorldGraph world = generate_world({40, 7});
    std::vector<Document> docs = render_articles(world);
    REQUIRE(docs.size() == world.persons.size());
    for (size_t i = 0; i < docs.size(); ++i) {
        const Person& p = world.persons[i];
        std::multiset<std::string> expected;
        for (const auto& [role, targets] : p.relations)
            for (const std::string& t : targets)
                expected.insert("The " + role + " of " + p.name + " is " + t +
                                ".");
        CHECK(relation_lines_of(docs[i].body) == expected);
    }
}

TEST_CASE("generation determinism and validity") {
    SUBCASE("same spec, same bytes") {
        CHECK(world_ndjson(generate_world({50, 42})) ==
              world_ndjson(generate_world({50, 42})));
    }
    SUBCASE("different seeds differ") {
        CHECK(world_ndjson(generate_world({50, 42})) !=
              world_ndjson(generate_world({50, 43})));
    }
    SUBCASE("size is honored exactly") {
        for (int size : {2, 3, 7, 20, 51})
            CHECK((int)generate_world({size, 5}).persons.size() == size);
    }
    SUBCASE("validity sweep") {
        for (std::uint64_t seed = 1; seed <= 60; ++seed) {
            WorldSpec spec{2 + int(seed % 59), seed};
            auto why = validate_world(generate_world(spec));
            if (why) FAIL("seed " << seed << ": " << *why);
        }
    }
    SUBCASE("config errors") {
        CHECK_THROWS_AS(generate_world({1, 1}), ConfigError);
        WorldSpec bad{10, 1, 99};
        CHECK_THROWS_AS(generate_world(bad), ConfigError);
    }
}

TEST_CASE("validate_world rejects broken graphs") {
    WorldGraph world = coe_world();
    SUBCASE("unmirrored link") {
        world.persons[2].relations["friend"].push_back("Alycia Coe");
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("unknown target") {
        world.persons[2].relations["son"].push_back("Ghost Person");
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("unknown role") {
        world.persons[2].relations["cousin"].push_back("Reggie Coe");
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("self link") {
        world.persons[2].relations["friend"].push_back("Earle Coe");
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("duplicate date of birth") {
        world.persons[0].attributes["date_of_birth"] =
            world.persons[1].attributes["date_of_birth"];
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("malformed date") {
        world.persons[0].attributes["date_of_birth"] = "955-2-11";
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("missing date") {
        world.persons[0].attributes.erase("date_of_birth");
        CHECK(validate_world(world).has_value());
    }
    SUBCASE("duplicate name") {
        world.persons[0].name = world.persons[1].name;
        CHECK(validate_world(world).has_value());
    }
}

TEST_CASE("generated questions agree with the independent oracle") {
    for (std::uint64_t seed : {3ull, 11ull, 27ull}) {
        WorldGraph world = generate_world({30, seed});
        std::vector<QuestionSpec> questions = generate_questions(world, 40, seed);
        CHECK(!questions.empty());
        for (const QuestionSpec& q : questions) {
            REQUIRE(!q.gold.empty());
            CHECK(oracle_answer(world, q.chain) == q.gold);
            CHECK(indep_oracle(world, q.chain) == q.gold);
            CHECK(render_question(q.chain) == q.surface);
            REQUIRE(q.chain.hops.size() >= 1);
            CHECK(q.chain.hops.size() <= 4);
            for (size_t i = 0; i + 1 < q.chain.hops.size(); ++i)
                CHECK(q.chain.hops[i].kind == Hop::Kind::Relation);
            bool attr_last = q.chain.hops.back().kind == Hop::Kind::Attribute;
            CHECK(q.metric == (attr_last ? Metric::TokenF1 : Metric::SetF1));
        }
    }
}

TEST_CASE("question generation determinism") {
    WorldGraph world = generate_world({25, 4});
    CHECK(questions_ndjson(generate_questions(world, 20, 9)) ==
          questions_ndjson(generate_questions(world, 20, 9)));
    CHECK(questions_ndjson(generate_questions(world, 20, 9)) !=
          questions_ndjson(generate_questions(world, 20, 10)));
    CHECK_THROWS_AS(generate_questions(world, 5, 1, 0), ConfigError);
    CHECK_THROWS_AS(generate_questions(world, 5, 1, 6), ConfigError);
}

TEST_CASE("world and question serialization round-trips") {
    WorldGraph world = generate_world({15, 8});
    std::string text = world_ndjson(world);
    WorldGraph back = parse_world_ndjson(text);
    CHECK(world_ndjson(back) == text);
    CHECK(!validate_world(back).has_value());
    CHECK_THROWS_AS(parse_world_ndjson(""), FormatError);
    CHECK_THROWS_AS(parse_world_ndjson("{not json\n"), FormatError);

    std::vector<QuestionSpec> questions = generate_questions(world, 10, 2);
    std::string qtext = questions_ndjson(questions);
    CHECK(questions_ndjson(parse_questions_ndjson(qtext)) == qtext);
    CHECK_THROWS_AS(parse_questions_ndjson("{broken\n"), FormatError);
}
