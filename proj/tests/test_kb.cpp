#include <gtest/gtest.h>

#include "pnm/kb.hpp"

using namespace pnm;
using namespace pnm::kb;

TEST(KbQuery, LocalHitUnderAll) {
  KnowledgeStore local;
  local.set("value", 3);
  StaticKB global({{"value", 99}});
  EXPECT_EQ(std::get<Value>(query(local, global, Scope::all, "value")), Value(3));
  EXPECT_EQ(global.query_count(), 0u);
}

TEST(KbQuery, LocalMissIsAbsent) {
  KnowledgeStore local;
  StaticKB global({{"x", 1}});
  EXPECT_TRUE(std::get<Value>(query(local, global, Scope::local, "x")).absent());
  EXPECT_EQ(global.query_count(), 0u);
}

TEST(KbQuery, AllFallsBackToGlobal) {
  KnowledgeStore local;
  StaticKB global({{"x", 1}});
  EXPECT_EQ(std::get<Value>(query(local, global, Scope::all, "x")), Value(1));
  EXPECT_EQ(std::get<Value>(query(local, global, Scope::global, "x")), Value(1));
  EXPECT_EQ(global.query_count(), 2u);
}

TEST(KbQuery, ScriptedOracleDefersThenAnswers) {
  KnowledgeStore local;
  ScriptedOracle oracle({{"restaurant", {Value("PizzaPlace"), 2}}});
  const QueryContext ctx{7, 11, 5, true};
  const QueryResult r = query(local, oracle, Scope::all, "restaurant", ctx);
  ASSERT_TRUE(std::holds_alternative<PendingTicket>(r));
  EXPECT_EQ(std::get<PendingTicket>(r), (PendingTicket{7, 11, "restaurant"}));
  EXPECT_TRUE(oracle.poll(6).empty());
  const auto answers = oracle.poll(7);
  ASSERT_EQ(answers.size(), 1u);
  EXPECT_EQ(answers[0].value, Value("PizzaPlace"));
  EXPECT_EQ(answers[0].origin.machine, 7u);
  EXPECT_EQ(answers[0].origin.action, 11u);
  EXPECT_TRUE(oracle.poll(100).empty());
}

TEST(KbQuery, NonInteractiveLookupsNeverDefer) {
  KnowledgeStore local;
  ScriptedOracle oracle({{"q", {Value(1), 0}}}, true);
  ConsoleKB console;
  EXPECT_TRUE(std::get<Value>(query(local, oracle, Scope::all, "q")).absent());
  EXPECT_TRUE(std::get<Value>(query(local, console, Scope::all, "q")).absent());
  EXPECT_TRUE(std::holds_alternative<PendingTicket>(query(local, console, Scope::all, "q", {1, 1, 0, true})));
  EXPECT_TRUE(std::holds_alternative<PendingTicket>(query(local, oracle, Scope::all, "other", {1, 1, 0, true})));
}

TEST(KbUpdate, LocalRoundTripAndOverwrite) {
  KnowledgeStore local;
  StaticKB global;
  update(local, global, Scope::local, "spam", Value("eggs"));
  EXPECT_EQ(std::get<Value>(query(local, global, Scope::local, "spam")), Value("eggs"));
  update(local, global, Scope::local, "spam", Value("ham"));
  EXPECT_EQ(local.get("spam"), Value("ham"));
}

TEST(KbUpdate, ReadOnlyGlobalRejects) {
  KnowledgeStore local;
  StaticKB global;
  EXPECT_THROW(update(local, global, Scope::global, "x", Value(1)), GlobalUnavailable);
  StaticKB writable({}, true);
  update(local, writable, Scope::all, "x", Value(1));
  EXPECT_EQ(local.get("x"), Value(1));
  EXPECT_EQ(std::get<Value>(query(KnowledgeStore{}, writable, Scope::global, "x")), Value(1));
}

TEST(KbStore, RejectsEmptyNamesAndAbsentValues) {
  KnowledgeStore s;
  EXPECT_THROW(s.set("", Value(1)), std::invalid_argument);
  EXPECT_THROW(s.set("x", Value{}), std::invalid_argument);
  EXPECT_FALSE(s.erase("x"));
}

TEST(KbStore, NamesAreCaseSensitive) {
  KnowledgeStore s;
  s.set("Time", 1);
  EXPECT_TRUE(s.get("time").absent());
}

TEST(Autofill, ExplicitWins) {
  KnowledgeStore local;
  local.set("time", 3);
  StaticKB global;
  auto r = autofill({"time"}, {{"time", Value(5)}}, local, global);
  EXPECT_EQ(std::get<Goal>(r), (Goal{{"time", Value(5)}}));
}

TEST(Autofill, FillsFromLocal) {
  KnowledgeStore local;
  local.set("time", 3);
  StaticKB global;
  EXPECT_EQ(std::get<Goal>(autofill({"time"}, {}, local, global)), (Goal{{"time", Value(3)}}));
}

TEST(Autofill, MissingParam) {
  KnowledgeStore local;
  StaticKB global;
  EXPECT_EQ(std::get<MissingParam>(autofill({"time"}, {}, local, global)), MissingParam{"time"});
}

TEST(Autofill, Idempotent) {
  KnowledgeStore local;
  local.set("a", 1);
  StaticKB global({{"b", Value("x")}});
  EXPECT_EQ(autofill({"a", "b"}, {}, local, global), autofill({"a", "b"}, {}, local, global));
}

TEST(KbStore, InstancesAreDisjoint) {
  KnowledgeStore a, b;
  a.set("sentinel", Value("a"));
  EXPECT_TRUE(b.get("sentinel").absent());
  b.set("sentinel", Value("b"));
  EXPECT_EQ(a.get("sentinel"), Value("a"));
}

TEST(Value, KindsAndComparison) {
  EXPECT_EQ(parse_scalar("3"), Value(3));
  EXPECT_EQ(parse_scalar("2.5"), Value(2.5));
  EXPECT_EQ(parse_scalar("true"), Value(true));
  EXPECT_EQ(parse_scalar("shoe shop"), Value("shoe shop"));
  EXPECT_NE(Value(3), Value(3.0));
  EXPECT_TRUE(loosely_equal(Value(3), Value(3.0)));
  EXPECT_FALSE(loosely_equal(Value("3"), Value(3)));
  EXPECT_FALSE(Value{}.truthy());
  EXPECT_EQ(Value(List{Value(1), Value("a")}).to_string(), "[1, a]");
}
