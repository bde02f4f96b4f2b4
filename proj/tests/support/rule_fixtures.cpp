#include "rule_fixtures.hpp"

#include <random>

namespace apexsql::testing {

namespace {

MatchInputs question(const std::string& q) {
  MatchInputs in;
  in.question = q;
  return in;
}

MatchInputs evidence(const std::string& e) {
  MatchInputs in;
  in.evidence = e;
  return in;
}

MatchInputs plan(const std::string& p, int steps = 1) {
  MatchInputs in;
  in.plan_text = p;
  in.plan_step_count = steps;
  return in;
}

}  // namespace

std::vector<RuleFixture> hand_fixtures() {
  std::vector<RuleFixture> out;
  auto add = [&](std::string label, MatchInputs in, std::string present,
                 std::string absent) {
    out.push_back(RuleFixture{std::move(label), std::move(in), std::move(present),
                              std::move(absent)});
  };

  // C.3.2 evidence rules
  add("ev_exact_column+", evidence("active accounts can be represented as Status=1"),
      "TIP001", "");
  add("ev_exact_column-carveout", evidence("Status refers to the account state"), "TIP004",
      "TIP001");
  add("ev_formula+", evidence("rate = success / total"), "TIP002", "");
  add("ev_formula+sum-of-count", evidence("take the sum of count values"), "TIP027", "");
  add("ev_formula-", evidence("use the success column directly"), "", "TIP002");
  add("ev_value_mapping+", evidence("'HS' stands for high school"), "TIP003", "");
  add("ev_value_mapping+means", evidence("the value 'A1' means active"), "TIP003", "");
  add("ev_value_mapping-", evidence("the code stands alone without mapping"), "", "TIP003");
  add("ev_refers_to+", evidence("EILCode refers to education level"), "TIP004", "");
  add("ev_refers_to-", evidence("EILCode is described elsewhere"), "", "TIP004");

  // C.3.3 question rules
  add("q_quoted_filter+", question("Find the schools with 'Riverside' in the county"),
      "TIP005", "");
  add("q_quoted_filter-", question("Count schools in Riverside county"), "", "TIP005");
  add("q_extremes+", question("Which school has the highest score?"), "TIP030", "");
  add("q_extremes-", question("Which schools are in Fresno?"), "", "TIP030");
  add("q_multiple_outputs+", question("Give the name and age of each user"), "TIP009", "");
  add("q_multiple_outputs-howmany", question("How many users joined and left?"), "TIP011",
      "");  // TIP009 stays universal; equality with the reference is the real check
  add("q_list_filtered+", question("List the schools that have charters"), "TIP010", "");
  add("q_list_filtered-", question("Count the schools that have charters"), "", "TIP010");
  add("q_how_many+", question("How many schools are there?"), "TIP011", "");
  add("q_how_many-what", question("How many schools are in what district?"), "", "TIP011");
  add("q_how_many+compound", question("Provide a list of the lowest amount per customer"),
      "TIP011", "");
  add("q_parentheses+", question("What is the enrollment (K-12)?"), "TIP015", "");
  add("q_parentheses-", question("What is the enrollment for K-12?"), "", "TIP015");
  add("q_comparison+", question("Find users with more than 5 orders"), "TIP024", "");
  add("q_comparison-", question("Find users who placed orders"), "", "TIP024");
  add("q_aggregation+", question("What is the total revenue?"), "TIP026", "");
  add("q_aggregation-", question("What is the revenue?"), "", "TIP026");
  add("q_agg_compare+", question("Which items have an average rating more than 4?"),
      "TIP029", "");
  add("q_agg_compare-", question("Which items have an average rating?"), "", "TIP029");
  add("q_calculation+", question("Calculate the ratio of wins to losses"), "TIP036", "");
  add("q_calculation-", question("Show the wins for each team"), "", "TIP036");
  add("q_ratio+", question("What percentage of users churned?"), "TIP047", "");
  add("q_ratio-", question("Did users churn last year?"), "", "TIP047");
  add("q_listing_starters+", question("Which teams won at home?"), "TIP049", "");
  add("q_listing_starters-", question("Find the teams that won at home"), "", "TIP049");
  add("q_partial_match+", question("Find names that contain 'berg'"), "TIP006", "");
  add("q_partial_match-", question("Find names of the winners"), "", "TIP006");
  add("q_textual_columns+", question("What is the title of the longest book?"), "TIP025",
      "");
  add("q_textual_columns-", question("What is the price of the oldest book?"), "",
      "TIP025");
  add("q_nulls+", question("Count rows where the score is missing"), "TIP039", "");
  add("q_nulls-", question("Count rows where the score is low"), "", "TIP039");

  // C.3.4 plan rules
  add("plan_join+", plan("join users to orders on user_id"), "TIP020", "");
  add("plan_join+their", question("Find authors and their books"), "TIP020", "");
  add("plan_join-", plan("read the single table and filter"), "", "TIP020");
  {
    MatchInputs in = plan("look at t1 then t2 then t3 then t4");
    in.schema_tables = {"t1", "t2", "t3", "t4"};
    add("plan_join+tables", std::move(in), "TIP012", "");
  }
  add("plan_complexity+", plan("join a join b join c join d"), "TIP014", "");
  add("plan_complexity+nested", plan("use a nested subquery for the filter"), "TIP014", "");
  add("plan_complexity-", plan("one join is enough"), "", "TIP014");
  add("plan_multi_step+", plan("step one, step two, step three, step four", 4), "TIP033",
      "");
  add("plan_multi_step+cte", plan("WITH winners AS (SELECT id) SELECT * FROM winners", 1),
      "TIP034", "");
  add("plan_multi_step-", plan("find the value", 2), "", "TIP033");
  add("plan_conditional_agg+", plan("use case when to split totals"), "TIP050", "");
  add("plan_conditional_agg+diff", plan("aggregate the different subsets separately"),
      "TIP050", "");
  add("plan_conditional_agg-", plan("sum the totals"), "", "TIP050");
  add("plan_window+", plan("rank items per group by sales"), "TIP051", "");
  add("plan_window-", plan("order items by size ascending"), "", "TIP051");

  // C.3.5 schema rule
  {
    MatchInputs in = question("Show only the specific metric for 2020");
    in.schema_columns = {"metric_id", "value", "year"};
    add("schema_entity_type+", std::move(in), "TIP041", "");
  }
  {
    MatchInputs in = question("Show the metrics");
    in.schema_columns = {"metric_id", "value"};
    add("schema_entity_type-question", std::move(in), "", "TIP041");
  }
  {
    MatchInputs in = question("Show only the specific rows");
    in.schema_columns = {"name", "value"};
    add("schema_entity_type-columns", std::move(in), "", "TIP041");
  }
  return out;
}

std::vector<RuleFixture> generated_fixtures(size_t total) {
  static const char* question_pool[] = {
      "How many schools are there?",
      "Which school has the highest average score and the lowest fee?",
      "List the names that contain 'son' with more than 3 titles",
      "What is the total count of orders (per region)?",
      "Show customers whose status is 'active' sorted by age",
      "Calculate the percentage of null entries",
      "What are the top 5 products by rate?",
      "Find users and their orders where the amount is between 10 and 20",
      "Name the cities that have teams",
      "Describe the warehouse layout",
      "Count missing descriptions per group",
      "Which entries exceed the maximum threshold?",
  };
  static const char* evidence_pool[] = {
      "",
      "EILCode refers to education level",
      "'HS' stands for high school",
      "rate = wins / games",
      "eligible can be represented as Flag=1",
      "a ratio above 0.5 means strong (see notes)",
      "take the sum of count values across months",
      "the charter column is documented elsewhere",
  };
  static const char* plan_pool[] = {
      "",
      "join users to orders, then aggregate",
      "use case when to separate different aggregate groups",
      "rank rows per group with row_number partition",
      "WITH base AS (SELECT id FROM t) SELECT * FROM base",
      "use a nested subquery to prefilter",
      "join a join b join c join d then project",
      "scan the single table",
  };
  std::vector<RuleFixture> out = hand_fixtures();
  std::mt19937 rng(424242);
  size_t i = 0;
  while (out.size() < total) {
    MatchInputs in;
    in.question = question_pool[rng() % std::size(question_pool)];
    in.evidence = evidence_pool[rng() % std::size(evidence_pool)];
    in.plan_text = plan_pool[rng() % std::size(plan_pool)];
    in.plan_step_count = int(rng() % 6);
    if (rng() % 3 == 0) in.schema_columns = {"metric_id", "event_type", "value"};
    else in.schema_columns = {"id", "name", "amount"};
    in.schema_tables = {"users", "orders", "products", "regions"};
    out.push_back(RuleFixture{"gen" + std::to_string(i++), std::move(in), "", ""});
  }
  return out;
}

}  // namespace apexsql::testing
