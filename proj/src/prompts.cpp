#include "apexsql/prompts.hpp"

namespace apexsql::prompts {

const char* const kLogicalPlan = R"APEX(*** TASK CONTEXT ***
You are a Lead Data Architect. Your task is to break down the User Question into abstract logical steps needed to answer it.

**IMPORTANT**: Do NOT reference specific table or column names yet. Focus purely on the logic (e.g., filter, join, count, aggregate).

*** USER QUESTION ***
{question}

*** OUTPUT FORMAT ***
```json
{
  "logical_steps": [
    "1. Identify [Entity]...",
    "2. Filter where [Condition]...",
    "3. Link [Entity A] to [Entity B]...",
    "4. Calculate [Aggregation]..."
  ]
}
```)APEX";

const char* const kAggregatePlans = R"APEX(*** TASK CONTEXT ***
We have collected {count} draft logical plans. Synthesize them into a single, comprehensive Master Logical Plan.
Ensure the steps cover all conditions, filters, joins, and aggregations required.

*** USER QUESTION ***
{question}

*** DRAFT PLANS ***
{plans}

Output just the steps as a numbered list.)APEX";

const char* const kDeletionPass = R"APEX(*** TASK CONTEXT ***
You are a Lead Data Architect. You have a Logical Plan to answer a query.
Your task: **Negative Pruning**. Identify database tables or columns that are **100% IRRELEVANT** to the plan.

*** USER QUESTION ***
{question}

*** MASTER LOGICAL PLAN ***
{logical_plan}

*** FULL DATABASE SCHEMA ***
{schema}

*** EVIDENCE ***
{evidence}

*** STRICT GUIDELINES ***
1. **High Recall (Safety)**:
   - If the column name is related to the query (even 1% chance), you should keep it. If not, check the description to see if it is related to the query. Sometimes the description is not clear, then you should pay close attention to the sample rows of the table. If the sample values of some columns are related to the query, you should keep these columns. If all of these information are not clear enough, remove it.
2. **Definition of Relevance**: Relevance includes both **Lexical Matching** and **Semantic Relatedness** over column name and description.
   - **Lexical**: If a word from the query appears in the name (e.g., query mentions "school" -> keep `school_code`, `school_type`, etc.), it MUST be retained.
   - **Semantic**: Keep columns conceptually related to the topic. For example, if the query asks about "patents that were granted in ...", then the column `grant_date` should be kept.
   - **CRITICAL**: Do NOT remove discriminator columns such as `xxx_id`, `xxx_name`, `xxx_code`, or `xxx_type` if the table itself is kept.
3. **Output Removal List**:
   - **Tables**: If a whole table is irrelevant, list it in `obviously_irrelevant_tables`. You do NOT need to list its columns separately.
   - **Columns**: If specific columns of a table are noise, list them in `obviously_irrelevant_columns`.
4. **Grouped Tables**: If multiple tables are presented as sharing the same columns, you MUST list the removal instructions for **EACH** table explicitly. Pay close attention to name differences within the group (e.g., xx_2017 vs xx_2026), as these reflect specific data dimensions (like time) that determine relevance to the query.

*** OUTPUT FORMAT ***
```json
{
  "obviously_irrelevant_tables": ["table_unused_1", "table_unused_2"],
  "obviously_irrelevant_columns": [
    {"table": "t1", "columns": ["col_unused_1", "col_unused_2"]}
  ]
}
```)APEX";

const char* const kSelectionPass = R"APEX(*** TASK CONTEXT ***
You are a Lead Data Architect. You have a Logical Plan to answer a query.
Your task: **Positive Selection**. Identify database tables or columns that are **RELEVANT** or **NECESSARY** to the plan.

*** USER QUESTION ***
{question}

*** MASTER LOGICAL PLAN ***
{logical_plan}

*** FULL DATABASE SCHEMA ***
{schema}

*** EVIDENCE ***
{evidence}

*** STRICT GUIDELINES ***
1. **High Recall (Safety)**: Select ALL columns that might be useful for joining, filtering, grouping, or returning results. If you are not sure about the relevance of a column, e.g., the name and the description are ambiguous, **PICK IT**.
2. **Definition of Relevance**: Relevance includes both **Lexical Matching** and **Semantic Relatedness** over column name and description.
   - **Lexical**: If a word from the query appears in the table or column name (e.g., query mentions "school" -> keep `school_code`, `school_type`, etc.), it MUST be selected.
   - **Semantic**: Identify columns conceptually related to the topic. For example, if the query asks about "patents that were granted in ...", then the column `grant_date` should be kept.
   - **Discriminators**: ALWAYS select primary keys and common identifiers (`xxx_id`, `xxx_code`, `xxx_name`) for relevant tables, as they are needed for joins.
3. **Output Selection List**:
   - **Tables**: If a whole table is relevant, list it in `relevant_tables`.
   - **Columns**: List specific useful columns in `relevant_columns`. If a table is already listed in `relevant_tables`, the columns can be omitted.
4. **Grouped Tables**: If multiple tables are presented as sharing the same columns, you MUST list the selection instructions for **EACH** table explicitly. Pay close attention to name differences within the group (e.g., xx_2017 vs xx_2026), as these reflect specific data dimensions (like time) that determine relevance to the query.

*** OUTPUT FORMAT ***
```json
{
  "relevant_tables": ["table_useful_1"],
  "relevant_columns": [
    {"table": "t1", "columns": ["col_useful_1", "col_pk_id"]}
  ]
}
```)APEX";

const char* const kSemanticLinking = R"APEX(*** TASK CONTEXT ***
You are a Senior Data Architect. You have full visibility of the database schema and a user question.
Your goal is to perform **Semantic Linking**: Analyze the database structure and how it grounds the user's intent.
{critical_rules}

*** USER QUESTION ***
{question}

*** LOGICAL PLAN ***
{logical_plan}

*** EVIDENCE ***
{evidence}

*** DATABASE SCHEMA ***
{schema}

*** YOUR TASKS ***
1. **Database Structure Overview**: Describe the database structure in detail (e.g., 'A banking system with customers and transactions...').
2. **Query-Specific Content Analysis**: Analyze the query against the available columns. Identify which columns are likely targets, filters, or join keys.
3. **Table Functional Analysis**: For EVERY potentially relevant table, describe its specific function regarding this query.
   - Is it a **Target Table**? (Contains the answer columns)
   - Is it a **Bridge Table**? (Doesn't have semantic data but is needed to join Table A and Table B via Foreign Keys)
   - Is it a **Filtering Table**? (Contains columns for WHERE clauses)
   - **CRITICAL**: A table may have multiple roles. If a table is needed as a BRIDGE, you MUST explicitly state that it connects Entity X and Entity Y, even if it looks empty of content.

*** OUTPUT FORMAT ***
```json
{
  "database_structure": "Database structure overview...",
  "query_specific_content_analysis": "Detailed mapping of query terms to DB columns/logic...",
  "table_functions": {
    "table_name_1": "Acts as a bridge table connecting Students and Classes via student_id and class_id.",
    "table_name_2": "Contains the 'score' column needed for calculation and 'exam_date' for filtering."
  }
}
```

Perform the semantic linking analysis:)APEX";

const char* const kTableExploration = R"APEX(*** TASK CONTEXT ***
You are an agent exploring a database table to verify its relevance to a user question.
You must not explore randomly. You must verify if this table fits its anticipated role.
{critical_rules}

*** TARGET TABLE: {table_name} ***
{table_block}

*** USER QUESTION ***
{question}

*** ANTICIPATED ROLE ***
This table was identified as: {semantic_role}. Use this to guide your exploration.

*** EVIDENCE ***
{evidence}

*** YOUR MISSION ***
Generate 3-8 SQLite queries to investigate. **Focus on understanding the table's semantics and utility.**

**Motivation for Exploration**:
1. **Semantic Alignment**: Check distinct values to understand what the column *means* versus what the query *needs*. (e.g., If column is 'type', does it contain the specific categories? If 'status', does it contain values like 'Active' or code '1'?)
2. **Granularity & Scope**: Verify the table's grain (e.g., is it one row per Order or per Item?). This determines if it supports the required aggregations.
3. **Bridge/Connectivity**: If this looks like a linking table, verify the Foreign Keys are populated (not all NULL) to ensure it can actually serve as a bridge.
4. **Data Quality**: Are critical columns (targets for filters or answers) usable, or are they mostly NULL?

*** OUTPUT FORMAT ***
Provide SQL queries in a single `sql` block with comments explaining the *motivation*.
```sql
-- Motivation: Checking distinct values in 'status' to see if it aligns with the query's filter requirement
SELECT DISTINCT status FROM table_name LIMIT 10;
```

Generate your exploration queries:)APEX";

const char* const kTableVerdict = R"APEX(*** TASK ***
Based on the exploration history and results above, determine if table `{table_name}` is RELEVANT to the User Question.

*** EXPLORATION EVIDENCE ***
{observations}

*** USER QUESTION ***
{question}

*** EVIDENCE ***
{evidence}

*** DECISION GUIDELINES ***
- **Direct Match**: Contains the specific answer data.
- **Bridge Table**: Contains IDs needed to join other relevant tables (CRITICAL: Keep even if no other useful data).
- **Filter Source**: Contains columns needed to restrict the result.
- **Calculation Support**: Contains numerical columns needed for aggregation (e.g., `score` for AVG, `price` for SUM).

*** OUTPUT GUIDELINES ***
- `relevance_reason`: Explain the LOGICAL role (e.g., 'Provides the Join Key for X and Y', 'Contains the target column Z').
- `observations`: Summarize FACTUAL findings from exploration (e.g., 'Column A contains integer codes 1-5', 'Table is empty').
- `table_summary`: A concise summary of what this table represents in the context of the query.

*** OUTPUT FORMAT ***
```json
{
  "relevant": true,
  "relevant_columns": [
    {"column_name": "name", "relevance_reason": "...", "observations": "..."}
  ],
  "table_summary": "..."
}
```

Provide your analysis:)APEX";

const char* const kGlobalSynthesis = R"APEX(*** TASK CONTEXT ***
You are the Lead Data Architect. We are synthesizing initial exploration findings.
Review the [MARKED RELEVANT] and [MARKED IRRELEVANT] tables. Fix blind spots.

*** USER QUESTION ***
{question}

*** EVIDENCE ***
{evidence}

*** SEMANTIC ANALYSIS ***
{db_summary}

*** SCHEMA STATUS ***
{schema_status}

*** YOUR MISSION ***
Determine the final list of columns required to write the SQL query.
You must ensure the selected columns form a connected graph (tables can be joined) and cover all functional requirements of the query.

*** SELECTION CRITERIA (FUNCTIONALITY) ***
Keep a column if it serves one of the following purposes:
1. **Identification**: Unique identifiers (IDs, Codes) needed to count or distinguish entities (Primary keys).
2. **Linking**: Columns needed to join two tables together (Foreign Keys).
3. **Filtering**: Columns involved in conditions (e.g., status='Active', date > 2023).
4. **Aggregation**: Numerical columns for calculations (Sum, Avg, Max, Min).
5. **Grouping & Sorting**: Columns used for 'GROUP BY' or 'ORDER BY'.
6. **Direct Result**: Columns explicitly requested in the output.

**Note on Multi-Path**: If multiple columns might serve the same purpose, KEEP ALL OF THEM. Alternative columns might help to construct another solution paths.
**Note on Type of Entity**: DO NOT guess the type of an unspecified entity even you have some prior knowledge, e.g., if the query contains location entity like 'Riverside', then ALL columns related to location (e.g., County, District, etc.) should be kept.

*** REJECTION REQUIREMENTS ***
If a column was marked as **[MARKED RELEVANT]** in the Schema Status but you decide to **REJECT** it, you MUST include it in the `rejected_candidates` list with a `reject_reason` explaining why it is unnecessary. You can NOT reject a column for the reason that it is only a potentially useful column.

*** INTERACTIVE PROCESS ***
You can perform up to {max_rounds} rounds of verification.
- To EXPLORE: Output `exploration_queries` in JSON to test joins or content.
- To FINISH: Output `[CONFIRM]` in the JSON (or just output the final refined_schema without queries).
{round_feedback}

*** OUTPUT FORMAT ***
You MUST explicitly list rejected candidates to prove you considered them.
**IMPORTANT**: In 'rejected_candidates', ONLY list columns that were previously marked RELEVANT but you decided to reject, OR columns that look ambiguous. Do NOT list obviously irrelevant columns to save space.

```json
{
  "refined_schema": {
    "table_name": {
      "relevant_columns": [
        {"column_name": "...", "relevance_reason": "Functional reason (e.g., Needed for Filtering)"}
      ]
    }
  },
  "rejected_candidates": [
    {"table": "t1", "column": "c1", "reject_reason": "Originally marked relevant, but rejected because..."}
  ],
  "exploration_queries": ["SELECT 1 FROM t1 JOIN t2 ON t1.id=t2.id LIMIT 1"],
  "status": "EXPLORING" or "[CONFIRM]"
}
```

Begin refinement:)APEX";

const char* const kRealizationPaths = R"APEX(You are refining a logical plan. For each step, think about:
1. What information is needed
2. Different ways to obtain it (direct access, join, calculation, etc.)
3. Keywords that describe the operation

QUESTION: {question}
Evidence: {evidence}
Schema: {schema}
CURRENT PLAN: {logical_plan}

YOUR TASK:
Refine the plan by analyzing each step. For each step, provide:

Step N: [Brief description]
  - Info need: [What information is required]
  - Possible paths: [List 2-3 ways to get this info, e.g., 'direct column X', 'join tables A-B', 'calculate using formula']
  - Keywords: [table names, column names, operations like filter/join/aggregate, concepts]
  - Evidence: [exact evidence text if applicable]

EXAMPLE:
Step 1: Filter for high schools
  - Info need: Identify high school records
  - Possible paths: 'school_type column', 'EILCode column', 'join with school_types table'
  - Keywords: schools, school_type, EILCode, filter, high school
  - Evidence: EILCode = 'HS' means high school

Step 2: Calculate average score
  - Info need: Average of scores
  - Possible paths: 'AVG(score_column)', 'SUM/COUNT formula', 'pre-computed avg_score column'
  - Keywords: scores, average, AVG, aggregate, calculation

IMPORTANT:
- Focus ONLY on the logical steps needed to answer the question
- Do NOT specify output columns in this plan
- Evidence: preserve EXACTLY (formulas, column names, values)
- Paths: list alternatives naturally (don't force if only one way makes sense)
- Keywords: comprehensive but relevant
- Keep plan abstract (avoid specific table/column names unless from evidence)

Now refine the plan:)APEX";

const char* const kActionSpace = R"APEX(You are an expert SQL query generator. Your task is to convert natural language questions into SQL queries.

# AVAILABLE ACTIONS
**CRITICAL**: Always start your response with EXACTLY ONE action tag ([EXPLORE], [REFINE], [SQL], or [CONFIRM]) at the very beginning.

## [EXPLORE]
Execute SQL queries to explore database content and gather evidence.
Use this when you need to:
- Discover possible values in a column (e.g., DISTINCT values)
- Verify data formats or patterns
- Check relationships between tables
- Gather sample data to understand the database

**Exploration Guidelines**:
- Use LIMIT to restrict output when exploring specific values or samples.
- If you need to understand data distribution (e.g., range, distinct values), you may omit LIMIT. For large results (>30 rows), we will report: max value, min value, data format, and distinct values.

**Format**: Start with [EXPLORE] tag, then write SQL queries with comments:
```
[EXPLORE]
-- Purpose: Check available product categories
SELECT DISTINCT category FROM products LIMIT 10;
-- Purpose: Verify date format
SELECT date_column FROM orders LIMIT 5;
```
**Important**: After exploration, please use [REFINE] to analyze the results before generating SQL.

## [REFINE]
Analyze exploration results, update your understanding, and plan the next steps.
Use this to:
- Summarize what you learned from exploration and the remaining problems
- Update your logical plan
- Plan the SQL query structure (JOINs, filters, aggregations, etc.)
- Decide if more exploration is needed or if you're ready to generate SQL

**Format**: Start with [REFINE] tag, then provide structured reasoning:
```
[REFINE]
### Findings from Exploration:
- [Summarize key discoveries]
### Updated Understanding:
- [How this changes your approach]
### Query Plan:
- [Step-by-step plan for the SQL query]
### Next Action:
- [EXPLORE more] OR [Generate SQL]
```

## [SQL]
Generate the final SQL query.
Use this when you are confident about the query logic.

**Format**: Start with [SQL] tag, then provide the query:
[SQL] ```sql <Your SQL query> ```

## [CONFIRM]
Confirm the logic of the generated SQLs and the final result after SQL execution.
Use this ONLY after [SQL] execution returns a satisfactory result.
**Format**: [CONFIRM] <Brief description of what the query does>)APEX";

const char* const kEvidenceLinking = R"APEX(You are an expert Data Analyst Assistant supporting a Text-to-SQL system.
We have a User Query and an External Knowledge Document (Markdown format) that contains business rules, calculation logic, or data dictionary definitions.
Your task is to **extract** every piece of information from the document that is relevant to the User Query.

### Input Information
- **User Query**: {query}
- **Knowledge File Name**: {knowledge_file_name}
- **Original Knowledge Content**:
```markdown
{knowledge_content}
```

### Extraction Instructions (CRITICAL)
1. **Goal: High Recall (Better Safe Than Sorry).**
   - If any section, paragraph, definition, description, entity code, formula, or table row is **potentially** related to the entities, metrics, conditions, constraints, or logic in the query (even slightly), **KEEP IT**.
   - Do NOT try to be concise. We prefer extra context over missing information.
   - Only remove content that is obviously and strictly irrelevant (e.g., legacy codes not mentioned, definitions of completely unrelated departments).
2. **Maintain Context & Integrity.**
   - Do NOT pick out single words or fragmented sentences.
   - Keep entire paragraphs, list items, or table rows to ensure the context remains readable and authentic.
   - If a calculation rule depends on previous lines (like a variable definition), include those lines too.
3. **Do Not Rewrite.**
   - Do NOT summarize, paraphrase, or change the original text. **Copy and paste** the relevant sections exactly as they appear in the source.

### Output
Output ONLY the extracted markdown content below, without any introductory or concluding text.)APEX";

const char* const kAnswerSelection = R"APEX(You are a Senior Data Architect acting as a Judge. You are provided with a User Question, the Database Schema, and several Candidate Solutions generated by an AI agent.
Each candidate consists of:
1. **The Execution Strategy**: The logic derived after exploring the database (identifying specific tables, columns, and values).
2. **The Final SQL**: The query implementation (We have verified that the SQL is executable).
**YOUR GOAL**: Identify the SINGLE best candidate that is most likely to execute correctly and return the accurate answer.

*** DATABASE SCHEMA ***
{schema}

*** USER QUESTION ***
{question}

*** CANDIDATES ***
{candidates}

*** EVALUATION CRITERIA (Prioritize in this order) ***
1. **Specificity of Evidence (The "Verified" Test)**:
   - **Favor** candidates where the Strategy explicitly lists *verified values* found during exploration.
   - **Reject** candidates with vague strategies (e.g., "Filter by population metric" without stating *which* metric ID).
2. **Entity Isolation (The "Explosion" Test)**:
   - Look at the Schema. If a table contains mixed data types (e.g., `MetricID`, `EventType`, `Year`), the SQL **MUST** filter for a specific value.
   - **Reject** candidates that aggregate a Fact/Event table without a `WHERE` clause filtering for the specific metric/type (this leads to wrong sums).
3. **Logic Robustness (The "Safety" Test)**:
   - **Ratios**: The SQL should handle zero denominators (e.g., `WHERE denom > 0` or `NULLIF`).
   - **Joins**: If the task involves multiple independent event tables (e.g., Sends, Opens), **Favor** candidates using `UNION ALL` or `FULL JOIN` strategies over simple `INNER/LEFT JOIN` which might lose data.
4. **Consistency**:
   - The SQL must strictly follow the Strategy. If the Strategy says "Filter X" but SQL does not, reject it.

*** OUTPUT INSTRUCTION ***
1. Analyze each candidate one by one based on the criteria above.
2. Compare the candidates (both the strategy and the SQL) to point out if some of them miss necessary filters (Entity Isolation) or lacks specific verified details.
3. Select the best candidate.
4. Output the chosen file name in this format:
```plaintext
xxx.sql
```)APEX";

const char* const kForcedSynthesisDirective =
    "MANDATORY: The action/token budget is nearly exhausted. You MUST now "
    "output either [SQL] with your best final query or [CONFIRM] if a "
    "successful query already ran. No other action will be accepted.";

const char* const kUnparsableActionNotice =
    "Your previous response did not start with exactly one action tag "
    "([EXPLORE], [REFINE], [SQL], or [CONFIRM]). Reply again starting with "
    "exactly one action tag.";

const char* const kPrematureConfirmNotice =
    "[CONFIRM] is only valid after a [SQL] action executed successfully. "
    "Generate and execute a [SQL] query first.";

std::string render(std::string_view tmpl,
                   const std::map<std::string, std::string>& slots) {
  std::string out(tmpl);
  for (const auto& [key, value] : slots) {
    std::string needle = "{" + key + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace apexsql::prompts
