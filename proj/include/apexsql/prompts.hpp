#pragma once

#include <map>
#include <string>
#include <string_view>

namespace apexsql::prompts {

// Instruction templates for every gateway call the pipeline makes. Slots
// use {name} placeholders; render() substitutes only the provided names so
// literal JSON braces in the templates survive untouched.

extern const char* const kLogicalPlan;        // slots: question
extern const char* const kAggregatePlans;     // slots: count, question, plans
extern const char* const kDeletionPass;       // slots: question, logical_plan, schema, evidence
extern const char* const kSelectionPass;      // slots: question, logical_plan, schema, evidence
extern const char* const kSemanticLinking;    // slots: critical_rules, question, logical_plan, evidence, schema
extern const char* const kTableExploration;   // slots: critical_rules, table_name, table_block, question, semantic_role, evidence
extern const char* const kTableVerdict;       // slots: table_name, observations, question, evidence
extern const char* const kGlobalSynthesis;    // slots: question, evidence, db_summary, schema_status, max_rounds, round_feedback
extern const char* const kRealizationPaths;   // slots: question, evidence, schema, logical_plan
extern const char* const kActionSpace;        // no slots (system message)
extern const char* const kEvidenceLinking;    // slots: query, knowledge_file_name, knowledge_content
extern const char* const kAnswerSelection;    // slots: schema, question, candidates

extern const char* const kForcedSynthesisDirective;
extern const char* const kUnparsableActionNotice;
extern const char* const kPrematureConfirmNotice;

std::string render(std::string_view tmpl,
                   const std::map<std::string, std::string>& slots);

}  // namespace apexsql::prompts
