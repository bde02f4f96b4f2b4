#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "apexsql/agent.hpp"
#include "apexsql/exec.hpp"
#include "apexsql/gateway.hpp"
#include "apexsql/schema.hpp"
#include "json.hpp"

namespace apexsql {

struct Candidate {
  EpisodeResult episode;
  std::optional<std::string> canonical_key;  // empty for failed/unexecutable
};

struct CandidateBundle {
  std::vector<Candidate> candidates;
  size_t size() const { return candidates.size(); }
};

struct VoteOutcome {
  int selected_index = 0;
  bool unselectable = false;   // every candidate failed
  bool tie_break_used = false;
};

// Result-based majority voting; ties among top keys go to one model call
// over one representative per tied key. With no gateway (or on parse
// failure) the representative of the tied key with the lowest candidate
// index wins.
VoteOutcome vote(const CandidateBundle& bundle, Gateway* gateway,
                 const std::string& question, const std::string& schema_text);

// Answer selection sits behind an interface so a reward-model selector can
// slot in without touching callers; majority voting is the shipped default.
class AnswerSelector {
 public:
  virtual ~AnswerSelector() = default;
  virtual VoteOutcome select(const CandidateBundle& bundle, const std::string& question,
                             const std::string& schema_text) = 0;
};

class MajorityVoteSelector : public AnswerSelector {
 public:
  explicit MajorityVoteSelector(Gateway* gateway = nullptr) : gateway_(gateway) {}
  VoteOutcome select(const CandidateBundle& bundle, const std::string& question,
                     const std::string& schema_text) override {
    return vote(bundle, gateway_, question, schema_text);
  }

 private:
  Gateway* gateway_;
};

struct LinkingExample {
  bool covered = false;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  long retained_count = 0;
};

LinkingExample score_linking(const SchemaSubset& pred, const std::set<ColumnRef>& gold);
LinkingExample score_linking(const std::set<ColumnRef>& pred,
                             const std::set<ColumnRef>& gold);

struct LinkingAggregate {
  double srr = 0.0;
  double nsr = 0.0;
  double nsp = 0.0;
  double nsf = 0.0;  // macro-averaged per-example F1
  double c_bar = 0.0;
  long n = 0;
};

LinkingAggregate aggregate_linking(const std::vector<LinkingExample>& examples);

struct GenerationExample {
  bool ex = false;
  bool pass_at_k = false;
  double ex_at_k = 0.0;
  std::vector<int> rounds;        // per candidate
  std::vector<int> query_counts;  // per candidate
  bool gold_failed = false;
  std::string note;
};

struct GenerationScore {
  std::vector<GenerationExample> examples;
  double ex = 0.0;
  double pass_at_k = 0.0;
  double ex_at_k = 0.0;
  double r_bar = 0.0;  // mean exploration rounds over all episodes
  double q_bar = 0.0;  // mean exploratory statement count over all episodes
  long scored_n = 0;   // examples with an executable gold
};

// One gold per bundle; a missing gold result marks the example as a gold
// execution failure and keeps it out of the aggregates.
GenerationScore score_generation(const std::vector<CandidateBundle>& bundles,
                                 const std::vector<std::optional<ResultSet>>& golds,
                                 const std::vector<int>& voted_indices,
                                 CompareMode mode);

struct GoldExtraction {
  std::set<ColumnRef> refs;
  std::vector<std::string> flags;  // ambiguities and unresolvable refs
};

// Static analysis over a golden statement: qualified refs resolve through
// aliases, unqualified refs resolve against the referenced tables (all
// matches kept and flagged on ambiguity), subqueries included, stars
// expanded against the referenced tables.
GoldExtraction extract_gold_columns(const std::string& golden_sql,
                                    const DatabaseSchema& schema);

}  // namespace apexsql
