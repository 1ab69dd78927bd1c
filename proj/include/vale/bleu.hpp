#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace vale {

using Tokens = std::vector<std::string>;

/// Lower-cases ASCII letters, splits on whitespace and emits every ASCII
/// punctuation character except '_' as its own token.
Tokens tokenize(std::string_view text);

struct BleuReport {
  double score = 0.0;
  std::vector<double> precisions;       // orders 1..maxOrder
  std::vector<long long> matches;       // clipped n-gram matches per order
  std::vector<long long> totals;        // candidate n-grams per order
  double brevityPenalty = 0.0;
  long long candidateLength = 0;
  long long referenceLength = 0;        // closest reference length
  bool emptyCandidate = false;          // score 0, brevityPenalty 0 by convention
};

/// Sentence-level BLEU with per-reference clipping, uniform weights, no
/// smoothing: any order with zero matches gives score 0. The brevity
/// reference is the closest reference length (ties: the shorter one).
/// Throws InputError without references or with maxOrder < 1.
BleuReport bleu(const Tokens& candidate, const std::vector<Tokens>& references, int maxOrder = 4);

struct ReferenceText {
  std::string id;
  std::string className;
  std::string text;
};

class ReferenceStore {
 public:
  void add(ReferenceText ref);
  const ReferenceText* find(const std::string& id) const;
  std::size_t size() const { return refs_.size(); }
  std::vector<std::string> ids() const;
  /// JSON list of {"id","class","text"}.
  static ReferenceStore from_json(const std::string& text);

 private:
  std::map<std::string, ReferenceText> refs_;
};

struct HypothesisRecord {
  std::string promptId;
  std::string candidate;
  std::string referenceId;
  std::string className;
};

/// JSON list of {"id" (reference id),"class","text","promptId"}.
std::vector<HypothesisRecord> parse_hypotheses(const std::string& text);

struct ScoredRecord {
  std::string referenceId;
  BleuReport report;
};

struct PromptScores {
  std::vector<ScoredRecord> records;
  double meanScore = 0.0;
};

struct RecordError {
  std::size_t index = 0;
  std::string promptId;
  std::string referenceId;
  std::string message;
};

struct PromptEvaluation {
  std::map<std::string, PromptScores> prompts;  // ordered by prompt id
  std::vector<RecordError> errors;
};

/// Scores every record whose reference resolves; the rest become errors.
PromptEvaluation evaluate_prompts(const std::vector<HypothesisRecord>& records, const ReferenceStore& references,
                                  int maxOrder = 4);

nlohmann::json to_json(const BleuReport& report);
nlohmann::json to_json(const PromptEvaluation& evaluation);
/// Aligned plain-text table, one row per (prompt, record) plus a mean row.
std::string format_table(const PromptEvaluation& evaluation);

}  // namespace vale
