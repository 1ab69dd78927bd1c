#include "vale/bleu.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "vale/error.hpp"

namespace vale {

using nlohmann::json;

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 0x80 && std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u) && ch != '_') {
      flush();
      out.emplace_back(1, ch);
    } else {
      word.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return out;
}

namespace {

std::map<std::vector<std::string_view>, long long> ngram_counts(const Tokens& tokens, int n) {
  std::map<std::vector<std::string_view>, long long> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string_view>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

BleuReport bleu(const Tokens& candidate, const std::vector<Tokens>& references, int maxOrder) {
  if (references.empty()) throw InputError("BLEU needs at least one reference");
  if (maxOrder < 1) throw InputError("BLEU maxOrder must be >= 1");

  BleuReport report;
  report.candidateLength = static_cast<long long>(candidate.size());
  long long bestDiff = std::numeric_limits<long long>::max();
  for (const auto& ref : references) {
    const auto len = static_cast<long long>(ref.size());
    const long long diff = std::llabs(len - report.candidateLength);
    if (diff < bestDiff || (diff == bestDiff && len < report.referenceLength)) {
      bestDiff = diff;
      report.referenceLength = len;
    }
  }

  bool allPositive = true;
  for (int n = 1; n <= maxOrder; ++n) {
    auto cand = ngram_counts(candidate, n);
    std::map<std::vector<std::string_view>, long long> maxRef;
    for (const auto& ref : references)
      for (const auto& [gram, count] : ngram_counts(ref, n)) {
        auto& slot = maxRef[gram];
        slot = std::max(slot, count);
      }
    long long matched = 0;
    for (const auto& [gram, count] : cand) {
      auto it = maxRef.find(gram);
      if (it != maxRef.end()) matched += std::min(count, it->second);
    }
    const long long total = std::max<long long>(0, report.candidateLength - n + 1);
    report.matches.push_back(matched);
    report.totals.push_back(total);
    const double p = total > 0 ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
    report.precisions.push_back(p);
    if (!(p > 0.0)) allPositive = false;
  }

  if (report.candidateLength == 0) {
    report.emptyCandidate = true;
    report.brevityPenalty = 0.0;
    report.score = 0.0;
    return report;
  }
  const double c = static_cast<double>(report.candidateLength);
  const double r = static_cast<double>(report.referenceLength);
  report.brevityPenalty = c < r ? std::exp(1.0 - r / c) : 1.0;
  if (allPositive) {
    double logSum = 0.0;
    for (double p : report.precisions) logSum += std::log(p);
    report.score = report.brevityPenalty * std::exp(logSum / maxOrder);
  }
  return report;
}

void ReferenceStore::add(ReferenceText ref) {
  if (ref.id.empty()) throw InputError("reference id must be non-empty");
  auto id = ref.id;
  if (!refs_.emplace(id, std::move(ref)).second) throw ConflictError("duplicate reference id '" + id + "'");
}

const ReferenceText* ReferenceStore::find(const std::string& id) const {
  auto it = refs_.find(id);
  return it == refs_.end() ? nullptr : &it->second;
}

std::vector<std::string> ReferenceStore::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : refs_) out.push_back(id);
  return out;
}

ReferenceStore ReferenceStore::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("references file is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw InputError("references file must be a JSON list");
  ReferenceStore store;
  for (const auto& e : doc) {
    if (!e.is_object() || !e.value("id", json()).is_string() || !e.value("text", json()).is_string())
      throw InputError("reference entries need string fields id and text");
    store.add({e["id"].get<std::string>(), e.value("class", std::string()), e["text"].get<std::string>()});
  }
  return store;
}

std::vector<HypothesisRecord> parse_hypotheses(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("hypotheses file is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw InputError("hypotheses file must be a JSON list");
  std::vector<HypothesisRecord> out;
  for (const auto& e : doc) {
    if (!e.is_object() || !e.value("id", json()).is_string() || !e.value("text", json()).is_string() ||
        !e.value("promptId", json()).is_string())
      throw InputError("hypothesis entries need string fields id, text and promptId");
    out.push_back({e["promptId"].get<std::string>(), e["text"].get<std::string>(), e["id"].get<std::string>(),
                   e.value("class", std::string())});
  }
  return out;
}

PromptEvaluation evaluate_prompts(const std::vector<HypothesisRecord>& records, const ReferenceStore& references,
                                  int maxOrder) {
  PromptEvaluation eval;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const ReferenceText* ref = references.find(rec.referenceId);
    if (!ref) {
      eval.errors.push_back({i, rec.promptId, rec.referenceId, "reference '" + rec.referenceId + "' not found"});
      continue;
    }
    eval.prompts[rec.promptId].records.push_back(
        {rec.referenceId, bleu(tokenize(rec.candidate), {tokenize(ref->text)}, maxOrder)});
  }
  for (auto& [id, scores] : eval.prompts) {
    double sum = 0.0;
    for (const auto& r : scores.records) sum += r.report.score;
    scores.meanScore = sum / static_cast<double>(scores.records.size());
  }
  return eval;
}

json to_json(const BleuReport& report) {
  return {{"score", report.score},
          {"precisions", report.precisions},
          {"matches", report.matches},
          {"totals", report.totals},
          {"brevityPenalty", report.brevityPenalty},
          {"candidateLength", report.candidateLength},
          {"referenceLength", report.referenceLength},
          {"emptyCandidate", report.emptyCandidate}};
}

json to_json(const PromptEvaluation& evaluation) {
  json prompts = json::array();
  for (const auto& [id, scores] : evaluation.prompts) {
    json recs = json::array();
    for (const auto& r : scores.records) recs.push_back({{"referenceId", r.referenceId}, {"bleu", to_json(r.report)}});
    prompts.push_back({{"promptId", id}, {"meanScore", scores.meanScore}, {"records", recs}});
  }
  json errors = json::array();
  for (const auto& e : evaluation.errors)
    errors.push_back({{"index", e.index}, {"promptId", e.promptId}, {"referenceId", e.referenceId}, {"message", e.message}});
  return {{"prompts", prompts}, {"errors", errors}};
}

std::string format_table(const PromptEvaluation& evaluation) {
  std::size_t promptWidth = 6, refWidth = 9;
  for (const auto& [id, scores] : evaluation.prompts) {
    promptWidth = std::max(promptWidth, id.size());
    for (const auto& r : scores.records) refWidth = std::max(refWidth, r.referenceId.size());
  }
  std::ostringstream out;
  auto row = [&](const std::string& a, const std::string& b, const std::string& c) {
    out << a << std::string(promptWidth - a.size() + 2, ' ') << b << std::string(refWidth - b.size() + 2, ' ') << c
        << '\n';
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  row("prompt", "reference", "BLEU");
  for (const auto& [id, scores] : evaluation.prompts) {
    for (const auto& r : scores.records) row(id, r.referenceId, fmt(r.report.score));
    row(id, "(mean)", fmt(scores.meanScore));
  }
  for (const auto& e : evaluation.errors) out << "error: record " << e.index << " (" << e.promptId << "): " << e.message << '\n';
  return out.str();
}

}  // namespace vale
