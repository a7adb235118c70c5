#pragma once

#include <filesystem>
#include <vector>

#include "annoret/types.hpp"

namespace annoret {

// On-disk formats:
//   collections  doc_id<TAB>text                      (TSV, UTF-8, no normalization)
//   queries      query_id<TAB>text                    (TSV)
//   answers      {"query_id":..., "answers":[...]}    (JSON Lines)
//   qrels        query_id 0 doc_id grade              (4-column TREC)
//   runs         query_id Q0 doc_id rank score tag    (6-column TREC)
//   annotations  one AnnotationRecord per line        (JSON Lines)

std::vector<Document> load_collection(const std::filesystem::path& path);
void write_collection(const std::vector<Document>& docs, const std::filesystem::path& path);

std::vector<Query> load_queries(const std::filesystem::path& path);
void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path);

/// Merge gold answers from a JSONL sidecar into an existing query set.
void load_gold_answers(const std::filesystem::path& path, std::vector<Query>& queries);

/// Write the gold answers of every query that has any.
void write_gold_answers(const std::vector<Query>& queries, const std::filesystem::path& path);

RelevanceJudgments load_qrels(const std::filesystem::path& path);
void write_qrels(const RelevanceJudgments& qrels, const std::filesystem::path& path);

RunFile read_run(const std::filesystem::path& path);
void write_run(const RunFile& run, const std::filesystem::path& path);

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::vector<AnnotationRecord>& records,
                       const std::filesystem::path& path);

std::string annotation_to_json_line(const AnnotationRecord& record);
AnnotationRecord annotation_from_json_line(const std::string& line);

}  // namespace annoret
