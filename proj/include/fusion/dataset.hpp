#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fusion/capture.hpp"

namespace fusion {

// Deterministic synthetic QA suite. The first 20 records come from a fixed
// fact table (so the default suite is identical across seeds); additional
// records are seeded arithmetic questions.
std::vector<PromptRecord> gen_dataset(std::size_t count = 20, std::uint64_t seed = 0);

// One compact JSON object per line with keys id, question, ground_truth,
// explanation, topic.
void write_jsonl(const std::vector<PromptRecord>& records, const std::string& path);

// Parses JSONL prompt records in file order. Whitespace-only lines are
// skipped; malformed lines, missing/empty required fields (id, question,
// ground_truth), and duplicate ids raise InputError naming the line number.
std::vector<PromptRecord> ingest(const std::string& path);

}  // namespace fusion
