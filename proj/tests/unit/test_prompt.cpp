#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

#include "mvg/error.hpp"
#include "mvg/prompt.hpp"

using namespace mvg;

namespace {

std::vector<PromptVideo> related_videos(std::size_t n, std::size_t nodes) {
  std::vector<PromptVideo> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"rel" + std::to_string(i), nodes, "", ""});
  return out;
}

std::size_t count_kind(const AssembledPrompt& p, SegmentKind kind) {
  return static_cast<std::size_t>(
      std::count_if(p.segments.begin(), p.segments.end(), [&](const PromptSegment& s) { return s.kind == kind; }));
}

std::size_t count_text(const AssembledPrompt& p, const std::string& text) {
  return static_cast<std::size_t>(std::count_if(p.segments.begin(), p.segments.end(),
                                                [&](const PromptSegment& s) { return s.text == text; }));
}

}  // namespace

TEST(EstimateTextTokens, WordsAndPunctuation) {
  EXPECT_EQ(estimate_text_tokens(""), 0u);
  EXPECT_EQ(estimate_text_tokens("   \n\t"), 0u);
  EXPECT_EQ(estimate_text_tokens("Question: What is the man holding?"), 8u);
  EXPECT_EQ(estimate_text_tokens("scene-graph (v2)"), 6u);
  EXPECT_EQ(estimate_text_tokens("abc123"), 1u);
  EXPECT_EQ(estimate_text_tokens("...!"), 4u);
}

TEST(EstimateTextTokens, AdditiveOverWhitespaceJoins) {
  const std::vector<std::string> parts = {"The dog runs.", "Where is it going?", "Related video 3 scene graph:"};
  std::size_t sum = 0;
  std::string joined;
  for (const auto& s : parts) {
    sum += estimate_text_tokens(s);
    joined += s + " ";
  }
  EXPECT_EQ(estimate_text_tokens(joined), sum);
}

TEST(AllocateGraphTokens, UnderCapIsUntouched) {
  EXPECT_EQ(allocate_graph_tokens({10, 20, 30}, 200), (std::vector<std::size_t>{10, 20, 30}));
  EXPECT_EQ(allocate_graph_tokens({150, 150}, std::nullopt), (std::vector<std::size_t>{150, 150}));
  EXPECT_EQ(allocate_graph_tokens({}, 200), std::vector<std::size_t>{});
}

TEST(AllocateGraphTokens, WaterFillingWithTargetFirstRemainder) {
  EXPECT_EQ(allocate_graph_tokens({100, 100, 100}, 200), (std::vector<std::size_t>{67, 67, 66}));
  EXPECT_EQ(allocate_graph_tokens({10, 300}, 200), (std::vector<std::size_t>{10, 190}));
  EXPECT_EQ(allocate_graph_tokens({5, 90, 40, 90}, 100), (std::vector<std::size_t>{5, 32, 32, 31}));
  EXPECT_EQ(allocate_graph_tokens({7, 7}, 0), (std::vector<std::size_t>{0, 0}));
}

TEST(AllocateGraphTokens, RespectsCapAndDemandsOnRandomInputs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> demands(1 + rng() % 7);
    for (auto& d : demands) d = rng() % 120;
    const std::size_t cap = rng() % 300;
    const auto got = allocate_graph_tokens(demands, cap);
    const std::size_t want_total = std::min(cap, std::accumulate(demands.begin(), demands.end(), std::size_t{0}));
    EXPECT_EQ(std::accumulate(got.begin(), got.end(), std::size_t{0}), want_total);
    for (std::size_t i = 0; i < demands.size(); ++i) EXPECT_LE(got[i], demands[i]);
    // Max-min fairness: an unsatisfied graph never receives less than another graph minus one.
    for (std::size_t i = 0; i < demands.size(); ++i) {
      if (got[i] >= demands[i]) continue;
      for (std::size_t j = 0; j < demands.size(); ++j) EXPECT_LE(got[j], got[i] + 1);
    }
  }
}

TEST(AssemblePrompt, NoRelatedVideosShape) {
  const auto p = assemble_prompt(2048, {"tgt", 12, "", ""}, {}, "What happens?");
  const auto& t = PromptTemplate::bundled();
  ASSERT_EQ(p.segments.size(), 7u);
  EXPECT_EQ(p.segments[0].text, t.system);
  EXPECT_EQ(p.segments[1].text, t.target_label);
  EXPECT_EQ(p.segments[2].kind, SegmentKind::VideoTokens);
  EXPECT_EQ(p.segments[2].ref, "video:tgt");
  EXPECT_EQ(p.segments[3].text, t.target_graph_label);
  EXPECT_EQ(p.segments[4].kind, SegmentKind::GraphTokens);
  EXPECT_EQ(p.segments[4].count, 12u);
  EXPECT_EQ(p.segments[4].ref, "graph:tgt");
  EXPECT_EQ(p.segments[5].text, t.question_prefix + " What happens?");
  EXPECT_EQ(p.segments[6].text, t.cot);
  EXPECT_EQ(p.totals.video, 2048u);
  EXPECT_EQ(p.totals.graph, 12u);
}

TEST(AssemblePrompt, RelatedGraphsAreLabeledInRetrievalOrder) {
  const auto related = related_videos(5, 20);
  const auto p = assemble_prompt(2048, {"tgt", 20, "", ""}, related, "Why?");
  std::vector<std::string> owners;
  for (std::size_t i = 0; i < p.segments.size(); ++i) {
    const auto& s = p.segments[i];
    if (s.kind != SegmentKind::GraphTokens || s.owner == "tgt") continue;
    owners.push_back(*s.owner);
    const auto k = owners.size();
    EXPECT_EQ(p.segments[i - 1].text, "Related video " + std::to_string(k) + " scene graph:");
  }
  EXPECT_EQ(owners, (std::vector<std::string>{"rel0", "rel1", "rel2", "rel3", "rel4"}));
  EXPECT_EQ(count_kind(p, SegmentKind::VideoTokens), 1u);
  EXPECT_EQ(p.totals.graph, 120u);
}

TEST(AssemblePrompt, GraphTokensAreCapped) {
  const auto p = assemble_prompt(2048, {"tgt", 100, "", ""}, related_videos(5, 100), "Why?");
  EXPECT_EQ(p.totals.graph, 200u);
  AssemblyOptions uncapped;
  uncapped.graph_token_cap.reset();
  EXPECT_EQ(assemble_prompt(2048, {"tgt", 100, "", ""}, related_videos(5, 100), "Why?", PromptTemplate::bundled(),
                            uncapped)
                .totals.graph,
            600u);
}

TEST(AssemblePrompt, NaiveStyleRepeatsVideoTokens) {
  AssemblyOptions naive;
  naive.style = PromptStyle::Naive;
  const auto p = assemble_prompt(2048, {"tgt", 20, "", ""}, related_videos(5, 20), "Why?", PromptTemplate::bundled(),
                                 naive);
  EXPECT_EQ(count_kind(p, SegmentKind::VideoTokens), 6u);
  EXPECT_EQ(count_kind(p, SegmentKind::GraphTokens), 0u);
  EXPECT_EQ(p.totals.video, 6u * 2048u);
}

TEST(AssemblePrompt, ChainOfThoughtAppearsOnceAtTheEnd) {
  const auto& t = PromptTemplate::bundled();
  const auto p = assemble_prompt(2048, {"tgt", 3, "", ""}, related_videos(2, 4), "Why?");
  EXPECT_EQ(count_text(p, t.cot), 1u);
  EXPECT_EQ(p.segments.back().text, t.cot);
  AssemblyOptions no_cot;
  no_cot.cot = false;
  EXPECT_EQ(count_text(assemble_prompt(2048, {"tgt", 3, "", ""}, {}, "Why?", t, no_cot), t.cot), 0u);
}

TEST(AssemblePrompt, OneShotFollowsSystemText) {
  AssemblyOptions opts;
  opts.one_shot = true;
  const auto& t = PromptTemplate::bundled();
  const auto p = assemble_prompt(2048, {"tgt", 3, "", ""}, {}, "Why?", t, opts);
  EXPECT_EQ(p.segments[1].text, t.one_shot);
  EXPECT_EQ(p.totals.text, assemble_prompt(2048, {"tgt", 3, "", ""}, {}, "Why?").totals.text +
                               estimate_text_tokens(t.one_shot));
}

TEST(AssemblePrompt, TotalsAreAdditiveAndMatchAccounting) {
  const auto p = assemble_prompt(2048, {"tgt", 17, "", ""}, related_videos(3, 21), "What is on the table?");
  std::size_t text = 0, video = 0, graph = 0;
  for (const auto& s : p.segments) {
    if (s.kind == SegmentKind::Text) text += estimate_text_tokens(s.text);
    if (s.kind == SegmentKind::VideoTokens) video += s.count;
    if (s.kind == SegmentKind::GraphTokens) graph += s.count;
  }
  EXPECT_EQ(p.totals, (TokenTotals{text, video, graph, text + video + graph}));
  const auto report = count_tokens(p);
  EXPECT_EQ(report.totals, p.totals);
  EXPECT_EQ(report.videos_with_tokens, 1u);
  EXPECT_EQ(report.graph_blocks, 4u);
}

TEST(AssemblePrompt, TotalGrowsWithRelatedCount) {
  std::size_t previous = 0;
  for (std::size_t n = 0; n <= 6; ++n) {
    const auto total = assemble_prompt(2048, {"tgt", 10, "", ""}, related_videos(n, 10), "Why?").totals.total;
    EXPECT_GT(total, previous);
    previous = total;
  }
}

TEST(PromptJson, RoundTrip) {
  const auto p = assemble_prompt(2048, {"tgt", 9, "g#tgt", "v#tgt"}, related_videos(2, 4), "Why?");
  const auto doc = prompt_to_json(p);
  const auto back = prompt_from_json(doc);
  EXPECT_EQ(back.segments, p.segments);
  EXPECT_EQ(back.totals, p.totals);
  EXPECT_EQ(prompt_to_json(back).dump(), doc.dump());
  EXPECT_EQ(p.segments[2].ref, "v#tgt");
}

TEST(PromptJson, InconsistentTotalsAreRejected) {
  auto doc = prompt_to_json(assemble_prompt(2048, {"tgt", 9, "", ""}, {}, "Why?"));
  doc["totals"]["total"] = 1;
  EXPECT_THROW(prompt_from_json(doc), Error);
}

TEST(PromptTemplate, MissingKeysAreRejected) {
  auto doc = nlohmann::json::parse(R"({"system": "s"})");
  EXPECT_THROW(PromptTemplate::from_json(doc), Error);
}

TEST(PromptGolden, StructuredPromptIsByteIdentical) {
  AssemblyOptions opts;
  opts.one_shot = true;
  const auto p = assemble_prompt(2048, {"kitchen-03", 24, "graph_tokens.gtok#kitchen-03", ""},
                                 {{"kitchen-07", 19, "graph_tokens.gtok#kitchen-07", ""},
                                  {"kitchen-01", 26, "graph_tokens.gtok#kitchen-01", ""}},
                                 "What does the woman put on the counter?", PromptTemplate::bundled(), opts);
  const std::string got = prompt_to_json(p).dump(2) + "\n";
  const std::string path = std::string(MVG_TEST_DATA_DIR) + "/golden/prompt_structured.json";
  if (std::getenv("MVG_UPDATE_GOLDEN")) std::ofstream(path, std::ios::binary) << got;
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << path;
  const std::string want{std::istreambuf_iterator<char>(in), {}};
  EXPECT_EQ(got, want);
}
