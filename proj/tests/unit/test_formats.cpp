#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "mvg/error.hpp"
#include "mvg/formats.hpp"
#include "mvg/fusion.hpp"
#include "mvg/retrieval.hpp"

using namespace mvg;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mvg_formats_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Matrix ramp(std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.values().size(); ++i) m.values()[i] = scale * (static_cast<double>(i) - 3.0);
  return m;
}

using Decoder = std::function<void(std::string)>;

// Every strict prefix of a valid encoding must fail with FormatError, naming
// the source and an offset inside the buffer.
void expect_truncations_fail(const std::string& bytes, const Decoder& decode) {
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    try {
      decode(bytes.substr(0, len));
      ADD_FAILURE() << "prefix of length " << len << " decoded";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::FormatError);
      EXPECT_EQ(e.file(), "blob.bin");
      ASSERT_TRUE(e.offset().has_value());
      EXPECT_LE(*e.offset(), len);
    }
  }
}

void expect_error_at(const std::string& bytes, const Decoder& decode, std::uint64_t offset) {
  try {
    decode(bytes);
    FAIL() << "decoded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    ASSERT_TRUE(e.offset().has_value());
    EXPECT_EQ(*e.offset(), offset);
  }
}

VideoGraph sample_graph() {
  VideoGraph g;
  g.video_id = "vid";
  g.nodes = {{0, 2, "man", 4, {1.5, 2, 10, 20, 2}, {0.5, -0.25, 1}},
             {1, 2, "cup", std::nullopt, {3, 4, 5, 6, 2}, {0, 0.125, -1}},
             {2, 9, "man", 4, {2, 2, 10, 20, 9}, {0.75, 0.5, 0.25}}};
  g.intra_edges = {{0, 1, "holds"}};
  g.inter_edges = {{0, 2, 4}, {2, 0, 4}};
  return g;
}

}  // namespace

TEST(Descriptors, RoundTripIsByteIdentical) {
  FrameDescriptors d{ramp(5, 3, 0.125)};
  const auto bytes = encode_descriptors(d);
  EXPECT_EQ(bytes.substr(0, 4), "FDSC");
  const auto back = decode_descriptors(bytes);
  EXPECT_EQ(back.values, d.values);
  EXPECT_EQ(encode_descriptors(back), bytes);
}

TEST(Descriptors, CorruptionCarriesOffset) {
  const auto bytes = encode_descriptors({ramp(2, 2, 1.0)});
  Decoder dec = [](std::string b) { decode_descriptors(std::move(b), "blob.bin"); };
  expect_truncations_fail(bytes, dec);
  std::string bad = bytes;
  bad[0] = 'X';
  expect_error_at(bad, dec, 0);
  expect_error_at(bytes + "z", dec, bytes.size());
}

TEST(FeatureFile, RoundTrip) {
  FeatureFile f{2, {{3, {1.5, 2.5, 4, 8, 3}, {0.5f, -1.0f}}, {7, {0, 0, 1, 1, 7}, {2.0f, 0.25f}}}};
  const auto bytes = encode_feature_file(f);
  EXPECT_EQ(bytes.substr(0, 4), "FEAT");
  const auto back = decode_feature_file(bytes);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].values, f.records[1].values);
  EXPECT_EQ(back.records[0].box, f.records[0].box);
  EXPECT_EQ(encode_feature_file(back), bytes);
  expect_truncations_fail(bytes, [](std::string b) { decode_feature_file(std::move(b), "blob.bin"); });
}

TEST(FeatureFile, ReadFromDiskNamesTheFile) {
  TempDir dir;
  const auto path = dir.file("features.bin");
  write_feature_file(path, {2, {{3, {1, 2, 3, 4, 3}, {0.5f, 1.0f}}}});
  std::string bytes = slurp(path);
  bytes.resize(bytes.size() - 3);
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    read_feature_file(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.file(), path);
    EXPECT_TRUE(e.offset().has_value());
  }
}

TEST(MissingFile, IsAnIoError) {
  try {
    read_descriptor_file("/nonexistent/mvg/descriptors.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
    EXPECT_EQ(e.file(), "/nonexistent/mvg/descriptors.bin");
  }
}

TEST(GraphTokens, RoundTrip) {
  std::vector<TokenMatrix> tokens = {{"target", ramp(3, 4, 0.5)}, {"rel-a", Matrix(0, 4)}, {"rel-b", ramp(1, 4, -2)}};
  const auto bytes = encode_graph_tokens(tokens);
  EXPECT_EQ(bytes.substr(0, 4), "GTOK");
  const auto back = decode_graph_tokens(bytes);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].owner, tokens[i].owner);
    EXPECT_EQ(back[i].values, tokens[i].values);
  }
  EXPECT_EQ(encode_graph_tokens(back), bytes);
  expect_truncations_fail(bytes, [](std::string b) { decode_graph_tokens(std::move(b), "blob.bin"); });
}

TEST(Checkpoint, RoundTrip) {
  FusionConfig cfg;
  cfg.d_node = 3;
  cfg.d_model = 4;
  cfg.d_llm = 5;
  cfg.layers = 2;
  cfg.separate_edge_types = true;
  const auto params = FusionParams::initialize(cfg, 11);
  const auto bytes = encode_checkpoint(params);
  EXPECT_EQ(bytes.substr(0, 4), "GFMP");
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  const auto a = tensors(params), b = tensors(back);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].shape, b[i].shape);
    for (std::size_t k = 0; k < a[i].values.size(); ++k)
      EXPECT_EQ(static_cast<float>(a[i].values[k]), b[i].values[k]);
  }
  expect_truncations_fail(bytes, [](std::string b) { decode_checkpoint(std::move(b), "blob.bin"); });
}

TEST(VectorStore, RoundTrip) {
  std::vector<VideoVector> entries = {VideoVector::make("a", {1, 0, 0.5}), VideoVector::make("bb", {-0.25, 2, 0})};
  const auto bytes = encode_vector_store(entries, 3);
  EXPECT_EQ(bytes.substr(0, 4), "VVEC");
  const auto back = decode_vector_store(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].video_id, "bb");
  EXPECT_EQ(back[1].vector, entries[1].vector);
  EXPECT_EQ(encode_vector_store(back, 3), bytes);
  expect_truncations_fail(bytes, [](std::string b) { decode_vector_store(std::move(b), "blob.bin"); });
}

TEST(JsonDocs, TripletsGroundingsTrackletsScenes) {
  std::vector<Triplet> triplets = {{"man", "holds", "cup", 2}, {"dog", "runs across", "park", 9}};
  EXPECT_EQ(triplets_from_json(triplets_to_json(triplets)), triplets);

  GroundingSet groundings = {{{0, Role::Subject}, {1, 2, 3, 4, 2}}, {{1, Role::Object}, {5, 6, 7, 8, 9}}};
  EXPECT_EQ(groundings_from_json(groundings_to_json(groundings)), groundings);

  std::vector<Tracklet> tracklets = {{4, {{2, {1, 2, 3, 4, 2}}, {9, {2, 2, 3, 4, 9}}}}};
  EXPECT_EQ(tracklets_to_json(tracklets_from_json(tracklets_to_json(tracklets))).dump(),
            tracklets_to_json(tracklets).dump());

  std::vector<Scene> scenes = {{0, 9, 4}, {10, 19, 14}};
  EXPECT_EQ(scenes_from_json(scenes_to_json(scenes)), scenes);
}

TEST(JsonDocs, SchemaErrorsAreFormatErrors) {
  try {
    triplets_from_json(nlohmann::json::parse(R"({"triplets":[{"subject":"a"}]})"), "t.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.file(), "t.json");
  }
  try {
    parse_json_text("{\"a\": [1, 2", "broken.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.file(), "broken.json");
    EXPECT_TRUE(e.offset().has_value());
  }
}

TEST(GraphFiles, RoundTripThroughDisk) {
  TempDir dir;
  const auto g = sample_graph();
  const auto files = write_graph_files(dir.file(""), g);
  const std::string json_bytes = slurp(files.graph_json), feat_bytes = slurp(files.features);
  const auto back = read_graph_file(files.graph_json);
  ASSERT_EQ(back.nodes.size(), 3u);
  EXPECT_EQ(back.nodes[1].track_id, std::nullopt);
  EXPECT_EQ(back.nodes[2].track_id, 4);
  EXPECT_EQ(back.nodes[0].feature, g.nodes[0].feature);
  EXPECT_EQ(back.intra_edges, g.intra_edges);
  EXPECT_EQ(back.inter_edges, g.inter_edges);

  TempDir again;
  const auto files2 = write_graph_files(again.file(""), back);
  EXPECT_EQ(slurp(files2.graph_json), json_bytes);
  EXPECT_EQ(slurp(files2.features), feat_bytes);
}
