#include <gtest/gtest.h>

#include "seqattr/ingest.hpp"
#include "seqattr/json_io.hpp"
#include "seqattr/pipeline.hpp"
#include "seqattr/synthetic.hpp"
#include "tempdir.hpp"

using namespace seqattr;

namespace {

const char* kManifest = R"({
  "schema_version": "1.0",
  "T": 2, "F": 1, "L": 2,
  "class_names": ["neg", "pos"],
  "features": [{"id": 0, "name": "hr", "min": 0, "max": 10}],
  "dataset_path": "values.csv",
  "attention_path": "attention.csv"
})";

// Two instances, T=2, F=1.
void write_toy(const TempDir& d) {
  write_file(d / "manifest.json", kManifest);
  write_file(d / "values.csv", "id,label,hr\na,0,1\na,0,2\nb,1,3.5\nb,1,4\n");
  write_file(d / "attention.csv", "id,label,attention\na,0,0.1\na,0,0.9\nb,1,0.5\nb,1,0.5\n");
}

ErrorCode code_of(const std::filesystem::path& manifest) {
  try {
    load_bundle(manifest);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "load succeeded";
  return ErrorCode::kInvalidParams;
}

}  // namespace

TEST(LoadBundle, ToyShapes) {
  TempDir d;
  write_toy(d);
  auto b = load_bundle(d / "manifest.json");
  EXPECT_EQ(b.dataset.T, 2u);
  EXPECT_EQ(b.dataset.F, 1u);
  EXPECT_EQ(b.dataset.L, 2u);
  ASSERT_EQ(b.dataset.instances.size(), 2u);
  EXPECT_EQ(b.dataset.instances[1].id, "b");
  EXPECT_EQ(b.dataset.instances[1].label, 1u);
  EXPECT_EQ(b.dataset.instances[1].values(0, 0), 3.5);
  EXPECT_EQ(b.attention.event_level[0], (std::vector<double>{0.1, 0.9}));
  EXPECT_FALSE(b.attention.feature_level);
  EXPECT_EQ(b.manifest.class_names, (std::vector<std::string>{"neg", "pos"}));
}

TEST(LoadBundle, SixteenFeatureManifest) {
  TempDir d;
  auto syn = make_synthetic({.per_class = 3, .T = 4, .F = 16});
  auto path = save_bundle(syn.dataset, syn.attention, d.path());
  auto m = read_manifest(path);
  EXPECT_EQ(m.F, 16u);
  ASSERT_EQ(m.features.size(), 16u);
  for (std::size_t f = 0; f < 16; ++f) EXPECT_EQ(m.features[f].id, f);
  EXPECT_EQ(load_bundle(path).dataset.F, 16u);
}

TEST(LoadBundle, ShortAttentionNamesInstance) {
  TempDir d;
  write_toy(d);
  write_file(d / "attention.csv", "id,label,attention\na,0,0.1\na,0,0.9\nb,1,0.5\n");
  try {
    load_bundle(d / "manifest.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
    ASSERT_TRUE(e.where());
    EXPECT_NE(e.where()->file.find("attention.csv"), std::string::npos);
  }
}

TEST(LoadBundle, MissingFileIsNamed) {
  TempDir d;
  write_toy(d);
  std::filesystem::remove(d / "values.csv");
  try {
    load_bundle(d / "manifest.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
    ASSERT_TRUE(e.where());
    EXPECT_NE(e.where()->file.find("values.csv"), std::string::npos);
  }
  EXPECT_EQ(code_of(d / "nope.json"), ErrorCode::kMissingFile);
}

TEST(LoadBundle, UnsupportedVersion) {
  TempDir d;
  write_toy(d);
  std::string m = kManifest;
  m.replace(m.find("\"1.0\""), 5, "\"2.0\"");
  write_file(d / "manifest.json", m);
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kVersionUnsupported);
  m.replace(m.find("\"2.0\""), 5, "\"1.7\"");
  write_file(d / "manifest.json", m);
  EXPECT_NO_THROW(load_bundle(d / "manifest.json"));
}

TEST(LoadBundle, OutOfRangeValueAndAttention) {
  TempDir d;
  write_toy(d);
  write_file(d / "values.csv", "id,label,hr\na,0,1\na,0,12\nb,1,3.5\nb,1,4\n");
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kValueOutOfRange);
  write_toy(d);
  write_file(d / "attention.csv", "id,label,attention\na,0,0.1\na,0,1.5\nb,1,0.5\nb,1,0.5\n");
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kValueOutOfRange);
}

TEST(LoadBundle, ParseErrorCarriesLocation) {
  TempDir d;
  write_toy(d);
  write_file(d / "values.csv", "id,label,hr\na,0,1\na,0,2\nb,1,abc\nb,1,4\n");
  try {
    load_bundle(d / "manifest.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    ASSERT_TRUE(e.where());
    EXPECT_NE(e.where()->file.find("values.csv"), std::string::npos);
    EXPECT_EQ(e.where()->record, std::optional<std::size_t>(2));
    EXPECT_EQ(e.where()->field, "hr");
  }
  write_file(d / "values.csv", "id,label,hr\na,0,1\na,0\nb,1,3\nb,1,4\n");
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kParseError);
  write_file(d / "values.csv", "id,label,hr\na,0,1\na,0,\nb,1,3\nb,1,4\n");
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kParseError);
}

TEST(LoadBundle, MismatchedLabelAndHeader) {
  TempDir d;
  write_toy(d);
  write_file(d / "values.csv", "id,label,hr\na,0,1\na,0,2\nb,5,3\nb,5,4\n");
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kSchemaMismatch);
  write_file(d / "values.csv", "id,label,pulse\na,0,1\na,0,2\nb,1,3\nb,1,4\n");
  EXPECT_EQ(code_of(d / "manifest.json"), ErrorCode::kSchemaMismatch);
}

TEST(SaveBundle, RoundTripIsExact) {
  TempDir d1, d2;
  auto syn = make_synthetic({.per_class = 6, .T = 7, .F = 3, .feature_attention = true, .seed = 4});
  auto p1 = save_bundle(syn.dataset, syn.attention, d1.path(), {"a", "b"});
  auto b = load_bundle(p1);
  EXPECT_EQ(b.dataset, syn.dataset);
  EXPECT_EQ(b.attention, syn.attention);
  auto p2 = save_bundle(b.dataset, b.attention, d2.path(), b.manifest.class_names);
  for (const auto* name : {"manifest.json", "values.csv", "attention.csv", "feature_attention.csv",
                           "attributes.csv", "embedding.csv"})
    EXPECT_EQ(read_file(d1 / name), read_file(d2 / name)) << name;
  (void)p2;
}

TEST(ExportSummary, SameResultSameBytes) {
  TempDir d;
  auto syn = make_synthetic({.per_class = 20, .T = 10, .F = 2});
  auto r = analyze(syn.dataset, syn.attention, AnalysisParams{});
  export_summary(r, d / "one.json");
  export_summary(r, d / "nested/dir/two.json");
  EXPECT_EQ(read_file(d / "one.json"), read_file(d / "nested/dir/two.json"));
  auto j = Json::parse(read_file(d / "one.json"));
  EXPECT_EQ(j["schema_version"], "1.0");
  const auto& cls = j["features"][0]["classes"][0];
  std::size_t total = 0;
  for (const auto& c : cls["clusters"]) {
    EXPECT_EQ(c["size"].get<std::size_t>(), c["members"].size());
    total += c["size"].get<std::size_t>();
  }
  EXPECT_EQ(total, cls["noise"]["kept"].size());
}

TEST(ExportSummary, EmptyResultIsValidJson) {
  TempDir d;
  AnalysisResult empty;
  export_summary(empty, d / "empty.json");
  auto j = Json::parse(read_file(d / "empty.json"));
  EXPECT_TRUE(j["features"].empty());
  EXPECT_TRUE(j["ranking"].empty());
}

TEST(ExportSummary, UnwritablePathIsIoFailure) {
  TempDir d;
  write_file(d / "file", "x");
  try {
    export_summary(AnalysisResult{}, d / "file/out.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoFailure);
  }
}
