#include <gtest/gtest.h>

#include "hotspots/docs/doc_lint.h"
#include "hotspots/training/config.h"

namespace hotspots::docs {
namespace {

std::string FullMap() {
  std::string s = "| anchor | code |\n|---|---|\n";
  for (const auto& a : RequiredAnchors()) s += "| `" + a.id + "` | somewhere |\n";
  return s;
}

std::string FullReference() {
  std::string s = "| key | default |\n|---|---|\n";
  for (const auto& k : training::TrainConfig::FieldNames()) s += "| `" + k + "` | x |\n";
  return s;
}

TEST(DocLint, TableKeysTakeFirstBacktickedCell) {
  const auto keys = TableKeys("text `ignored`\n| `a` | `b` |\n|---|\n| plain | x |\n|  `c`  |\n");
  EXPECT_EQ(keys, (std::vector<std::string>{"a", "c"}));
}

TEST(DocLint, CompleteDocsPass) {
  const auto r = LintTexts(FullMap(), FullReference());
  EXPECT_TRUE(r.pass) << r.Text();
  EXPECT_EQ(r.mapped_anchors, static_cast<int>(RequiredAnchors().size()));
  EXPECT_EQ(r.documented_keys, static_cast<int>(training::TrainConfig::FieldNames().size()));
}

TEST(DocLint, FlagsMissingDuplicateAndUnknownEntries) {
  std::string map = FullMap();
  const std::string first = "| `" + RequiredAnchors()[0].id + "` | somewhere |\n";
  map.erase(map.find(first), first.size());
  map += "| `" + RequiredAnchors()[1].id + "` | again |\n| `made-up` | x |\n";
  const auto r = LintTexts(map, FullReference() + "| `batchsize` | 8 |\n");
  EXPECT_FALSE(r.pass);
  const std::string text = r.Text();
  for (const auto& needle : {RequiredAnchors()[0].id, RequiredAnchors()[1].id,
                             std::string("made-up"), std::string("batchsize")})
    EXPECT_NE(text.find(needle), std::string::npos) << needle;
}

TEST(DocLint, RepositoryDocsPass) {
  const auto r = DocLint(HOTSPOTS_SOURCE_DIR);
  EXPECT_TRUE(r.pass) << r.Text();
}

}  // namespace
}  // namespace hotspots::docs
