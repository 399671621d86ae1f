#include <gtest/gtest.h>

#include "provox/text.hpp"
#include "support.hpp"

namespace provox {
namespace {

TEST(Text, NormalizeKeepsLength) {
  const std::string in = "Rice-Krispies, please!";
  const std::string out = text::normalize(in);
  EXPECT_EQ(out, "rice krispies  please ");
  EXPECT_EQ(out.size(), in.size());
}

TEST(Text, Tokens) {
  EXPECT_EQ(text::tokens("Put the cereal-bar  in my lunch."),
            (std::vector<std::string>{"put", "the", "cereal", "bar", "in", "my", "lunch"}));
  EXPECT_TRUE(text::tokens("...").empty());
}

TEST(Text, WholeWordMentions) {
  const ObjectRef pen{"PEN", "pen", {"pen"}, false, {}};
  EXPECT_FALSE(text::find_mention("open the gripper", pen));
  const auto m = text::find_mention("grab the Pen.", pen);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->offset, 9u);
  EXPECT_EQ(m->length, 3u);
}

TEST(Text, LongestAliasWinsAtSameOffset) {
  const ObjectRef bag{"LUNCH_BAG", "lunch bag", {"lunch", "lunch bag"}, true, {}};
  const auto m = text::find_mention("into the lunch bag", bag);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->length, 9u);
}

TEST(Text, MentionsInUtteranceOrder) {
  const auto objects = testing::lunchbag().catalog();
  const auto found = text::mentioned_objects("pack the gummies and the Skittles into the lunchbox", objects);
  ASSERT_EQ(found.size(), 3u);
  EXPECT_EQ(found[0].object->id, "GUMMIES");
  EXPECT_EQ(found[1].object->id, "SKITTLES");
  EXPECT_EQ(found[2].object->id, "LUNCH_BAG");
}

TEST(Text, Stem) {
  EXPECT_EQ(text::stem("packing"), "pack");
  EXPECT_EQ(text::stem("packed"), "pack");
  EXPECT_EQ(text::stem("packs"), "pack");
  EXPECT_EQ(text::stem("bag"), "bag");
  EXPECT_EQ(text::stem("is"), "is");
}

TEST(Text, IdentifierWords) {
  EXPECT_EQ(text::identifier_words("bagLotion"), (std::vector<std::string>{"bag", "lotion"}));
  EXPECT_EQ(text::identifier_words("pack_two"), (std::vector<std::string>{"pack", "two"}));
}

}  // namespace
}  // namespace provox
