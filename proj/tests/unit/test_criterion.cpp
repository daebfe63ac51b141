#include <gtest/gtest.h>

#include "crest/criterion.hpp"

using namespace crest;

TEST(Criterion, NamesLettersAndAliasesParse) {
  for (Criterion c : kAllCriteria) {
    EXPECT_EQ(parse_criterion(name_of(c)), c);
    EXPECT_EQ(parse_criterion(std::string(1, letter_of(c))), c);
  }
  EXPECT_EQ(parse_criterion("Impact"), Criterion::Impact);
  EXPECT_EQ(parse_criterion("steps_to_reproduce"), Criterion::Reproducibility);
  EXPECT_FALSE(criterion_from_string("severity").has_value());
  EXPECT_THROW(parse_criterion("severity"), Error);
}

TEST(CriterionSet, SetOperations) {
  CriterionSet s{Criterion::Impact, Criterion::Frequency};
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.contains(Criterion::Impact));
  EXPECT_EQ((s & CriterionSet::model_criteria()), s);
  EXPECT_EQ(CriterionSet::all().without(Criterion::TroubleDescription), CriterionSet::model_criteria());
  s.erase(Criterion::Impact);
  EXPECT_EQ(s, CriterionSet{Criterion::Frequency});
  s.insert(Criterion::Condition);
  EXPECT_EQ(s.to_vector(), (std::vector<Criterion>{Criterion::Condition, Criterion::Frequency}));
  EXPECT_EQ(CriterionSet::from_names(s.names()), s);
  EXPECT_TRUE(CriterionSet{}.empty());
}

TEST(CriterionMap, PresentTracksSetSlots) {
  CriterionMap<int> m;
  EXPECT_TRUE(m.present().empty());
  m.set(Criterion::Condition, 3);
  m.set(Criterion::Impact, 1);
  EXPECT_EQ(m.present(), (CriterionSet{Criterion::Impact, Criterion::Condition}));
  EXPECT_EQ(m.at(Criterion::Condition), 3);
  m.reset(Criterion::Impact);
  EXPECT_FALSE(m.has(Criterion::Impact));
  EXPECT_THROW(m.at(Criterion::Impact), Error);
}
