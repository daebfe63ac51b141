#include <gtest/gtest.h>

#include "crest/observation.hpp"
#include "crest/template_spec.hpp"

using namespace crest;

namespace {

const TemplateSpec& tmpl() {
  static const TemplateSpec t = TemplateSpec::defaults();
  return t;
}

bool has_diag(const Observation& o, DiagnosticKind kind, std::optional<Criterion> c = std::nullopt) {
  return o.has_diagnostic(kind, c);
}

std::string reassemble(const Observation& o) {
  std::string out = o.residue;
  for (const auto& s : o.segments) out += s.header + s.body;
  return out;
}

const char* kFull =
    "Trouble description: Node restarts after upgrade to v2.1.3\n"
    "Impact: Traffic loss on all cells\n"
    "Condition: High load during busy hour\n"
    "Frequency: Every second day\n"
    "Steps to reproduce: Upgrade node, run load test\n";

}  // namespace

TEST(ParseObservation, AllFiveHeaders) {
  const auto o = parse_observation(kFull, tmpl());
  EXPECT_EQ(o.present(), CriterionSet::all());
  EXPECT_EQ(*o.text(Criterion::Impact), "Traffic loss on all cells");
  EXPECT_EQ(*o.text(Criterion::Reproducibility), "Upgrade node, run load test");
  EXPECT_TRUE(trim(o.residue).empty());
  EXPECT_EQ(reassemble(o), o.raw);
}

TEST(ParseObservation, EmptyTextFlagsEmptyObservation) {
  const auto o = parse_observation("", tmpl());
  EXPECT_TRUE(o.present().empty());
  EXPECT_TRUE(has_diag(o, DiagnosticKind::EmptyObservation));
}

TEST(ParseObservation, HeaderWithoutBodyIsUnset) {
  const auto o = parse_observation("Trouble description: link flaps\nImpact:\nCondition: cold start", tmpl());
  EXPECT_FALSE(o.has(Criterion::Impact));
  EXPECT_TRUE(has_diag(o, DiagnosticKind::EmptyField, Criterion::Impact));
  EXPECT_EQ(*o.text(Criterion::Condition), "cold start");
}

TEST(ParseObservation, AliasesAreCaseInsensitive) {
  const auto o = parse_observation("problem DESCRIPTION: x fails\nSYSTEM IMPACT: outage\nhow often: daily", tmpl());
  EXPECT_EQ(*o.text(Criterion::TroubleDescription), "x fails");
  EXPECT_EQ(*o.text(Criterion::Impact), "outage");
  EXPECT_EQ(*o.text(Criterion::Frequency), "daily");
}

TEST(ParseObservation, ResidueFoldsIntoDescriptionWithoutHeader) {
  const auto o = parse_observation("Board reboots randomly.\nImpact: calls dropped", tmpl());
  EXPECT_EQ(*o.text(Criterion::TroubleDescription), "Board reboots randomly.");
  EXPECT_TRUE(has_diag(o, DiagnosticKind::ResidueFolded));
  EXPECT_EQ(reassemble(o), o.raw);
}

TEST(ParseObservation, ResidueStaysUnassignedWithDescriptionHeader) {
  const auto o = parse_observation("preamble\nTrouble description: real text", tmpl());
  EXPECT_EQ(*o.text(Criterion::TroubleDescription), "real text");
  EXPECT_TRUE(has_diag(o, DiagnosticKind::UnassignedResidue));
}

TEST(ParseObservation, MergedHeadersSplitWithDiagnostic) {
  const auto o = parse_observation("Trouble description: crash Impact: outage\nFrequency: once", tmpl());
  EXPECT_EQ(*o.text(Criterion::TroubleDescription), "crash");
  EXPECT_EQ(*o.text(Criterion::Impact), "outage");
  EXPECT_TRUE(has_diag(o, DiagnosticKind::MergedField, Criterion::Impact));
  EXPECT_EQ(reassemble(o), o.raw);
}

TEST(ParseObservation, HeaderWordInsideTextIsNotAHeader) {
  const auto o = parse_observation("Trouble description: the noimpact: case", tmpl());
  EXPECT_FALSE(o.has(Criterion::Impact));
  EXPECT_EQ(*o.text(Criterion::TroubleDescription), "the noimpact: case");
}

TEST(ParseObservation, DuplicateHeaderAppends) {
  const auto o = parse_observation("Impact: a\nImpact: b", tmpl());
  EXPECT_EQ(*o.text(Criterion::Impact), "a b");
  EXPECT_TRUE(has_diag(o, DiagnosticKind::DuplicateHeader, Criterion::Impact));
}

TEST(ParseObservation, RenderRoundTrip) {
  CriterionMap<std::string> fields;
  fields.set(Criterion::TroubleDescription, "alarm storm on boot");
  fields.set(Criterion::Frequency, "always");
  fields.set(Criterion::Reproducibility, "power cycle twice");
  const auto o = parse_observation(render_observation(fields, tmpl()), tmpl());
  EXPECT_EQ(o.criteria, fields);
}

TEST(TemplateSpec, JsonRoundTripAndCustomAliases) {
  auto t = TemplateSpec::defaults();
  auto impact = t.aliases(Criterion::Impact);
  impact.push_back("Consequence:");
  t.set_aliases(Criterion::Impact, impact);
  const auto back = TemplateSpec::from_json(t.to_json());
  const auto o = parse_observation("Consequence: revenue loss", back);
  EXPECT_EQ(*o.text(Criterion::Impact), "revenue loss");
}
