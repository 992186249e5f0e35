#include <gtest/gtest.h>

#include "physkit/annotate.hpp"
#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/fixtures.hpp"
#include "physkit/geometry.hpp"
#include "physkit/lenient_json.hpp"
#include "physkit/review.hpp"
#include "physkit/validate.hpp"
#include "physkit/vlm.hpp"
#include "support.hpp"

using namespace physkit;
using testsupport::TempDir;

namespace {

std::string listing_example() {
  const std::string t(prompt_template());
  const auto start = t.find("For example:");
  const auto end = t.find("Remember:");
  return t.substr(start, end - start);
}

RawAnnotation expected_listing() {
  RawAnnotation r;
  r.object_name = "Rifle";
  r.category = "ToyGun";
  r.dimension = "80*10*25";
  r.scale = AbsoluteScale{80, 10, 25};
  RawPart p1;
  p1.label = 1;
  p1.name = "Foregrip";
  p1.material = "Plastic";
  p1.density = 1.2;
  p1.priority_rank = 2;
  p1.neighbors = {MovementGroup{1, 8, KinematicKind::E, std::nullopt, std::nullopt}};
  p1.descriptions = {"It's a foregrip of a Rifle made of plastic.", "It can control the ...",
                     "It cannot move normally...", "Most likely to be grasped or handled."};
  RawPart p2;
  p2.label = 2;
  p2.name = "Stock";
  p2.material = "Plastic";
  p2.density = 1.2;
  p2.priority_rank = 5;
  p2.neighbors = {MovementGroup{2, 8, KinematicKind::B, 8, 2}};
  p2.descriptions = {
      "It's a foregrip of a Rifle classified as a gun. It is a big part of the object made of plastic.",
      "It can be grasped to control the object...", "It cannot move normally...", "Less likely to be grasped."};
  r.parts = {p1, p2};
  return r;
}

/// Writes default.json for `asset` as the pipeline would see it after merging.
void write_mock(const ObjectAsset& asset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "default.json", canonical_dump(raw_to_json(raw_from_asset(asset))));
}

class FlakyBackend : public VlmBackend {
 public:
  FlakyBackend(int failures, Errc code) : failures_(failures), code_(code) {}
  std::string complete(const VlmRequest&) override {
    ++calls;
    if (calls <= failures_) throw Error(code_, "flaky");
    return "ok";
  }
  int calls = 0;

 private:
  int failures_;
  Errc code_;
};

class CountingBackend : public VlmBackend {
 public:
  explicit CountingBackend(VlmBackend& inner) : inner_(inner) {}
  std::string complete(const VlmRequest& r) override {
    ++calls;
    return inner_.complete(r);
  }
  int calls = 0;

 private:
  VlmBackend& inner_;
};

}  // namespace

TEST(Prompt, TemplateIsRegeneratedIdentically) {
  EXPECT_EQ(build_system_text({1, 2}), std::string(prompt_template()));
  const std::string three = build_system_text({1, 2, 3});
  for (const char* s : {"Part_1 (image_1)", "Part_2 (image_2)", "Part_3 (image_3)"}) {
    EXPECT_NE(three.find(s), std::string::npos) << s;
  }
}

TEST(Prompt, ThreePartAsset) {
  const auto a = fixtures::door_donor().asset;
  PromptOptions o;
  o.resolution = 96;
  const Prompt p = build_prompt(a, o);
  ASSERT_EQ(p.images.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(p.images[i].part_id, i + 1);
    EXPECT_GT(p.images[i].red_pixels, 0u);
    EXPECT_EQ(p.images[i].red_pixels, count_pixels(p.images[i].image, kIsolationTarget));
  }
  EXPECT_NE(p.system_text.find("Part_3 (image_3)"), std::string::npos);
  EXPECT_TRUE(p.occlusion_warnings.empty());
}

TEST(Prompt, HiddenPartWarns) {
  PromptOptions o;
  o.resolution = 96;
  const Prompt p = build_prompt(fixtures::hidden_part().asset, o);
  EXPECT_EQ(p.occlusion_warnings, std::vector<int>{2});
  ASSERT_EQ(p.images.size(), 2u);
  EXPECT_EQ(p.images[1].view_index, 0);
  EXPECT_EQ(p.images[1].red_pixels, 0u);
}

TEST(Parse, ListingExample) {
  const RawAnnotation r = parse_response(listing_example());
  EXPECT_EQ(r, expected_listing());
}

TEST(Parse, ProseWrapper) {
  const std::string wrapped = "Sure! Here is the analysis.\n```json\n" +
                              canonical_dump(raw_to_json(expected_listing())) + "```\nLet me know.";
  EXPECT_EQ(parse_response(wrapped), expected_listing());
  const std::string bare = "Answer: " + raw_to_json(expected_listing()).dump() + " done";
  EXPECT_EQ(parse_response(bare), expected_listing());
}

TEST(Parse, DensityForms) {
  using nlohmann::json;
  EXPECT_EQ(parse_density(json("1.2 g/cm^3")), 1.2);
  EXPECT_EQ(parse_density(json("1.2 g/cm3")), 1.2);
  EXPECT_EQ(parse_density(json("1.2 g/cm³")), 1.2);
  EXPECT_EQ(parse_density(json("1.2")), 1.2);
  EXPECT_EQ(parse_density(json(1.2)), 1.2);
  EXPECT_FALSE(parse_density(json("1.2 kg/m^3")).has_value());
  EXPECT_FALSE(parse_density(json("heavy")).has_value());
}

TEST(Parse, Dimension) {
  EXPECT_EQ(parse_dimension("80*10*25"), (AbsoluteScale{80, 10, 25}));
  EXPECT_EQ(parse_dimension(" 80 * 10 * 25 cm"), (AbsoluteScale{80, 10, 25}));
  EXPECT_FALSE(parse_dimension("80x10").has_value());
}

TEST(Parse, Failures) {
  try {
    parse_response("I cannot help with that.");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnparseableResponse);
  }
  auto doc = raw_to_json(expected_listing());
  doc["parts"][0]["priority_rank"] = 11;
  doc["parts"][1]["neighbors"][0]["movement_type"] = "CB";
  try {
    raw_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaViolation);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("parts[0]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("parts[1]"), std::string::npos) << msg;
  }
}

TEST(Parse, RoundTripThroughJson) {
  const RawAnnotation r = raw_from_asset(fixtures::door_donor().asset);
  EXPECT_EQ(raw_from_json(raw_to_json(r)), r);
  const RawAnnotation cb = raw_from_asset(fixtures::bottle_cap().asset, true);
  EXPECT_EQ(cb.parts[1].neighbors[0].movement_type, KinematicKind::CB);
  EXPECT_EQ(raw_from_asset(fixtures::bottle_cap().asset).parts[1].neighbors[0].movement_type, KinematicKind::C);
}

TEST(LenientJson, Deviations) {
  using nlohmann::json;
  EXPECT_EQ(parse_lenient_json(R"({"a": 1, "b": [1, 2,],})"), json::parse(R"({"a":1,"b":[1,2]})"));
  EXPECT_EQ(parse_lenient_json(R"({"a": 1 "b": 2})"), json::parse(R"({"a":1,"b":2})"));
  EXPECT_EQ(parse_lenient_json(R"({"a": [1, 2, ...]})"), json::parse(R"({"a":[1,2]})"));
  EXPECT_EQ(parse_lenient_json(R"({"a": {"b": 1)"), json::parse(R"({"a":{"b":1}})"));
  EXPECT_EQ(parse_lenient_json(R"({"a": 1}}])"), json::parse(R"({"a":1})"));
  EXPECT_EQ(parse_lenient_json(R"({"n": [{"x": 1} "k": "v"]})"), json::parse(R"({"n":[{"x":1}],"k":"v"})"));
  EXPECT_EQ(extract_json_text("pre ```json\n{\"a\":1}\n``` post"), "{\"a\":1}\n");
  try {
    parse_lenient_json("no json here");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnparseableResponse);
  }
}

TEST(Apply, ApprovedFixture) {
  const auto f = fixtures::door_donor();
  const RawAnnotation raw = raw_from_asset(f.asset);
  const AppliedAnnotation out = apply_annotation(f.asset, raw, ReviewStatus::HumanApproved);
  EXPECT_TRUE(validate_asset(out.asset).empty());
  std::size_t movable = 0;
  for (const auto& c : f.asset.constraints) movable += has_parent_child(c.kind);
  EXPECT_EQ(out.stubs.size(), movable);
  EXPECT_TRUE(out.asset.constraints.empty());
  for (const auto& s : out.stubs) EXPECT_FALSE(s.finalized);
  EXPECT_EQ(out.asset.parts[0].material.youngs_modulus, 11.0);
}

TEST(Apply, TypeEGroupsMakeNoStubs) {
  const auto f = fixtures::laptop();
  RawAnnotation raw = raw_from_asset(f.asset);
  for (auto& p : raw.parts) {
    for (auto& g : p.neighbors) {
      g.movement_type = KinematicKind::E;
      g.parent_label.reset();
      g.child_label.reset();
    }
  }
  EXPECT_TRUE(apply_annotation(f.asset, raw, ReviewStatus::HumanEdited).stubs.empty());
}

TEST(Apply, LabelMismatch) {
  const auto three = fixtures::door_donor().asset;
  RawAnnotation raw = raw_from_asset(three);
  RawPart extra = raw.parts.back();
  extra.label = 4;
  extra.neighbors.clear();
  raw.parts.push_back(extra);
  try {
    apply_annotation(three, raw, ReviewStatus::HumanApproved);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelMismatch);
  }
}

TEST(Apply, RequiresHumanStatus) {
  const auto f = fixtures::laptop();
  try {
    apply_annotation(f.asset, raw_from_asset(f.asset), ReviewStatus::VlmDone);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidTransition);
  }
}

TEST(Apply, MaterialTable) {
  EXPECT_TRUE(lookup_material("steel").known);
  EXPECT_EQ(lookup_material(" STEEL ").youngs_modulus_gpa, lookup_material("Steel").youngs_modulus_gpa);
  const auto unknown = lookup_material("unobtainium");
  EXPECT_FALSE(unknown.known);
  EXPECT_EQ(unknown.youngs_modulus_gpa, 1.0);
  EXPECT_EQ(unknown.poisson_ratio, 0.3);
}

TEST(Vlm, MockBackendHashAndDefault) {
  TempDir dir("mock");
  VlmRequest r;
  r.system_text = "hello";
  write_text_file(dir / "default.json", "{\"default\": true}");
  MockBackend mock(dir.path());
  EXPECT_EQ(mock.complete(r), "{\"default\": true}");
  write_text_file(dir / (request_hash(r) + ".txt"), "canned");
  EXPECT_EQ(mock.complete(r), "canned");
  EXPECT_EQ(mock.calls(), 2u);
  TempDir empty("mock_empty");
  MockBackend none(empty.path());
  try {
    none.complete(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BackendUnavailable);
  }
}

TEST(Vlm, RequestHashCoversContent) {
  VlmRequest a;
  a.system_text = "x";
  VlmRequest b = a;
  EXPECT_EQ(request_hash(a), request_hash(b));
  b.temperature = 0.5;
  EXPECT_NE(request_hash(a), request_hash(b));
  b = a;
  b.images.push_back({"Part_1 (image_1)", RgbImage{1, 1, {1, 2, 3}}});
  EXPECT_NE(request_hash(a), request_hash(b));
  EXPECT_EQ(request_hash(a).size(), 64u);
}

TEST(Vlm, RetryWithBackoff) {
  FlakyBackend flaky(2, Errc::RateLimited);
  std::vector<long long> sleeps;
  RetryPolicy retry;
  retry.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
  EXPECT_EQ(query_vlm(flaky, VlmRequest{}, retry), "ok");
  EXPECT_EQ(flaky.calls, 3);
  EXPECT_EQ(sleeps, (std::vector<long long>{500, 1000}));

  FlakyBackend broken(10, Errc::Timeout);
  try {
    query_vlm(broken, VlmRequest{}, retry);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Timeout);
  }
  EXPECT_EQ(broken.calls, 3);

  FlakyBackend fatal(1, Errc::UnparseableResponse);
  EXPECT_THROW(query_vlm(fatal, VlmRequest{}, retry), Error);
  EXPECT_EQ(fatal.calls, 1);
}

TEST(Vlm, UnreachableEndpoint) {
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1";
  cfg.timeout = std::chrono::milliseconds(500);
  HttpBackend http(cfg);
  CountingBackend counting(http);
  RetryPolicy retry;
  retry.sleep = [](std::chrono::milliseconds) {};
  try {
    query_vlm(counting, VlmRequest{}, retry);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BackendUnavailable);
  }
  EXPECT_EQ(counting.calls, 3);
}

TEST(Vlm, ChatBodyShape) {
  VlmRequest r;
  r.system_text = "sys";
  r.images.push_back({"Part_1 (image_1)", RgbImage{1, 1, {255, 0, 0}}});
  const auto body = chat_completion_body(r);
  EXPECT_EQ(body["model"], "gpt-4o");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  const std::string dump = body.dump();
  EXPECT_NE(dump.find("data:image/png;base64,"), std::string::npos);
  EXPECT_NE(dump.find("Part_1 (image_1)"), std::string::npos);
}

TEST(Vlm, ChunkedEqualsSingleShot) {
  const auto a = merge_tiny_parts(fixtures::door_donor().asset).asset;
  TempDir dir("chunk");
  write_mock(a, dir.path());
  PromptOptions po;
  po.resolution = 64;
  const Prompt prompt = build_prompt(a, po);
  MockBackend mock(dir.path());
  AnnotateOptions single;
  AnnotateOptions chunked;
  chunked.max_images_per_request = 1;
  ASSERT_EQ(a.parts.size(), 2u);  // the knob is absorbed by the merge
  EXPECT_EQ(make_requests(prompt, chunked).size(), 2u);
  EXPECT_EQ(make_requests(prompt, single).size(), 1u);
  const RawAnnotation one = annotate_with_vlm(mock, prompt, single);
  const RawAnnotation many = annotate_with_vlm(mock, prompt, chunked);
  EXPECT_EQ(one, many);
  EXPECT_EQ(one, raw_from_asset(a));
}

TEST(Review, TransitionTable) {
  using S = ReviewStatus;
  const S all[] = {S::Pending, S::VlmDone, S::HumanApproved, S::HumanEdited, S::Rejected};
  for (S from : all) {
    for (S to : all) {
      const bool expect = (from == S::Pending && to == S::VlmDone) ||
                          (from == S::VlmDone && (to == S::HumanApproved || to == S::HumanEdited || to == S::Rejected)) ||
                          (from == S::Rejected && to == S::Pending);
      EXPECT_EQ(transition_allowed(from, to), expect) << to_string(from) << "->" << to_string(to);
    }
  }
}

TEST(Review, LogPersistsAndReplays) {
  TempDir dir("review");
  const auto file = dir / "log.jsonl";
  int tick = 0;
  Clock clock = [&] { return "2026-01-01T00:00:0" + std::to_string(tick++) + "Z"; };
  {
    ReviewLog log(file, clock);
    EXPECT_EQ(log.state().status, ReviewStatus::Pending);
    EXPECT_EQ(log.state().version, 0u);
    log.transition(ReviewStatus::VlmDone, "vlm:gpt-4o", nlohmann::json{{"x", 1}});
    log.transition(ReviewStatus::Rejected, "alice");
    log.transition(ReviewStatus::Pending, "system");
    log.transition(ReviewStatus::VlmDone, "vlm:gpt-4o");
    log.record_selection("bob", nlohmann::json{{"kind", "C"}});
    EXPECT_THROW(log.transition(ReviewStatus::Pending, "bob"), Error);
    EXPECT_EQ(log.state().version, 5u);
  }
  ReviewLog again(file, clock);
  EXPECT_EQ(again.state().status, ReviewStatus::VlmDone);
  EXPECT_EQ(again.state().editor, "bob");
  EXPECT_EQ(again.state().version, 5u);
  const auto events = ReviewLog::read_events(file);
  ASSERT_EQ(events.size(), 5u);
  EXPECT_EQ(events[4].type, EventType::Selection);
  EXPECT_EQ(replay(events), again.state());
  for (const auto& e : events) EXPECT_EQ(event_from_json(event_to_json(e)), e);
}

TEST(Review, ReplayRejectsGapsAndIllegalSteps) {
  ReviewEvent a;
  a.seq = 1;
  a.from = ReviewStatus::Pending;
  a.to = ReviewStatus::VlmDone;
  ReviewEvent b = a;
  b.seq = 3;
  b.from = ReviewStatus::VlmDone;
  b.to = ReviewStatus::HumanApproved;
  EXPECT_THROW(replay({a, b}), Error);
  ReviewEvent c = a;
  c.to = ReviewStatus::HumanApproved;
  try {
    replay({c});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidTransition);
  }
}
