#include "doctest.h"
#include "drivelang/types.hpp"

using namespace drivelang;

TEST_CASE("yaw normalization maps onto (-pi, pi]") {
  CHECK(normalize_yaw(0.0) == 0.0);
  CHECK(normalize_yaw(7.0) == doctest::Approx(7.0 - 2.0 * kPi).epsilon(1e-12));
  CHECK(normalize_yaw(kPi) == doctest::Approx(kPi));
  CHECK(normalize_yaw(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_yaw(-3.0 * kPi / 2.0) == doctest::Approx(kPi / 2.0));
  for (double y : {-20.0, -6.5, -0.1, 0.0, 1.0, 9.42, 100.0}) {
    const double n = normalize_yaw(y);
    CHECK(n > -kPi - 1e-12);
    CHECK(n <= kPi + 1e-12);
    CHECK(std::abs(std::remainder(n - y, 2.0 * kPi)) < 1e-9);
  }
  CHECK_THROWS_AS(normalize_yaw(std::numeric_limits<double>::infinity()),
                  ValidationError);
}

TEST_CASE("box2d invariants") {
  CHECK_NOTHROW(Box2D(0, 0, 1, 1));
  CHECK_THROWS_AS(Box2D(1, 0, 1, 1), ValidationError);   // x1 == x2
  CHECK_THROWS_AS(Box2D(2, 0, 1, 1), ValidationError);   // x1 > x2
  CHECK_THROWS_AS(Box2D(0, 3, 1, 1), ValidationError);   // y1 > y2
  CHECK_THROWS_AS(Box2D(-1, 0, 1, 1), ValidationError);  // negative
  CHECK_THROWS_AS(Box2D(0, 0, std::nan(""), 1), ValidationError);
  CHECK(Box2D(1, 2, 4, 6).area() == doctest::Approx(12.0));
}

TEST_CASE("box3d invariants and yaw storage") {
  CHECK_THROWS_AS(Box3D(0, 0, 0, 0, 1, 1, 0), ValidationError);
  CHECK_THROWS_AS(Box3D(0, 0, 0, 1, -1, 1, 0), ValidationError);
  const Box3D b(0, 0, 0, 1, 1, 1, 7.0);
  CHECK(b.yaw == doctest::Approx(7.0 - 2.0 * kPi));
  CHECK(b.volume() == doctest::Approx(1.0));
}

TEST_CASE("category set") {
  const CategorySet cats;
  CHECK(cats.size() == 10);
  CHECK(cats.contains("car"));
  CHECK(cats.contains("traffic_cone"));
  CHECK_FALSE(cats.contains("boat"));
  CHECK_THROWS_AS(CategorySet(std::vector<std::string>{}), ValidationError);
  CHECK_THROWS_AS(CategorySet({"car", "car"}), ValidationError);
}

namespace {

ObjectRecord gt_record() {
  ObjectRecord r;
  r.object_id = "obj-1";
  r.source = SourceTag::GroundTruth;
  r.view = View::Front;
  r.box2d = Box2D(0, 0, 10, 10);
  r.box3d = Box3D(0, 0, 0, 1, 1, 1, 0);
  r.category = "car";
  r.description = "a car";
  r.distance = 5.0;
  return r;
}

Frame valid_frame() {
  Frame f;
  f.scene_id = "s0";
  f.frame_id = "f0";
  for (std::size_t i = 0; i < kNumViews; ++i) {
    f.images[i] = std::string(to_string(kViewOrder[i])) + ".jpg";
  }
  f.records.push_back(gt_record());
  return f;
}

}  // namespace

TEST_CASE("object record invariants") {
  const CategorySet cats;
  CHECK_NOTHROW(gt_record().validate(cats));

  ObjectRecord missing_box3d = gt_record();
  missing_box3d.box3d.reset();
  CHECK_THROWS_AS(missing_box3d.validate(cats), ValidationError);

  ObjectRecord missing_distance = gt_record();
  missing_distance.distance.reset();
  CHECK_THROWS_AS(missing_distance.validate(cats), ValidationError);

  ObjectRecord non_gt = gt_record();
  non_gt.source = SourceTag::RegionToText;
  CHECK_THROWS_AS(non_gt.validate(cats), ValidationError);  // needs itm_score
  non_gt.itm_score = 0.8;
  CHECK_NOTHROW(non_gt.validate(cats));
  non_gt.itm_score = 1.5;
  CHECK_THROWS_AS(non_gt.validate(cats), ValidationError);

  ObjectRecord bad_distance = gt_record();
  bad_distance.distance = -1.0;
  CHECK_THROWS_AS(bad_distance.validate(cats), ValidationError);

  ObjectRecord bad_category = gt_record();
  bad_category.category = "boat";
  CHECK_THROWS_AS(bad_category.validate(cats), ValidationError);
}

TEST_CASE("frame requires all six views") {
  const CategorySet cats;
  Frame f = valid_frame();
  CHECK_NOTHROW(f.validate(cats));
  f.images[2] = "";
  CHECK_THROWS_AS(f.validate(cats), ValidationError);
}

TEST_CASE("frame rejects duplicate object ids") {
  const CategorySet cats;
  Frame f = valid_frame();
  f.records.push_back(f.records[0]);
  CHECK_THROWS_AS(f.validate(cats), ValidationError);
}

TEST_CASE("task sample target box rules") {
  TaskSample s;
  s.sample_id = "x";
  s.task = TaskKind::Planning;
  s.view = kSurroundView;
  s.prompt = "p";
  s.answer = "go straight";
  CHECK_NOTHROW(s.validate());

  s.task = TaskKind::VG3D;
  CHECK_THROWS_AS(s.validate(), ValidationError);  // vg3d needs 3d boxes
  s.target_boxes_3d.push_back(Box3D());
  s.view = "front";
  CHECK_NOTHROW(s.validate());
  s.target_boxes_2d.push_back(Box2D());
  CHECK_THROWS_AS(s.validate(), ValidationError);  // 2d boxes only for vg2d

  TaskSample empty_answer;
  empty_answer.sample_id = "y";
  empty_answer.task = TaskKind::Planning;
  empty_answer.view = kSurroundView;
  empty_answer.prompt = "p";
  CHECK_THROWS_AS(empty_answer.validate(), ValidationError);
}

TEST_CASE("prediction confidence bounds") {
  Prediction p;
  p.sample_id = "x";
  p.boxes_3d.push_back({Box3D(), "car", 0.5});
  CHECK_NOTHROW(p.validate());
  p.boxes_3d.push_back({Box3D(), "car", 1.5});
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("view and command tokens") {
  CHECK(parse_view("front_left") == View::FrontLeft);
  CHECK(view_phrase(View::BackRight) == "back right");
  CHECK_THROWS_AS(parse_view("top"), ValidationError);
  CHECK(parse_planning_command("turn_left") == PlanningCommand::TurnLeft);
  CHECK(command_phrase(PlanningCommand::GoStraight) == "go straight");
  CHECK(parse_task_kind("vg3d") == TaskKind::VG3D);
}
