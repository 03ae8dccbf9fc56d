#include <doctest.h>

#include <random>

#include "planrl/geometry.hpp"

using namespace planrl;

namespace {

EntitySpec ent(const char* category, const char* attribute) {
    return {category_id(category), attribute_id(attribute)};
}

double brute_force_iou(const Box& a, const Box& b) {
    long long inter = 0, uni = 0;
    for (int x = 0; x < kCanvasSize; ++x) {
        for (int y = 0; y < kCanvasSize; ++y) {
            const bool in_a = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
            const bool in_b = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
            if (in_a && in_b) ++inter;
            if (in_a || in_b) ++uni;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Box random_int_box(std::mt19937_64& gen) {
    const int x1 = static_cast<int>(gen() % kCanvasSize);
    const int x2 = x1 + 1 + static_cast<int>(gen() % (kCanvasSize - x1));
    const int y1 = static_cast<int>(gen() % kCanvasSize);
    const int y2 = y1 + 1 + static_cast<int>(gen() % (kCanvasSize - y1));
    return {double(x1), double(y1), double(x2), double(y2)};
}

}  // namespace

TEST_CASE("iou basics") {
    const Box a{0, 0, 2, 2};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
}

TEST_CASE("iou symmetry and range") {
    std::mt19937_64 gen(1);
    for (int i = 0; i < 500; ++i) {
        const Box a = random_int_box(gen);
        const Box b = random_int_box(gen);
        const double v = iou(a, b);
        CHECK(v == iou(b, a));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(iou(a, a) == 1.0);
    }
}

TEST_CASE("analytic iou equals pixel counting on integer boxes") {
    std::mt19937_64 gen(2);
    for (int i = 0; i < 1000; ++i) {
        const Box a = random_int_box(gen);
        const Box b = random_int_box(gen);
        CHECK(iou(a, b) == brute_force_iou(a, b));
    }
}

TEST_CASE("relation predicates follow centers with a margin") {
    const Box at_x1{0, 0, 2, 2};    // center (1, 1)
    const Box at_x5{4, 0, 6, 2};    // center (5, 1)
    CHECK(relation_satisfied(RelationKind::left_of, at_x1, at_x5));
    CHECK_FALSE(relation_satisfied(RelationKind::left_of, at_x1, at_x1));
    CHECK_FALSE(relation_satisfied(RelationKind::right_of, at_x1, at_x5));

    const Box low{0, 36, 8, 44};    // center y = 40
    const Box high{0, 6, 8, 14};    // center y = 10
    CHECK_FALSE(relation_satisfied(RelationKind::above, low, high));
    CHECK(relation_satisfied(RelationKind::below, low, high));
    CHECK(relation_satisfied(RelationKind::above, high, low));
}

TEST_CASE("left-of and right-of are mutually exclusive") {
    std::mt19937_64 gen(3);
    for (int i = 0; i < 300; ++i) {
        const Box a = random_int_box(gen);
        const Box b = random_int_box(gen);
        const bool l = relation_satisfied(RelationKind::left_of, a, b);
        const bool r = relation_satisfied(RelationKind::right_of, a, b);
        CHECK_FALSE((l && r));
        if (std::abs(a.cx() - b.cx()) < kRelationMargin) {
            CHECK_FALSE(l);
            CHECK_FALSE(r);
        }
    }
}

TEST_CASE("render: outline pixels sit exactly on the scaled ring") {
    ReasoningChain chain;
    chain.planned.push_back({ent("cube", "red"), Box{0, 0, 16, 16}});
    const Canvas canvas = render_layout(chain, {4});
    REQUIRE(canvas.width == 256);
    int outline_cells = 0;
    for (int y = 0; y < canvas.height; ++y) {
        for (int x = 0; x < canvas.width; ++x) {
            const bool on_ring =
                x < 64 && y < 64 && (x < 2 || x >= 62 || y < 2 || y >= 62);
            const int32_t v = canvas.at(x, y);
            if (on_ring) {
                CHECK(v == Canvas::outline_code(0));
                ++outline_cells;
            } else {
                CHECK(v != Canvas::outline_code(0));
            }
        }
    }
    CHECK(outline_cells == 64 * 64 - 60 * 60);
}

TEST_CASE("render: everything outside boxes and labels is blank") {
    ReasoningChain chain;
    chain.planned.push_back({ent("dog", "brown"), anchor_box(5)});
    const Canvas canvas = render_layout(chain);
    int non_blank = 0;
    for (int32_t v : canvas.cells)
        if (v != Canvas::kBlank) ++non_blank;
    // a ring plus a short label, nowhere near the full canvas
    CHECK(non_blank > 0);
    CHECK(non_blank < canvas.width * canvas.height / 10);
}

TEST_CASE("render is deterministic") {
    ReasoningChain chain;
    chain.planned.push_back({ent("sphere", "orange"), anchor_box(3)});
    chain.planned.push_back({ent("cube", "blue"), anchor_box(21)});
    CHECK(render_layout(chain) == render_layout(chain));
    CHECK(export_png(render_layout(chain)) == export_png(render_layout(chain)));
    CHECK(export_ppm(render_layout(chain)) == export_ppm(render_layout(chain)));
    CHECK_THROWS_AS(render_layout(ReasoningChain{}), ArgumentError);
}

TEST_CASE("box recovery inverts rendering on random chains") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 5);
        ReasoningChain chain;
        for (int k = 0; k < n; ++k) {
            chain.planned.push_back(
                {{static_cast<int>(gen() % kNumCategories),
                  static_cast<int>(gen() % kNumAttributes)},
                 anchor_box(static_cast<int>(gen() % kNumAnchors))});
        }
        const Canvas canvas = render_layout(chain);
        std::vector<EntitySpec> entities;
        for (const auto& o : chain.planned) entities.push_back(o.entity);
        const auto boxes = recover_planned_boxes(canvas, entities);
        REQUIRE(boxes.size() == chain.planned.size());
        for (int k = 0; k < n; ++k) CHECK(boxes[k] == chain.planned[k].box);
    }
}

TEST_CASE("box recovery survives duplicate and interleaved boxes") {
    const Box a = anchor_box(0);
    const Box b = anchor_box(17);
    ReasoningChain twins;
    twins.planned = {{ent("cube", "red"), a}, {ent("cube", "red"), a}};
    auto boxes = recover_planned_boxes(render_layout(twins),
                                       {ent("cube", "red"), ent("cube", "red")});
    CHECK(boxes[0] == a);
    CHECK(boxes[1] == a);

    ReasoningChain interleaved;
    interleaved.planned = {{ent("cube", "red"), a},
                           {ent("sphere", "blue"), b},
                           {ent("dog", "brown"), a},
                           {ent("cat", "green"), b}};
    boxes = recover_planned_boxes(
        render_layout(interleaved),
        {ent("cube", "red"), ent("sphere", "blue"), ent("dog", "brown"),
         ent("cat", "green")});
    CHECK(boxes[0] == a);
    CHECK(boxes[1] == b);
    CHECK(boxes[2] == a);
    CHECK(boxes[3] == b);
}

TEST_CASE("grounding: exact realization scores 1") {
    ReasoningChain chain;
    chain.planned = {{ent("cube", "red"), anchor_box(0)},
                     {ent("sphere", "blue"), anchor_box(10)}};
    Scene scene;
    scene.placed = chain.planned;
    const auto result = ground_objects(chain, scene);
    CHECK(result.mean_iou == 1.0);
    for (const auto& e : result.entries) CHECK(e.iou == 1.0);
}

TEST_CASE("grounding: mean of partial overlaps") {
    ReasoningChain chain;
    chain.planned = {{ent("cube", "red"), Box{0, 0, 16, 16}},
                     {ent("sphere", "blue"), Box{0, 0, 2, 2}}};
    Scene scene;
    scene.placed = {{ent("cube", "red"), Box{0, 0, 16, 16}},
                    {ent("sphere", "blue"), Box{1, 1, 3, 3}}};
    const auto result = ground_objects(chain, scene);
    CHECK(result.entries[0].iou == 1.0);
    CHECK(result.entries[1].iou == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    CHECK(result.mean_iou == doctest::Approx(0.571429).epsilon(1e-5));
}

TEST_CASE("grounding: missing identity contributes zero") {
    ReasoningChain chain;
    chain.planned = {{ent("cube", "red"), anchor_box(0)},
                     {ent("sphere", "blue"), anchor_box(1)}};
    Scene scene;
    scene.placed = {{ent("cube", "red"), anchor_box(0)},
                    {ent("sphere", "green"), anchor_box(1)}};  // wrong attribute
    const auto result = ground_objects(chain, scene);
    CHECK(result.entries[0].iou == 1.0);
    CHECK_FALSE(result.entries[1].matched.has_value());
    CHECK(result.entries[1].iou == 0.0);
    CHECK(result.mean_iou == 0.5);
}

TEST_CASE("grounding is stable under scene permutation for unique identities") {
    ReasoningChain chain;
    chain.planned = {{ent("cube", "red"), anchor_box(2)},
                     {ent("sphere", "blue"), anchor_box(9)},
                     {ent("dog", "brown"), anchor_box(30)}};
    Scene scene;
    scene.placed = {{ent("dog", "brown"), anchor_box(31)},
                    {ent("cube", "red"), anchor_box(2)},
                    {ent("sphere", "blue"), anchor_box(8)}};
    const auto base = ground_objects(chain, scene);
    Scene permuted;
    permuted.placed = {scene.placed[2], scene.placed[0], scene.placed[1]};
    const auto other = ground_objects(chain, permuted);
    REQUIRE(base.entries.size() == other.entries.size());
    for (size_t i = 0; i < base.entries.size(); ++i)
        CHECK(base.entries[i].iou == other.entries[i].iou);
}

TEST_CASE("png export is well-formed") {
    ReasoningChain chain;
    chain.planned.push_back({ent("bird", "yellow"), anchor_box(12)});
    const std::string png = export_png(render_layout(chain));
    CHECK(png.substr(1, 3) == "PNG");
    CHECK(static_cast<unsigned char>(png[0]) == 0x89);
    const std::string ppm = export_ppm(render_layout(chain));
    CHECK(ppm.substr(0, 2) == "P6");
}
