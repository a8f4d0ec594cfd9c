#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "segdiag/instances.hpp"
#include "segdiag/metrics.hpp"

using namespace segdiag;

namespace {

ScoreTensor random_scores(std::mt19937& rng, int h, int w, int c) {
    ScoreTensor s(h, w, c);
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            auto p = oracle::random_prob_vector(rng, c);
            std::copy(p.begin(), p.end(), s.pixel(r, col).begin());
        }
    }
    s.set_normalized(true);
    return s;
}

}  // namespace

TEST(ClassMetrics, MatchesOracleOnRandomMaps) {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        int classes = 2 + trial % 6;
        Taxonomy t = oracle::make_taxonomy(classes);
        LabelMap gt = oracle::random_labels(rng, 11, 7, classes, 0.15);
        LabelMap pred = oracle::random_labels(rng, 11, 7, classes);
        for (bool exclude : {false, true}) {
            ConfusionMatrix cm = accumulate_confusion(gt, pred, t, {exclude});
            ClassMetrics m = class_metrics(cm);
            oracle::Ratios r = oracle::ratios(oracle::confusion(gt, pred, t, exclude));
            ASSERT_EQ(m.accuracy.size(), r.accuracy.size());
            for (std::size_t i = 0; i < r.accuracy.size(); ++i) {
                ASSERT_EQ(m.accuracy[i].has_value(), r.accuracy[i].has_value());
                if (r.accuracy[i]) ASSERT_NEAR(*m.accuracy[i], *r.accuracy[i], 1e-12);
                ASSERT_EQ(m.iou[i].has_value(), r.iou[i].has_value());
                if (r.iou[i]) ASSERT_NEAR(*m.iou[i], *r.iou[i], 1e-12);
            }
            ASSERT_NEAR(m.total_pixel_accuracy, r.total_pixel_accuracy, 1e-12);
            ASSERT_NEAR(m.mean_class_accuracy, r.mean_class_accuracy, 1e-12);
            ASSERT_NEAR(m.mean_iou, r.mean_iou, 1e-12);
        }
    }
}

TEST(ClassMetrics, UndefinedEntriesStayAbsent) {
    Taxonomy t = oracle::make_taxonomy(3);
    LabelMap gt(2, 2, 1);
    LabelMap pred(2, 2, 1);
    ClassMetrics m = class_metrics(accumulate_confusion(gt, pred, t));
    EXPECT_FALSE(m.accuracy[0].has_value());
    EXPECT_FALSE(m.iou[0].has_value());  // class 0 neither gt nor predicted
    EXPECT_FALSE(m.accuracy[2].has_value());
    EXPECT_EQ(*m.accuracy[1], 1.0);
    EXPECT_EQ(m.mean_class_accuracy, 1.0);
    EXPECT_EQ(m.mean_iou, 1.0);
    EXPECT_EQ(m.total_pixel_accuracy, 1.0);
}

TEST(PerInstanceAccuracy, MatchesOracle) {
    std::mt19937 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        Taxonomy t = oracle::make_taxonomy(4);
        LabelMap gt = oracle::random_labels(rng, 9, 9, 4, 0.1);
        LabelMap pred = oracle::random_labels(rng, 9, 9, 4);
        InstanceMap inst(9, 9, 0);
        // Two disjoint blobs.
        for (int r = 1; r < 4; ++r)
            for (int c = 1; c < 5; ++c) inst.at(r, c) = 7;
        for (int r = 5; r < 8; ++r)
            for (int c = 2; c < 8; ++c) inst.at(r, c) = 9;
        // Keep at least one voting pixel per instance.
        if (gt.at(1, 1) == t.ignore_id()) gt.at(1, 1) = 2;
        if (gt.at(5, 2) == t.ignore_id()) gt.at(5, 2) = 1;

        auto records = extract_instances(inst, gt, t, "img");
        ASSERT_EQ(records.size(), 2u);
        for (const auto& rec : records) {
            double got = per_instance_accuracy(rec, inst, gt, pred, t);
            double want = oracle::instance_accuracy(rec.instance_id, rec.class_id, inst, gt,
                                                    pred, t.ignore_id());
            ASSERT_NEAR(got, want, 1e-12);
        }
    }
}

TEST(PerInstanceAccuracy, ThrowsWithoutVotingPixels) {
    Taxonomy t = oracle::make_taxonomy(3);
    LabelMap gt(3, 3, 255);
    LabelMap pred(3, 3, 1);
    InstanceMap inst(3, 3, 4);
    InstanceClassOverrides ov{{4, 2}};
    auto records = extract_instances(inst, gt, t, "img", &ov);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_THROW(per_instance_accuracy(records[0], inst, gt, pred, t), std::runtime_error);
}

TEST(TopN, MatchesSortOracle) {
    std::mt19937 rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        int classes = 2 + trial % 7;
        Taxonomy t = oracle::make_taxonomy(classes);
        LabelMap gt = oracle::random_labels(rng, 6, 8, classes, 0.1);
        ScoreTensor scores = random_scores(rng, 6, 8, classes);
        for (int n = 1; n <= classes; ++n) {
            LabelMap eff = topn_prediction(gt, scores, n, t);
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 8; ++c) {
                    auto px = scores.pixel(r, c);
                    std::vector<float> p(px.begin(), px.end());
                    ClassId g = gt.at(r, c);
                    ClassId argmax = t.id_at(static_cast<std::size_t>(
                        std::max_element(p.begin(), p.end()) - p.begin()));
                    ClassId want;
                    if (g != t.ignore_id() &&
                        oracle::topn_qualifies(p, static_cast<int>(t.index_of(g)), n)) {
                        want = g;
                    } else {
                        want = argmax;
                    }
                    ASSERT_EQ(eff.at(r, c), want) << "n=" << n;
                }
            }
        }
    }
}

TEST(TopN, TiesWithNthLargestQualify) {
    Taxonomy t = oracle::make_taxonomy(4);
    LabelMap gt(1, 1, 3);
    ScoreTensor s(1, 1, 4);
    s.at(0, 0, 0) = 0.4f;
    s.at(0, 0, 1) = 0.25f;
    s.at(0, 0, 2) = 0.25f;  // ties class 1
    s.at(0, 0, 3) = 0.10f;
    s.set_normalized(true);
    EXPECT_EQ(topn_prediction(gt, s, 4, t).at(0, 0), 3);
    EXPECT_EQ(topn_prediction(gt, s, 3, t).at(0, 0), 0);

    gt.at(0, 0) = 2;
    // Class 2 ties the 2nd largest value, so it qualifies already at n = 2.
    EXPECT_EQ(topn_prediction(gt, s, 2, t).at(0, 0), 2);
    EXPECT_EQ(topn_prediction(gt, s, 1, t).at(0, 0), 0);

    gt.at(0, 0) = 255;  // ignore falls back to argmax
    EXPECT_EQ(topn_prediction(gt, s, 4, t).at(0, 0), 0);

    EXPECT_THROW(topn_prediction(gt, s, 0, t), std::invalid_argument);
    EXPECT_THROW(topn_prediction(gt, s, 5, t), std::invalid_argument);
}

TEST(TopN, AccuracyNondecreasingAndSaturates) {
    std::mt19937 rng(34);
    for (int trial = 0; trial < 10; ++trial) {
        int classes = 3 + trial % 4;
        Taxonomy t = oracle::make_taxonomy(classes);
        LabelMap gt = oracle::random_labels(rng, 10, 10, classes, 0.05);
        ScoreTensor scores = random_scores(rng, 10, 10, classes);
        double prev = 0.0;
        for (int n = 1; n <= classes; ++n) {
            ClassMetrics m = topn_metrics(gt, scores, n, t);
            ASSERT_GE(m.total_pixel_accuracy, prev - 1e-12);
            prev = m.total_pixel_accuracy;
        }
        ASSERT_DOUBLE_EQ(prev, 1.0);
    }
}

TEST(MergedGroups, MatchesRelabelBruteForce) {
    std::mt19937 rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        Taxonomy t = oracle::make_taxonomy(6, true, {{2, 4}, {3, 5}});
        LabelMap gt = oracle::random_labels(rng, 8, 8, 6, 0.1);
        LabelMap pred = oracle::random_labels(rng, 8, 8, 6);
        ConfusionMatrix cm = accumulate_confusion(gt, pred, t);
        MergedGroupMetrics mg = merged_group_metrics(cm, t);

        EXPECT_EQ(mg.representative[2], 2);
        EXPECT_EQ(mg.representative[4], 2);
        EXPECT_EQ(mg.representative[3], 3);
        EXPECT_EQ(mg.representative[5], 3);
        EXPECT_EQ(mg.representative[0], 0);
        EXPECT_EQ(mg.representative[1], 1);

        // Relabel both maps onto representatives and re-accumulate.
        LabelMap gt_m = gt, pred_m = pred;
        auto relabel = [&](LabelMap& m) {
            for (auto& v : m.data()) {
                if (v != t.ignore_id()) v = mg.representative[t.index_of(v)];
            }
        };
        relabel(gt_m);
        relabel(pred_m);
        ConfusionMatrix want = accumulate_confusion(gt_m, pred_m, t);
        ASSERT_TRUE(mg.merged == want);

        ClassMetrics orig = class_metrics(cm);
        for (std::size_t i = 0; i < t.num_classes(); ++i) {
            ASSERT_EQ(mg.merged_accuracy[i].has_value(), orig.accuracy[i].has_value());
            if (!orig.accuracy[i]) continue;
            ASSERT_GE(*mg.merged_accuracy[i] + 1e-12, *orig.accuracy[i]);
            ASSERT_NEAR(*mg.accuracy_gain[i], *mg.merged_accuracy[i] - *orig.accuracy[i],
                        1e-12);
            // Representative rows of the merged matrix carry the same ratios.
            std::size_t ri = t.index_of(mg.representative[i]);
            if (mg.representative[i] == t.id_at(i)) {
                ASSERT_NEAR(*mg.merged_metrics.accuracy[ri],
                            static_cast<double>(mg.merged.at(ri, ri)) /
                                static_cast<double>(mg.merged.gt_total(ri)),
                            1e-12);
            }
        }
    }
}

TEST(MergedGroups, RejectsMismatchedMatrix) {
    Taxonomy t = oracle::make_taxonomy(4);
    ConfusionMatrix cm(3);
    EXPECT_THROW(merged_group_metrics(cm, t), std::invalid_argument);
}
