#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "segdiag/uncertainty.hpp"

using namespace segdiag;

TEST(Eq1, KnownValuesAndExtremes) {
    std::vector<float> uniform4(4, 0.25f);
    EXPECT_NEAR(relative_entropy(uniform4), 1.0, 1e-6);
    EXPECT_DOUBLE_EQ(relative_probability(uniform4), 1.0);

    std::vector<float> onehot{0.0f, 1.0f, 0.0f};
    EXPECT_DOUBLE_EQ(relative_entropy(onehot), 0.0);
    EXPECT_DOUBLE_EQ(relative_probability(onehot), 0.0);

    // H(0.7, 0.3) / ln 2
    std::vector<float> biased{0.7f, 0.3f};
    double h = -(0.7 * std::log(0.7) + 0.3 * std::log(0.3));
    EXPECT_NEAR(relative_entropy(biased), h / std::log(2.0), 1e-6);
    EXPECT_NEAR(relative_probability(biased), 0.3 / 0.7, 1e-6);

    // Double-precision uniform hits 1 essentially exactly.
    std::vector<double> uniform3(3, 1.0 / 3.0);
    EXPECT_NEAR(relative_entropy(std::span<const double>(uniform3)), 1.0, 1e-12);
    std::vector<double> onehot_d{1.0, 0.0, 0.0, 0.0, 0.0};
    EXPECT_EQ(relative_entropy(std::span<const double>(onehot_d)), 0.0);
}

TEST(Eq1, RandomVectorsStayInRangeAndMatchOracle) {
    std::mt19937 rng(61);
    for (int trial = 0; trial < 500; ++trial) {
        int c = 2 + trial % 15;
        std::vector<float> p = oracle::random_prob_vector(rng, c);
        double re = relative_entropy(p);
        double rp = relative_probability(p);
        ASSERT_GE(re, 0.0);
        ASSERT_LE(re, 1.0 + 1e-9);
        ASSERT_GE(rp, 0.0);
        ASSERT_LE(rp, 1.0);
        ASSERT_NEAR(re, oracle::rel_entropy(p), 1e-9);
        ASSERT_NEAR(rp, oracle::rel_probability(p), 1e-12);
    }
}

TEST(Eq1, RejectsInvalidDistributions) {
    std::vector<float> single{1.0f};
    EXPECT_THROW(relative_entropy(single), std::invalid_argument);
    EXPECT_THROW(relative_probability(single), std::invalid_argument);
    std::vector<float> unnormalized{0.5f, 0.6f};
    EXPECT_THROW(relative_entropy(unnormalized), std::invalid_argument);
    std::vector<float> negative{1.2f, -0.2f};
    EXPECT_THROW(relative_entropy(negative), std::invalid_argument);
}

TEST(UncertaintyMap, PerPixelValues) {
    ScoreTensor s(1, 2, 4);
    for (int c = 0; c < 4; ++c) s.at(0, 0, c) = 0.25f;
    s.at(0, 1, 0) = 1.0f;
    s.set_normalized(true);
    UncertaintyMap re = uncertainty_map(s, UncertaintyMeasure::relative_entropy);
    EXPECT_EQ(re.measure, UncertaintyMeasure::relative_entropy);
    EXPECT_NEAR(re.values.at(0, 0), 1.0f, 1e-6);
    EXPECT_EQ(re.values.at(0, 1), 0.0f);
    UncertaintyMap rp = uncertainty_map(s, UncertaintyMeasure::relative_probability);
    EXPECT_FLOAT_EQ(rp.values.at(0, 0), 1.0f);
    EXPECT_EQ(rp.values.at(0, 1), 0.0f);

    EXPECT_EQ(uncertainty_measure_from_string("relative_entropy"),
              UncertaintyMeasure::relative_entropy);
    EXPECT_EQ(uncertainty_measure_from_string("relative_probability"),
              UncertaintyMeasure::relative_probability);
    EXPECT_THROW(uncertainty_measure_from_string("nope"), std::exception);
    EXPECT_STREQ(to_string(UncertaintyMeasure::relative_entropy), "relative_entropy");
}

TEST(BoundaryDistance, StripeAndDegenerateCases) {
    // Vertical stripe: columns 0-2 carry class 1, columns 3-5 class 2, so
    // columns 2 and 3 are boundary pixels in every row.
    LabelMap gt(4, 6, 1);
    for (int r = 0; r < 4; ++r)
        for (int c = 3; c < 6; ++c) gt.at(r, c) = 2;
    DistanceMap d = boundary_distance_map(gt);
    for (int r = 0; r < 4; ++r) {
        EXPECT_EQ(d.at(r, 2), 0.0);
        EXPECT_EQ(d.at(r, 3), 0.0);
        EXPECT_EQ(d.at(r, 1), 1.0);
        EXPECT_EQ(d.at(r, 0), 2.0);
        EXPECT_EQ(d.at(r, 4), 1.0);
        EXPECT_EQ(d.at(r, 5), 2.0);
    }

    LabelMap flat(3, 3, 1);
    DistanceMap df = boundary_distance_map(flat);
    for (double v : df.data()) EXPECT_TRUE(std::isinf(v));

    // Ignore acts as a label: marking one pixel creates a boundary around it.
    LabelMap with_ignore = flat;
    with_ignore.at(1, 1) = 255;
    DistanceMap di = boundary_distance_map(with_ignore);
    EXPECT_EQ(di.at(1, 1), 0.0);
    EXPECT_EQ(di.at(0, 0), 1.0);  // (0,1) and (1,0) are boundary pixels
}

TEST(BoundaryDistance, SameClassModeUsesOwnLabelBoundaries) {
    LabelMap gt(2, 4, 1);
    gt.at(0, 3) = 2;
    gt.at(1, 3) = 2;
    // Boundary pixels: column 2 (class 1) and column 3 (class 2).
    DistanceMap d = boundary_distance_map(gt, BoundaryMode::same_class);
    EXPECT_EQ(d.at(0, 2), 0.0);
    EXPECT_EQ(d.at(0, 3), 0.0);
    EXPECT_EQ(d.at(0, 0), 2.0);  // nearest class-1 boundary is column 2
    // A class-2 pixel measures to the class-2 boundary even when a class-1
    // boundary pixel sits closer; here both are at column 3 anyway.
    EXPECT_EQ(d.at(1, 3), 0.0);

    // With same_class, a label with no boundary stays infinite even when the
    // image has boundaries of other labels.
    LabelMap mixed(1, 5, 1);
    mixed.at(0, 0) = 2;  // boundary pixels at columns 0 and 1
    DistanceMap dm = boundary_distance_map(mixed, BoundaryMode::same_class);
    EXPECT_EQ(dm.at(0, 0), 0.0);
    EXPECT_EQ(dm.at(0, 1), 0.0);
    EXPECT_EQ(dm.at(0, 4), 3.0);
}

TEST(Quartiles, MatchesInterpolationOracle) {
    std::mt19937 rng(62);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + trial % 23;
        std::vector<float> values(n);
        for (auto& v : values) v = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
        Quartiles q = quartiles(values);
        EXPECT_NEAR(q.q25, oracle::quartile(values, 0.25), 1e-6);
        EXPECT_NEAR(q.median, oracle::quartile(values, 0.5), 1e-6);
        EXPECT_NEAR(q.q75, oracle::quartile(values, 0.75), 1e-6);
    }
    EXPECT_THROW(quartiles({}), std::invalid_argument);
    Quartiles q4 = quartiles({1.0f, 2.0f, 3.0f, 4.0f});
    EXPECT_DOUBLE_EQ(q4.q25, 1.75);
    EXPECT_DOUBLE_EQ(q4.median, 2.5);
    EXPECT_DOUBLE_EQ(q4.q75, 3.25);
}

TEST(DistanceBins, EdgeSemanticsAndMerge) {
    UncertaintyMap umap{UncertaintyMeasure::relative_entropy, Image<float>(1, 6, 0.0f)};
    for (int c = 0; c < 6; ++c) umap.values.at(0, c) = 0.1f * static_cast<float>(c);
    DistanceMap dmap(1, 6, 0.0);
    dmap.at(0, 0) = 0.5;  // below the first edge: dropped
    dmap.at(0, 1) = 1.0;  // first bin [1, 2)
    dmap.at(0, 2) = 1.9;
    dmap.at(0, 3) = 2.0;  // second bin [2, 4)
    dmap.at(0, 4) = 4.0;  // at the last edge: outside (half-open)
    dmap.at(0, 5) = std::numeric_limits<double>::infinity();

    std::vector<double> edges{1.0, 2.0, 4.0};
    DistanceBinnedSamples s = collect_by_distance(umap, dmap, edges);
    ASSERT_EQ(s.samples.size(), 2u);
    ASSERT_EQ(s.samples[0].size(), 2u);
    EXPECT_FLOAT_EQ(s.samples[0][0], 0.1f);
    EXPECT_FLOAT_EQ(s.samples[0][1], 0.2f);
    ASSERT_EQ(s.samples[1].size(), 1u);
    EXPECT_FLOAT_EQ(s.samples[1][0], 0.3f);

    DistanceBinnedSamples merged = s;
    merged += s;
    EXPECT_EQ(merged.samples[0].size(), 4u);
    auto qs = uncertainty_by_distance(merged);
    ASSERT_EQ(qs.size(), 2u);
    ASSERT_TRUE(qs[0].has_value());
    EXPECT_NEAR(qs[0]->median, 0.15, 1e-6);

    DistanceBinnedSamples other = collect_by_distance(umap, dmap, std::vector<double>{0.0, 8.0});
    EXPECT_THROW(s += other, std::invalid_argument);

    // Unbounded final bin via an infinite edge keeps far pixels but still
    // drops infinite distances (no boundary anywhere).
    std::vector<double> open{0.0, std::numeric_limits<double>::infinity()};
    DistanceBinnedSamples all = collect_by_distance(umap, dmap, open);
    EXPECT_EQ(all.samples[0].size(), 5u);
}

TEST(InstanceUncertainty, MeanOverMaskPixels) {
    UncertaintyMap umap{UncertaintyMeasure::relative_entropy, Image<float>(2, 3, 0.0f)};
    for (int c = 0; c < 3; ++c) {
        umap.values.at(0, c) = 0.3f;
        umap.values.at(1, c) = 0.9f;
    }
    InstanceMap inst(2, 3, 0);
    inst.at(0, 0) = 5;
    inst.at(1, 0) = 5;
    InstanceRecord rec;
    rec.instance_id = 5;
    rec.pixel_count = 2;
    EXPECT_NEAR(per_instance_mean_uncertainty(rec, inst, umap), 0.6, 1e-6);

    rec.instance_id = 9;
    EXPECT_THROW(per_instance_mean_uncertainty(rec, inst, umap), std::runtime_error);
}

TEST(ErrorTypeUncertainty, ConstructedSceneSeparatesCategories) {
    // 1 row, 8 columns; classes: 0 bg, 1/2 grouped, 3 separate.
    Taxonomy t = oracle::make_taxonomy(4, true, {{1, 2}});
    LabelMap gt(1, 8, 1);
    LabelMap pred = gt;
    // col 0: correct. col 1: background error. col 2: similar error.
    // col 3: dissimilar error. col 4: misloc (pred 3, gt 1, but a gt-3 pixel
    // sits within radius 1 at col 5). col 5: gt 3 correct. col 6: gt bg,
    // pred 1 (not counted: background gt). col 7: ignore.
    pred.at(0, 1) = 0;
    pred.at(0, 2) = 2;
    pred.at(0, 3) = 3;
    pred.at(0, 4) = 3;
    gt.at(0, 5) = 3;
    pred.at(0, 5) = 3;
    gt.at(0, 6) = 0;
    pred.at(0, 6) = 1;
    gt.at(0, 7) = 255;

    UncertaintyMap umap{UncertaintyMeasure::relative_entropy, Image<float>(1, 8, 0.0f)};
    for (int c = 0; c < 8; ++c) umap.values.at(0, c) = 0.1f * static_cast<float>(c + 1);

    ErrorTypeUncertainty e = uncertainty_by_error_type(gt, pred, umap, t, 1);
    // Baseline without instances: all non-ignore gt pixels (cols 0..6).
    EXPECT_EQ(e.baseline.count, 7u);
    EXPECT_NEAR(*e.baseline.mean(), (0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.6 + 0.7) / 7.0, 1e-6);
    EXPECT_EQ(e.background.count, 1u);
    EXPECT_NEAR(*e.background.mean(), 0.2, 1e-6);
    EXPECT_EQ(e.similar.count, 1u);
    EXPECT_NEAR(*e.similar.mean(), 0.3, 1e-6);
    // col 3 (pred 3) has no gt-3 pixel within radius 1; col 4 does.
    EXPECT_EQ(e.dissimilar.count, 2u);
    EXPECT_NEAR(*e.dissimilar.mean(), (0.4 + 0.5) / 2.0, 1e-6);
    EXPECT_EQ(e.misloc.count, 1u);
    EXPECT_NEAR(*e.misloc.mean(), 0.5, 1e-6);

    // With an instance map, the baseline is restricted to instance pixels.
    InstanceMap inst(1, 8, 0);
    inst.at(0, 0) = 1;
    inst.at(0, 2) = 1;
    ErrorTypeUncertainty e2 = uncertainty_by_error_type(gt, pred, umap, t, 1, &inst);
    EXPECT_EQ(e2.baseline.count, 2u);
    EXPECT_NEAR(*e2.baseline.mean(), (0.1 + 0.3) / 2.0, 1e-6);
    EXPECT_EQ(e2.background.count, e.background.count);

    ErrorTypeUncertainty merged = e;
    merged += e2;
    EXPECT_EQ(merged.baseline.count, 9u);
    EXPECT_EQ(merged.dissimilar.count, 4u);
}

TEST(Fgbg, HandCaseAndEdgeRules) {
    Taxonomy t = oracle::make_taxonomy(3);
    // Mean uncertainty over all 4 pixels = 0.45; predicted fg needs > 0.45.
    UncertaintyMap umap{UncertaintyMeasure::relative_entropy, Image<float>(2, 2, 0.0f)};
    umap.values.at(0, 0) = 0.9f;  // fg
    umap.values.at(0, 1) = 0.5f;  // fg
    umap.values.at(1, 0) = 0.3f;  // bg
    umap.values.at(1, 1) = 0.1f;  // bg
    LabelMap gt(2, 2, 0);
    gt.at(0, 0) = 1;  // gt fg, predicted fg -> tp
    gt.at(1, 0) = 2;  // gt fg, predicted bg -> fn
    // (0,1): gt bg, predicted fg -> fp; (1,1): gt bg, predicted bg -> tn
    FgbgCounts counts = fgbg_counts(umap, gt, t);
    EXPECT_EQ(counts.tp, 1u);
    EXPECT_EQ(counts.fp, 1u);
    EXPECT_EQ(counts.tn, 1u);
    EXPECT_EQ(counts.fn, 1u);
    FgbgResult res = fgbg_result(counts);
    EXPECT_DOUBLE_EQ(res.precision, 0.5);
    EXPECT_DOUBLE_EQ(res.recall, 0.5);
    EXPECT_DOUBLE_EQ(res.accuracy, 0.5);

    // Ignore pixels do not count, but they do enter the threshold mean.
    LabelMap with_ignore = gt;
    with_ignore.at(1, 1) = 255;
    FgbgCounts c2 = fgbg_counts(umap, with_ignore, t);
    EXPECT_EQ(c2.tp + c2.fp + c2.tn + c2.fn, 3u);

    LabelMap all_ignore(2, 2, 255);
    EXPECT_THROW(fgbg_counts(umap, all_ignore, t), std::runtime_error);

    FgbgResult zero = fgbg_result(FgbgCounts{});
    EXPECT_EQ(zero.precision, 0.0);
    EXPECT_EQ(zero.recall, 0.0);
    EXPECT_EQ(zero.accuracy, 0.0);

    FgbgCounts merged = counts;
    merged += c2;
    EXPECT_EQ(merged.tp + merged.fp + merged.tn + merged.fn, 7u);
}

TEST(MeanAccumulator, EmptyAndMerge) {
    MeanAccumulator a;
    EXPECT_FALSE(a.mean().has_value());
    a.add(1.0);
    a.add(3.0);
    EXPECT_DOUBLE_EQ(*a.mean(), 2.0);
    MeanAccumulator b;
    b.add(5.0);
    a += b;
    EXPECT_DOUBLE_EQ(*a.mean(), 3.0);
}
