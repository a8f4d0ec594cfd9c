#include <gtest/gtest.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "segdiag/manifest.hpp"
#include "segdiag/png_io.hpp"
#include "segdiag/resample.hpp"
#include "segdiag/scores.hpp"

using namespace segdiag;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() /
                   ("segdiag_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);
    return dir;
}

struct TempDir {
    fs::path path = temp_dir();
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(PngIo, LabelRoundTrip8And16Bit) {
    TempDir tmp;
    std::mt19937 rng(21);
    LabelMap small = oracle::random_labels(rng, 7, 9, 5, 0.1);
    write_label_png(tmp.path / "small.png", small);
    EXPECT_EQ(load_label_png(tmp.path / "small.png"), small);

    LabelMap wide(4, 4, 0);
    wide.at(0, 0) = 300;
    wide.at(3, 3) = 65535;
    write_label_png(tmp.path / "wide.png", wide);
    EXPECT_EQ(load_label_png(tmp.path / "wide.png"), wide);
}

TEST(PngIo, InstanceAndRgbRoundTrip) {
    TempDir tmp;
    InstanceMap inst(5, 6, 0);
    inst.at(0, 0) = 1;
    inst.at(4, 5) = 40000;
    write_instance_png(tmp.path / "inst.png", inst);
    EXPECT_EQ(load_instance_png(tmp.path / "inst.png"), inst);

    InstanceMap too_big(2, 2, 0);
    too_big.at(0, 0) = 70000;
    EXPECT_THROW(write_instance_png(tmp.path / "big.png", too_big), std::exception);

    RgbImage rgb(3, 4);
    for (std::size_t i = 0; i < rgb.data.size(); ++i) {
        rgb.data[i] = static_cast<std::uint8_t>((i * 37) % 256);
    }
    write_rgb_png(tmp.path / "rgb.png", rgb);
    RgbImage back = load_rgb_png(tmp.path / "rgb.png");
    EXPECT_EQ(back.height, rgb.height);
    EXPECT_EQ(back.width, rgb.width);
    EXPECT_EQ(back.data, rgb.data);

    EXPECT_THROW(load_label_png(tmp.path / "missing.png"), std::exception);
    // RGB data has no class convention; label loading must reject it.
    EXPECT_THROW(load_label_png(tmp.path / "rgb.png"), std::exception);
}

TEST(Scr1, BitExactRoundTrip) {
    TempDir tmp;
    std::mt19937 rng(22);
    std::uniform_real_distribution<float> u(-5.0f, 5.0f);
    Scr1File file;
    file.height = 6;
    file.width = 4;
    file.channels = 3;
    file.kind = ScoreKind::logits;
    file.data.resize(72);
    for (float& v : file.data) v = u(rng);

    write_scr1(tmp.path / "t.scr1", file);
    Scr1File back = read_scr1(tmp.path / "t.scr1");
    EXPECT_EQ(back.height, file.height);
    EXPECT_EQ(back.width, file.width);
    EXPECT_EQ(back.channels, file.channels);
    EXPECT_EQ(back.kind, file.kind);
    EXPECT_EQ(back.data, file.data);
}

TEST(Scr1, RejectsMalformedFiles) {
    TempDir tmp;
    {
        std::ofstream out(tmp.path / "magic.scr1", std::ios::binary);
        out << "XXXX";
    }
    EXPECT_THROW(read_scr1(tmp.path / "magic.scr1"), std::exception);

    Scr1File file;
    file.height = 2;
    file.width = 2;
    file.channels = 2;
    file.data.assign(8, 0.25f);
    write_scr1(tmp.path / "ok.scr1", file);
    // Truncate the payload.
    fs::resize_file(tmp.path / "ok.scr1", 20);
    EXPECT_THROW(read_scr1(tmp.path / "ok.scr1"), std::exception);

    // Corrupt the kind byte.
    write_scr1(tmp.path / "kind.scr1", file);
    {
        std::fstream f(tmp.path / "kind.scr1",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(16);
        char bad = 7;
        f.write(&bad, 1);
    }
    EXPECT_THROW(read_scr1(tmp.path / "kind.scr1"), std::exception);
}

TEST(Scores, LogitsSoftmaxAndValidation) {
    std::vector<float> logits{1.0f, 2.0f, 3.0f, 0.5f};
    ScoreTensor t = scores_from_data(1, 1, 4, logits, ScoreKind::logits);
    double denom = 0.0;
    for (float v : logits) denom += std::exp(static_cast<double>(v) - 3.0);
    for (int c = 0; c < 4; ++c) {
        double expect = std::exp(static_cast<double>(logits[c]) - 3.0) / denom;
        EXPECT_NEAR(t.at(0, 0, c), expect, 1e-6);
    }
    EXPECT_TRUE(t.normalized());

    EXPECT_THROW(scores_from_data(1, 1, 2, {0.7f, 0.7f}, ScoreKind::probabilities),
                 std::exception);
    EXPECT_THROW(scores_from_data(1, 1, 2, {1.2f, -0.2f}, ScoreKind::probabilities),
                 std::exception);
    EXPECT_THROW(
        scores_from_data(1, 1, 2, {std::numeric_limits<float>::infinity(), 0.0f},
                         ScoreKind::logits),
        std::exception);
    EXPECT_NO_THROW(scores_from_data(1, 1, 2, {0.5f, 0.5f}, ScoreKind::probabilities));
}

TEST(Scores, LoadChecksTaxonomyAndKind) {
    TempDir tmp;
    Taxonomy t3 = oracle::make_taxonomy(3);
    Taxonomy t4 = oracle::make_taxonomy(4);
    Scr1File file;
    file.height = 2;
    file.width = 2;
    file.channels = 3;
    file.kind = ScoreKind::probabilities;
    file.data.assign(12, 1.0f / 3.0f);
    write_scr1(tmp.path / "p.scr1", file);

    EXPECT_NO_THROW(load_scores(tmp.path / "p.scr1", t3));
    EXPECT_THROW(load_scores(tmp.path / "p.scr1", t4), std::exception);
    EXPECT_THROW(load_scores(tmp.path / "p.scr1", t3, ScoreKind::logits), std::exception);
    EXPECT_NO_THROW(load_scores(tmp.path / "p.scr1", t3, ScoreKind::probabilities));
}

TEST(Scores, ArgmaxFirstMaxWinsAndRenormalize) {
    Taxonomy t = oracle::make_taxonomy(3);
    ScoreTensor s(1, 2, 3);
    s.at(0, 0, 0) = 0.4f;
    s.at(0, 0, 1) = 0.4f;
    s.at(0, 0, 2) = 0.2f;
    s.at(0, 1, 0) = 0.1f;
    s.at(0, 1, 1) = 0.2f;
    s.at(0, 1, 2) = 0.7f;
    LabelMap labels = argmax_labels(s, t);
    EXPECT_EQ(labels.at(0, 0), 0);  // tie resolved to the first channel
    EXPECT_EQ(labels.at(0, 1), 2);

    ScoreTensor raw(1, 2, 3);
    raw.at(0, 0, 0) = -1.0f;
    raw.at(0, 0, 1) = 2.0f;
    raw.at(0, 0, 2) = 2.0f;
    // all-zero pixel falls back to uniform
    renormalize(raw);
    EXPECT_FLOAT_EQ(raw.at(0, 0, 0), 0.0f);
    EXPECT_FLOAT_EQ(raw.at(0, 0, 1), 0.5f);
    EXPECT_FLOAT_EQ(raw.at(0, 0, 2), 0.5f);
    EXPECT_FLOAT_EQ(raw.at(0, 1, 0), 1.0f / 3.0f);
    EXPECT_FLOAT_EQ(raw.at(0, 1, 1), 1.0f / 3.0f);
}

TEST(Manifest, LoadsAndValidates) {
    TempDir tmp;
    LabelMap gt(2, 2, 1);
    write_label_png(tmp.path / "gt.png", gt);
    write_label_png(tmp.path / "pred.png", gt);
    std::ofstream(tmp.path / "tax.json")
        << R"({"classes": [{"id": 0, "name": "bg"}, {"id": 1, "name": "fg"}],
               "background_id": 0, "groups": {}})";
    std::ofstream(tmp.path / "man.json") << R"({
        "dataset": "demo", "taxonomy_path": "tax.json",
        "records": [{"image_id": "a", "gt": "gt.png", "pred": "pred.png"}]})";

    Manifest m = load_manifest(tmp.path / "man.json");
    EXPECT_EQ(m.dataset, "demo");
    EXPECT_EQ(m.records.size(), 1u);
    EXPECT_TRUE(m.records[0].gt.is_absolute());
    EXPECT_TRUE(fs::equivalent(m.records[0].gt, tmp.path / "gt.png"));
    EXPECT_FALSE(m.records[0].scores.has_value());

    Taxonomy t = load_taxonomy(m.taxonomy_path);
    EXPECT_EQ(t.num_classes(), 2u);
    EXPECT_TRUE(t.is_background(0));
    EXPECT_EQ(t.ignore_id(), 255);  // default

    std::ofstream(tmp.path / "dup.json") << R"({
        "dataset": "demo", "taxonomy_path": "tax.json",
        "records": [{"image_id": "a", "gt": "gt.png", "pred": "pred.png"},
                    {"image_id": "a", "gt": "gt.png", "pred": "pred.png"}]})";
    EXPECT_THROW(load_manifest(tmp.path / "dup.json"), std::exception);

    std::ofstream(tmp.path / "both.json") << R"({
        "dataset": "demo", "taxonomy_path": "tax.json",
        "records": [{"image_id": "a", "gt": "gt.png", "pred": "pred.png",
                     "scores": "gt.png"}]})";
    EXPECT_THROW(load_manifest(tmp.path / "both.json"), std::exception);

    std::ofstream(tmp.path / "neither.json") << R"({
        "dataset": "demo", "taxonomy_path": "tax.json",
        "records": [{"image_id": "a", "gt": "gt.png"}]})";
    EXPECT_THROW(load_manifest(tmp.path / "neither.json"), std::exception);

    std::ofstream(tmp.path / "gone.json") << R"({
        "dataset": "demo", "taxonomy_path": "tax.json",
        "records": [{"image_id": "a", "gt": "nope.png", "pred": "pred.png"}]})";
    EXPECT_THROW(load_manifest(tmp.path / "gone.json"), std::exception);
}

TEST(Manifest, InstanceClassSidecar) {
    TempDir tmp;
    std::ofstream(tmp.path / "ov.json") << R"({"3": 1, "7": 2})";
    InstanceClassOverrides ov = load_instance_class_overrides(tmp.path / "ov.json");
    EXPECT_EQ(ov.size(), 2u);
    EXPECT_EQ(ov.at(3), 1);
    EXPECT_EQ(ov.at(7), 2);
    std::ofstream(tmp.path / "bad.json") << R"({"x": 1})";
    EXPECT_THROW(load_instance_class_overrides(tmp.path / "bad.json"), std::exception);
}

TEST(Resample, IdentityAndConstant) {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image<double> src(5, 7);
    for (auto& v : src.data()) v = u(rng);

    Image<double> same = bicubic_resize(src, 5, 7);
    for (std::size_t i = 0; i < src.size(); ++i) {
        EXPECT_DOUBLE_EQ(same[i], src[i]);
    }

    Image<double> flat(4, 4, 0.37);
    Image<double> up = bicubic_resize(flat, 9, 11);
    for (double v : up.data()) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Resample, MatchesDirect2dOracle) {
    // Recompute with an unseparated 4x4 weighted sum.
    auto weight = [](double t) {
        double a = -0.5, x = std::abs(t);
        if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
        if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
        return 0.0;
    };
    std::mt19937 rng(24);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        int sh = 4 + trial % 3, sw = 5 + trial % 4;
        int oh = 3 + (trial * 7) % 9, ow = 2 + (trial * 5) % 11;
        Image<double> src(sh, sw);
        for (auto& v : src.data()) v = u(rng);
        Image<double> out = bicubic_resize(src, oh, ow);
        for (int r = 0; r < oh; ++r) {
            for (int c = 0; c < ow; ++c) {
                double sr = (r + 0.5) * sh / oh - 0.5;
                double sc = (c + 0.5) * sw / ow - 0.5;
                int br = static_cast<int>(std::floor(sr)) - 1;
                int bc = static_cast<int>(std::floor(sc)) - 1;
                double acc = 0.0;
                for (int i = 0; i < 4; ++i) {
                    for (int j = 0; j < 4; ++j) {
                        int rr = std::clamp(br + i, 0, sh - 1);
                        int cc = std::clamp(bc + j, 0, sw - 1);
                        acc += weight(sr - (br + i)) * weight(sc - (bc + j)) * src.at(rr, cc);
                    }
                }
                ASSERT_NEAR(out.at(r, c), acc, 1e-12) << "trial " << trial;
            }
        }
    }
}

TEST(Resample, TensorAndRgbVariants) {
    ScoreTensor s(3, 3, 2);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            s.at(r, c, 0) = 0.25f;
            s.at(r, c, 1) = 0.75f;
        }
    }
    ScoreTensor up = bicubic_resize(s, 6, 5);
    EXPECT_EQ(up.height(), 6);
    EXPECT_EQ(up.width(), 5);
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 5; ++c) {
            EXPECT_NEAR(up.at(r, c, 0), 0.25, 1e-6);
            EXPECT_NEAR(up.at(r, c, 1), 0.75, 1e-6);
        }
    }
    EXPECT_FALSE(up.normalized());

    RgbImage rgb(2, 2);
    for (auto& v : rgb.data) v = 200;
    RgbImage big = bicubic_resize(rgb, 5, 5);
    for (auto v : big.data) EXPECT_EQ(v, 200);
}
