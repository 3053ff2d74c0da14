#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nf/errors.hpp"
#include "nf/eval.hpp"
#include "nf/rng.hpp"
#include "nf/train.hpp"
#include "test_util.hpp"

using namespace nf;

namespace {

const std::string kDir = nftest::scratch_dir("eval");

struct Fixture {
    Dataset source;
    Dataset target;
    EmbeddingTable table;
    Index index;
    Tables tables;

    explicit Fixture(std::uint64_t seed) : table(8) {
        Rng rng(seed);
        const auto sample = [&](bool flagged) {
            Vec v(8);
            for (std::size_t i = 0; i < 8; ++i) {
                const double mean = i == 0 ? (flagged ? 1.0 : -1.0) : 0.0;
                v[i] = mean + 0.3 * rng.normal();
            }
            return l2_normalize(std::move(v));
        };
        source.name = "eval-source";
        for (int i = 0; i < 30; ++i) {
            Example ex;
            ex.id = "s" + std::to_string(i);
            ex.lang = "en";
            ex.label = rng.below(2) == 1 ? BinaryLabel::Flagged : BinaryLabel::Neutral;
            table.add(ex.id, sample(ex.label == BinaryLabel::Flagged));
            source.examples.push_back(std::move(ex));
        }
        target.name = "eval-target";
        static const char* langs[] = {"xa", "xb", "xc"};
        for (int i = 0; i < 24; ++i) {
            Example ex;
            ex.id = "t" + std::to_string(i);
            ex.lang = langs[i % 3];
            ex.label = i % 2 == 0 ? BinaryLabel::Flagged : BinaryLabel::Neutral;
            table.add(ex.id, sample(ex.label == BinaryLabel::Flagged));
            target.examples.push_back(std::move(ex));
        }
        index = build_index(source, table);
        tables.retrieval = &table;
        tables.model = &table;
    }
};

}  // namespace

TEST_CASE("confusion") {
    using BL = BinaryLabel;
    const ConfusionCounts c =
        confusion({BL::Flagged, BL::Neutral}, {BL::Flagged, BL::Neutral});
    CHECK(c.tp == 1);
    CHECK(c.tn == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);

    const ConfusionCounts fp = confusion({BL::Flagged}, {BL::Neutral});
    CHECK(fp.fp == 1);

    const ConfusionCounts all = confusion(
        {BL::Flagged, BL::Flagged, BL::Neutral, BL::Neutral},
        {BL::Flagged, BL::Neutral, BL::Flagged, BL::Neutral});
    CHECK(all.tp == 1);
    CHECK(all.fp == 1);
    CHECK(all.fn == 1);
    CHECK(all.tn == 1);
    CHECK(all.total() == 4);

    CHECK_THROWS_AS(confusion({BL::Flagged}, {}), argument_error);
    CHECK_THROWS_AS(confusion({}, {}), argument_error);
}

TEST_CASE("f1_flagged") {
    {
        ConfusionCounts c;
        c.tp = 5;
        c.fp = 5;
        c.fn = 0;
        const Prf prf = f1_flagged(c);
        CHECK(prf.precision == doctest::Approx(0.5));
        CHECK(prf.recall == doctest::Approx(1.0));
        CHECK(prf.f1 == doctest::Approx(2.0 / 3.0));
    }
    {
        ConfusionCounts c;
        c.tn = 10;  // nothing flagged anywhere
        const Prf prf = f1_flagged(c);
        CHECK(prf.precision == 0.0);
        CHECK(prf.recall == 0.0);
        CHECK(prf.f1 == 0.0);
    }
    {
        ConfusionCounts c;
        c.tp = 7;
        const Prf prf = f1_flagged(c);
        CHECK(prf.precision == 1.0);
        CHECK(prf.recall == 1.0);
        CHECK(prf.f1 == 1.0);
    }
    // F1 ignores tn entirely.
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        ConfusionCounts c;
        c.tp = rng.below(20);
        c.fp = rng.below(20);
        c.fn = rng.below(20);
        c.tn = rng.below(20);
        ConfusionCounts d = c;
        d.tn = rng.below(1000);
        const Prf a = f1_flagged(c);
        const Prf b = f1_flagged(d);
        CHECK(a.f1 == b.f1);
    }
}

TEST_CASE("evaluate aggregates per-language and overall metrics") {
    const Fixture fix(7);
    EvalOptions options;
    options.k = 5;
    options.model_descriptor = "oracle";

    SUBCASE("an oracle predictor scores a perfect F1") {
        const Predictor oracle = [](const Example& ex, const Vec&,
                                    const Neighbourhood&, bool) {
            return Prediction{ex.label, {}};
        };
        const Report report =
            evaluate(oracle, fix.target, fix.index, fix.tables, options);
        CHECK(report.overall.f1 == doctest::Approx(1.0));
        CHECK(report.support == fix.target.size());
        CHECK(report.per_language.size() == 3);

        std::uint64_t support_sum = 0;
        ConfusionCounts counts_sum;
        for (const auto& [lang, lm] : report.per_language) {
            support_sum += lm.support;
            counts_sum += lm.counts;
        }
        CHECK(support_sum == report.support);
        CHECK(counts_sum == report.overall_counts);  // micro = sum of languages
    }
    SUBCASE("a constant-neutral predictor has zero recall") {
        const Predictor never = [](const Example&, const Vec&, const Neighbourhood&,
                                   bool) {
            return Prediction{BinaryLabel::Neutral, {}};
        };
        const Report report =
            evaluate(never, fix.target, fix.index, fix.tables, options);
        CHECK(report.overall.recall == 0.0);
        CHECK(report.overall.f1 == 0.0);
    }
    SUBCASE("results are independent of the thread count") {
        const Predictor oracle = [](const Example& ex, const Vec&,
                                    const Neighbourhood&, bool) {
            return Prediction{ex.label, {}};
        };
        EvalOptions threaded = options;
        threaded.threads = 4;
        const Report a = evaluate(oracle, fix.target, fix.index, fix.tables, options);
        const Report b =
            evaluate(oracle, fix.target, fix.index, fix.tables, threaded);
        CHECK(format_report(a) == format_report(b));
    }
}

TEST_CASE("head predictor plugs into evaluate with explanations") {
    const Fixture fix(11);
    const HeadConfig config = HeadConfig::bi_encoder(8, 4, 3, 5, 0.3, 2);
    const HeadParams params = init_params(config);

    EvalOptions options;
    options.k = 5;
    options.explain = true;
    options.keep_examples = true;
    options.model_descriptor = "be-knn+";
    const Report report = evaluate(head_predictor(params, config, fix.tables),
                                   fix.target, fix.index, fix.tables, options);
    REQUIRE(report.examples.size() == fix.target.size());
    for (const auto& rec : report.examples) {
        REQUIRE(rec.neighbours.size() == 5);
        double attn_sum = 0.0;
        for (const auto& ne : rec.neighbours) {
            CHECK(ne.p_agree >= 0.0);
            CHECK(ne.p_agree <= 1.0);
            attn_sum += ne.attention;
        }
        CHECK(attn_sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("report writing round-trips") {
    const Fixture fix(13);
    const HeadConfig config = HeadConfig::bi_encoder(8, 4, 3, 5, 0.3, 2);
    const HeadParams params = init_params(config);

    EvalOptions options;
    options.k = 5;
    options.explain = true;
    options.keep_examples = true;
    options.model_descriptor = "be-knn+ demo";
    const Report report = evaluate(head_predictor(params, config, fix.tables),
                                   fix.target, fix.index, fix.tables, options);

    const std::string path = nftest::path_join(kDir, "report.txt");
    write_report(report, path);
    const Report back = read_report(path);
    CHECK(back.dataset == report.dataset);
    CHECK(back.model == report.model);
    CHECK(back.per_language.size() == report.per_language.size());
    CHECK(back.support == report.support);
    CHECK(back.examples.size() == report.examples.size());

    // Writing the parsed report again is byte-identical.
    const std::string path2 = nftest::path_join(kDir, "report2.txt");
    write_report(back, path2);
    CHECK(nftest::read_file(path) == nftest::read_file(path2));
}

TEST_CASE("read_report rejects malformed files") {
    const std::string path = nftest::path_join(kDir, "bad.txt");
    nftest::write_file(path, "dataset: x\nmodel: y\nwhat is this line\n");
    CHECK_THROWS_AS(read_report(path), format_error);

    nftest::write_file(path, "  nn 1 id=a label=neutral score=0 attention=0 "
                             "p_agree=0\n");
    CHECK_THROWS_AS(read_report(path), format_error);
}
