#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "nf/cli.hpp"
#include "nf/dataset.hpp"
#include "nf/eval.hpp"
#include "nf/io.hpp"
#include "test_util.hpp"

using namespace nf;

namespace {

const std::string kDir = nftest::scratch_dir("cli");

int run(std::initializer_list<std::string> args) {
    return cli::run(std::vector<std::string>(args));
}

std::string at(const std::string& name) { return nftest::path_join(kDir, name); }

// A small synthetic working set shared across the CLI cases.
struct Pipeline {
    Pipeline() {
        REQUIRE(run({"synth", "--out-dir", kDir, "--seed", "9", "--source-n", "200",
                     "--target-n", "60", "--dim", "16"}) == 0);
        REQUIRE(run({"index", "build", "--data", at("source.jsonl"), "--vectors",
                     at("vectors.nfv"), "--out", at("source.nfi")}) == 0);
    }
};

Pipeline& pipeline() {
    static Pipeline p;
    return p;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({"no-such-command"}) == 1);
    CHECK(run({}) == 1);
    CHECK(run({"train"}) == 1);  // missing required flags
    CHECK(run({"baseline", "sideways", "--index", "x", "--data", "y", "--out",
               "z"}) == 1);
}

TEST_CASE("--help exits 0 on every subcommand") {
    CHECK(run({"--help"}) == 0);
    for (const char* sub :
         {"embed", "index", "train", "cli-pretrain", "predict", "evaluate",
          "baseline", "rerank-eval", "lambda-sweep", "gradcheck", "synth"}) {
        CAPTURE(sub);
        CHECK(run({sub, "--help"}) == 0);
    }
    CHECK(run({"index", "build", "--help"}) == 0);
}

TEST_CASE("missing input files exit 2") {
    CHECK(run({"embed", "--data", at("nope.jsonl"), "--out", at("v.nfv")}) == 2);
    CHECK(run({"evaluate", "--ckpt", at("nope.nfp"), "--index", at("nope.nfi"),
               "--data", at("nope.jsonl"), "--out", at("r.txt")}) == 2);
}

TEST_CASE("gradcheck subcommand passes") {
    CHECK(run({"gradcheck", "--seed", "7", "--trials", "4"}) == 0);
}

TEST_CASE("embed then index round-trip through the CLI") {
    pipeline();
    // Toy-embed the synthetic source texts (independent of synth vectors).
    CHECK(run({"embed", "--data", at("source.jsonl"), "--out", at("toy.nfv"),
               "--dim", "24", "--seed", "3"}) == 0);
    CHECK(run({"embed", "--data", at("source.jsonl"), "--out", at("toy2.nfv"),
               "--dim", "24", "--seed", "3"}) == 0);
    CHECK(nftest::read_file(at("toy.nfv")) == nftest::read_file(at("toy2.nfv")));

    CHECK(run({"index", "build", "--data", at("source.jsonl"), "--vectors",
               at("toy.nfv"), "--out", at("toy.nfi")}) == 0);
    CHECK(run({"index", "build", "--data", at("source.jsonl"), "--vectors",
               at("toy.nfv"), "--out", at("toy2.nfi")}) == 0);
    CHECK(nftest::read_file(at("toy.nfi")) == nftest::read_file(at("toy2.nfi")));
}

TEST_CASE("train, evaluate, predict, and baselines run end to end") {
    pipeline();
    REQUIRE(run({"train", "--source-index", at("source.nfi"), "--target-train",
                 at("target_train.jsonl"), "--target-dev", at("target_dev.jsonl"),
                 "--vectors", at("vectors.nfv"), "--out-dir", at("run"), "--k", "5",
                 "--p", "8", "--attn-dim", "4", "--epochs", "2", "--seed", "1"}) ==
            0);
    namespace fs = std::filesystem;
    REQUIRE(fs::exists(at("run/best.nfp")));
    REQUIRE(fs::exists(at("run/history.tsv")));

    CHECK(run({"evaluate", "--ckpt", at("run/best.nfp"), "--index", at("source.nfi"),
               "--data", at("target_test.jsonl"), "--vectors", at("vectors.nfv"),
               "--out", at("report.txt")}) == 0);
    const Report report = read_report(at("report.txt"));
    CHECK(report.support == 15);

    CHECK(run({"predict", "--ckpt", at("run/best.nfp"), "--index", at("source.nfi"),
               "--input", at("target_test.jsonl"), "--vectors", at("vectors.nfv"),
               "--out", at("pred.txt"), "--explain"}) == 0);
    const Report pred = read_report(at("pred.txt"));
    CHECK(pred.examples.size() == 15);
    CHECK(!pred.examples[0].neighbours.empty());

    CHECK(run({"baseline", "majority", "--index", at("source.nfi"), "--data",
               at("target_test.jsonl"), "--vectors", at("vectors.nfv"), "--k-sweep",
               "3,5,10", "--out", at("majority.tsv")}) == 0);
    const std::string sweep = nftest::read_file(at("majority.tsv"));
    CHECK(sweep.rfind("k\tprecision\trecall\tf1\n", 0) == 0);
    CHECK(sweep.find("\n3\t") != std::string::npos);

    CHECK(run({"rerank-eval", "--ckpt", at("run/best.nfp"), "--index",
               at("source.nfi"), "--data", at("target_test.jsonl"), "--vectors",
               at("vectors.nfv"), "--k-sweep", "3,5", "--out",
               at("rerank.tsv")}) == 0);
    CHECK(nftest::read_file(at("rerank.tsv")).find("after_f1") != std::string::npos);
}

TEST_CASE("repeated runs produce byte-identical outputs") {
    pipeline();
    const auto train_into = [&](const std::string& dir, const std::string& report) {
        REQUIRE(run({"train", "--source-index", at("source.nfi"), "--target-train",
                     at("target_train.jsonl"), "--target-dev",
                     at("target_dev.jsonl"), "--vectors", at("vectors.nfv"),
                     "--out-dir", at(dir), "--k", "5", "--p", "8", "--attn-dim",
                     "4", "--epochs", "2", "--seed", "4"}) == 0);
        REQUIRE(run({"evaluate", "--ckpt", at(dir + "/best.nfp"), "--index",
                     at("source.nfi"), "--data", at("target_test.jsonl"),
                     "--vectors", at("vectors.nfv"), "--out", at(report)}) == 0);
    };
    train_into("det-a", "det-a.txt");
    train_into("det-b", "det-b.txt");
    CHECK(nftest::read_file(at("det-a/best.nfp")) ==
          nftest::read_file(at("det-b/best.nfp")));
    CHECK(nftest::read_file(at("det-a/history.tsv")) ==
          nftest::read_file(at("det-b/history.tsv")));
    CHECK(nftest::read_file(at("det-a.txt")) == nftest::read_file(at("det-b.txt")));
}

TEST_CASE("cli-pretrain then train accepts --init-from") {
    pipeline();
    REQUIRE(run({"cli-pretrain", "--source", at("source.jsonl"), "--vectors",
                 at("vectors.nfv"), "--out-dir", at("pre"), "--k", "5", "--p", "8",
                 "--attn-dim", "4", "--accum", "16", "--seed", "2"}) == 0);
    REQUIRE(std::filesystem::exists(at("pre/best.nfp")));

    CHECK(run({"train", "--source-index", at("source.nfi"), "--target-train",
               at("target_train.jsonl"), "--target-dev", at("target_dev.jsonl"),
               "--vectors", at("vectors.nfv"), "--out-dir", at("seq"), "--k", "5",
               "--p", "8", "--attn-dim", "4", "--epochs", "1", "--init-from",
               at("pre/best.nfp")}) == 0);
}

TEST_CASE("predict and baselines fall back to index rows plus toy embeddings") {
    pipeline();
    // Build an index in toy-embedding space, then run the minimal
    // invocations that pass no --vectors at all.
    REQUIRE(run({"embed", "--data", at("source.jsonl"), "--out", at("fb.nfv"),
                 "--dim", "16", "--seed", "11"}) == 0);
    REQUIRE(run({"index", "build", "--data", at("source.jsonl"), "--vectors",
                 at("fb.nfv"), "--out", at("fb.nfi")}) == 0);
    REQUIRE(run({"train", "--source-index", at("fb.nfi"), "--target-train",
                 at("target_train.jsonl"), "--target-dev", at("target_dev.jsonl"),
                 "--vectors", at("fb.nfv"), "--vectors", at("fb-target.nfv"),
                 "--out-dir", at("fb-run"), "--k", "5", "--p", "8", "--attn-dim",
                 "4", "--epochs", "1"}) == 2);  // fb-target.nfv does not exist

    // Toy-embed the target files so the train step has query vectors.
    for (const char* part : {"target_train", "target_dev", "target_test"}) {
        REQUIRE(run({"embed", "--data", at(std::string(part) + ".jsonl"), "--out",
                     at(std::string(part) + ".fb.nfv"), "--dim", "16", "--seed",
                     "11"}) == 0);
    }
    REQUIRE(run({"train", "--source-index", at("fb.nfi"), "--target-train",
                 at("target_train.jsonl"), "--target-dev", at("target_dev.jsonl"),
                 "--vectors", at("fb.nfv"), "--vectors", at("target_train.fb.nfv"),
                 "--vectors", at("target_dev.fb.nfv"), "--out-dir", at("fb-run"),
                 "--k", "5", "--p", "8", "--attn-dim", "4", "--epochs", "1"}) == 0);

    // No --vectors: queries are toy-embedded on the fly at the index dim and
    // neighbour vectors come from the index rows.
    CHECK(run({"predict", "--ckpt", at("fb-run/best.nfp"), "--index", at("fb.nfi"),
               "--input", at("target_test.jsonl"), "--embed-seed", "11", "--out",
               at("fb-pred.txt")}) == 0);
    const Report pred = read_report(at("fb-pred.txt"));
    CHECK(pred.examples.size() == 15);

    CHECK(run({"baseline", "weighted", "--index", at("fb.nfi"), "--data",
               at("target_test.jsonl"), "--embed-seed", "11", "--k-sweep", "3,5",
               "--out", at("fb-weighted.tsv")}) == 0);
    CHECK(nftest::read_file(at("fb-weighted.tsv")).find("\n3\t") !=
          std::string::npos);
}

TEST_CASE("training failures exit 3") {
    pipeline();
    // An absurd learning rate blows the parameters up to non-finite values;
    // the trainer must abort with a training error, not clip or loop.
    CHECK(run({"train", "--source-index", at("source.nfi"), "--target-train",
               at("target_train.jsonl"), "--target-dev", at("target_dev.jsonl"),
               "--vectors", at("vectors.nfv"), "--out-dir", at("blowup"), "--k",
               "5", "--p", "8", "--attn-dim", "4", "--epochs", "2", "--lr",
               "1e200"}) == 3);
}

TEST_CASE("evaluate honors a --k override") {
    pipeline();
    REQUIRE(std::filesystem::exists(at("run/best.nfp")));
    CHECK(run({"evaluate", "--ckpt", at("run/best.nfp"), "--index", at("source.nfi"),
               "--data", at("target_test.jsonl"), "--vectors", at("vectors.nfv"),
               "--k", "3", "--out", at("k3.txt")}) == 0);
    CHECK(run({"evaluate", "--ckpt", at("run/best.nfp"), "--index", at("source.nfi"),
               "--data", at("target_test.jsonl"), "--vectors", at("vectors.nfv"),
               "--k", "999999", "--out", at("kbig.txt")}) == 2);
}

TEST_CASE("bad sweep lists exit 2") {
    pipeline();
    CHECK(run({"baseline", "majority", "--index", at("source.nfi"), "--data",
               at("target_test.jsonl"), "--vectors", at("vectors.nfv"),
               "--k-sweep", "3,zebra", "--out", at("bad.tsv")}) == 2);
    CHECK(run({"baseline", "majority", "--index", at("source.nfi"), "--data",
               at("target_test.jsonl"), "--vectors", at("vectors.nfv"),
               "--k-sweep", "0", "--out", at("bad.tsv")}) == 2);
}

TEST_CASE("config file supplies defaults and flags win") {
    pipeline();
    nftest::write_file(at("embed.ini"), "[embed]\ndim=12\nseed=5\n");
    CHECK(run({"embed", "--data", at("source.jsonl"), "--out", at("cfg-a.nfv"),
               "--config", at("embed.ini")}) == 0);
    CHECK(run({"embed", "--data", at("source.jsonl"), "--out", at("cfg-b.nfv"),
               "--dim", "12", "--seed", "5"}) == 0);
    CHECK(nftest::read_file(at("cfg-a.nfv")) == nftest::read_file(at("cfg-b.nfv")));

    // A flag overrides the same key from the config file.
    CHECK(run({"embed", "--data", at("source.jsonl"), "--out", at("cfg-c.nfv"),
               "--config", at("embed.ini"), "--seed", "6"}) == 0);
    CHECK(nftest::read_file(at("cfg-a.nfv")) != nftest::read_file(at("cfg-c.nfv")));

    // Unknown keys are rejected.
    nftest::write_file(at("bad.ini"), "[embed]\ndim=12\nturbo=yes\n");
    CHECK(run({"embed", "--data", at("source.jsonl"), "--out", at("cfg-d.nfv"),
               "--config", at("bad.ini")}) == 1);
}

TEST_CASE("lambda-sweep writes one row per value") {
    pipeline();
    REQUIRE(run({"lambda-sweep", "--source-index", at("source.nfi"),
                 "--target-train", at("target_train.jsonl"), "--target-dev",
                 at("target_dev.jsonl"), "--vectors", at("vectors.nfv"),
                 "--lambdas", "0,0.5,1", "--epochs", "1", "--k", "5", "--p", "8",
                 "--attn-dim", "4", "--out", at("lambda.tsv")}) == 0);
    const std::string text = nftest::read_file(at("lambda.tsv"));
    CHECK(text.rfind("lambda\tprecision\trecall\tf1\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == 4);  // header + 3 rows
}
