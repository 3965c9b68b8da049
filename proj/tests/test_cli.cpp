#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "striatum/model_io.hpp"
#include "striatum/ingest.hpp"
#include "striatum/report.hpp"
#include "striatum/tpe.hpp"
#include "test_support.hpp"

using namespace striatum;
using namespace striatum::testing;

namespace {

struct Cohort {
    TempDir dir{"cli"};
    std::string manifest;

    Cohort() {
        const auto r = cli({"generate-phantoms", "--normal", "8", "--pd", "12", "--swedd", "5", "--seed", "4", "--out",
                            (dir / "data").string()});
        REQUIRE(r.code == 0);
        manifest = (dir / "data" / "manifest.csv").string();
    }
    std::string at(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"no-such-command"}).code == 2);
    CHECK(cli({"generate-phantoms", "--normal", "0", "--pd", "0", "--swedd", "0", "--out", "x"}).code == 2);
    CHECK(cli({"generate-phantoms", "--normal", "-3", "--out", "x"}).code == 2);
    CHECK(cli({"crossval"}).code == 2);
    CHECK(cli({"crossval", "--manifest", "m.csv", "--model", "forest"}).code == 2);
    CHECK(cli({"crossval", "--manifest", "m.csv", "--lr", "abc"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"crossval", "--help"}).code == 0);
}

TEST_CASE("runtime failures exit 1") {
    TempDir dir("cli_rt");
    const auto r = cli({"crossval", "--manifest", (dir / "missing.csv").string(), "--model", "logreg"});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.csv") != std::string::npos);
    CHECK(cli({"predict", "--model-file", (dir / "none.model").string(), "x.nii"}).code == 1);
    CHECK(cli({"report", "--input", (dir / "none.json").string()}).code == 1);
}

TEST_CASE("generate-phantoms writes a loadable cohort") {
    Cohort c;
    const Manifest m = read_manifest(c.manifest);
    CHECK(m.rows.size() == 25);
    std::size_t swedd = 0;
    for (const auto& r : m.rows) swedd += r.label == ClassLabel::SWEDD;
    CHECK(swedd == 5);
    // Classes draw from distinct seed streams.
    CHECK(read_file(c.dir / "data" / "phantom_normal_0000.nii") != read_file(c.dir / "data" / "phantom_swedd_0000.nii"));
}

TEST_CASE("crossval, train, predict, eval-swedd and report") {
    Cohort c;
    auto cv = cli({"crossval", "--model", "logreg", "--manifest", c.manifest, "--k", "4", "--seed", "7", "--report",
                   c.at("r.json"), "--predictions", c.at("p.csv")});
    REQUIRE(cv.code == 0);
    CHECK(cv.out.find("logreg") != std::string::npos);
    const EvalReport rep = read_report(c.at("r.json"));
    CHECK(rep.k == 4);
    CHECK(rep.confusion.total() == 20);
    CHECK(rep.spec.reg_c == 1.0);

    CHECK(cli({"crossval", "--model", "logreg", "--manifest", c.manifest, "--k", "1000"}).code == 2);

    REQUIRE(cli({"train", "--model", "svm", "--manifest", c.manifest, "--out", c.at("svm.model")}).code == 0);
    CHECK(load_model(c.at("svm.model")).spec.reg_c == 0.5);
    const auto pr = cli({"predict", "--model-file", c.at("svm.model"), (c.dir / "data" / "phantom_pd_0002.nii").string()});
    REQUIRE(pr.code == 0);
    CHECK(pr.out.find("phantom_pd_0002.nii\tpd\t") != std::string::npos);
    CHECK(cli({"predict", "--model-file", c.at("svm.model"), "--preproc", "average",
               (c.dir / "data" / "phantom_pd_0002.nii").string()})
              .code == 2);

    const auto ev = cli({"eval-swedd", "--model-file", c.at("svm.model"), "--manifest", c.manifest});
    REQUIRE(ev.code == 0);
    CHECK(ev.out.find("svm tn=") != std::string::npos);

    const auto rp = cli({"report", "--input", c.at("r.json")});
    CHECK(rp.code == 0);
    CHECK(rp.out == cv.out);
}

TEST_CASE("holdout-only manifest is rejected") {
    Cohort c;
    Manifest m = read_manifest(c.manifest);
    std::erase_if(m.rows, [](const ManifestRow& r) { return r.label != ClassLabel::SWEDD; });
    write_manifest(m, c.dir / "data" / "swedd.csv");
    const auto r = cli({"crossval", "--model", "logreg", "--manifest", (c.dir / "data" / "swedd.csv").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("no normal or pd rows") != std::string::npos);
}

TEST_CASE("config file values apply and flags win") {
    Cohort c;
    std::ofstream(c.at("cfg.json")) << R"({"seed": 9, "crossval": {"model": "svm", "k": 3}, "train": {"epochs": 1}})";
    REQUIRE(cli({"crossval", "--config", c.at("cfg.json"), "--manifest", c.manifest, "--report", c.at("a.json")}).code == 0);
    REQUIRE(cli({"crossval", "--config", c.at("cfg.json"), "--manifest", c.manifest, "--k", "4", "--report", c.at("b.json")})
                .code == 0);
    REQUIRE(cli({"crossval", "--model", "svm", "--k", "3", "--seed", "9", "--manifest", c.manifest, "--report", c.at("c.json")})
                .code == 0);
    CHECK(read_report(c.at("a.json")).k == 3);
    CHECK(read_report(c.at("a.json")).spec.family == ModelFamily::LinearSVM);
    CHECK(read_report(c.at("b.json")).k == 4);
    CHECK(hash_report(c.at("a.json")) == hash_report(c.at("c.json")));

    std::ofstream(c.at("bad.json")) << R"({"crossval": {"no-such-flag": 1}})";
    CHECK(cli({"crossval", "--config", c.at("bad.json"), "--manifest", c.manifest}).code == 2);
    std::ofstream(c.at("junk.json")) << "{not json";
    CHECK(cli({"crossval", "--config", c.at("junk.json"), "--manifest", c.manifest}).code == 2);
}

TEST_CASE("STRIATUM_SEED is the fallback seed") {
    Cohort c;
    const std::vector<std::string> base = {"crossval", "--model", "svm", "--k", "3", "--manifest", c.manifest, "--report"};
    auto with = [&](std::vector<std::string> extra, const std::string& out) {
        auto a = base;
        a.push_back(c.at(out));
        a.insert(a.end(), extra.begin(), extra.end());
        return cli(a).code;
    };
    ::setenv("STRIATUM_SEED", "21", 1);
    REQUIRE(with({}, "env.json") == 0);
    REQUIRE(with({"--seed", "5"}, "flag.json") == 0);
    ::unsetenv("STRIATUM_SEED");
    REQUIRE(with({"--seed", "21"}, "explicit.json") == 0);
    REQUIRE(with({"--seed", "5"}, "five.json") == 0);
    CHECK(hash_report(c.at("env.json")) == hash_report(c.at("explicit.json")));
    CHECK(hash_report(c.at("flag.json")) == hash_report(c.at("five.json")));
    CHECK(hash_report(c.at("env.json")) != hash_report(c.at("five.json")));
}

TEST_CASE("hyperopt records every trial and resumes") {
    Cohort c;
    auto run = [&](const std::string& budget, const std::string& history) {
        return cli({"hyperopt", "--model", "mlp", "--manifest", c.manifest, "--budget", budget, "--k", "3", "--epochs", "1",
                    "--n-startup", "2", "--seed", "3", "--history", c.at(history), "--out", c.at(history + ".best")});
    };
    REQUIRE(run("4", "full.jsonl").code == 0);
    REQUIRE(run("2", "part.jsonl").code == 0);
    const auto resumed = run("4", "part.jsonl");
    REQUIRE(resumed.code == 0);
    CHECK(resumed.out.find("resuming from 2 trials") != std::string::npos);
    CHECK(read_file(c.dir / "full.jsonl") == read_file(c.dir / "part.jsonl"));
    CHECK(read_file(c.dir / "full.jsonl.best") == read_file(c.dir / "part.jsonl.best"));
    const auto hist = read_history(c.at("full.jsonl"), default_search_space(ModelFamily::MLP));
    CHECK(hist.size() == 4);

    // The best file feeds back in as an architecture.
    CHECK(cli({"crossval", "--model", "mlp", "--spec", c.at("full.jsonl.best"), "--manifest", c.manifest, "--k", "3",
               "--epochs", "1"})
              .code == 0);
    CHECK(cli({"crossval", "--model", "cnn", "--spec", c.at("full.jsonl.best"), "--manifest", c.manifest}).code == 2);

    CHECK(run("1", "full.jsonl").code == 2);
    CHECK(cli({"hyperopt", "--model", "mlp", "--manifest", c.manifest, "--budget", "0", "--history", c.at("z.jsonl")}).code == 2);
    CHECK(cli({"hyperopt", "--model", "logreg", "--manifest", c.manifest, "--history", c.at("z.jsonl")}).code == 2);
}

TEST_CASE("repeated training in one process writes identical models") {
    Cohort c;
    for (const char* model : {"cnn", "mlp"}) {
        for (const char* out : {"a.model", "b.model"})
            REQUIRE(cli({"train", "--model", model, "--epochs", "1", "--manifest", c.manifest, "--seed", "2", "--out", c.at(out)})
                        .code == 0);
        CHECK(hash_file(c.at("a.model")) == hash_file(c.at("b.model")));
    }
}
