#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pinnsearch/cli.hpp"
#include "pinnsearch/errors.hpp"
#include "pinnsearch/model_io.hpp"

using namespace pinnsearch;

namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "pinnsearch_test_cli";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(std::vector<std::string> args) {
    std::vector<const char*> argv;
    argv.push_back("pinnsearch");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

struct CoutCapture {
    std::streambuf* old;
    std::ostringstream ss;
    CoutCapture() : old(std::cout.rdbuf(ss.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old); }
    std::string text() const { return ss.str(); }
};

}  // namespace

TEST_CASE("config precedence: flag > file > default") {
    cli::RunConfig cfg;
    CHECK(cfg.trials == 200);  // default layer

    auto file = work_dir() / "layer.cfg";
    {
        std::ofstream out(file);
        out << "# comment line\n";
        out << "trials = 77\n";
        out << "seed = 5\n";
        out << "noise_rel = 0.5\n";
    }
    cli::apply_config_file(cfg, file);
    CHECK(cfg.trials == 77);  // file layer
    CHECK(cfg.seed == 5);
    CHECK(cfg.noise_rel == 0.5);

    cli::apply_key_value(cfg, "trials", "33");  // flag layer
    CHECK(cfg.trials == 33);
    CHECK(cfg.seed == 5);  // untouched keys keep the file value
}

TEST_CASE("config rejects unknown keys and bad values") {
    cli::RunConfig cfg;
    CHECK_THROWS_AS(cli::apply_key_value(cfg, "trails", "10"), ConfigError);
    CHECK_THROWS_AS(cli::apply_key_value(cfg, "trials", "abc"), ConfigError);
    CHECK_THROWS_AS(cli::apply_key_value(cfg, "baseline_enabled", "maybe"), ConfigError);
    // physics nominals are addressable by parameter name
    cli::apply_key_value(cfg, "V_in", "24");
    CHECK(cfg.nominal.V_in == 24.0);
}

TEST_CASE("config precedence end to end through simulate") {
    auto dir = work_dir() / "precedence";
    fs::remove_all(dir);
    auto file = work_dir() / "sim.cfg";
    {
        std::ofstream out(file);
        out << "samples_per_op = 2\n";
        out << "sim_substeps = 150\n";
        out << "out = " << dir.string() << "\n";
    }

    // file layer only: 3 ops x 2 samples
    {
        CoutCapture cap;
        CHECK(run({"simulate", "--config", file.string()}) == 0);
    }
    {
        std::ifstream in(dir / "dataset.csv");
        std::string line;
        int rows = -1;  // header
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 6);
    }

    // flag layer overrides the file: 3 ops x 3 samples
    {
        CoutCapture cap;
        CHECK(run({"simulate", "--config", file.string(), "--samples-per-op", "3"}) == 0);
    }
    {
        std::ifstream in(dir / "dataset.csv");
        std::string line;
        int rows = -1;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 9);
    }
}

TEST_CASE("simulate: default row count, manifest, determinism") {
    auto out_a = work_dir() / "sim_a";
    auto out_b = work_dir() / "sim_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    {
        CoutCapture cap;
        CHECK(run({"simulate", "--out", out_a.string(), "--seed", "42"}) == 0);
        CHECK(run({"simulate", "--out", out_b.string(), "--seed", "42"}) == 0);
    }
    // 360 data rows plus the header
    {
        std::ifstream in(out_a / "dataset.csv");
        std::string line;
        int rows = -1;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 360);
    }
    CHECK(slurp(out_a / "dataset.csv") == slurp(out_b / "dataset.csv"));
    CHECK(slurp(out_a / "dataset.truth") == slurp(out_b / "dataset.truth"));
    CHECK(fs::exists(out_a / "manifest.txt"));
    std::string manifest = slurp(out_a / "manifest.txt");
    CHECK(manifest.find("seed = 42") != std::string::npos);
    CHECK(manifest.find("tool = pinnsearch") != std::string::npos);
}

TEST_CASE("train, evaluate and the saved model agree") {
    auto dir = work_dir() / "train_flow";
    fs::remove_all(dir);
    auto cfgfile = work_dir() / "train.cfg";
    {
        std::ofstream out(cfgfile);
        out << "out = " << dir.string() << "\n";
        out << "dataset = " << (dir / "dataset.csv").string() << "\n";
        out << "samples_per_op = 4\n";
        out << "sim_substeps = 200\n";
        out << "epochs = 25\n";
        out << "lbfgs_max_iter = 10\n";
    }
    {
        CoutCapture cap;
        REQUIRE(run({"simulate", "--config", cfgfile.string()}) == 0);
    }

    std::string train_out;
    {
        CoutCapture cap;
        REQUIRE(run({"train", "--config", cfgfile.string(), "--arch",
                     "0,tanh,0,tanh,0,tanh,0,tanh,0,tanh"}) == 0);
        train_out = cap.text();
    }
    CHECK(train_out.find("param_count: 6") != std::string::npos);
    CHECK(fs::exists(dir / "model.txt"));
    CHECK(fs::exists(dir / "loss_history.csv"));
    CHECK(fs::exists(dir / "report.md"));

    // the report average equals the mean of the per-parameter columns
    {
        std::ifstream in(dir / "report.csv");
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        std::vector<double> vals;
        std::istringstream is(row);
        std::string tok;
        std::getline(is, tok, ',');  // label
        while (std::getline(is, tok, ',')) vals.push_back(std::stod(tok));
        REQUIRE(vals.size() == 12);  // average, param_count, 10 params
        double mean = 0.0;
        for (int j = 0; j < 10; ++j) mean += vals[static_cast<std::size_t>(2 + j)];
        mean /= 10.0;
        CHECK(vals[0] == doctest::Approx(mean).epsilon(1e-9));
    }

    // evaluate(saved model) reproduces cmd_train's report row
    std::string eval_out;
    {
        CoutCapture cap;
        REQUIRE(run({"evaluate", (dir / "model.txt").string(),
                     (dir / "dataset.truth").string()}) == 0);
        eval_out = cap.text();
    }
    std::string report_csv = slurp(dir / "report.csv");
    // both carry the same numbers; compare the csv payload after the label
    auto payload = [](const std::string& text) {
        auto pos = text.rfind('\n', text.size() - 2);
        std::string last = text.substr(pos + 1);
        return last.substr(last.find(','));
    };
    CHECK(payload(eval_out) == payload(report_csv));
}

TEST_CASE("report formatter renders the five-point-zero average") {
    // Table-shaped fixture row: per-parameter values averaging exactly 5.0
    train::MaeReport rep;
    rep.per_param = {0.8, 13.1, 1.2, 4.5, 27.9, 0.1, 0.3, 0.1, 0.1, 1.9};
    double sum = 0.0;
    for (double v : rep.per_param) sum += v;
    rep.average = sum / 10.0;
    rep.param_count = 12350;
    CHECK(rep.average == 5.0);
    std::string row = cli::format_report_row("fixture", rep);
    CHECK(row.find("| 5.0 |") != std::string::npos);
    CHECK(row.find("| 12350 |") != std::string::npos);
    CHECK(row.find(" 27.9 |") != std::string::npos);
    std::string header = cli::format_report_header();
    CHECK(header.find("Average MAE") != std::string::npos);
    CHECK(header.find("R_dson") != std::string::npos);
}

TEST_CASE("exit codes") {
    SUBCASE("unknown config key exits 2") {
        auto bad = work_dir() / "bad.cfg";
        {
            std::ofstream out(bad);
            out << "trails = 10\n";
        }
        CoutCapture cap;
        CHECK(run({"simulate", "--config", bad.string()}) == 2);
    }
    SUBCASE("missing dataset exits 3") {
        CoutCapture cap;
        CHECK(run({"train", "--data", "/nonexistent/nowhere.csv", "--arch",
                   "0,tanh,0,tanh,0,tanh,0,tanh,0,tanh"}) == 3);
    }
    SUBCASE("malformed arch exits 2") {
        auto dir = work_dir() / "exitcodes";
        fs::remove_all(dir);
        {
            CoutCapture cap;
            REQUIRE(run({"simulate", "--out", dir.string(), "--samples-per-op", "2"}) == 0);
        }
        CoutCapture cap;
        CHECK(run({"train", "--data", (dir / "dataset.csv").string(), "--arch",
                   "17,tanh,0,tanh,0,tanh,0,tanh,0,tanh"}) == 2);
    }
    SUBCASE("search without a constraint exits 2") {
        CoutCapture cap;
        CHECK(run({"search", "--data", "/nonexistent.csv"}) == 2);
    }
    SUBCASE("unwritable output directory exits 3 and names the path") {
        CoutCapture cap;
        CHECK(run({"simulate", "--out", "/proc/not_allowed/out"}) == 3);
    }
}

TEST_CASE("model files round-trip bit-exactly and reject other versions") {
    auto dir = work_dir() / "model_io";
    fs::create_directories(dir);

    data::Dataset ds =
        data::generate_synthetic(physics::PhysParams::nominal(), data::default_ops(), 3, 1e-3, 5,
                                 200, 4000);
    net::ArchSpec arch = net::ArchSpec::parse("30,relu,0,tanh,20,tanh,0,tanh,0,tanh");
    train::PinnModel model = train::make_model(
        arch, ds, train::offset_reference(physics::PhysParams::nominal(), 0.2), 77);
    Rng rng(6);
    for (auto& s : model.log_scales) s = rng.uniform(-0.5, 0.5);

    auto path = dir / "model.txt";
    model_io::save_model({arch, model}, path);
    model_io::SavedModel back = model_io::load_model(path);

    CHECK(back.arch.encode() == arch.encode());
    CHECK(train::pack(back.model) == train::pack(model));
    CHECK(back.model.lambda_ref.to_array() == model.lambda_ref.to_array());
    CHECK(back.model.input_stats.mean == model.input_stats.mean);
    CHECK(back.model.input_stats.stddev == model.input_stats.stddev);

    // saving the loaded model reproduces the identical file
    auto path2 = dir / "model2.txt";
    model_io::save_model(back, path2);
    CHECK(slurp(path) == slurp(path2));

    SUBCASE("version mismatch is a format error") {
        auto tampered = dir / "tampered.txt";
        std::string text = slurp(path);
        text.replace(text.find("v1"), 2, "v9");
        std::ofstream(tampered) << text;
        CHECK_THROWS_AS(model_io::load_model(tampered), FormatError);
    }
    SUBCASE("non-model file is a format error") {
        auto garbage = dir / "garbage.txt";
        std::ofstream(garbage) << "hello world\n";
        CHECK_THROWS_AS(model_io::load_model(garbage), FormatError);
        CoutCapture cap;
        CHECK(run({"evaluate", garbage.string(), garbage.string()}) == 2);
    }
    SUBCASE("shape mismatch against the declared arch is caught") {
        auto mismatched = dir / "mismatched.txt";
        std::string text = slurp(path);
        // declare a different architecture than the stored layer shapes
        auto pos = text.find("arch 30,relu");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, std::string("arch 30,relu").size(), "arch 40,relu");
        std::ofstream(mismatched) << text;
        CHECK_THROWS_AS(model_io::load_model(mismatched), FormatError);
    }
}

TEST_CASE("search subcommand: one-trial log, constraint echo, seed determinism") {
    auto dir = work_dir() / "search_flow";
    fs::remove_all(dir);
    auto cfgfile = work_dir() / "search.cfg";
    {
        std::ofstream out(cfgfile);
        out << "out = " << dir.string() << "\n";
        out << "dataset = " << (dir / "dataset.csv").string() << "\n";
        out << "samples_per_op = 2\n";
        out << "sim_substeps = 150\n";
        out << "epochs = 5\n";
        out << "lbfgs_max_iter = 2\n";
        out << "random_baselines = 0\n";
    }
    {
        CoutCapture cap;
        REQUIRE(run({"simulate", "--config", cfgfile.string()}) == 0);
    }
    auto run_once = [&] {
        CoutCapture cap;
        REQUIRE(run({"search", "--config", cfgfile.string(), "--constraint", "10000", "--trials",
                     "1", "--batch", "1", "--seed", "7"}) == 0);
        return cap.text();
    };
    run_once();
    std::string log_a = slurp(dir / "search_log.csv");
    {
        std::ifstream in(dir / "search_log.csv");
        std::string line;
        int rows = -1;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 1);
    }
    run_once();
    CHECK(slurp(dir / "search_log.csv") == log_a);
}

TEST_CASE("report subcommand renders a ranked table from a search log") {
    auto dir = work_dir() / "report_cmd";
    fs::create_directories(dir);
    std::vector<search::TrialResult> trials(3);
    for (int k = 0; k < 3; ++k) {
        trials[static_cast<std::size_t>(k)].trial_index = k;
        trials[static_cast<std::size_t>(k)].mae = 0.1 * (k + 1);
        trials[static_cast<std::size_t>(k)].param_count = 100 * (k + 1);
        trials[static_cast<std::size_t>(k)].reward = 1.0 / (0.1 * (k + 1));
        trials[static_cast<std::size_t>(k)].feasible = true;
        trials[static_cast<std::size_t>(k)].termination = "mock";
    }
    auto log = dir / "log.csv";
    search::save_search_log(trials, log);
    CoutCapture cap;
    CHECK(run({"report", log.string(), "--top", "2"}) == 0);
    std::string text = cap.text();
    CHECK(text.find("| rank |") != std::string::npos);
    CHECK(text.find("| 1 | 0 |") != std::string::npos);  // best reward first
}
