// cafforge: command line front end for the dataset pipeline.
//
//   cafforge --config run.json extract
//   cafforge --config run.json --mock replies.jsonl --strict-mock generate
//   cafforge --config run.json evaluate --forecasts model.jsonl --baseline naive.jsonl

#include "cafforge/cafforge.hpp"
#include "cafforge/http_backend.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace cafforge;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mock;
    bool strict_mock = false;
    bool dry_run = false;
    EvaluateOptions evaluate;
    std::string evaluate_baseline;
    std::string evaluate_split;
};

std::shared_ptr<Gateway> make_gateway(const PipelineConfig& cfg, const Options& opts) {
    if (!opts.mock.empty()) {
        auto backend = std::make_shared<MockBackend>(opts.strict_mock);
        backend->load_fixture(opts.mock);
        if (!opts.strict_mock) backend->set_fallback("");
        return std::make_shared<Gateway>(cfg.gateway, backend);
    }
    if (cfg.gateway.endpoint.empty()) {
        fail(ErrorKind::config, "no gateway endpoint configured; set gateway.endpoint or pass --mock");
    }
    if (cfg.gateway.api_key_env.empty() || std::getenv(cfg.gateway.api_key_env.c_str()) == nullptr) {
        std::cerr << "warning: environment variable " << cfg.gateway.api_key_env
                  << " is not set; requests go out without credentials\n";
    }
    return std::make_shared<Gateway>(cfg.gateway, std::make_shared<HttpBackend>(cfg.gateway));
}

bool verify_needs_gateway(const PipelineConfig& cfg) {
    return cfg.judge_indomain || cfg.judge_zeroshot || cfg.forecaster == "direct_prompt";
}

void print(const StageReport& report, bool dry_run) {
    for (const auto& line : report.lines) std::cout << line << "\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& path : report.outputs) std::cout << (dry_run ? "would write " : "wrote ") << path << "\n";
}

int run(const std::string& command, const Options& opts) {
    if (opts.strict_mock && opts.mock.empty()) fail(ErrorKind::config, "--strict-mock needs --mock <fixture>");
    auto cfg = load_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;

    if (command == "extract") {
        print(run_extract(cfg, opts.dry_run), opts.dry_run);
    } else if (command == "generate") {
        print(run_generate(cfg, *make_gateway(cfg, opts), opts.dry_run), opts.dry_run);
    } else if (command == "verify") {
        const auto gateway = verify_needs_gateway(cfg) ? make_gateway(cfg, opts) : nullptr;
        print(run_verify(cfg, gateway, opts.dry_run).report, opts.dry_run);
    } else if (command == "split") {
        print(run_split(cfg, opts.dry_run), opts.dry_run);
    } else if (command == "evaluate") {
        auto eval = opts.evaluate;
        if (!opts.evaluate_baseline.empty()) eval.baseline = opts.evaluate_baseline;
        if (!opts.evaluate_split.empty()) eval.split = opts.evaluate_split;
        print(run_evaluate(cfg, eval, opts.dry_run), opts.dry_run);
    } else if (command == "stats") {
        print(run_stats(cfg, opts.dry_run), opts.dry_run);
    } else if (command == "audit") {
        const auto result = run_audit(cfg);
        print(result.report, false);
        return result.audit.clean() ? 0 : 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Build and evaluate context-aided forecasting datasets"};
    app.require_subcommand(1);
    Options opts;
    app.add_option("-c,--config", opts.config, "Run configuration (JSON, comments allowed)")->required();
    app.add_option("--seed", opts.seed, "Override the configured seed");
    app.add_option("--mock", opts.mock, "Answer chat calls from a fixture of prompt_hash/reply_text lines");
    app.add_flag("--strict-mock", opts.strict_mock, "Fail on prompts missing from the mock fixture");
    app.add_flag("--dry-run", opts.dry_run, "Validate everything but write nothing");

    app.add_subcommand("extract", "Cut forecast windows from the input series");
    app.add_subcommand("generate", "Generate a context for every window");
    app.add_subcommand("verify", "Run the judge and the with/without-context check");
    app.add_subcommand("split", "Assign splits, difficulty labels and subsamples");
    auto* evaluate = app.add_subcommand("evaluate", "Score forecast files against the windows");
    evaluate->add_option("--forecasts", opts.evaluate.forecasts, "Forecasts to score (key/samples JSONL)")->required();
    evaluate->add_option("--baseline", opts.evaluate_baseline, "Baseline forecasts for the win rate");
    evaluate->add_option("--split", opts.evaluate_split, "Only score windows assigned to this split");
    app.add_subcommand("stats", "Summarise the windows file");
    app.add_subcommand("audit", "Check split invariants");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        return run(app.get_subcommands().front()->get_name(), opts);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
