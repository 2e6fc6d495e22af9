#include "ehrsum/cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "ehrsum/backend.hpp"
#include "ehrsum/dataset.hpp"
#include "ehrsum/evaluator.hpp"
#include "ehrsum/metrics.hpp"
#include "ehrsum/prompting.hpp"
#include "ehrsum/service.hpp"

namespace ehrsum::cli {
namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_stop_requested{false};

extern "C" void on_signal(int) { g_stop_requested.store(true); }

struct BackendFlags {
  std::string backend;
  std::string backend_url;
  std::optional<std::string> fixed_output;
  int timeout_ms = 30000;
  int retries = 2;
};

void add_backend_flags(CLI::App& cmd, BackendFlags& f) {
  cmd.add_option("--backend", f.backend, "oracle | fixed | identity | http | http://host:port")
      ->required()
      ->envname("BACKEND_KIND")
      ->check([](const std::string& v) -> std::string {
        if (v.starts_with("http://") || backend::parse_backend_kind(v)) return {};
        return "expected oracle, fixed, identity, http or an http:// URL";
      });
  cmd.add_option("--backend-url", f.backend_url, "endpoint for --backend http")->envname("BACKEND_URL");
  cmd.add_option("--fixed-output", f.fixed_output, "output returned by --backend fixed");
  cmd.add_option("--timeout-ms", f.timeout_ms, "per-attempt timeout for the http backend")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--retries", f.retries, "retries on connect failure or timeout")->check(CLI::NonNegativeNumber);
}

backend::BackendConfig make_backend_config(const BackendFlags& f) {
  backend::BackendConfig cfg;
  if (f.backend.starts_with("http://")) {
    cfg.kind = backend::BackendKind::Http;
    cfg.endpoint_url = f.backend;
  } else {
    cfg.kind = *backend::parse_backend_kind(f.backend);
    if (!f.backend_url.empty()) cfg.endpoint_url = f.backend_url;
  }
  cfg.fixed_output = f.fixed_output;
  cfg.timeout_ms = f.timeout_ms;
  cfg.max_retries = f.retries;
  return cfg;
}

int do_convert(const std::string& input, const std::string& output, const std::string& version,
               const std::string& format, std::ostream& out, std::ostream& err) {
  std::vector<dataset::WhyQARecord> records;
  if (format == "auto") {
    records = dataset::read_whyqa_file(input);
  } else {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw dataset::IoError("cannot open " + input);
    records = dataset::parse_whyqa_table(in, format == "tsv" ? dataset::TableFormat::Tsv : dataset::TableFormat::Csv);
  }
  auto prepared = dataset::prepare_records(records);
  for (const auto& d : prepared.dropped) {
    err << "warning: dropping record " << d.index << " (" << d.record.file_name << "): " << d.reason << '\n';
  }
  auto squad = dataset::convert_to_squad(prepared.kept, version);
  dataset::save_squad(squad, output);
  out << "converted " << prepared.kept.size() << " of " << records.size() << " records into " << squad.data.size()
      << " articles (" << prepared.repaired << " offsets repaired, " << prepared.dropped.size() << " dropped) -> "
      << output << '\n';
  return kExitOk;
}

int do_split(const std::string& input, std::uint64_t seed, const std::string& dir, std::ostream& out) {
  auto squad = dataset::load_squad(input);
  auto split = dataset::split_dataset(squad, seed);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw dataset::IoError("cannot create " + dir + ": " + ec.message());
  const std::pair<const char*, const dataset::SquadDataset*> parts[] = {
      {"train.json", &split.train}, {"validation.json", &split.validation}, {"test.json", &split.test}};
  for (const auto& [name, part] : parts) {
    dataset::save_squad(*part, fs::path(dir) / name);
    out << name << ": " << part->qa_count() << " QA pairs in " << part->data.size() << " articles\n";
  }
  return kExitOk;
}

int do_evaluate(const std::string& input, const BackendFlags& flags, const std::string& oracle_data, bool strict,
                int concurrency, int max_new_tokens, const std::string& split, const std::string& output,
                const std::string& format, std::ostream& out, std::ostream& err) {
  auto squad = dataset::load_squad(input);
  const auto oracle = oracle_data.empty() ? squad : dataset::load_squad(oracle_data);
  backend::Backend backend(make_backend_config(flags), &oracle);

  evaluator::EvaluationOptions opts;
  opts.strict = strict;
  opts.concurrency = concurrency;
  opts.max_new_tokens = max_new_tokens;
  opts.dataset_path = input;
  opts.split = *evaluator::parse_split(split);
  const auto gates = evaluator::default_gates();
  auto report = evaluator::run_evaluation(squad, backend, gates, opts);
  if (report.run_metadata.failures > 0) {
    err << "warning: " << report.run_metadata.failures << " generation(s) failed and were scored as empty\n";
  }
  evaluator::write_report(report, output,
                          format == "table" ? evaluator::ReportFormat::Table : evaluator::ReportFormat::Json);
  out << evaluator::format_table(report);
  return kExitOk;
}

int do_serve(service::ServiceConfig cfg, const BackendFlags& flags, std::ostream& out) {
  cfg.backend = make_backend_config(flags);
  std::optional<dataset::SquadDataset> oracle;
  if (cfg.backend.kind == backend::BackendKind::Oracle) {
    if (!cfg.oracle_data) throw std::invalid_argument("--backend oracle needs --oracle-data <squad.json>");
    oracle = dataset::load_squad(*cfg.oracle_data);
  }
  backend::Backend backend(cfg.backend, oracle ? &*oracle : nullptr);
  service::SummarizeService svc(backend, cfg.max_concurrency);
  service::HttpServer server(svc, cfg);
  const int port = server.bind(cfg.host, cfg.port);
  if (port < 0) throw dataset::IoError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));

  g_stop_requested.store(false);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread watcher([&server](std::stop_token st) {
    while (!st.stop_requested() && !g_stop_requested.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  out << "serving on http://" << cfg.host << ":" << port << " (backend " << backend.name() << ")" << std::endl;
  server.listen_after_bind();
  watcher.request_stop();
  return kExitOk;
}

int do_report(const std::string& input, const std::string& format, std::ostream& out) {
  auto report = evaluator::load_report(input);
  out << (format == "json" ? evaluator::report_to_json(report) : evaluator::format_table(report));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clinician-focused EHR question-answer summarization pipeline", "ehrsum"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string input, output, version{dataset::kDefaultVersion}, table_format = "auto";
  auto* convert = app.add_subcommand("convert", "Convert a Why-QA annotation table to SQuAD JSON");
  convert->add_option("table", input, "CSV or TSV annotation table")->required();
  convert->add_option("-o,--output", output, "SQuAD JSON output")->required();
  convert->add_option("--version", version, "dataset version label");
  convert->add_option("--format", table_format, "table format")->check(CLI::IsMember({"auto", "csv", "tsv"}));

  std::uint64_t seed = 0;
  std::string out_dir;
  auto* split = app.add_subcommand("split", "Split a SQuAD dataset 70/15/15 by file group");
  split->add_option("dataset", input, "SQuAD JSON")->required();
  split->add_option("--seed", seed, "shuffle seed");
  split->add_option("-o,--output", out_dir, "output directory")->required();

  BackendFlags eval_flags;
  bool strict = false;
  int concurrency = evaluator::kDefaultConcurrency;
  int max_new_tokens = backend::kDefaultMaxNewTokens;
  std::string oracle_data, split_name = "full", report_format = "json";
  auto* evaluate = app.add_subcommand("evaluate", "Generate answers for a dataset and score them");
  evaluate->add_option("dataset", input, "SQuAD JSON")->required();
  add_backend_flags(*evaluate, eval_flags);
  evaluate->add_flag("--strict", strict, "abort on the first failed generation");
  evaluate->add_option("-o,--output", output, "report path")->required();
  evaluate->add_option("--oracle-data", oracle_data, "SQuAD file answering oracle prompts (default: the dataset)");
  evaluate->add_option("--concurrency", concurrency, "simultaneous backend requests")
      ->envname("MAX_CONCURRENCY")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--max-new-tokens", max_new_tokens, "generation length limit")->check(CLI::PositiveNumber);
  evaluate->add_option("--split", split_name, "split label recorded in the report")
      ->check(CLI::IsMember({"train", "validation", "test", "full"}));
  evaluate->add_option("--format", report_format, "report file format")->check(CLI::IsMember({"json", "table"}));

  BackendFlags serve_flags;
  service::ServiceConfig serve_cfg;
  auto* serve = app.add_subcommand("serve", "Run the summarize HTTP API");
  add_backend_flags(*serve, serve_flags);
  serve->add_option("--port", serve_cfg.port, "listen port (0 picks a free one)")
      ->envname("PORT")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--host", serve_cfg.host, "listen address");
  serve->add_option("--max-concurrency", serve_cfg.max_concurrency, "simultaneous backend calls")
      ->envname("MAX_CONCURRENCY")
      ->check(CLI::PositiveNumber);
  serve->add_option("--oracle-data", serve_cfg.oracle_data, "SQuAD file for --backend oracle");
  serve->add_option("--cors-origin", serve_cfg.cors_origins, "additional allowed CORS origin");

  std::string view_format = "table";
  auto* report = app.add_subcommand("report", "Print a saved evaluation report");
  report->add_option("report", input, "report JSON")->required();
  report->add_option("--format", view_format, "output format")->check(CLI::IsMember({"table", "json"}));

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("ehrsum");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (*convert) return do_convert(input, output, version, table_format, out, err);
    if (*split) return do_split(input, seed, out_dir, out);
    if (*evaluate) {
      return do_evaluate(input, eval_flags, oracle_data, strict, concurrency, max_new_tokens, split_name, output,
                         report_format, out, err);
    }
    if (*serve) return do_serve(serve_cfg, serve_flags, out);
    if (*report) return do_report(input, view_format, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace ehrsum::cli
