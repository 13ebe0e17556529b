#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include "style_audit/harness.hpp"
#include "test_util.hpp"

using namespace style_audit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunEnvironment quiet_env(std::ostream& log) {
  RunEnvironment env;
  env.transport_factory = [](const std::string& url) -> std::unique_ptr<JsonTransport> {
    throw ConfigError("unexpected network use: " + url);
  };
  env.clock = [] { return std::string("2000-01-01T00:00:00Z"); };
  env.log = &log;
  return env;
}

RunConfig audit_config(Command c, const std::string& corpus, const fs::path& out,
                       std::vector<std::string> scorers = {"mock:rank"}) {
  RunConfig cfg;
  cfg.command = c;
  cfg.corpus_path = test_util::data_path(corpus);
  cfg.out_path = out;
  cfg.scorer_specs = std::move(scorers);
  return cfg;
}

/// Runs the CLI binary; returns its exit status and captured stderr.
std::pair<int, std::string> run_cli(const std::string& args, const test_util::TempDir& dir) {
  const auto err = dir.path() / "stderr.txt";
  const std::string cmd = std::string(STYLE_AUDIT_CLI) + " " + args + " 2>" + err.string() + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

}  // namespace

TEST(Harness, AuditDocsGoldenAndDeterministic) {
  test_util::TempDir dir;
  std::ostringstream log;
  const auto out1 = dir.path() / "a.json";
  const auto out2 = dir.path() / "b.json";
  auto cfg = audit_config(Command::audit_docs, "groups_3.jsonl", out1);
  auto o1 = run(cfg, quiet_env(log));
  ASSERT_EQ(o1.exit_code, 0) << o1.message;
  cfg.out_path = out2;
  auto o2 = run(cfg, quiet_env(log));
  ASSERT_EQ(o2.exit_code, 0) << o2.message;
  EXPECT_EQ(read_file(out1), read_file(out2));

  const auto j = json::parse(read_file(out1));
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["scorer"], "mock:rank");
  EXPECT_EQ(j[0]["n_groups"], 3);
  EXPECT_EQ(j[0]["avg_ranks"]["original"], 1.0);
  EXPECT_EQ(j[0]["avg_ranks"]["style_8"], 10.0);
  EXPECT_NEAR(j[0]["unfairness"].get<double>(), 9.0 * std::sqrt(8.25), 1e-9);
  EXPECT_EQ(j[0]["tie_rule"], "fractional");

  auto manifest_path = out1;
  manifest_path += ".manifest.json";
  const auto m = json::parse(read_file(manifest_path));
  EXPECT_EQ(m["timestamp"], "2000-01-01T00:00:00Z");
  EXPECT_EQ(m["command"], "audit-docs");
  EXPECT_EQ(m["corpus_sha256"], sha256_hex(read_file(test_util::data_path("groups_3.jsonl"))));
  EXPECT_EQ(m["scorers"], json::array({"mock:rank"}));
}

TEST(Harness, MultipleScorersAndCsv) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto cfg = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "r.csv",
                          {"bm25:k1=1.2,b=0.5,mock:const", "mock:hash"});
  cfg.format = OutputFormat::csv;
  const auto o = run(cfg, quiet_env(log));
  ASSERT_EQ(o.exit_code, 0) << o.message;
  std::istringstream in(read_file(cfg.out_path));
  std::string header, l1, l2, l3, extra;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header.rfind("scorer,query_style,n_groups,original,style_0", 0), 0u);
  EXPECT_EQ(l1.rfind("\"bm25:k1=1.2,b=0.5\",original,3,", 0), 0u) << l1;
  EXPECT_EQ(l2, "mock:const,original,3,5.5,5.5,5.5,5.5,5.5,5.5,5.5,5.5,5.5,5.5,0");
  EXPECT_EQ(l3.rfind("mock:hash,original,3,", 0), 0u);
}

TEST(Harness, AuditQueriesIncompleteCorpusIsCorpusError) {
  test_util::TempDir dir;
  std::ostringstream log;
  const auto o = run(audit_config(Command::audit_queries, "groups_query_incomplete.jsonl", dir.path() / "q.json"),
                     quiet_env(log));
  EXPECT_EQ(o.exit_code, 3);
  EXPECT_NE(o.message.find("q1"), std::string::npos) << o.message;
  EXPECT_FALSE(fs::exists(dir.path() / "q.json"));
}

TEST(Harness, AuditQueriesMatrixAndPlots) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto cfg = audit_config(Command::audit_queries, "groups_3.jsonl", dir.path() / "m.json",
                          {"mock:hash/bump=query"});
  cfg.plot_dir = dir.path() / "plots";
  const auto o = run(cfg, quiet_env(log));
  ASSERT_EQ(o.exit_code, 0) << o.message;
  const auto j = json::parse(read_file(cfg.out_path));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["rows"].size(), kNumStyles);
  EXPECT_EQ(j[0]["rows"]["style_4"]["avg_ranks"]["style_4"], 1.0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(cfg.plot_dir)) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, kNumStyles);
  const auto series = read_file(cfg.plot_dir / "mock_hash_bump_query__query_style_2.csv");
  EXPECT_EQ(series.rfind("style,mean_rank,baseline\noriginal,", 0), 0u);
  EXPECT_NE(series.find("\nstyle_2,1,"), std::string::npos) << series;
}

TEST(Harness, PlotDataForDocumentAudit) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto cfg = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "d.json");
  cfg.plot_dir = dir.path() / "plots";
  ASSERT_EQ(run(cfg, quiet_env(log)).exit_code, 0);
  EXPECT_EQ(read_file(cfg.plot_dir / "mock_rank__query_original.csv"),
            "style,mean_rank,baseline\noriginal,1,1\nstyle_0,2,1\nstyle_1,3,1\nstyle_2,4,1\nstyle_3,5,1\n"
            "style_4,6,1\nstyle_5,7,1\nstyle_6,8,1\nstyle_7,9,1\nstyle_8,10,1\n");
}

TEST(Harness, StatsOnEchoCorpus) {
  test_util::TempDir dir;
  std::ostringstream log;
  RunConfig cfg;
  cfg.command = Command::stats;
  cfg.corpus_path = test_util::data_path("groups_echo.jsonl");
  cfg.out_path = dir.path() / "s.json";
  ASSERT_EQ(run(cfg, quiet_env(log)).exit_code, 0);
  const auto j = json::parse(read_file(cfg.out_path));
  EXPECT_EQ(j["side"], "document");
  ASSERT_EQ(j["rows"].size(), kNumStyles);
  for (const auto& r : j["rows"]) EXPECT_EQ(r["mean_bleu"], 1.0);

  cfg.format = OutputFormat::csv;
  cfg.side = Side::query;
  cfg.out_path = dir.path() / "s.csv";
  ASSERT_EQ(run(cfg, quiet_env(log)).exit_code, 0);
  const auto csv = read_file(cfg.out_path);
  EXPECT_EQ(csv.rfind("style,n,mean_tokens,mean_bleu,mean_meteor,mean_rouge_l\noriginal,3,", 0), 0u);
}

TEST(Harness, StatsSkipsIncompleteGroupsWithWarning) {
  test_util::TempDir dir;
  std::ostringstream log;
  RunConfig cfg;
  cfg.command = Command::stats;
  cfg.side = Side::query;
  cfg.corpus_path = test_util::data_path("groups_query_incomplete.jsonl");
  cfg.out_path = dir.path() / "s.json";
  const auto o = run(cfg, quiet_env(log));
  EXPECT_EQ(o.exit_code, 3);
  EXPECT_NE(o.message.find("q1"), std::string::npos);
}

TEST(Harness, ConfigErrorsComeFirst) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto env = quiet_env(log);
  auto bad_scorer = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "x.json", {"tfidf"});
  EXPECT_EQ(run(bad_scorer, env).exit_code, 2);
  auto no_scorer = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "x.json", {});
  EXPECT_EQ(run(no_scorer, env).exit_code, 2);
  auto bm25_answers = audit_config(Command::audit_answers, "qa.jsonl", dir.path() / "x.json", {"bm25"});
  EXPECT_EQ(run(bm25_answers, env).exit_code, 2);
  auto twice = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "x.json", {"mock:rank", "mock:rank"});
  EXPECT_EQ(run(twice, env).exit_code, 2);
  // Config is checked before the corpus is read.
  auto both = audit_config(Command::audit_docs, "missing.jsonl", dir.path() / "x.json", {"tfidf"});
  EXPECT_EQ(run(both, env).exit_code, 2);
  auto missing = audit_config(Command::audit_docs, "missing.jsonl", dir.path() / "x.json");
  EXPECT_EQ(run(missing, env).exit_code, 3);
  auto out_dir = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path());
  EXPECT_EQ(run(out_dir, env).exit_code, 2);
  EXPECT_FALSE(fs::exists(dir.path() / "x.json"));
}

TEST(Harness, EndpointFailureIsExitFour) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto env = quiet_env(log);
  env.transport_factory = [](const std::string&) {
    return std::make_unique<FunctionTransport>(
        [](const std::string&, const json&) -> json { throw EndpointError("connection refused"); });
  };
  auto cfg = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "x.json", {"embedding:m@http://h"});
  cfg.max_retries = 0;
  const auto o = run(cfg, env);
  EXPECT_EQ(o.exit_code, 4);
  EXPECT_NE(o.message.find("[rankeval]"), std::string::npos) << o.message;
}

TEST(Harness, EmbeddingAuditUsesCacheOnRerun) {
  test_util::TempDir dir;
  std::ostringstream log;
  test_util::EmbeddingStub stub;
  auto env = quiet_env(log);
  env.transport_factory = [&](const std::string&) { return stub.transport(); };
  auto cfg = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "e.json", {"embedding:m"});
  cfg.endpoint = "http://stub";
  cfg.cache_dir = dir.path() / "cache";
  ASSERT_EQ(run(cfg, env).exit_code, 0);
  const int first = stub.requests;
  EXPECT_GT(first, 0);
  const auto first_out = read_file(cfg.out_path);
  ASSERT_EQ(run(cfg, env).exit_code, 0);
  EXPECT_EQ(stub.requests, first);
  EXPECT_EQ(read_file(cfg.out_path), first_out);
}

TEST(Harness, AuditAnswers) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto cfg = audit_config(Command::audit_answers, "qa.jsonl", dir.path() / "a.csv", {"mock:hash"});
  cfg.format = OutputFormat::csv;
  ASSERT_EQ(run(cfg, quiet_env(log)).exit_code, 0);
  const auto csv = read_file(cfg.out_path);
  EXPECT_EQ(csv.rfind("scorer,system,mean_score,n,unfairness\nmock:hash,alpaca,", 0), 0u) << csv;
  cfg.correct_only = false;
  cfg.format = OutputFormat::json;
  cfg.out_path = dir.path() / "a.json";
  ASSERT_EQ(run(cfg, quiet_env(log)).exit_code, 0);
  const auto j = json::parse(read_file(cfg.out_path));
  EXPECT_EQ(j[0]["systems"][0]["n"], 2);
}

TEST(Harness, GenerateStylesWithStub) {
  test_util::TempDir dir;
  std::ostringstream log;
  auto env = quiet_env(log);
  std::atomic<int> requests{0};
  env.transport_factory = [&](const std::string& url) {
    EXPECT_EQ(url, "http://chat");
    return std::make_unique<FunctionTransport>([&](const std::string&, const json& body) {
      ++requests;
      const std::string user = body["messages"].back()["content"];
      const std::string persona = body["messages"].size() > 1 ? std::string(body["messages"][0]["content"]).substr(0, 10) : "plain";
      return json{{"choices", {{{"message", {{"content", persona + " | " + user.substr(user.find("\n\n") + 2)}}}}}}};
    });
  };
  RunConfig cfg;
  cfg.command = Command::generate_styles;
  cfg.corpus_path = test_util::data_path("pairs.jsonl");
  cfg.out_path = dir.path() / "groups.jsonl";
  cfg.chat_endpoint = "http://chat";
  cfg.cache_dir = dir.path() / "cache";
  const auto o = run(cfg, env);
  ASSERT_EQ(o.exit_code, 0) << o.message;
  EXPECT_EQ(requests, 27);
  const auto groups = load_groups(cfg.out_path);
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& g : groups) {
    EXPECT_TRUE(g.document.complete());
    EXPECT_EQ(g.query.size(), 1u);
  }
  auto manifest_path = cfg.out_path;
  manifest_path += ".manifest.json";
  const auto m = json::parse(read_file(manifest_path));
  EXPECT_EQ(m["generation"]["model"], "gpt-4o");
  EXPECT_EQ(m["generation"]["temperature"], 0.5);
  // Second run is served from the cache.
  ASSERT_EQ(run(cfg, env).exit_code, 0);
  EXPECT_EQ(requests, 27);
  // Missing chat endpoint is a config error.
  cfg.chat_endpoint.clear();
  EXPECT_EQ(run(cfg, env).exit_code, 2);
}

TEST(CacheGc, Eviction) {
  test_util::TempDir dir;
  const std::string blob(100, 'x');
  std::vector<fs::path> files;
  for (int i = 0; i < 10; ++i) {
    files.push_back(dir.write("e" + std::to_string(i) + ".json", blob));
    fs::last_write_time(files.back(), fs::file_time_type::clock::now() - std::chrono::hours(10 - i));
  }
  EXPECT_EQ(cache_gc(dir.path(), 2000), 0u);
  EXPECT_EQ(cache_gc(dir.path(), 500), 500u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(fs::exists(files[i]), i >= 5) << i;

  std::set<fs::path> keep = {fs::weakly_canonical(files[5])};
  EXPECT_EQ(cache_gc(dir.path(), 0, keep), 400u);
  EXPECT_TRUE(fs::exists(files[5]));
  for (int i = 6; i < 10; ++i) EXPECT_FALSE(fs::exists(files[i]));
  EXPECT_THROW(cache_gc(dir.path() / "nope", 0), Error);
}

TEST(CacheGc, RunKeepsEntriesTouchedThisRun) {
  test_util::TempDir dir;
  std::ostringstream log;
  const auto cache = dir.path() / "cache";
  const auto stale = cache / "emb" / "stale.json";
  write_file_atomic(stale, std::string(5000, 'y'));
  fs::last_write_time(stale, fs::file_time_type::clock::now() - std::chrono::hours(1));
  test_util::EmbeddingStub stub;
  auto env = quiet_env(log);
  env.transport_factory = [&](const std::string&) { return stub.transport(); };
  auto cfg = audit_config(Command::audit_docs, "groups_3.jsonl", dir.path() / "e.json", {"embedding:m@http://s"});
  cfg.cache_dir = cache;
  cfg.cache_max_bytes = 0;
  ASSERT_EQ(run(cfg, env).exit_code, 0);
  EXPECT_FALSE(fs::exists(stale));
  std::size_t kept = 0;
  for (const auto& e : fs::recursive_directory_iterator(cache)) kept += e.is_regular_file();
  EXPECT_GT(kept, 0u);

  RunConfig gc;
  gc.command = Command::cache_gc;
  gc.cache_dir = cache;
  gc.cache_max_bytes = 0;
  const auto o = run(gc, env);
  EXPECT_EQ(o.exit_code, 0);
  kept = 0;
  for (const auto& e : fs::recursive_directory_iterator(cache)) kept += e.is_regular_file();
  EXPECT_EQ(kept, 0u);
}

TEST(AtomicWrite, ReplacesWholeFileAndLeavesNoTemp) {
  test_util::TempDir dir;
  const auto p = dir.path() / "sub" / "f.txt";
  write_file_atomic(p, "first");
  write_file_atomic(p, "second");
  EXPECT_EQ(read_file(p), "second");
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path())) {
    (void)e;
    ++n;
  }
  EXPECT_EQ(n, 1u);
}

TEST(Cli, ExitCodes) {
  test_util::TempDir dir;
  const auto data = std::string(STYLE_AUDIT_TEST_DATA);
  const auto out = (dir.path() / "o.json").string();
  {
    const auto [code, err] =
        run_cli("audit-docs --corpus " + data + "/groups_3.jsonl --out " + out + " --scorer mock:rank", dir);
    EXPECT_EQ(code, 0) << err;
  }
  {
    const auto [code, err] = run_cli(
        "audit-queries --corpus " + data + "/groups_query_incomplete.jsonl --out " + out + " --scorer mock:rank", dir);
    EXPECT_EQ(code, 3);
    EXPECT_NE(err.find("q1"), std::string::npos) << err;
  }
  {
    const auto [code, err] =
        run_cli("audit-docs --corpus " + data + "/groups_3.jsonl --out " + out + " --scorer nope", dir);
    EXPECT_EQ(code, 2) << err;
  }
  {
    const auto [code, err] = run_cli("audit-docs --corpus " + data + "/groups_3.jsonl --out " + out +
                                         " --scorer mock:rank --query-style style_9",
                                     dir);
    EXPECT_EQ(code, 2) << err;
  }
  {
    const auto [code, err] = run_cli("audit-docs --corpus x", dir);
    EXPECT_EQ(code, 2) << err;
  }
  {
    const auto [code, err] = run_cli("frobnicate", dir);
    EXPECT_EQ(code, 2) << err;
  }
  {
    const auto [code, err] = run_cli("--help", dir);
    EXPECT_EQ(code, 0) << err;
  }
  {
    const auto [code, err] = run_cli("audit-docs --corpus " + data + "/groups_3.jsonl --out " + out +
                                         " --scorer embedding:m@http://127.0.0.1:1 --max-retries 0",
                                     dir);
    EXPECT_EQ(code, 4) << err;
  }
}

TEST(Cli, ParseCommandLine) {
  const char* argv[] = {"style-audit", "audit-docs",  "--corpus", "c.jsonl",     "--out",
                        "o.csv",       "--format",    "csv",      "--scorer",    "bm25:k1=1.2,b=0.5,mock:rank",
                        "--scorer",    "mock:const",  "--query-style", "style_3", "--parallelism", "3",
                        "--cache-max-bytes", "1000",  "--plot-dir", "plots"};
  const auto c = parse_command_line(static_cast<int>(std::size(argv)), argv);
  EXPECT_EQ(c.command, Command::audit_docs);
  EXPECT_EQ(c.format, OutputFormat::csv);
  EXPECT_EQ(c.scorer_specs.size(), 2u);
  EXPECT_EQ(detail::parse_scorers(c).size(), 3u);
  EXPECT_EQ(c.query_style, StyleId::Style3);
  EXPECT_EQ(c.parallelism, 3);
  EXPECT_EQ(c.cache_max_bytes, std::optional<std::uintmax_t>(1000));
  EXPECT_EQ(c.plot_dir, fs::path("plots"));

  const char* gen[] = {"style-audit", "generate-styles", "--corpus", "p.jsonl", "--out", "g.jsonl",
                       "--chat-endpoint", "http://x", "--temperature", "0.2", "--rewrite-queries"};
  const auto g = parse_command_line(static_cast<int>(std::size(gen)), gen);
  EXPECT_EQ(g.command, Command::generate_styles);
  EXPECT_DOUBLE_EQ(g.generation.temperature, 0.2);
  EXPECT_TRUE(g.rewrite_queries);
  EXPECT_FALSE(g.cache_max_bytes.has_value());
}
