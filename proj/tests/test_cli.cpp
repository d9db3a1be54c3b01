#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "qinv/cli.hpp"

using namespace qinv;

namespace {

std::string corpus(const std::string& name) { return std::string(QINV_CORPUS_DIR) + "/" + name; }

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json last_json_line(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '{') last = line;
  return nlohmann::json::parse(last);
}

std::string temp_path(const char* tag) {
  return std::string("/tmp/qinv-test-") + tag + "-" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("toy consensus in universal mode") {
  auto r = cli({corpus("toy_consensus_forall.fol"), "--mode", "universal", "--sequential"});
  CHECK(r.code == 0);
  CHECK(r.out.find("(forall") != std::string::npos);
  auto stats = last_json_line(r.out);
  CHECK(stats["result"] == "invariant");
  CHECK(stats.contains("ig_queries"));
  CHECK(stats.contains("lemmas"));
  CHECK(stats.contains("wall_seconds"));
}

TEST_CASE("unsafe mutant exits 1") {
  auto r = cli({corpus("lockserv_unsafe.fol"), "--mode", "universal", "--sequential"});
  CHECK(r.code == 1);
  CHECK(r.out.find("; state 0") != std::string::npos);
  CHECK(last_json_line(r.out)["result"] == "unsafe");
}

TEST_CASE("EPR mode without the needed edges exits 3") {
  auto r = cli({corpus("toy_consensus_forall.fol"), "--mode", "epr"});
  CHECK(r.code == 3);
  CHECK(r.err.find("quorum->node") != std::string::npos);
}

TEST_CASE("input errors exit 3") {
  CHECK(cli({"/nonexistent/file.fol"}).code == 3);
  CHECK(cli({corpus("lockserv.fol"), "--mode", "modal"}).code == 3);
  CHECK(cli({corpus("lockserv.fol"), "--no-such-flag"}).code == 3);
  CHECK(cli({corpus("lockserv.fol"), "--bound", "widget=2"}).code == 3);
  auto r = cli({corpus("lockserv.fol"), "--sequential", "--threads", "4"});
  CHECK(r.code == 3);
  CHECK(r.err.find("conflicts") != std::string::npos);
  CHECK(cli({}).code == 3);
}

TEST_CASE("verify-only") {
  auto ok = cli({corpus("ring_id.fol"), "--verify-only", corpus("ring_id.inv")});
  CHECK(ok.code == 0);
  CHECK(last_json_line(ok.out)["result"] == "valid");
  // safety alone is not inductive
  std::string weak = temp_path("weak");
  {
    std::ofstream f(weak);
    f << "(forall ((n1 node) (n2 node)) (=> (and (holds_lock n1) (holds_lock n2)) (= n1 n2)))\n";
  }
  auto bad = cli({corpus("lockserv.fol"), "--verify-only", weak});
  CHECK(bad.code == 1);
  CHECK(last_json_line(bad.out)["result"] == "invalid");
  std::remove(weak.c_str());
}

TEST_CASE("timeout exits 2") {
  auto r = cli({corpus("ring_id.fol"), "--mode", "universal", "--sequential", "--timeout", "0.05"});
  CHECK(r.code == 2);
  CHECK(last_json_line(r.out)["result"] == "timeout");
}

TEST_CASE("sequential runs with one seed give identical logs") {
  std::string a = temp_path("log-a"), b = temp_path("log-b");
  auto r1 = cli({corpus("lockserv.fol"), "--mode", "universal", "--sequential", "--seed", "11", "--log", a});
  auto r2 = cli({corpus("lockserv.fol"), "--mode", "universal", "--sequential", "--seed", "11", "--log", b});
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);
  std::string la = slurp(a), lb = slurp(b);
  CHECK(!la.empty());
  CHECK(la == lb);
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("bounds per sort") {
  auto r = cli({corpus("client_server_ae.fol"), "--mode", "epr", "--sequential", "--bound",
                "client=2,request=2,response=2"});
  CHECK(r.code == 0);
  CHECK(last_json_line(r.out)["alternation_lemmas"].get<int>() >= 1);
}
