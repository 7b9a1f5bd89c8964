#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <thread>

#include "dreamer/worldmodel.hpp"
#include "test_util.hpp"

using namespace dreamer;

namespace {

const std::filesystem::path kFixtures = DREAMER_FIXTURES;

std::vector<std::filesystem::path> all_app_files() {
  std::vector<std::filesystem::path> out;
  for (const auto* dir : {"apps", "suites/greedy_trap/apps"})
    for (const auto& e : std::filesystem::directory_iterator(kFixtures / dir))
      if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

const char* kThreeLines =
    "label=image;text=\"Home\";bbox=[35,175,347,233]\n"
    "label=text;text=\"Totals\";bbox=[50,343,285,467]\n"
    "label=text;text=\"INCOME\";bbox=[96,519,239,624]\n";

std::string completion(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

// Local chat-completion stub; the handler sees the request number.
class StubServer {
 public:
  using Handler = std::function<void(int, const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handler_(requests_++, req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  RemoteModelConfig config() const {
    RemoteModelConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    cfg.timeout_seconds = 5.0;
    cfg.max_retries = 2;
    cfg.backoff_base_ms = 1;
    cfg.max_backoff_ms = 10;
    return cfg;
  }
  int requests() const { return requests_.load(); }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
};

RemoteErrc remote_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const RemoteError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no RemoteError";
  return RemoteErrc::config;
}

const SketchState kState{{Element("button", "Settings", BBox(0, 0, 100, 100))}};

}  // namespace

TEST(Oracle, MatchesSimulatorOnEveryReachableStateAndProbe) {
  const auto files = all_app_files();
  ASSERT_GE(files.size(), 18u);
  std::size_t checked = 0;
  for (const auto& f : files) {
    const auto spec = sim::load_app(f);
    OracleWorldModel wm(spec);
    for (const auto& env : sim::reachable_states(spec, sim::reset(spec))) {
      const auto current = sim::render_sketch(env, spec);
      for (const auto& a : sim::probe_actions(env, spec)) {
        const auto truth = sim::step(env, spec, a).sketch;
        EXPECT_EQ(oracle_predict(spec, env, a).state, truth) << f << " " << action_str(a);
        wm.ground(env);
        EXPECT_EQ(wm.predict("goal", current, a), truth) << f << " " << action_str(a);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Oracle, WaitKeepsState) {
  const auto spec = sim::load_app(kFixtures / "apps/settings.json");
  const auto env = sim::reset(spec);
  const auto out = oracle_predict(spec, env, Action::wait());
  EXPECT_EQ(out.state, sim::render_sketch(env, spec));
  EXPECT_TRUE(out.mapped);
}

TEST(Oracle, UnmappedActionIsFlagged) {
  const auto spec = sim::load_app(kFixtures / "apps/settings.json");
  const auto env = sim::reset(spec);
  const auto out = oracle_predict(spec, env, Action::click(5, 5));
  EXPECT_FALSE(out.mapped);
  EXPECT_EQ(out.state, sim::render_sketch(env, spec));
  OracleWorldModel wm(spec);
  wm.ground(env);
  wm.predict("g", out.state, Action::click(5, 5));
  EXPECT_EQ(wm.unmapped_count(), 1u);
}

TEST(Oracle, ScrollPredictionShowsLaterItems) {
  const auto spec = sim::load_app(kFixtures / "apps/longlist.json");
  const auto out = oracle_predict(spec, sim::reset(spec), Action::scroll(ScrollDirection::down, 540, 1000));
  ASSERT_EQ(out.state.size(), 7u);
  EXPECT_EQ(out.state.elements[1].text(), "Item 7");
  EXPECT_EQ(out.state.elements[6].text(), "Item 12");
}

TEST(Oracle, UnknownSketchIsRejected) {
  const auto spec = sim::load_app(kFixtures / "apps/settings.json");
  OracleWorldModel wm(spec);
  wm.ground(sim::reset(spec));
  const SketchState alien{{Element("text", "Nothing alike", BBox(0, 2000, 10, 2010))}};
  EXPECT_THROW(wm.predict("g", alien, Action::wait()), sim::SimError);
}

TEST(Oracle, ResolvesNearMissSketches) {
  const auto spec = sim::load_app(kFixtures / "apps/settings.json");
  OracleWorldModel wm(spec);
  const auto env = sim::reset(spec);
  wm.ground(env);
  NoiseConfig noise;
  noise.bbox_jitter_px = 5;
  const auto shaken = perturb(sim::render_sketch(env, spec), noise, "k");
  EXPECT_EQ(wm.resolve(shaken), env);
}

TEST(Noise, DisabledIsIdentity) {
  const auto spec = sim::load_app(kFixtures / "apps/settings.json");
  OracleWorldModel oracle(spec);
  NoisyWorldModel noisy(oracle, NoiseConfig{});
  const auto env = sim::reset(spec);
  oracle.ground(env);
  for (const auto& a : sim::probe_actions(env, spec)) {
    oracle.ground(env);
    const auto clean = oracle.predict("g", sim::render_sketch(env, spec), a);
    oracle.ground(env);
    EXPECT_EQ(noisy.predict("g", sim::render_sketch(env, spec), a), clean);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto s = testutil::random_state(rng, 0, 8);
    EXPECT_EQ(perturb(s, NoiseConfig{}, "x"), s);
  }
}

TEST(Noise, SeededDeterminism) {
  std::mt19937_64 rng(5);
  NoiseConfig n;
  n.bbox_jitter_px = 20;
  n.element_drop_prob = 0.3;
  n.element_dup_prob = 0.2;
  n.text_typo_prob = 0.3;
  n.seed = 77;
  std::size_t differs_by_seed = 0;
  for (int i = 0; i < 100; ++i) {
    auto s = testutil::random_state(rng, 3, 8);
    s.screen_width = 3000;
    s.screen_height = 3000;
    EXPECT_EQ(perturb(s, n, "key"), perturb(s, n, "key"));
    NoiseConfig other = n;
    other.seed = 78;
    if (!(perturb(s, other, "key") == perturb(s, n, "key"))) ++differs_by_seed;
  }
  EXPECT_GT(differs_by_seed, 90u);
}

TEST(Noise, PerturbationsStayInBounds) {
  std::mt19937_64 rng(6);
  NoiseConfig n;
  n.bbox_jitter_px = 20;
  n.seed = 1;
  for (int i = 0; i < 200; ++i) {
    auto s = testutil::random_state(rng, 1, 6);
    s.screen_width = 2400;
    s.screen_height = 2400;
    const auto p = perturb(s, n, std::to_string(i));
    ASSERT_EQ(p.size(), s.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_TRUE(BBox(0, 0, 2400, 2400).contains(p.elements[k].bbox()));
      EXPECT_EQ(p.elements[k].text(), s.elements[k].text());
      EXPECT_LE(std::abs(p.elements[k].bbox().x1() - s.elements[k].bbox().x1()), 40);
    }
  }
  NoiseConfig drop_all;
  drop_all.element_drop_prob = 1.0;
  EXPECT_TRUE(perturb(kState, drop_all, "k").empty());
  NoiseConfig bad;
  bad.element_dup_prob = 1.5;
  EXPECT_THROW(perturb(kState, bad, "k"), std::invalid_argument);
}

TEST(Noise, GroundingEpochChangesTheStream) {
  const auto spec = sim::load_app(kFixtures / "apps/settings.json");
  OracleWorldModel oracle(spec);
  NoiseConfig n;
  n.element_drop_prob = 0.5;
  n.bbox_jitter_px = 20;
  n.seed = 9;
  NoisyWorldModel noisy(oracle, n);
  auto env = sim::reset(spec);
  const auto s = sim::render_sketch(env, spec);
  std::set<std::string> outcomes;
  for (std::size_t epoch = 0; epoch < 8; ++epoch) {
    env.steps = epoch;
    noisy.ground(env);
    const auto a = noisy.predict("g", s, Action::wait());
    EXPECT_EQ(noisy.predict("g", s, Action::wait()), a);
    outcomes.insert(serialize_state(a));
  }
  EXPECT_GT(outcomes.size(), 1u);
}

TEST(Prompt, WorldModelPromptIsDeterministicAndComplete) {
  const auto p = render_wm_prompt("Open Settings", kState, Action::click(50, 50));
  EXPECT_EQ(p, render_wm_prompt("Open Settings", kState, Action::click(50, 50)));
  EXPECT_NE(p.find("Task: Open Settings"), std::string::npos);
  EXPECT_NE(p.find(serialize_state(kState)), std::string::npos);
  EXPECT_NE(p.find(R"({"action":"click","coordinate":[50,50]})"), std::string::npos);
  EXPECT_NE(p.find("[Predicted Screen State (Text Description)]"), std::string::npos);
  for (const auto* key : {"{GOAL}", "{CURRENT_STATE}", "{ACTION}"}) EXPECT_EQ(p.find(key), std::string::npos);
  EXPECT_EQ(prompts::kPromptVersion, "v1");
}

TEST(Prompt, FillLeavesUnknownBracesAndDoesNotRescanValues) {
  EXPECT_EQ(prompts::fill("a {X} {\"k\": 1} {Y}", {{"X", "{Y}"}}), "a {Y} {\"k\": 1} {Y}");
}

TEST(ModelReply, ParsesTheThreeLineBlock) {
  const auto r = parse_model_reply(kThreeLines);
  EXPECT_EQ(r.state.size(), 3u);
  EXPECT_EQ(r.malformed_lines, 0u);
}

TEST(ModelReply, SkipsGarbageLines) {
  const auto r = parse_model_reply(
      "label=text;text=\"a\";bbox=[0,0,1,1]\nthis is not an element\nlabel=icon;text=\"b\";bbox=[1,1,2,2]\n");
  EXPECT_EQ(r.state.size(), 2u);
  EXPECT_EQ(r.malformed_lines, 1u);
}

TEST(ModelReply, NoValidLineIsParseFailure) {
  EXPECT_EQ(remote_error([] { parse_model_reply("I cannot help with that."); }), RemoteErrc::parse_failure);
  EXPECT_EQ(remote_error([] { parse_model_reply(""); }), RemoteErrc::parse_failure);
}

TEST(ModelReply, ArbitraryBytesGivePartialStateOrParseFailure) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 1000; ++i) {
    std::string bytes;
    for (int k = testutil::uniform_int(rng, 0, 300); k > 0; --k)
      bytes.push_back(static_cast<char>(testutil::uniform_int(rng, 0, 255)));
    if (i % 3 == 0) bytes += "\nlabel=text;text=\"x\";bbox=[0,0,1,1]\n";
    try {
      const auto r = parse_model_reply(bytes);
      EXPECT_FALSE(r.state.empty());
    } catch (const RemoteError& e) {
      EXPECT_EQ(e.code(), RemoteErrc::parse_failure);
    }
  }
}

TEST(ChatClient, ExtractsContent) {
  EXPECT_EQ(ChatClient::extract_content(completion("hi")), "hi");
  EXPECT_EQ(ChatClient::extract_content(R"({"choices":[{"text":"legacy"}]})"), "legacy");
  EXPECT_EQ(remote_error([] { ChatClient::extract_content("not json"); }), RemoteErrc::parse_failure);
  EXPECT_EQ(remote_error([] { ChatClient::extract_content(R"({"choices":[]})"); }), RemoteErrc::parse_failure);
}

TEST(ChatClient, RejectsBadConfig) {
  RemoteModelConfig cfg;
  cfg.timeout_seconds = 0;
  EXPECT_EQ(remote_error([&] { ChatClient c(cfg); }), RemoteErrc::config);
  cfg = RemoteModelConfig{};
  cfg.endpoint = "localhost:8000";
  EXPECT_EQ(remote_error([&] { ChatClient c(cfg); }), RemoteErrc::config);
}

TEST(RemoteWorldModel, ThreeLineReply) {
  json seen;
  StubServer server([&](int, const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(completion(kThreeLines), "application/json");
  });
  auto cfg = server.config();
  cfg.model = "stub-model";
  cfg.temperature = 0.5;
  RemoteWorldModel wm(cfg);
  const auto out = wm.predict("Open Settings", kState, Action::click(50, 50));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out.elements[2].text(), "INCOME");
  EXPECT_EQ(seen["model"], "stub-model");
  EXPECT_EQ(seen["temperature"], 0.5);
  ASSERT_EQ(seen["messages"].size(), 1u);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], render_wm_prompt("Open Settings", kState, Action::click(50, 50)));
}

TEST(RemoteWorldModel, CountsMalformedLines) {
  StubServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("label=text;text=\"a\";bbox=[0,0,1,1]\ngarbage\nlabel=text;text=\"b\";bbox=[0,0,2,2]"),
                    "application/json");
  });
  RemoteWorldModel wm(server.config());
  EXPECT_EQ(wm.predict("g", kState, Action::wait()).size(), 2u);
  EXPECT_EQ(wm.malformed_lines(), 1u);
}

TEST(RemoteWorldModel, RetriesAfterRateLimit) {
  StubServer server([](int n, const httplib::Request&, httplib::Response& res) {
    if (n == 0) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      return;
    }
    res.set_content(completion(kThreeLines), "application/json");
  });
  RemoteWorldModel wm(server.config());
  EXPECT_EQ(wm.predict("g", kState, Action::wait()).size(), 3u);
  EXPECT_EQ(server.requests(), 2);
}

TEST(RemoteWorldModel, AuthErrorIsNotRetried) {
  StubServer server([](int, const httplib::Request&, httplib::Response& res) { res.status = 401; });
  RemoteWorldModel wm(server.config());
  EXPECT_EQ(remote_error([&] { wm.predict("g", kState, Action::wait()); }), RemoteErrc::auth);
  EXPECT_EQ(server.requests(), 1);
}

TEST(RemoteWorldModel, ServerErrorsExhaustRetries) {
  StubServer server([](int, const httplib::Request&, httplib::Response& res) { res.status = 503; });
  RemoteWorldModel wm(server.config());
  EXPECT_EQ(remote_error([&] { wm.predict("g", kState, Action::wait()); }), RemoteErrc::network);
  EXPECT_EQ(server.requests(), 3);
}

TEST(RemoteWorldModel, UnparseableReplyIsParseFailure) {
  StubServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("sorry"), "application/json");
  });
  RemoteWorldModel wm(server.config());
  EXPECT_EQ(remote_error([&] { wm.predict("g", kState, Action::wait()); }), RemoteErrc::parse_failure);
}

TEST(RemoteWorldModel, SendsBearerTokenFromNamedVariable) {
  std::string auth;
  StubServer server([&](int, const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    res.set_content(completion(kThreeLines), "application/json");
  });
  auto cfg = server.config();
  cfg.api_key_env = "DREAMER_TEST_KEY";
  ::setenv("DREAMER_TEST_KEY", "secret", 1);
  RemoteWorldModel(cfg).predict("g", kState, Action::wait());
  ::unsetenv("DREAMER_TEST_KEY");
  EXPECT_EQ(auth, "Bearer secret");
}

TEST(RemoteWorldModel, UnreachableEndpointIsNetworkError) {
  RemoteModelConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.max_retries = 1;
  cfg.backoff_base_ms = 1;
  cfg.timeout_seconds = 2;
  RemoteWorldModel wm(cfg);
  EXPECT_EQ(remote_error([&] { wm.predict("g", kState, Action::wait()); }), RemoteErrc::network);
}
