#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include <httplib.h>

#include "provox/service.hpp"
#include "support.hpp"

namespace provox {
namespace {

using Json = nlohmann::json;

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServiceConfig config;
    config.scene = testing::lunchbag();
    service_ = std::make_unique<Service>(std::move(config));
    port_ = service_->start("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(10);
  }

  void TearDown() override { service_->stop(); }

  std::pair<int, Json> post(const std::string& path, const Json& body = Json::object()) {
    auto res = client_->Post(path, body.dump(), "application/json");
    if (!res) return {0, Json()};
    return {res->status, Json::parse(res->body, nullptr, false)};
  }
  std::pair<int, Json> put(const std::string& path, const Json& body) {
    auto res = client_->Put(path, body.dump(), "application/json");
    return {res->status, Json::parse(res->body, nullptr, false)};
  }
  std::pair<int, Json> del(const std::string& path) {
    auto res = client_->Delete(path);
    return {res->status, Json::parse(res->body, nullptr, false)};
  }
  std::pair<int, Json> get(const std::string& path) {
    auto res = client_->Get(path);
    return {res->status, Json::parse(res->body, nullptr, false)};
  }

  std::string create(Json body) {
    auto [status, json] = post("/sessions", body);
    EXPECT_EQ(status, 201) << json.dump();
    return "/sessions/" + json.value("session_id", std::string("missing"));
  }

  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

const Json kPackForm = {{"name", "pack"},
                        {"description", "packing food for lunch"},
                        {"params", {"food"}},
                        {"steps", {"pickup($food)", "goto(LUNCH_BAG)", "release()"}}};

TEST_F(ServiceTest, Health) {
  auto [status, body] = get("/health");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body.at("ok"), true);
}

TEST_F(ServiceTest, HappyPath) {
  const auto s = create({{"mode", "live"}, {"context", {{"version", 1}, {"goal", "put the skittles in the lunch bag"}, {"functions", Json::array()}}}});
  auto [status, body] = post(s + "/utterance", {{"text", "put the skittles in the bag"}});
  ASSERT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body.at("plan"), "pickup(SKITTLES); goto(LUNCH_BAG); release()");
  EXPECT_EQ(body.at("state"), "AwaitingConfirmation");

  std::tie(status, body) = post(s + "/confirm");
  ASSERT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body.at("world").at("objects").at("SKITTLES").at("state"), "inside");
  EXPECT_EQ(body.at("world").at("objects").at("SKITTLES").at("container"), "LUNCH_BAG");
  EXPECT_EQ(body.at("state"), "Done");

  std::tie(status, body) = get(s);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body.at("history").size(), 1u);
  EXPECT_EQ(body.at("session_id"), s.substr(s.rfind('/') + 1));

  std::tie(status, body) = get(s + "/metrics");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body.at("user_initiated"), 1);
}

TEST_F(ServiceTest, MetaPromptingFlow) {
  const auto s = create({{"scene", testing::source_path("tests/fixtures/cereal_scene.json").string()}});
  auto [status, body] = put(s + "/goal", {{"text", "pack my lunch"}});
  EXPECT_EQ(status, 200);
  std::tie(status, body) = post(s + "/teach", {{"form", kPackForm}});
  ASSERT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body.at("function").at("name"), "pack");

  std::tie(status, body) = get(s);
  bool listed = false;
  for (const auto& f : body.at("api")) listed = listed || f.at("name") == "pack";
  EXPECT_TRUE(listed);

  std::tie(status, body) = post(s + "/test-utterance", {{"text", "Put the cereal bar in my lunch."}});
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body.at("plan"), "pack(CEREAL_BAR)");

  std::tie(status, body) = post(s + "/teach", {{"form", kPackForm}});
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body.at("error"), "DuplicateName");

  auto edited = kPackForm;
  edited["steps"] = {"pickup($food)", "goto(LUNCH_BAG)", "open_gripper()"};
  std::tie(status, body) = put(s + "/functions/pack", {{"form", edited}});
  EXPECT_EQ(status, 200) << body.dump();

  auto export_res = client_->Get(s + "/export");
  ASSERT_TRUE(export_res);
  EXPECT_EQ(Json::parse(export_res->body).at("functions").size(), 1u);

  std::tie(status, body) = post(s + "/confirm");
  EXPECT_EQ(status, 409);
  EXPECT_EQ(body.at("error"), "WrongState");

  std::tie(status, body) = post(s + "/mode", {{"live", true}});
  EXPECT_EQ(status, 200);
  std::tie(status, body) = post(s + "/mode", {{"live", true}});
  EXPECT_EQ(status, 409);
  std::tie(status, body) = put(s + "/goal", {{"text", "x"}});
  EXPECT_EQ(status, 409);

  std::tie(status, body) = del(s + "/functions/pack");
  EXPECT_EQ(status, 409);
}

TEST_F(ServiceTest, DeleteFunction) {
  const auto s = create(Json::object());
  post(s + "/teach", {{"form", kPackForm}});
  auto [status, body] = del(s + "/functions/pack");
  EXPECT_EQ(status, 200);
  std::tie(status, body) = del(s + "/functions/pack");
  EXPECT_EQ(status, 404);
  EXPECT_EQ(body.at("error"), "NotFound");
}

TEST_F(ServiceTest, ErrorMapping) {
  auto [status, body] = get("/sessions/s999");
  EXPECT_EQ(status, 404);
  EXPECT_EQ(body.at("error"), "SessionNotFound");
  EXPECT_EQ(body.at("subjects"), Json::array({"s999"}));

  std::tie(status, body) = get("/nowhere");
  EXPECT_EQ(status, 404);

  std::tie(status, body) = post("/sessions", {{"mode", "sideways"}});
  EXPECT_EQ(status, 422);

  const auto s = create({{"mode", "live"}});
  auto raw = client_->Post(s + "/utterance", "{not json", "application/json");
  EXPECT_EQ(raw->status, 400);
  std::tie(status, body) = post(s + "/utterance", {{"words", "hi"}});
  EXPECT_EQ(status, 400);
  std::tie(status, body) = post(s + "/wait", {{"seconds", "soon"}});
  EXPECT_EQ(status, 400);
  std::tie(status, body) = post(s + "/teach", Json::object());
  EXPECT_EQ(status, 400);
  std::tie(status, body) = post(s + "/reject");
  EXPECT_EQ(status, 409);

  auto bad_offset = client_->Get(s + "/events?since=abc");
  EXPECT_EQ(bad_offset->status, 400);
}

TEST_F(ServiceTest, UnreachableRemoteBackendIs502) {
  const auto s = create({{"mode", "live"},
                         {"backend", {{"kind", "remote"}, {"endpoint", "http://127.0.0.1:1/v1/chat/completions"}, {"model", "m"}}}});
  auto [status, body] = post(s + "/utterance", {{"text", "put the skittles in the bag"}});
  EXPECT_EQ(status, 200);
  EXPECT_NE(body.at("message").get<std::string>().find("BackendUnavailable"), std::string::npos);

  const auto m = create({{"backend", {{"kind", "remote"}, {"endpoint", "http://127.0.0.1:1/v1/chat/completions"}, {"model", "m"}}}});
  std::tie(status, body) = post(m + "/test-utterance", {{"text", "hi"}});
  EXPECT_EQ(status, 502);
}

// Racing confirm and reject on one pending plan: exactly one wins.
TEST_F(ServiceTest, ConcurrentGateDecisions) {
  for (int round = 0; round < 5; ++round) {
    const auto s = create({{"mode", "live"}, {"proactive", false}});
    ASSERT_EQ(post(s + "/utterance", {{"text", "put the skittles in the bag"}}).first, 200);
    std::atomic<int> ok{0};
    std::atomic<int> conflict{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&, i] {
        httplib::Client c("127.0.0.1", port_);
        auto res = c.Post(s + (i % 2 ? "/confirm" : "/reject"), "{}", "application/json");
        if (res && res->status == 200) ++ok;
        if (res && res->status == 409) ++conflict;
      });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(ok.load(), 1);
    EXPECT_EQ(conflict.load(), 7);
    auto [status, body] = get(s);
    EXPECT_EQ(body.at("history").size(), 1u);
    EXPECT_EQ(body.at("state"), "Idle");
  }
}

TEST_F(ServiceTest, EventStream) {
  const Json context = {{"version", 1},
                        {"goal", "pack the Skittles and the gummies in the lunch bag"},
                        {"functions", Json::array()}};
  const auto s = create({{"mode", "live"}, {"context", context}});
  post(s + "/utterance", {{"text", "put the skittles in the bag"}});
  post(s + "/confirm");

  std::string stream;
  httplib::Client c("127.0.0.1", port_);
  c.set_read_timeout(5);
  c.Get(s + "/events?since=0", [&](const char* data, std::size_t n) {
    stream.append(data, n);
    return stream.find("event: suggestion") == std::string::npos;
  });
  EXPECT_NE(stream.find("id: 0\nevent: state_changed\ndata: "), std::string::npos) << stream;
  EXPECT_NE(stream.find("event: execution_event"), std::string::npos);
  const auto suggestion = stream.find("event: suggestion\ndata: ");
  ASSERT_NE(suggestion, std::string::npos);
  const auto line_end = stream.find('\n', suggestion + 24);
  const auto data = Json::parse(stream.substr(suggestion + 24, line_end - suggestion - 24));
  EXPECT_EQ(data.at("payload").at("plan"), "pickup(GUMMIES); goto(LUNCH_BAG); release()");
  EXPECT_EQ(data.at("payload").at("gloss"), "Should I pickup the gummies and goto the lunch bag and release next?");

  // Resuming after the last seen id yields only later events.
  const auto seq = data.at("seq").get<std::size_t>();
  std::string resumed;
  std::thread later([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    httplib::Client(("127.0.0.1"), port_).Post(s + "/reject", "{}", "application/json");
  });
  httplib::Headers headers = {{"Last-Event-ID", std::to_string(seq)}};
  c.Get(s + "/events", headers, [&](const char* data_in, std::size_t n) {
    resumed.append(data_in, n);
    return resumed.find("event: state_changed") == std::string::npos;
  });
  later.join();
  EXPECT_EQ(resumed.find("id: " + std::to_string(seq) + "\n"), std::string::npos);
  EXPECT_NE(resumed.find("id: " + std::to_string(seq + 1) + "\n"), std::string::npos) << resumed;
}

}  // namespace
}  // namespace provox
