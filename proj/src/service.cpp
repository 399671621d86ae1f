#include "provox/service.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "provox/session.hpp"

namespace provox {

namespace {

using Json = nlohmann::json;

struct Entry {
  std::mutex mu;  // serializes every session operation
  std::unique_ptr<Session> session;

  std::mutex log_mu;
  std::condition_variable log_cv;
  std::vector<Json> log;

  void record(const SessionEvent& event) {
    {
      std::lock_guard lock(log_mu);
      log.push_back({{"seq", log.size()}, {"type", event.type}, {"payload", event.payload}});
    }
    log_cv.notify_all();
  }
};

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status_for(e.code()), {{"error", e.code()}, {"message", e.what()}, {"subjects", e.subjects()}});
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  auto json = Json::parse(req.body, nullptr, false);
  if (json.is_discarded() || !json.is_object()) throw Error("BadRequest", "the request body must be a JSON object");
  return json;
}

std::string string_field(const Json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string())
    throw Error("BadRequest", std::string("missing string field '") + key + "'");
  return body.at(key).get<std::string>();
}

TeachExample example_from_json(const Json& j, const Api& api, const Catalog& objects) {
  if (!j.is_object()) throw Error("BadRequest", "example must be an object");
  TeachExample example;
  example.trigger_utterance = string_field(j, "utterance");
  const auto& plan = j.contains("plan") ? j.at("plan") : j.at("decomposition");
  if (!plan.is_string()) throw Error("BadRequest", "example plan must be a string");
  example.decomposition = parse_plan(plan.get<std::string>(), api, objects);
  return example;
}

}  // namespace

int http_status_for(const std::string& code) {
  if (code == "SessionNotFound" || code == "NotFound") return 404;
  if (code == "WrongState") return 409;
  if (code == "BadRequest") return 400;
  if (code == "BackendUnavailable") return 502;
  return 422;
}

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Entry>> sessions;
  std::size_t next_id = 1;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    // Event streams hold a worker each for as long as they stay open.
    server.new_task_queue = [] { return new httplib::ThreadPool(64); };
    routes();
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw Error("SessionNotFound", "no session '" + id + "'", {id});
    return it->second;
  }

  // Runs `fn` under the session lock and reports library errors as JSON.
  template <typename Fn>
  void with_session(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    try {
      auto entry = find(req.matches[1]);
      std::lock_guard lock(entry->mu);
      fn(*entry->session, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const Json::exception& e) {
      send_error(res, Error("BadRequest", e.what()));
    }
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    try {
      const Json body = body_of(req);
      SceneSpec scene = config.scene;
      if (body.contains("scene")) {
        const auto& s = body.at("scene");
        scene = s.is_string() ? load_scene_file(s.get<std::string>()) : scene_from_json(s);
      }
      BackendConfig backend = body.contains("backend") ? BackendConfig::from_json(body.at("backend")) : config.backend;
      const Mode mode = mode_from_string(body.value("mode", "meta-prompting"));
      SessionOptions options;
      options.proactive = body.value("proactive", config.proactive);
      options.auto_confirm_user_plans = body.value("auto_confirm_user_plans", false);
      UserContext context;
      const Catalog catalog = scene.catalog();
      if (body.contains("context") && !body.at("context").is_null())
        context = context_from_json(body.at("context"), &catalog);

      auto entry = std::make_shared<Entry>();
      entry->session = std::make_unique<Session>(std::move(scene), mode, make_backend(backend, config.transport),
                                                 make_namer(backend, config.transport), options, std::move(context));
      entry->session->set_observer([raw = entry.get()](const SessionEvent& e) { raw->record(e); });
      std::string id;
      {
        std::lock_guard lock(sessions_mu);
        id = "s" + std::to_string(next_id++);
        sessions.emplace(id, entry);
      }
      send_json(res, 201, {{"session_id", id}});
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const Json::exception& e) {
      send_error(res, Error("BadRequest", e.what()));
    }
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Entry> entry;
    try {
      entry = find(req.matches[1]);
    } catch (const Error& e) {
      send_error(res, e);
      return;
    }
    std::size_t cursor = 0;
    try {
      if (req.has_param("since")) cursor = std::stoul(req.get_param_value("since"));
      if (req.has_header("Last-Event-ID")) cursor = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
    } catch (const std::exception&) {
      send_error(res, Error("BadRequest", "event offsets must be non-negative integers"));
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, entry, cursor](std::size_t, httplib::DataSink& sink) mutable {
      std::vector<Json> batch;
      {
        std::unique_lock lock(entry->log_mu);
        entry->log_cv.wait_for(lock, std::chrono::milliseconds(250),
                               [&] { return stopping.load() || entry->log.size() > cursor; });
        for (; cursor < entry->log.size(); ++cursor) batch.push_back(entry->log[cursor]);
      }
      if (stopping.load()) {
        sink.done();
        return false;
      }
      std::string chunk;
      for (const auto& e : batch) {
        chunk += "id: " + std::to_string(e.at("seq").get<std::size_t>()) + "\nevent: " +
                 e.at("type").get<std::string>() + "\ndata: " + e.dump() + "\n\n";
      }
      if (chunk.empty()) chunk = ": keep-alive\n\n";
      return sink.write(chunk.data(), chunk.size());
    });
  }

  void routes() {
    const std::string id = R"(/sessions/([A-Za-z0-9_-]+))";

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) { create(req, res); });

    server.Get(id, [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        Json snap = s.snapshot();
        snap["session_id"] = req.matches[1];
        send_json(r, 200, snap);
      });
    });

    server.Post(id + "/utterance", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        const auto result = s.handle_utterance(string_field(body_of(req), "text"));
        send_json(r, 200,
                  {{"plan", result.plan ? Json(render_plan(*result.plan)) : Json(nullptr)},
                   {"message", result.message ? Json(*result.message) : Json(nullptr)},
                   {"state", std::string(to_string(s.state()))},
                   {"pending", s.pending() ? pending_to_json(*s.pending()) : Json(nullptr)}});
      });
    });

    for (const char* action : {"/confirm", "/reject"}) {
      const bool is_confirm = std::string(action) == "/confirm";
      server.Post(id + action, [this, is_confirm](const httplib::Request& req, httplib::Response& res) {
        with_session(req, res, [&](Session& s, httplib::Response& r) {
          if (is_confirm)
            s.confirm();
          else
            s.reject();
          send_json(r, 200,
                    {{"state", std::string(to_string(s.state()))},
                     {"step", step_to_json(s.history().back())},
                     {"pending", s.pending() ? pending_to_json(*s.pending()) : Json(nullptr)},
                     {"world", world_to_json(s.world())}});
        });
      });
    }

    server.Post(id + "/request-suggestion", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        s.request_suggestion();
        send_json(r, 200,
                  {{"state", std::string(to_string(s.state()))},
                   {"pending", s.pending() ? pending_to_json(*s.pending()) : Json(nullptr)}});
      });
    });

    server.Post(id + "/teach", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        const Json body = body_of(req);
        FunctionDef def;
        if (body.contains("form"))
          def = s.meta_teach(teach_form_from_json(body.at("form")));
        else if (body.contains("example"))
          def = s.teach_live(example_from_json(body.at("example"), s.api(), s.objects()));
        else
          throw Error("BadRequest", "teach needs a 'form' or an 'example'");
        send_json(r, 200, {{"function", function_to_json(def)}});
      });
    });

    server.Put(id + R"(/functions/([A-Za-z_][A-Za-z0-9_]*))", [this](const httplib::Request& req,
                                                                    httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        const Json body = body_of(req);
        const FunctionDef def = s.meta_edit(req.matches[2], teach_form_from_json(body.contains("form") ? body.at("form") : body));
        send_json(r, 200, {{"function", function_to_json(def)}});
      });
    });

    server.Delete(id + R"(/functions/([A-Za-z_][A-Za-z0-9_]*))", [this](const httplib::Request& req,
                                                                       httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        s.meta_delete(req.matches[2]);
        send_json(r, 200, {{"deleted", req.matches[2]}});
      });
    });

    server.Put(id + "/goal", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        s.meta_set_goal(string_field(body_of(req), "text"));
        send_json(r, 200, {{"goal", s.goal()}});
      });
    });

    server.Post(id + "/test-utterance", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        send_json(r, 200, response_to_json(s.meta_test_utterance(string_field(body_of(req), "text"))));
      });
    });

    server.Post(id + "/mode", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        const Json body = body_of(req);
        if (!body.value("live", false)) throw Error("WrongState", "sessions only move from meta-prompting to live");
        s.enter_live();
        send_json(r, 200, {{"mode", std::string(to_string(s.mode()))}});
      });
    });

    server.Post(id + "/wait", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        const Json body = body_of(req);
        if (!body.contains("seconds") || !body.at("seconds").is_number())
          throw Error("BadRequest", "wait needs a numeric 'seconds'");
        s.wait(body.at("seconds").get<double>());
        send_json(r, 200, {{"clock", s.clock()}});
      });
    });

    server.Post(id + "/end", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) {
        s.end();
        send_json(r, 200, {{"state", std::string(to_string(s.state()))}});
      });
    });

    server.Get(id + "/metrics", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) { send_json(r, 200, s.metrics().to_json()); });
    });

    server.Get(id + "/export", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](Session& s, httplib::Response& r) { send_json(r, 200, s.export_context()); });
    });

    server.Get(id + "/events", [this](const httplib::Request& req, httplib::Response& res) { events(req, res); });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "InternalError"}, {"message", e.what()}});
      }
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty() && res.status == 404)
        send_json(res, 404, {{"error", "NotFound"}, {"message", "no such endpoint"}});
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("BindFailed", "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  spdlog::info("serving on {}:{}", host, bound);
  return bound;
}

bool Service::run(const std::string& host, int port) {
  spdlog::info("serving on {}:{}", host, port);
  return impl_->server.listen(host, port);
}

void Service::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  {
    std::lock_guard lock(impl_->sessions_mu);
    for (auto& [id, entry] : impl_->sessions) entry->log_cv.notify_all();
  }
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace provox
