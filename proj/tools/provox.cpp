// provox: interactive REPL, efficacy evaluation, transcript replay and the
// HTTP service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "provox/eval.hpp"
#include "provox/remote.hpp"
#include "provox/service.hpp"
#include "provox/session.hpp"

namespace {

using provox::Error;

struct BackendFlags {
  std::string kind = "mock";
  std::string config_file;
  std::string endpoint;
  std::string model;
  std::optional<double> temperature;
  std::optional<int> max_retries;

  void attach(CLI::App* app) {
    app->add_option("--backend", kind, "Planner backend")->check(CLI::IsMember({"mock", "remote"}));
    app->add_option("--backend-config", config_file, "JSON file with endpoint, model, temperature, max_retries")
        ->check(CLI::ExistingFile);
    app->add_option("--endpoint", endpoint, "Chat-completions URL (remote backend)");
    app->add_option("--model", model, "Model name (remote backend)");
    app->add_option("--temperature", temperature, "Sampling temperature (remote backend)");
    app->add_option("--max-retries", max_retries, "Validation retries (remote backend)");
  }

  provox::BackendConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw Error("InvalidConfig", config_file + " is not a JSON object");
    }
    j["kind"] = kind;
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    if (!model.empty()) j["model"] = model;
    if (temperature) j["temperature"] = *temperature;
    if (max_retries) j["max_retries"] = *max_retries;
    return provox::BackendConfig::from_json(j);
  }
};

void print_help() {
  std::cout << "Type an instruction, or one of:\n"
               "  :y / :n                    confirm or reject the pending plan\n"
               "  :teach <utterance> => <plan>\n"
               "  :goal <text>               (meta-prompting)\n"
               "  :form <json>               teach form (meta-prompting)\n"
               "  :delete <name>             (meta-prompting)\n"
               "  :test <utterance>          preview a plan (meta-prompting)\n"
               "  :live                      start the live session\n"
               "  :suggest                   ask for a suggestion\n"
               "  :wait <seconds>            spend time elsewhere\n"
               "  :api  :world  :metrics  :export <file>  :quit\n";
}

void show_pending(const provox::Session& s) {
  if (!s.pending()) return;
  const auto& p = *s.pending();
  if (p.suggestion)
    std::cout << "robot> " << p.suggestion->gloss << "  [" << provox::render_plan(p.plan) << "]  (:y / :n)\n";
  else
    std::cout << "plan> " << provox::render_plan(p.plan) << "  (:y / :n)\n";
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

void repl_command(provox::Session& s, const std::string& line, bool& quit) {
  const auto space = line.find(' ');
  const std::string cmd = line.substr(0, space);
  const std::string arg = space == std::string::npos ? "" : trim(line.substr(space + 1));
  if (cmd == ":quit" || cmd == ":q") {
    quit = true;
  } else if (cmd == ":help") {
    print_help();
  } else if (cmd == ":y") {
    s.confirm();
  } else if (cmd == ":n") {
    s.reject();
  } else if (cmd == ":goal") {
    s.meta_set_goal(arg);
  } else if (cmd == ":form") {
    const auto def = s.meta_teach(provox::teach_form_from_json(nlohmann::json::parse(arg)));
    std::cout << "learned " << def.name() << "\n";
  } else if (cmd == ":delete") {
    s.meta_delete(arg);
  } else if (cmd == ":test") {
    std::cout << provox::response_to_json(s.meta_test_utterance(arg)).dump() << "\n";
  } else if (cmd == ":live") {
    s.enter_live();
  } else if (cmd == ":suggest") {
    if (!s.request_suggestion()) std::cout << "robot> (no suggestion)\n";
  } else if (cmd == ":wait") {
    s.wait(std::stod(arg));
  } else if (cmd == ":teach") {
    const auto arrow = arg.find("=>");
    if (arrow == std::string::npos) throw Error("BadRequest", "usage: :teach <utterance> => <plan>");
    provox::TeachExample example{trim(arg.substr(0, arrow)),
                                 provox::parse_plan(trim(arg.substr(arrow + 2)), s.api(), s.objects())};
    const auto def = s.teach_live(example);
    std::cout << "learned " << def.name() << "(";
    for (std::size_t i = 0; i < def.signature.params.size(); ++i) std::cout << (i ? ", " : "") << def.signature.params[i].name;
    std::cout << "): " << provox::render_body(*def.body) << "\n";
  } else if (cmd == ":api") {
    for (const auto& def : s.api().entries()) std::cout << "  " << def.name() << "/" << def.signature.arity() << "  " << def.signature.doc << "\n";
  } else if (cmd == ":world") {
    std::cout << provox::world_to_json(s.world()).dump(2) << "\n";
  } else if (cmd == ":metrics") {
    std::cout << s.metrics().to_json().dump(2) << "\n";
  } else if (cmd == ":export") {
    std::ofstream out(arg);
    out << s.export_context().dump(2) << "\n";
  } else {
    throw Error("BadRequest", "unknown command " + cmd + " (try :help)");
  }
}

int run_repl(const std::string& scene_path, const BackendFlags& backend_flags, const std::string& context_path,
             bool proactive, bool meta, const std::string& transcript_path) {
  const auto scene = provox::load_scene_file(scene_path);
  const auto catalog = scene.catalog();
  provox::UserContext context;
  if (!context_path.empty()) context = provox::load_context_file(context_path, &catalog);
  const auto backend = backend_flags.resolve();
  provox::SessionOptions options;
  options.proactive = proactive;
  options.auto_confirm_user_plans = true;
  provox::Session session(scene, meta ? provox::Mode::MetaPrompting : provox::Mode::Live, provox::make_backend(backend),
                          provox::make_namer(backend), options, context);
  session.set_observer([](const provox::SessionEvent& e) {
    if (e.type == "message") std::cout << "robot> " << e.payload.at("text").get<std::string>() << "\n";
  });
  std::ofstream transcript;
  if (!transcript_path.empty()) {
    transcript.open(transcript_path);
    session.set_transcript_sink(&transcript);
  }

  std::cout << "provox " << (meta ? "meta-prompting" : "live") << " session on scene '" << scene.name
            << "'. :help lists commands.\n";
  std::string line;
  bool quit = false;
  while (!quit && std::cout << "> " << std::flush && std::getline(std::cin, line)) {
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == ':') {
        repl_command(session, line, quit);
      } else {
        // A fresh instruction supersedes a pending suggestion.
        if (session.mode() == provox::Mode::Live && session.state() == provox::SessionState::AwaitingConfirmation)
          session.reject();
        if (session.mode() == provox::Mode::MetaPrompting) {
          std::cout << provox::response_to_json(session.meta_test_utterance(line)).dump() << "\n";
        } else {
          const auto result = session.handle_utterance(line);
          if (result.plan) std::cout << "ran> " << provox::render_plan(*result.plan) << "\n";
        }
      }
    } catch (const Error& e) {
      std::cout << "error> " << e.code() << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
      std::cout << "error> " << e.what() << "\n";
    }
    show_pending(session);
    if (session.state() == provox::SessionState::Done) std::cout << "robot> Done.\n";
  }
  std::cout << session.metrics().to_json().dump() << "\n";
  return 0;
}

int run_eval(const std::string& contexts_dir, const std::string& reference_path, const std::string& scene_path,
             const BackendFlags& backend_flags, const std::string& conditions, const std::string& json_out) {
  const auto scene = provox::load_scene_file(scene_path);
  const auto catalog = scene.catalog();
  const auto contexts = provox::load_context_dir(contexts_dir, catalog);
  const auto reference = provox::load_reference_file(reference_path, catalog);
  auto backend = provox::make_backend(backend_flags.resolve());
  const auto report =
      provox::run_study(contexts, reference, scene, *backend, provox::parse_conditions(conditions));
  const auto json = report.to_json().dump(2);
  if (json_out == "-") {
    std::cerr << report.to_table();
    std::cout << json << "\n";
    return 0;
  }
  std::cout << report.to_table();
  if (!json_out.empty()) std::ofstream(json_out) << json << "\n";
  return 0;
}

int run_replay(const std::string& transcript_path, const std::string& scene_path) {
  std::ifstream in(transcript_path);
  if (!in) throw Error("NotFound", "cannot open " + transcript_path);
  const auto result = provox::replay_transcript(provox::read_transcript(in), provox::load_scene_file(scene_path));
  std::cout << "replayed " << result.steps << " steps; world hash " << result.final_hash << "\n";
  return 0;
}

provox::Service* g_service = nullptr;

int run_serve(const std::string& host, int port, const std::string& scene_path, const BackendFlags& backend_flags,
              bool proactive) {
  provox::ServiceConfig config;
  config.scene = provox::load_scene_file(scene_path);
  config.backend = backend_flags.resolve();
  config.proactive = proactive;
  provox::Service service(std::move(config));
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  return service.run(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"provox: proactive task planning for tabletop collaboration"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string scene;
  std::string context;
  std::string transcript;
  bool proactive = true;
  bool meta = false;
  BackendFlags repl_backend;
  auto* repl = app.add_subcommand("repl", "Interactive terminal session");
  repl->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
  repl->add_option("--context", context, "Context file (goal + taught functions)")->check(CLI::ExistingFile);
  repl->add_flag("--proactive,!--no-proactive", proactive, "Offer suggestions after each execution");
  repl->add_flag("--meta", meta, "Start in meta-prompting mode");
  repl->add_option("--transcript", transcript, "Write a JSON-lines transcript");
  repl_backend.attach(repl);

  std::string contexts_dir;
  std::string reference;
  std::string conditions = "full,fixed-goal,fixed-api,fixed-context";
  std::string json_out;
  BackendFlags eval_backend;
  auto* eval = app.add_subcommand("eval", "Meta-prompt efficacy study");
  eval->add_option("--contexts", contexts_dir, "Directory of context files")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--reference", reference, "Reference plan file")->required()->check(CLI::ExistingFile);
  eval->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
  eval->add_option("--conditions", conditions, "Comma-separated conditions");
  eval->add_option("--json", json_out, "Also write the JSON report to this file ('-' puts it on stdout and the table on stderr)");
  eval_backend.attach(eval);

  std::string transcript_in;
  auto* replay = app.add_subcommand("replay", "Re-execute a transcript and verify its world hashes");
  replay->add_option("transcript", transcript_in, "Transcript (JSON lines)")->required()->check(CLI::ExistingFile);
  replay->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);

  std::string host = "127.0.0.1";
  int port = 8080;
  BackendFlags serve_backend;
  auto* serve = app.add_subcommand("serve", "HTTP + event-stream service");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--scene", scene, "Default scene file")->required()->check(CLI::ExistingFile);
  serve->add_flag("--proactive,!--no-proactive", proactive, "Default proactivity for new sessions");
  serve_backend.attach(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "UsageError: " << e.what() << "\n";
    return 2;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
  try {
    if (*repl) return run_repl(scene, repl_backend, context, proactive, meta, transcript);
    if (*eval) return run_eval(contexts_dir, reference, scene, eval_backend, conditions, json_out);
    if (*replay) return run_replay(transcript_in, scene);
    if (*serve) return run_serve(host, port, scene, serve_backend, proactive);
  } catch (const Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
