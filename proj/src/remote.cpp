#include "provox/remote.hpp"

#include <chrono>

#include <httplib.h>

namespace provox {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("InvalidConfig", "endpoint '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

nlohmann::json parse_arguments(const nlohmann::json& function) {
  const auto& args = function.at("arguments");
  if (args.is_object()) return args;
  if (!args.is_string()) throw Error("MalformedToolCall", "tool arguments are neither a string nor an object");
  const auto text = args.get<std::string>();
  auto parsed = nlohmann::json::parse(text.empty() ? "{}" : text, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw Error("MalformedToolCall", "tool arguments are not a JSON object");
  return parsed;
}

std::vector<std::string> string_list(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("MalformedToolCall", "call args must be an array");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw Error("MalformedToolCall", "call args must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void append_tool_call(std::vector<RawCall>& calls, const nlohmann::json& tool_call, const Api& api) {
  const auto& function = tool_call.at("function");
  const auto name = function.at("name").get<std::string>();
  const auto args = parse_arguments(function);
  if (name == "submit_plan") {
    for (const auto& c : args.at("calls")) {
      calls.push_back(RawCall{c.at("function").get<std::string>(), string_list(c.value("args", nlohmann::json::array()))});
    }
    return;
  }
  RawCall call{name, {}};
  if (const auto* def = api.find(name)) {
    for (const auto& p : def->signature.params) {
      if (!args.contains(p.name) || !args.at(p.name).is_string())
        throw Error("MalformedToolCall", "call to " + name + " lacks argument '" + p.name + "'");
      call.args.push_back(args.at(p.name).get<std::string>());
    }
  } else {
    // Unknown function: keep the values so validation reports UnknownFunction.
    for (const auto& [key, value] : args.items()) {
      if (value.is_string()) call.args.push_back(value.get<std::string>());
    }
  }
  calls.push_back(std::move(call));
}

std::vector<std::pair<std::string, std::string>> auth_headers(const BackendConfig& config) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config.credential.empty()) headers.emplace_back("Authorization", "Bearer " + config.credential);
  return headers;
}

nlohmann::json post_json(HttpTransport& transport, const BackendConfig& config, const nlohmann::json& body) {
  const HttpResponse response = transport.post(config.endpoint, body.dump(), auth_headers(config));
  if (response.status == 401 || response.status == 403)
    throw Error("BackendUnavailable", "the endpoint rejected the credential (HTTP " + std::to_string(response.status) +
                                          "); set PROVOX_API_KEY");
  if (response.status < 200 || response.status >= 300)
    throw Error("BackendUnavailable", "the endpoint answered HTTP " + std::to_string(response.status));
  auto json = nlohmann::json::parse(response.body, nullptr, false);
  if (json.is_discarded()) throw Error("BackendUnavailable", "the endpoint returned a non-JSON body");
  return json;
}

}  // namespace

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::vector<std::pair<std::string, std::string>>& headers) {
  const auto [base, path] = split_url(url);
  httplib::Client client(base);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto result = client.Post(path, h, body, "application/json");
  if (!result) throw Error("BackendUnavailable", "request to " + base + " failed: " + httplib::to_string(result.error()));
  return {result->status, result->body};
}

nlohmann::json build_chat_request(const PlannerRequest& request, const BackendConfig& config,
                                  const std::vector<std::string>& corrections) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "user"}, {"content", assemble_prompt(request)}});
  for (const auto& c : corrections) messages.push_back({{"role", "user"}, {"content", c}});
  return {{"model", config.model},
          {"temperature", config.temperature},
          {"messages", messages},
          {"tools", derive_tool_schema(request.api, request.objects)},
          {"tool_choice", "auto"}};
}

RawResponse decode_chat_response(const nlohmann::json& body, const Api& api) {
  try {
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) return RawResponse::malformed("response has no choices");
    const auto& message = choices.at(0).at("message");
    if (message.contains("tool_calls") && message.at("tool_calls").is_array() && !message.at("tool_calls").empty()) {
      std::vector<RawCall> calls;
      for (const auto& tc : message.at("tool_calls")) append_tool_call(calls, tc, api);
      return RawResponse::from_calls(std::move(calls));
    }
    const auto content = message.contains("content") && message.at("content").is_string()
                             ? trim(message.at("content").get<std::string>())
                             : std::string();
    if (content.empty()) return RawResponse::malformed("response has neither tool calls nor text");
    if (content == "DONE" || content == "DONE.") return RawResponse::done();
    return RawResponse::clarify(content);
  } catch (const Error& e) {
    return RawResponse::malformed(e.what());
  } catch (const nlohmann::json::exception& e) {
    return RawResponse::malformed(e.what());
  }
}

RemoteBackend::RemoteBackend(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  config_.validate();
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
}

RawResponse RemoteBackend::request_once(const PlannerRequest& request, const std::vector<std::string>& corrections) {
  return decode_chat_response(post_json(*transport_, config_, build_chat_request(request, config_, corrections)),
                              request.api);
}

PlannerResponse RemoteBackend::generate(const PlannerRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  PlannerResponse response = validate_and_retry(request_once(request, {}), request, config_,
                                                [&](const std::vector<std::string>& corrections) {
                                                  return request_once(request, corrections);
                                                });
  response.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return response;
}

PlannerResponse remote_generate(const PlannerRequest& request, const BackendConfig& config,
                                const std::shared_ptr<HttpTransport>& transport) {
  return RemoteBackend(config, transport).generate(request);
}

RemoteNamer::RemoteNamer(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  config_.validate();
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
}

NameDoc RemoteNamer::name_and_doc(const TeachExample& example, const LiftingCandidate& lifting,
                                  const Catalog& objects) {
  (void)objects;
  std::string body = render_body(lift_body(example.decomposition, lifting));
  std::string prompt = "A user taught a robot a new behavior with the utterance \"" + example.trigger_utterance +
                       "\". Its body is: " + body +
                       "\nReply with only a JSON object {\"name\": <short snake_case verb>, \"doc\": <one-sentence "
                       "docstring that refers to each parameter as \"a specified object\">}.";
  nlohmann::json request = {{"model", config_.model},
                            {"temperature", config_.temperature},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  try {
    const auto reply = post_json(*transport_, config_, request);
    const auto content = trim(reply.at("choices").at(0).at("message").at("content").get<std::string>());
    const auto start = content.find('{');
    const auto end = content.rfind('}');
    if (start == std::string::npos || end == std::string::npos || end < start)
      throw Error("NamingFailed", "the namer reply holds no JSON object");
    const auto parsed = nlohmann::json::parse(content.substr(start, end - start + 1));
    NameDoc out{parsed.at("name").get<std::string>(), parsed.value("doc", "")};
    if (!is_function_name(out.name)) throw Error("NamingFailed", "the namer proposed '" + out.name + "'");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error("NamingFailed", std::string("unreadable namer reply: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == "NamingFailed") throw;
    throw Error("NamingFailed", e.what());
  }
}

std::unique_ptr<PlannerBackend> make_backend(const BackendConfig& config, std::shared_ptr<HttpTransport> transport) {
  if (config.kind == BackendKind::Mock) return std::make_unique<MockBackend>();
  return std::make_unique<RemoteBackend>(config, std::move(transport));
}

std::unique_ptr<NameDocProvider> make_namer(const BackendConfig& config, std::shared_ptr<HttpTransport> transport) {
  if (config.kind == BackendKind::Mock) return std::make_unique<HeuristicNamer>();
  return std::make_unique<RemoteNamer>(config, std::move(transport));
}

PlannerResponse generate(const PlannerRequest& request, const BackendConfig& config) {
  return make_backend(config)->generate(request);
}

}  // namespace provox
