#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/providers.hpp"
#include "specrag/text.hpp"

namespace specrag {
namespace {

using json = nlohmann::json;

json post_json(const HttpEndpoint& ep, const std::string& path, const json& body) {
    if (ep.base_url.rfind("http://", 0) != 0) {
        throw Error(ErrorCode::ConfigError,
                    "provider base_url must start with http:// (got '" + ep.base_url + "')");
    }
    httplib::Client client(ep.base_url);
    client.set_connection_timeout(ep.timeout_seconds, 0);
    client.set_read_timeout(ep.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(ep.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
            throw ProviderError(ProviderFailure::Timeout, ep.base_url + path + ": " + httplib::to_string(err));
        }
        throw ProviderError(ProviderFailure::Transport, ep.base_url + path + ": " + httplib::to_string(err));
    }
    if (res->status == 408 || res->status == 504) {
        throw ProviderError(ProviderFailure::Timeout, "HTTP " + std::to_string(res->status));
    }
    if (res->status == 403 || res->status == 451) {
        throw ProviderError(ProviderFailure::Refusal, "HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ProviderError(ProviderFailure::Transport,
                            "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    json out = json::parse(res->body, nullptr, false);
    if (out.is_discarded()) throw ProviderError(ProviderFailure::BadResponse, "response is not JSON");
    return out;
}

}  // namespace

HttpGenerationProvider::HttpGenerationProvider(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

std::string HttpGenerationProvider::complete(const GenerationRequest& request) const {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    for (const auto& a : request.attachments) {
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", a.content_ref}}}});
    }
    json body = {{"model", endpoint_.model},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_output_tokens},
                 {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    json out = post_json(endpoint_, "/v1/chat/completions", body);
    try {
        const auto& choice = out.at("choices").at(0);
        if (choice.value("finish_reason", "") == "content_filter") {
            throw ProviderError(ProviderFailure::Refusal, "content filtered");
        }
        return choice.at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(ProviderFailure::BadResponse, e.what());
    }
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint, std::size_t dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {}

std::string HttpEmbeddingProvider::fingerprint() const {
    return "http:" + endpoint_.base_url + ":" + endpoint_.model + ":dim=" + std::to_string(dim_);
}

EmbeddingVector HttpEmbeddingProvider::encode(std::string_view text) const {
    json body = {{"model", endpoint_.model}, {"input", std::string(text)}, {"dimensions", dim_}};
    json out = post_json(endpoint_, "/v1/embeddings", body);
    EmbeddingVector v;
    try {
        for (const auto& x : out.at("data").at(0).at("embedding")) {
            v.values.push_back(x.get<float>());
        }
    } catch (const json::exception& e) {
        throw ProviderError(ProviderFailure::BadResponse, e.what());
    }
    return v;
}

GenerationDescriptionProvider::GenerationDescriptionProvider(
    std::shared_ptr<const GenerationProvider> generator)
    : generator_(std::move(generator)) {}

std::string GenerationDescriptionProvider::describe_table(const Block& table) const {
    if (!table.table_cells || table.table_cells->empty()) {
        throw ProviderError(ProviderFailure::EmptyMedia, "table has no cells");
    }
    std::string grid;
    for (const auto& row : *table.table_cells) grid += "| " + text::join(row, " | ") + " |\n";
    GenerationRequest req;
    req.prompt = "Describe the following technical table in plain sentences so it can be "
                 "searched. Caption: " + table.caption + "\n\n" + grid;
    req.temperature = 0.0;
    return text::trim(generate(req, *generator_));
}

std::string GenerationDescriptionProvider::describe_image(const Block& image) const {
    GenerationRequest req;
    req.prompt = "Describe the attached technical figure in plain sentences so it can be "
                 "searched. Caption: " + image.caption;
    req.temperature = 0.0;
    if (image.content_ref) {
        MediaRecord r;
        r.marker = "[IMG_000]";
        r.media_id = image.media_id.value_or("");
        r.caption = image.caption;
        r.content_ref = *image.content_ref;
        req.attachments.push_back(std::move(r));
    }
    return text::trim(generate(req, *generator_));
}

}  // namespace specrag
