#include "hazard/zeroshot/zeroshot.hpp"

#include "hazard/common/hash.hpp"

#include <sstream>
#include <stdexcept>

namespace hazard::zeroshot {

using nlohmann::json;

std::string_view outline_color_name(int entity_index) {
    switch (entity_index) {
        case 1: return "magenta";
        case 2: return "cyan";
        case 3: return "yellow";
        default: throw std::invalid_argument("entity index must be 1..3");
    }
}

ZeroShotContext ZeroShotContext::from_sample(const data::Sample& sample) {
    ZeroShotContext c;
    c.speed_kmh = sample.speed_kmh;
    c.n_entities = static_cast<int>(sample.entities.size());
    for (const auto& e : sample.entities) c.color_map[e.index] = std::string(outline_color_name(e.index));
    return c;
}

ZeroShotPrompt build_zeroshot_prompt(const data::Sample& sample, const Image& base,
                                     const std::optional<ZeroShotContext>& context, bool degraded_mode) {
    const auto report = data::validate_sample(sample, {base.width, base.height});
    if (!report.ok) throw data::DataError(sample.id + ": " + report.summary());
    if (!context && !degraded_mode) {
        throw std::invalid_argument("zero-shot prompt needs context unless degraded mode is requested");
    }
    ZeroShotPrompt p;
    p.degraded = !context.has_value();
    std::ostringstream text;
    text << kZeroShotTemplate;
    if (context) {
        if (context->n_entities != static_cast<int>(sample.entities.size())) {
            throw std::invalid_argument(sample.id + ": context lists " + std::to_string(context->n_entities) +
                                        " entities but the sample has " + std::to_string(sample.entities.size()));
        }
        text << "\nThe ego-vehicle is driving at " << context->speed_kmh << " km/h.";
        text << "\n" << context->n_entities << (context->n_entities == 1 ? " entity is" : " entities are")
             << " involved in the hazard.";
        for (const auto& e : sample.entities) {
            const auto it = context->color_map.find(e.index);
            if (it == context->color_map.end()) {
                throw std::invalid_argument(sample.id + ": context has no color for Entity #" + std::to_string(e.index));
            }
            text << "\nEntity #" << e.index << " is highlighted by the " << it->second << " box.";
        }
    }
    p.text = text.str();
    const auto style = prep::RenderStyle::outline();
    p.image = {prep::render_entity_boxes(base, sample.entities, style), style, sample.id};
    return p;
}

std::string vlm_cache_key(const ZeroShotPrompt& prompt, const std::string& model) {
    const auto png = encode_png(prompt.image.pixels);
    std::string material = std::string(kZeroShotTemplateVersion);
    for (const std::string& part : {model, prompt.text, sha256_hex(std::span<const unsigned char>(png))}) {
        material.push_back('\x1f');
        material += part;
    }
    return sha256_hex(material);
}

VlmResult query_external_vlm(eval::ChatClient& client, const ZeroShotPrompt& prompt, const VlmRunConfig& config) {
    const eval::ResponseCache cache(config.cache_dir);
    const std::string model = client.model_id();
    const std::string key = vlm_cache_key(prompt, model);
    VlmResult result;
    if (const auto hit = cache.get(key); hit && hit->contains("text")) {
        result.text = hit->at("text").get<std::string>();
        result.cache_hit = true;
        return result;
    }
    eval::ChatRequest req;
    req.user = prompt.text;
    req.temperature = 0.0;
    req.image_png = encode_png(prompt.image.pixels);
    try {
        const std::string text = eval::with_retries(
            config.retry,
            [&] {
                std::string reply = client.complete(req);
                if (reply.find_first_not_of(" \t\r\n") == std::string::npos) {
                    throw eval::TransportError("empty response");
                }
                return reply;
            },
            [](const std::exception& e) { return dynamic_cast<const eval::TransportError*>(&e) != nullptr; });
        cache.put(key, json{{"text", text},
                            {"model", model},
                            {"template_version", kZeroShotTemplateVersion},
                            {"sample", prompt.image.provenance}});
        result.text = text;
    } catch (const std::exception& e) {
        result.error = e.what();
    }
    return result;
}

std::string mock_vlm_response(const eval::ChatRequest& request) {
    std::vector<std::string> entities;
    std::istringstream in(request.user);
    std::string line;
    while (std::getline(in, line)) {
        if (line.starts_with("Entity #") && line.find(" is highlighted") != std::string::npos) {
            entities.push_back(line.substr(0, line.find(" is highlighted")));
        }
    }
    if (entities.empty()) return "A highlighted object may move into my path and I could hit it.";
    std::string out = entities.front() + " may move into my path";
    for (std::size_t i = 1; i < entities.size(); ++i) out += " while " + entities[i] + " blocks my escape";
    return out + ", and I could hit it.";
}

}  // namespace hazard::zeroshot
