#pragma once

#include "hazard/dataset/dataset.hpp"
#include "hazard/evaluation/llm_client.hpp"
#include "hazard/preprocess/preprocess.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace hazard::zeroshot {

// Changing the wording changes every cache key; bump the version with it.
inline constexpr std::string_view kZeroShotTemplateVersion = "zs-v1";
inline constexpr std::string_view kZeroShotTemplate =
    "You are shown a dashcam image taken from the driver's seat of a car. "
    "Colored boxes outline the objects that matter for the situation. "
    "Describe the hazard that may happen a few seconds later, from the driver's point of view, "
    "referring to each highlighted object as Entity #n. Answer in one or two sentences.";

// Entity #1 magenta, #2 cyan, #3 yellow.
std::string_view outline_color_name(int entity_index);

struct ZeroShotContext {
    int speed_kmh = 0;
    int n_entities = 0;
    std::map<int, std::string> color_map;  // entity index -> color name

    static ZeroShotContext from_sample(const data::Sample& sample);
};

struct ZeroShotPrompt {
    std::string text;
    prep::RenderedImage image;  // outline style
    bool degraded = false;      // built without context
};

// `context` may be absent only with degraded_mode. Throws data::DataError when
// the sample does not validate against the image, and std::invalid_argument
// when the context disagrees with the sample.
ZeroShotPrompt build_zeroshot_prompt(const data::Sample& sample, const Image& base,
                                     const std::optional<ZeroShotContext>& context, bool degraded_mode = false);

struct VlmRunConfig {
    std::filesystem::path cache_dir;
    eval::RetryPolicy retry;
};

struct VlmResult {
    std::optional<std::string> text;
    std::string error;
    bool cache_hit = false;
};

// Cached by (template version, model, prompt text, image hash). Failures are
// returned in the result instead of thrown.
VlmResult query_external_vlm(eval::ChatClient& client, const ZeroShotPrompt& prompt, const VlmRunConfig& config);

std::string vlm_cache_key(const ZeroShotPrompt& prompt, const std::string& model);

// Offline stand-in: one sentence naming every entity the prompt highlights.
std::string mock_vlm_response(const eval::ChatRequest& request);

}  // namespace hazard::zeroshot
