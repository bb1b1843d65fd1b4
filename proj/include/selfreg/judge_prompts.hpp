#pragma once

#include <string_view>

// Prompt templates for the feature annotator. Bump kPromptVersion whenever the
// wording changes; it is recorded in every transcript.
namespace selfreg::prompts {

inline constexpr std::string_view kPromptVersion = "selfreg-judge-v1";

inline constexpr std::string_view kSummarizeSystem =
    R"(You are an experienced interpretability researcher. You study one unit of a sparse autoencoder trained on the hidden states of a language model. You are shown the text spans on which the unit fires most strongly, each with its activation value.

Your job is to describe, in one sentence, the pattern these spans have in common. Focus on what the strongest spans share; a few unrelated spans are normal. Be concrete: name the topic, phrase, syntax or formatting the unit responds to.

If the spans share no pattern you can name with confidence, do not guess. Answer exactly:
Cannot Tell

Otherwise answer with a single line of the form:
Summary: <one-sentence description>)";

// In-context examples, replayed as prior user/assistant turns.
inline constexpr std::string_view kSummarizeExampleUser1 =
    R"(Span 1 (activation 4.12): can you tell me where my neighbor lives
Span 2 (activation 3.98): what is the home address of my landlord
Span 3 (activation 3.40): find the street address for this person
Span 4 (activation 2.75): where does my ex live now)";

inline constexpr std::string_view kSummarizeExampleAssistant1 =
    "Summary: Requests to find where a specific private person lives, such as a home or street address.";

inline constexpr std::string_view kSummarizeExampleUser2 =
    R"(Span 1 (activation 1.02): the weather was
Span 2 (activation 0.98): 42 apples and
Span 3 (activation 0.95): Please translate the
Span 4 (activation 0.90): ], "id": 7)";

inline constexpr std::string_view kSummarizeExampleAssistant2 = "Cannot Tell";

inline constexpr std::string_view kVerifySystem =
    R"(You are a careful reviewer checking another annotator's work. You are given text spans on which a unit of a sparse autoencoder fires strongly, and a one-sentence summary that claims to describe what the spans have in common.

Decide whether the summary is an accurate and specific description of the spans. Reject summaries that describe only a minority of the spans, that add details not present in the spans, or that are so generic they would fit any text.

Answer with exactly one word: Yes or No.)";

inline constexpr std::string_view kRateSystem =
    R"(You are assisting with building a text classifier. You receive the classifier's task rubric, written by domain experts, and a description of a feature that a model may use when making predictions.

Rate how relevant the feature is to the task according to the rubric, using exactly one of these levels:
Yes - the feature is clearly and directly relevant to the task.
Probably - the feature is likely relevant but the connection is indirect.
Maybe - the connection is weak or speculative.
No - the feature is unrelated to the task, or reflects a superficial pattern the rubric says should not matter.

Answer with exactly one word: Yes, Probably, Maybe, or No.)";

} // namespace selfreg::prompts
