#pragma once

#include "cafforge/error.hpp"
#include "cafforge/format.hpp"
#include "cafforge/series.hpp"
#include "cafforge/timestamp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace cafforge {

enum class PromptKind { context_gen, judge, dp_with_context, dp_no_context };

struct RenderedPrompt {
    PromptKind kind;
    std::string text;
    std::string window_key;
};

struct GeneratedContext {
    std::string context_abs;
    std::string short_desc;
};

struct JudgeVerdict {
    bool q1 = false;
    bool q2 = false;

    [[nodiscard]] bool passed() const noexcept { return q1 && q2; }
    friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

namespace templates {

inline constexpr std::string_view context_generation = R"(You are working with the following dataset:

{domain_hint}

Your task is to generate textual context that aids in forecasting the future of a time series from this dataset. The generated context should introduce information that helps explain the observed changes but is not directly obvious from the past numerical values. Below are examples of the style of contexts you should generate:

1. Background: This dataset represents electricity consumption, measured in kilowatts (kW), in City A. Scenario: Suppose a heat wave occurs in City A from 2013-05-28 12:00:00 to 2013-05-28 14:00:00, resulting in excessive use of air conditioning and electricity consumption increasing to four times the usual level.
2. Constraint: In the forecast, the values are assumed to be bounded above by 6.29.

These examples illustrate the three key types of contextual information:

**Background**: Historical details that may influence future values.
**Scenario**: Plausible events that could lead to changes in future values.
**Constraint**: Assumptions or bounds that restrict the possible range of future values.

Your generated context should include one or more of these types. Now, using the following time series {target_var_text}from this dataset, generate a plausible textual context to help forecast. The data is in (timestamp, value) format, with the forecast horizon starting at {window['future_timestamp'][0]}.

Historical Time Series:
<past_target>
{history}
</past_target>

Ground Truth for Future:
<future_target>
{future}
</future_target>

Follow these guidelines when generating the context:

- **Focus** on non-stationary segments in the forecast horizon---such as trend shifts (e.g., from fluctuating to a steady decline) or non-recurring patterns (e.g., unusually low peaks). A change is major if it shows a sustained, non-seasonal deviation (e.g., surge, drop, plateau) lasting at least one full seasonal cycle. Ignore minor fluctuations lasting only one or two timestamps.

- **If no major changes are present**, generate only a **Background** summary describing historical trends and seasonality, and how they are expected to persist.

- **If major changes are observed** (in all or part of the forecast):
- If multiple such changes occur, describe **only the most impactful one**, based on magnitude or duration.
- Create a realistic and specific **Scenario** describing a plausible causal event. If several plausible causes exist, choose the most likely one. Avoid vague or speculative reasoning.
- Include a **Constraint** only if forecast values are clearly and consistently bounded (e.g., all values equal to 6.29). Omit this part entirely if no constraint is observed. Do not write "Constraint: None" or similar.
- Ensure the scenario is consistent with both the **domain description** and the patterns in <future_target>.
- Describe the impact on future values using **relative terms** (e.g., "2x higher", "20% lower").
- If the scenario affects only part of the forecast, clearly specify the **start and end times** using the format YYYY-MM-DD HH:MM:SS.
Use HH:MM:SS only if all future timestamps are on the same day.
- You may refer to **historical timestamps** only if they clearly relate to recurring or causal patterns.
- Include a **short summary** in <short_desc> (e.g., "traffic jam", "holiday closure").
If no scenario is generated, return: <short_desc></short_desc>.

{variety_instruction}

- **Keep the context concise** --- ideally **150-250 words**. Avoid unnecessary elaboration or repetition.

- **Do not include your reasoning steps** or explain how the context was inferred. Output only the final description in a **factual and declarative** style.

Output Format:

<context_abs>put context here</context_abs>
<short_desc>put short description here if applicable</short_desc>)";

inline constexpr std::string_view judge = R"(Given the following context information about a time series:

{context}

Answer these two questions with ONLY "yes" or "no":

Q1: Does the context state what variable the time series represents (e.g., profit, demand, load), even if units or aggregation level are not specified?
Q2: Is the scenario/event related to the quantity being measured in the time series (i.e., it describes events that would reasonably affect that specific variable)?

Format your answer as:
Q1: [yes/no]
Q2: [yes/no])";

inline constexpr std::string_view direct_prompt_with_context = R"(I have a time series forecasting task for you.

Here is some context about the task. Make sure to factor in any background knowledge,
satisfy any constraints, and respect any scenarios.
<context>
{context}
</context>

Here is a historical time series in (timestamp, value) format:
<history>
{past_time}
</history>

Now please predict the value at the following timestamps: {future_time_index_concat}.

Return the forecast in (timestamp, value) format in between <forecast> and </forecast> tags.
Do not include any other information (e.g., comments) in the forecast.

Example:
<history>
(t1, v1)
(t2, v2)
(t3, v3)
</history>
<forecast>
(t4, v4)
(t5, v5)
</forecast>)";

inline constexpr std::string_view direct_prompt_no_context = R"(I have a time series forecasting task for you.

Here is a historical time series in (timestamp, value) format:
<history>
{past_time}
</history>

Now please predict the value at the following timestamps: {future_time_index_concat}.

Return the forecast in (timestamp, value) format in between <forecast> and </forecast> tags.
Do not include any other information (e.g., comments) in the forecast.

Example:
<history>
(t1, v1)
(t2, v2)
(t3, v3)
</history>
<forecast>
(t4, v4)
(t5, v5)
</forecast>)";

}  // namespace templates

/// Single left-to-right pass: every "{name}" is replaced by its value and
/// substituted text is never rescanned, so braces inside values survive.
inline std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find('}', open + 1);
        if (close == std::string_view::npos) {
            fail(ErrorKind::precondition, "template has an unterminated placeholder");
        }
        const auto name = tmpl.substr(open + 1, close - open - 1);
        const auto it = values.find(name);
        if (it == values.end()) {
            fail(ErrorKind::precondition, "template placeholder {" + std::string(name) + "} has no value");
        }
        out.append(tmpl.substr(pos, open - pos));
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

/// One "(YYYY-MM-DD HH:MM:SS, value)" line per point.
inline std::string serialize_points(const std::vector<Timestamp>& stamps, const std::vector<double>& values) {
    require(stamps.size() == values.size(), "serialize_points: length mismatch");
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += "(" + format_timestamp(stamps[i]) + ", " + format_number(values[i]) + ")";
    }
    return out;
}

inline std::string join_timestamps(const std::vector<Timestamp>& stamps) {
    std::string out;
    for (std::size_t i = 0; i < stamps.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_timestamp(stamps[i]);
    }
    return out;
}

inline constexpr std::size_t kVarietyWindow = 16;

/// Bullet list of the most recent `keep` nonempty scenario summaries, with
/// an instruction not to reuse them. Empty when there is nothing to list.
inline std::string render_variety_instruction(const std::vector<std::string>& prior_descs, std::size_t keep = kVarietyWindow) {
    std::vector<std::string_view> recent;
    for (auto it = prior_descs.rbegin(); it != prior_descs.rend() && recent.size() < keep; ++it) {
        if (!it->empty()) recent.push_back(*it);
    }
    if (recent.empty()) {
        return {};
    }
    std::reverse(recent.begin(), recent.end());
    std::string out =
        "- **Avoid repeating** the scenarios of previously generated contexts for this dataset, summarized below. "
        "Describe a different plausible cause instead:";
    for (auto desc : recent) {
        out += "\n  - ";
        out += desc;
    }
    return out;
}

inline RenderedPrompt render_context_gen_prompt(const ForecastWindow& window, const std::string& domain_hint,
                                                const std::string& variety, const std::string& target_var_text = {}) {
    require(!domain_hint.empty(), "context generation prompt: missing domain_hint for " + window.key());
    require(!window.future_target.empty(), "context generation prompt: window has no future values");
    std::map<std::string, std::string, std::less<>> values{
        {"domain_hint", domain_hint},
        {"target_var_text", target_var_text},
        {"window['future_timestamp'][0]", format_timestamp(window.first_future_timestamp)},
        {"history", serialize_points(window.history_timestamps(), window.past_target)},
        {"future", serialize_points(window.future_timestamps(), window.future_target)},
        {"variety_instruction", variety},
    };
    return {PromptKind::context_gen, fill_template(templates::context_generation, values), window.key()};
}

inline RenderedPrompt render_judge_prompt(const std::string& context, const std::string& window_key = {}) {
    require(!context.empty(), "judge prompt: empty context");
    return {PromptKind::judge, fill_template(templates::judge, {{"context", context}}), window_key};
}

/// Direct-prompt forecasting prompt. `context` selects the template: null
/// means the no-context variant. `horizon` defaults to the window's own.
inline RenderedPrompt render_dp_prompt_with(const ForecastWindow& window, const std::string* context,
                                            std::optional<std::int64_t> horizon = std::nullopt) {
    const auto steps = horizon.value_or(window.horizon());
    require(steps > 0, "direct prompt: horizon must be positive");
    std::map<std::string, std::string, std::less<>> values{
        {"past_time", serialize_points(window.history_timestamps(), window.past_target)},
        {"future_time_index_concat", join_timestamps(window.future_timestamps(steps))},
    };
    if (context != nullptr) {
        values.emplace("context", *context);
        return {PromptKind::dp_with_context, fill_template(templates::direct_prompt_with_context, values), window.key()};
    }
    return {PromptKind::dp_no_context, fill_template(templates::direct_prompt_no_context, values), window.key()};
}

inline RenderedPrompt render_dp_prompt(const ForecastWindow& window, bool with_context) {
    if (with_context) {
        require(window.context.has_value(), "direct prompt: window " + window.key() + " has no context");
        return render_dp_prompt_with(window, &*window.context);
    }
    return render_dp_prompt_with(window, nullptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Inner text of the first <tag>...</tag> span, if both tags are present.
inline std::optional<std::string_view> tag_span(std::string_view text, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const auto start = text.find(open);
    if (start == std::string_view::npos) return std::nullopt;
    const auto inner = start + open.size();
    const auto end = text.find(close, inner);
    if (end == std::string_view::npos) return std::nullopt;
    return text.substr(inner, end - inner);
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::optional<double> parse_real(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

}  // namespace detail

inline GeneratedContext parse_generated_context(std::string_view response) {
    const auto context = detail::tag_span(response, "context_abs");
    if (!context) {
        fail(ErrorKind::parse, "generated context: missing <context_abs> tags");
    }
    GeneratedContext out;
    out.context_abs = std::string(detail::trim(*context));
    if (out.context_abs.empty()) {
        fail(ErrorKind::parse, "generated context: empty <context_abs>");
    }
    if (const auto desc = detail::tag_span(response, "short_desc")) {
        out.short_desc = std::string(detail::trim(*desc));
    }
    return out;
}

inline JudgeVerdict parse_judge_verdict(std::string_view response) {
    std::optional<bool> answers[2];
    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto end = response.find('\n', pos);
        if (end == std::string_view::npos) end = response.size();
        auto line = detail::trim(response.substr(pos, end - pos));
        pos = end + 1;

        while (!line.empty() && (line.front() == '*' || line.front() == '-')) line.remove_prefix(1);
        line = detail::trim(line);
        const auto lowered = detail::lower(line);
        for (int q = 0; q < 2; ++q) {
            const std::string label = q == 0 ? "q1:" : "q2:";
            if (answers[q] || lowered.rfind(label, 0) != 0) continue;
            std::string_view value = std::string_view(lowered).substr(label.size());
            const auto strip = [](char c) { return c == ' ' || c == '\t' || c == '[' || c == ']' || c == '*' || c == '.' || c == '"'; };
            while (!value.empty() && strip(value.front())) value.remove_prefix(1);
            while (!value.empty() && strip(value.back())) value.remove_suffix(1);
            if (value == "yes") {
                answers[q] = true;
            } else if (value == "no") {
                answers[q] = false;
            } else {
                fail(ErrorKind::parse, "judge verdict: " + label.substr(0, 2) + " answer is neither yes nor no");
            }
        }
        if (end == response.size()) break;
    }
    if (!answers[0] || !answers[1]) {
        fail(ErrorKind::parse, "judge verdict: missing Q1 or Q2 line");
    }
    return {*answers[0], *answers[1]};
}

/// Values from the "(timestamp, value)" lines between <forecast> tags,
/// ordered like `expected`. Every expected timestamp must appear exactly
/// once and nothing else may appear.
inline std::vector<double> parse_forecast_response(std::string_view response, const std::vector<Timestamp>& expected) {
    require(!expected.empty(), "parse_forecast_response: no expected timestamps");
    const auto body = detail::tag_span(response, "forecast");
    if (!body) {
        fail(ErrorKind::parse, "forecast response: missing <forecast> tags");
    }
    std::map<Timestamp, std::size_t> slot;
    for (std::size_t i = 0; i < expected.size(); ++i) slot.emplace(expected[i], i);

    std::vector<std::optional<double>> found(expected.size());
    std::size_t pos = 0;
    while (pos < body->size()) {
        auto end = body->find('\n', pos);
        if (end == std::string_view::npos) end = body->size();
        const auto line = detail::trim(body->substr(pos, end - pos));
        pos = end + 1;
        if (line.empty()) continue;
        if (line.size() < 2 || line.front() != '(' || line.back() != ')') {
            fail(ErrorKind::parse, "forecast response: malformed line '" + std::string(line) + "'");
        }
        const auto inner = line.substr(1, line.size() - 2);
        const auto comma = inner.rfind(',');
        if (comma == std::string_view::npos) {
            fail(ErrorKind::parse, "forecast response: malformed line '" + std::string(line) + "'");
        }
        const auto stamp = parse_timestamp(inner.substr(0, comma));
        const auto value = detail::parse_real(inner.substr(comma + 1));
        if (!stamp || !value) {
            fail(ErrorKind::parse, "forecast response: unparseable line '" + std::string(line) + "'");
        }
        const auto it = slot.find(*stamp);
        if (it == slot.end()) {
            fail(ErrorKind::parse, "forecast response: unexpected timestamp " + format_timestamp(*stamp));
        }
        if (found[it->second]) {
            fail(ErrorKind::parse, "forecast response: duplicate timestamp " + format_timestamp(*stamp));
        }
        found[it->second] = *value;
    }
    std::vector<double> out;
    out.reserve(expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (!found[i]) {
            fail(ErrorKind::parse, "forecast response: missing timestamp " + format_timestamp(expected[i]));
        }
        out.push_back(*found[i]);
    }
    return out;
}

}  // namespace cafforge
