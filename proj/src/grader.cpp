#include "fusion/grader.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <semaphore>
#include <stdexcept>
#include <thread>

#include "fusion/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fusion {

namespace {

// Grading rubrics sent to the judge. The {slot} markers are replaced by the
// render functions; everything else (including trailing whitespace) is
// reproduced exactly as the judge expects to see it.
constexpr const char* kFactualityTemplate =
    "You are a factuality grader. Given a question, a gold target (correct answer), \n"
    R"RUBRIC(and a predicted answer, assign one of the following grades:
- "CORRECT" (fully contains correct information, no contradictions)
- "INCORRECT" (contains incorrect, misleading, or contradictory information)
- "NOT_ATTEMPTED" (fails to answer or provides irrelevant information)

### Example Grades:
CORRECT:
- Question: "Who discovered gravity?"
  - Gold target: "Isaac Newton"
  - Predicted: "Isaac Newton"
  - Predicted: "Newton discovered gravity."
  - Predicted: "Most believe Isaac Newton discovered gravity."

INCORRECT:
- Question: "Who discovered gravity?"
  - Gold target: "Isaac Newton"
  - Predicted: "Albert Einstein"
  - Predicted: "Newton, Einstein, and Galileo discovered gravity.")RUBRIC" " \n"
    R"RUBRIC(  (Contradicts correct answer)
  - Predicted: "Gravity was first theorized in 1905.")RUBRIC" " \n"
    R"RUBRIC(  (Incorrect)

NOT_ATTEMPTED:
- Question: "Who discovered gravity?"
  - Gold target: "Isaac Newton"
  - Predicted: "I don't know."
  - Predicted: "It depends on interpretation."
  - Predicted: "Without more context, I cannot say."

### Rules:
- Ignore capitalization, punctuation, and grammar differences.
- Allow hedging (e.g., "I think" or "probably") as long as the correct answer is included.
- If a predicted answer partially matches but is missing key details, grade as INCORRECT.
- If a number is the correct answer, it must be accurate to the last significant figure.
- Do not punish minor typos in names if the intent is clear.

### Now, grade this:
Question: {question}
Gold target: {target}
Predicted answer: {predicted_answer}

Reply with:
A: CORRECT
B: INCORRECT
C: NOT_ATTEMPTED

Only return "A", "B", or "C" with no extra text.)RUBRIC";

constexpr const char* kQualityTemplate =
    "You are a strict but fair evaluator. \n"
    R"RUBRIC(Evaluate the generated answer for correctness, relevance, and completeness.

Question: {question}
Generated Answer: {generated_text}
Ground Truth Answer: {ground_truth}

Give a score from 1 to 5 based on the following:
- 5 = Fully correct, complete, and relevant.
- 4 = Mostly correct, with minor inaccuracies or missing details.
- 3 = Partially correct, has significant omissions or minor errors.
- 2 = Mostly incorrect or irrelevant, with small fragments that match.
- 1 = Totally wrong, irrelevant, or hallucinated.

Also specify:
- Hallucination (Y/N): Did the answer include fabricated information not found in the)RUBRIC" " \n"
    R"RUBRIC(ground truth?
- Notes: Brief justification.)RUBRIC";

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
    const std::size_t pos = text.find(slot);
    if (pos == std::string::npos) {
        throw std::logic_error("rubric template is missing slot " + slot);
    }
    text.replace(pos, slot.size(), value);
    return text;
}

std::string to_lower(const std::string& text) {
    std::string out = text;
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool is_word_char(const std::string& text, std::size_t pos) {
    return pos < text.size() &&
           std::isalnum(static_cast<unsigned char>(text[pos])) != 0;
}

// True when text[pos] starts a single-character token (no alphanumeric
// neighbours on either side).
bool standalone_at(const std::string& text, std::size_t pos) {
    const bool left_ok = pos == 0 || !is_word_char(text, pos - 1);
    return left_ok && !is_word_char(text, pos + 1);
}

// First standalone digit in 1..5 at or after `from`; npos when absent.
std::size_t find_score_digit(const std::string& text, std::size_t from) {
    for (std::size_t i = from; i < text.size(); ++i) {
        if (text[i] >= '1' && text[i] <= '5' && standalone_at(text, i)) {
            return i;
        }
    }
    return std::string::npos;
}

std::string trim(const std::string& text) {
    const char* ws = " \t\r\n\f\v";
    const std::size_t begin = text.find_first_not_of(ws);
    if (begin == std::string::npos) {
        return "";
    }
    const std::size_t end = text.find_last_not_of(ws);
    return text.substr(begin, end - begin + 1);
}

}  // namespace

std::string render_factuality_prompt(const std::string& question,
                                     const std::string& target,
                                     const std::string& predicted) {
    if (question.empty() || target.empty() || predicted.empty()) {
        throw InputError("factuality prompt requires non-empty question, target, and predicted answer");
    }
    std::string out = kFactualityTemplate;
    out = replace_slot(std::move(out), "{question}", question);
    out = replace_slot(std::move(out), "{target}", target);
    out = replace_slot(std::move(out), "{predicted_answer}", predicted);
    return out;
}

std::string render_quality_prompt(const std::string& question,
                                  const std::string& generated,
                                  const std::string& ground_truth) {
    if (question.empty() || generated.empty() || ground_truth.empty()) {
        throw InputError("quality prompt requires non-empty question, generated text, and ground truth");
    }
    std::string out = kQualityTemplate;
    out = replace_slot(std::move(out), "{question}", question);
    out = replace_slot(std::move(out), "{generated_text}", generated);
    out = replace_slot(std::move(out), "{ground_truth}", ground_truth);
    return out;
}

FactualityGrade parse_factuality_reply(const std::string& reply) {
    const std::size_t pos = reply.find_first_not_of(" \t\r\n\f\v");
    if (pos == std::string::npos) {
        throw ParseError("factuality reply is empty", reply);
    }
    FactualityGrade grade;
    grade.raw_reply = reply;
    switch (std::tolower(static_cast<unsigned char>(reply[pos]))) {
        case 'a': grade.label = Factuality::Correct; return grade;
        case 'b': grade.label = Factuality::Incorrect; return grade;
        case 'c': grade.label = Factuality::NotAttempted; return grade;
        default:
            throw ParseError("factuality reply does not start with A, B, or C", reply);
    }
}

QualityGrade parse_quality_reply(const std::string& reply) {
    QualityGrade grade;
    grade.raw_reply = reply;
    const std::string lower = to_lower(reply);

    std::size_t score_pos = std::string::npos;
    const std::size_t score_word = lower.find("score");
    if (score_word != std::string::npos) {
        score_pos = find_score_digit(lower, score_word + 5);
    }
    if (score_pos == std::string::npos) {
        score_pos = find_score_digit(lower, 0);
    }
    if (score_pos == std::string::npos) {
        throw ParseError("quality reply contains no 1-5 score", reply);
    }
    grade.score = lower[score_pos] - '0';

    const std::size_t hall_word = lower.find("hallucination");
    if (hall_word != std::string::npos) {
        // Blank out literal "(y/n)" echoes so the rubric's own answer-format
        // hint is never mistaken for the answer.
        std::string scan = lower;
        for (std::size_t p = scan.find("(y/n)"); p != std::string::npos;
             p = scan.find("(y/n)", p)) {
            scan.replace(p, 5, "     ");
        }
        for (std::size_t i = hall_word + 13; i < scan.size(); ++i) {
            if ((scan[i] == 'y' || scan[i] == 'n') && standalone_at(scan, i)) {
                grade.hallucination = scan[i] == 'y';
                break;
            }
        }
    }

    const std::size_t notes_word = lower.find("notes");
    if (notes_word != std::string::npos) {
        std::size_t begin = notes_word + 5;
        if (begin < reply.size() && reply[begin] == ':') {
            ++begin;
        }
        grade.notes = trim(reply.substr(begin));
    }
    return grade;
}

GradePair grade_with_stub(const std::string& /*question*/, const std::string& predicted,
                          const std::string& ground_truth) {
    const double overlap = token_overlap(predicted, ground_truth);
    const std::string lower = to_lower(predicted);
    const bool refused = lower.find("i don't know") != std::string::npos ||
                         lower.find("cannot") != std::string::npos;

    Factuality label = Factuality::Incorrect;
    int score = 1;
    std::string notes;
    if (overlap >= 1.0 && !predicted.empty()) {
        label = Factuality::Correct;
        score = 5;
        notes = "full lexical recall of the ground truth";
    } else if (overlap > 0.0) {
        label = Factuality::Incorrect;
        score = 2 + static_cast<int>(std::lround(2.0 * overlap));
        notes = "partial lexical recall of the ground truth";
    } else if (refused) {
        label = Factuality::NotAttempted;
        score = 1;
        notes = "refusal with no lexical recall";
    } else {
        label = Factuality::Incorrect;
        score = 1;
        notes = "no lexical recall of the ground truth";
    }
    const bool hallucination = overlap < 1.0;

    GradePair pair;
    pair.factuality.label = label;
    switch (label) {
        case Factuality::Correct: pair.factuality.raw_reply = "A"; break;
        case Factuality::Incorrect: pair.factuality.raw_reply = "B"; break;
        case Factuality::NotAttempted: pair.factuality.raw_reply = "C"; break;
    }
    pair.quality.score = score;
    pair.quality.hallucination = hallucination;
    pair.quality.notes = notes;
    pair.quality.raw_reply = "Score: " + std::to_string(score) +
                             "\nHallucination (Y/N): " + (hallucination ? "Y" : "N") +
                             "\nNotes: " + notes;
    return pair;
}

void RemoteGraderConfig::apply_env() {
    if (url.empty()) {
        if (const char* env = std::getenv("FS_GRADER_URL")) {
            url = env;
        }
    }
    if (api_key.empty()) {
        if (const char* env = std::getenv("FS_GRADER_KEY")) {
            api_key = env;
        }
    }
}

namespace {

struct EndpointParts {
    std::string base;  // scheme://host[:port]
    std::string path;  // leading slash
};

EndpointParts split_endpoint(const std::string& url) {
    if (url.rfind("https://", 0) == 0) {
        throw ConfigError("grader url uses https, which this build does not support: " + url);
    }
    if (url.rfind("http://", 0) != 0) {
        throw ConfigError("grader url must start with http://, got: " + url);
    }
    const std::size_t slash = url.find('/', 7);
    EndpointParts parts;
    if (slash == std::string::npos) {
        parts.base = url;
        parts.path = "/";
    } else {
        parts.base = url.substr(0, slash);
        parts.path = url.substr(slash);
    }
    if (parts.base.size() <= 7) {
        throw ConfigError("grader url has no host: " + url);
    }
    return parts;
}

void log_verbose(const RemoteGraderConfig& config, const std::string& message) {
    if (config.verbose) {
        std::fprintf(stderr, "[grader] %s\n", message.c_str());
    }
}

// One chat completion at temperature 0. Connection failures and 429/5xx
// responses are retried with exponential backoff; anything else surfaces
// immediately.
std::string post_chat(const RemoteGraderConfig& config, const std::string& prompt) {
    if (config.url.empty()) {
        throw ConfigError("grader url is empty; set --grader-url or FS_GRADER_URL");
    }
    if (config.max_retries < 0 || config.backoff_ms < 0) {
        throw ConfigError("grader retry settings must be non-negative");
    }
    if (config.connect_timeout_ms <= 0 || config.read_timeout_ms <= 0) {
        throw ConfigError("grader timeouts must be positive");
    }
    const EndpointParts endpoint = split_endpoint(config.url);

    nlohmann::json body = {
        {"model", config.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", 0.0},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config.api_key);
    }
    log_verbose(config, "POST " + endpoint.base + endpoint.path +
                            (config.api_key.empty() ? " (no auth)" : " (Authorization: Bearer ***)"));

    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            const int delay = config.backoff_ms << (attempt - 1);
            log_verbose(config, "retry " + std::to_string(attempt) + " after " +
                                    std::to_string(delay) + "ms: " + last_error);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(endpoint.base);
        client.set_connection_timeout(
            std::chrono::milliseconds(config.connect_timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config.read_timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(config.read_timeout_ms));
        auto res = client.Post(endpoint.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw GradingError("grader request failed with HTTP " + std::to_string(res->status));
        }
        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) {
            throw GradingError("grader returned a non-JSON response body");
        }
        if (!reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty() || !reply["choices"][0].contains("message") ||
            !reply["choices"][0]["message"].contains("content") ||
            !reply["choices"][0]["message"]["content"].is_string()) {
            throw GradingError("grader response is missing choices[0].message.content");
        }
        return reply["choices"][0]["message"]["content"].get<std::string>();
    }
    throw GradingError("grader request failed after " + std::to_string(config.max_retries + 1) +
                       " attempts; last error: " + last_error);
}

}  // namespace

GradePair grade_with_remote(const RemoteGraderConfig& config,
                            const std::string& question, const std::string& predicted,
                            const std::string& ground_truth) {
    GradePair pair;
    pair.factuality = parse_factuality_reply(
        post_chat(config, render_factuality_prompt(question, ground_truth, predicted)));
    pair.quality = parse_quality_reply(
        post_chat(config, render_quality_prompt(question, predicted, ground_truth)));
    return pair;
}

struct RemoteGrader::Impl {
    RemoteGraderConfig config;
    std::counting_semaphore<> slots;

    explicit Impl(RemoteGraderConfig cfg)
        : config(std::move(cfg)), slots(config.max_in_flight) {}
};

RemoteGrader::RemoteGrader(RemoteGraderConfig config) {
    if (config.max_in_flight < 1) {
        throw ConfigError("grader max_in_flight must be at least 1");
    }
    impl_ = std::make_unique<Impl>(std::move(config));
}

RemoteGrader::~RemoteGrader() = default;

GradePair RemoteGrader::grade(const std::string& question, const std::string& predicted,
                              const std::string& ground_truth) {
    impl_->slots.acquire();
    try {
        GradePair pair = grade_with_remote(impl_->config, question, predicted, ground_truth);
        impl_->slots.release();
        return pair;
    } catch (...) {
        impl_->slots.release();
        throw;
    }
}

}  // namespace fusion
