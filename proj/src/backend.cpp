#include "annoret/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "annoret/util.hpp"

namespace annoret {

namespace {

const std::set<std::string> kStopwords = {
    "a", "an", "the", "of", "in", "on", "at", "to", "is", "are", "was", "and",
    "or", "for", "by", "with", "what", "who", "when", "where", "which", "how",
};

std::vector<std::string> content_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (auto& t : tokenize(text)) {
        if (!kStopwords.count(t)) out.push_back(std::move(t));
    }
    return out;
}

// What the default templates put into a prompt, recovered line by line.
struct ParsedPrompt {
    std::string question;
    std::string answer;
    std::vector<std::string> passages;
};

ParsedPrompt parse_prompt(const std::string& prompt) {
    ParsedPrompt p;
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("Question: ", 0) == 0) {
            p.question = trim(line.substr(10));
        } else if (line.rfind("Reference answer: ", 0) == 0) {
            p.answer = trim(line.substr(18));
        } else if (line.size() > 2 && line[0] == '[') {
            auto close = line.find(']');
            if (close == std::string::npos || close + 1 >= line.size()) continue;
            bool digits = close > 1;
            for (std::size_t i = 1; i < close; ++i) {
                if (!std::isdigit((unsigned char)line[i])) digits = false;
            }
            if (digits && line[close + 1] == ' ') {
                p.passages.push_back(line.substr(close + 2));
            }
        }
    }
    return p;
}

std::string format_selection(const std::vector<std::size_t>& picked) {
    if (picked.empty()) return "none";
    std::ostringstream out;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        if (i) out << ", ";
        out << "[" << (picked[i] + 1) << "]";
    }
    return out.str();
}

std::size_t overlap_count(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    std::size_t n = 0;
    for (const auto& t : sa)
        if (sb.count(t)) ++n;
    return n;
}

}  // namespace

double LLMBackend::answer_loglikelihood(const std::string&, const std::string&,
                                        const std::string&) {
    throw backend_error("backend " + name() + " cannot score answer likelihoods");
}

MockBackend::MockBackend(const std::string& policy, std::uint64_t seed)
    : policy_(policy), seed_(seed) {
    if (policy_ == "refuse") {
        refuse_ = true;
    } else if (policy_.rfind("lexical", 0) == 0) {
        auto fp = policy_.find("-fp");
        if (fp != std::string::npos) {
            try {
                fp_rate_ = std::stod(policy_.substr(fp + 3)) / 100.0;
            } catch (const std::exception&) {
                throw config_error("bad mock policy: " + policy_);
            }
            if (fp_rate_ < 0.0 || fp_rate_ > 1.0) {
                throw config_error("mock false-positive rate out of range: " + policy_);
            }
        }
    } else {
        throw config_error("unknown mock policy: " + policy_);
    }
}

std::string MockBackend::name() const {
    return "mock:" + policy_ + ":" + std::to_string(seed_);
}

bool MockBackend::flips_positive(const std::string& query, const std::string& passage) const {
    if (fp_rate_ <= 0.0) return false;
    std::uint64_t h = hash_mix(hash_mix(seed_, fnv1a64(query)), fnv1a64(passage));
    double u = (double)(h >> 11) * 0x1.0p-53;
    return u < fp_rate_;
}

std::string MockBackend::complete(const std::string& prompt, int /*max_output_tokens*/) {
    if (refuse_) return "I cannot determine the answer to this request.";

    ParsedPrompt p = parse_prompt(prompt);

    if (prompt.find("Rank all passages") != std::string::npos) {
        auto ans = tokenize(p.answer);
        std::vector<std::size_t> order(p.passages.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::vector<std::size_t> score(p.passages.size());
        for (std::size_t i = 0; i < p.passages.size(); ++i) {
            score[i] = overlap_count(ans, tokenize(p.passages[i]));
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
        std::ostringstream out;
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (i) out << " > ";
            out << "[" << (order[i] + 1) << "]";
        }
        return out.str();
    }

    if (prompt.find("useful for producing") != std::string::npos) {
        std::vector<std::size_t> picked;
        for (std::size_t i = 0; i < p.passages.size(); ++i) {
            bool useful = !p.answer.empty() && contains_ci(p.passages[i], p.answer);
            if (useful || flips_positive(p.question, p.passages[i])) picked.push_back(i);
        }
        return format_selection(picked);
    }

    if (prompt.find("topically relevant") != std::string::npos) {
        auto q = content_tokens(p.question);
        std::vector<std::size_t> picked;
        for (std::size_t i = 0; i < p.passages.size(); ++i) {
            bool relevant = overlap_count(q, content_tokens(p.passages[i])) >= 1;
            if (relevant || flips_positive(p.question, p.passages[i])) picked.push_back(i);
        }
        return format_selection(picked);
    }

    if (prompt.find("Write a short answer") != std::string::npos ||
        prompt.find("Use the passages to answer") != std::string::npos) {
        if (p.passages.empty()) return "UNKNOWN";
        std::string s = first_sentence(p.passages.front());
        return s.empty() ? "UNKNOWN" : s;
    }

    return "UNKNOWN";
}

double MockBackend::answer_loglikelihood(const std::string& /*query*/,
                                         const std::string& passage,
                                         const std::string& answer) {
    auto ans = tokenize(answer);
    std::set<std::string> distinct(ans.begin(), ans.end());
    std::size_t hit = overlap_count(ans, tokenize(passage));
    return std::log((1.0 + (double)hit) / (1.0 + (double)distinct.size()));
}

HttpBackend::HttpBackend(const std::string& url, const std::string& api_key,
                         const std::string& model)
    : api_key_(api_key), model_(model) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw config_error("backend URL must start with http:// or https://: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        base_ = url;
        path_ = "/";
    } else {
        base_ = url.substr(0, path_start);
        path_ = url.substr(path_start);
    }
}

std::string HttpBackend::name() const {
    return model_.empty() ? "http" : "http:" + model_;
}

std::string HttpBackend::complete(const std::string& prompt, int max_output_tokens) {
    httplib::Client client(base_);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    nlohmann::json body;
    body["model"] = model_;
    body["prompt"] = prompt;
    body["max_tokens"] = max_output_tokens;
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw backend_error("request to " + base_ + " failed: " +
                            httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw backend_error("backend returned HTTP " + std::to_string(res->status) + ": " +
                            res->body.substr(0, 200));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw backend_error(std::string("backend returned non-JSON body: ") + e.what());
    }
    if (j.contains("completion") && j["completion"].is_string()) {
        return j["completion"].get<std::string>();
    }
    if (j.contains("text") && j["text"].is_string()) {
        return j["text"].get<std::string>();
    }
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c = j["choices"][0];
        if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
        if (c.contains("message") && c["message"].contains("content")) {
            return c["message"]["content"].get<std::string>();
        }
    }
    throw backend_error("backend response has no completion field");
}

std::unique_ptr<LLMBackend> make_backend(const std::string& spec) {
    if (spec == "mock" || spec.rfind("mock:", 0) == 0) {
        std::string policy = "lexical";
        std::uint64_t seed = 0;
        auto parts = split(spec, ':');
        if (parts.size() > 3) throw config_error("bad backend spec: " + spec);
        if (parts.size() >= 2 && !parts[1].empty()) policy = parts[1];
        if (parts.size() == 3 && !parts[2].empty()) {
            try {
                seed = std::stoull(parts[2]);
            } catch (const std::exception&) {
                throw config_error("bad mock seed in backend spec: " + spec);
            }
        }
        return std::make_unique<MockBackend>(policy, seed);
    }
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        throw config_error(
            "backend endpoint URLs belong in ANNOTATOR_API_URL, not the config; "
            "use backend = \"http[:<model>]\"");
    }
    if (spec == "http" || spec.rfind("http:", 0) == 0) {
        const char* url = std::getenv("ANNOTATOR_API_URL");
        if (!url || !*url) {
            throw config_error("backend \"" + spec + "\" requires ANNOTATOR_API_URL to be set");
        }
        const char* key = std::getenv("ANNOTATOR_API_KEY");
        std::string model = spec.size() > 5 ? spec.substr(5) : "";
        return std::make_unique<HttpBackend>(url, key ? key : "", model);
    }
    throw config_error("unknown backend spec: " + spec +
                       " (expected mock:<policy>:<seed> or http[:<model>])");
}

}  // namespace annoret
