#pragma once

// LLM backend contract plus the two bundled implementations: a deterministic
// mock for tests/experiments and an HTTP client for a real completion
// endpoint. Backends are selected by a spec string:
//   mock:<policy>:<seed>   e.g. mock:lexical:7, mock:lexical-fp20:3, mock:refuse:0
//   http[:<model>]         endpoint/token taken from ANNOTATOR_API_URL /
//                          ANNOTATOR_API_KEY (never from config files)

#include <cstdint>
#include <memory>
#include <string>

namespace annoret {

class LLMBackend {
   public:
    virtual ~LLMBackend() = default;

    // Return a completion for the prompt or throw backend_error.
    virtual std::string complete(const std::string& prompt, int max_output_tokens) = 0;

    virtual std::string name() const = 0;

    // Mean per-token log-likelihood of `answer` given (query, passage).
    // Only some backends can score likelihoods; the default throws
    // backend_error (capability error).
    virtual double answer_loglikelihood(const std::string& query, const std::string& passage,
                                        const std::string& answer);
    virtual bool supports_likelihood() const { return false; }
};

// Deterministic backend that understands the default prompt templates.
// Policies:
//   lexical        RelSel = shares a content token with the question;
//                  UtilSel = passage contains the reference answer;
//                  ranking = answer-token overlap, ties in input order;
//                  answers = first sentence of the first passage.
//   lexical-fpNN   same, but each unselected passage flips to selected with
//                  probability NN% (hash of seed/question/passage, so flips
//                  are stable across calls and runs).
//   refuse         always replies with an unparseable refusal.
class MockBackend : public LLMBackend {
   public:
    MockBackend(const std::string& policy, std::uint64_t seed);

    std::string complete(const std::string& prompt, int max_output_tokens) override;
    std::string name() const override;
    double answer_loglikelihood(const std::string& query, const std::string& passage,
                                const std::string& answer) override;
    bool supports_likelihood() const override { return true; }

   private:
    std::string policy_;
    std::uint64_t seed_ = 0;
    double fp_rate_ = 0.0;
    bool refuse_ = false;

    bool flips_positive(const std::string& query, const std::string& passage) const;
};

// POSTs {"model","prompt","max_tokens"} as JSON to the endpoint in
// ANNOTATOR_API_URL with an optional Bearer token from ANNOTATOR_API_KEY.
// Accepts {"completion"}, {"text"} or OpenAI-style {"choices":[...]}
// response bodies.
class HttpBackend : public LLMBackend {
   public:
    HttpBackend(const std::string& url, const std::string& api_key, const std::string& model);

    std::string complete(const std::string& prompt, int max_output_tokens) override;
    std::string name() const override;

   private:
    std::string base_;   // scheme://host[:port]
    std::string path_;   // endpoint path
    std::string api_key_;
    std::string model_;
};

std::unique_ptr<LLMBackend> make_backend(const std::string& spec);

}  // namespace annoret
