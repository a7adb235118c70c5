#include "annoret/pool.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "annoret/util.hpp"

namespace annoret {

std::string to_string(PosStrategy s) {
    switch (s) {
        case PosStrategy::PosOne: return "Pos-one";
        case PosStrategy::PosAvg: return "Pos-avg";
        case PosStrategy::PosAll: return "Pos-all";
    }
    return "Pos-one";
}

std::string to_string(InclusionMode m) {
    switch (m) {
        case InclusionMode::Exclusion: return "Exclusion";
        case InclusionMode::Random: return "Random";
        case InclusionMode::Inclusion: return "Inclusion";
    }
    return "Random";
}

PosStrategy pos_strategy_from_string(const std::string& s) {
    std::string v = to_lower(s);
    if (v == "pos-one" || v == "pos_one" || v == "one") return PosStrategy::PosOne;
    if (v == "pos-avg" || v == "pos_avg" || v == "avg") return PosStrategy::PosAvg;
    if (v == "pos-all" || v == "pos_all" || v == "all") return PosStrategy::PosAll;
    throw config_error("unknown positive sampling strategy: " + s);
}

InclusionMode inclusion_mode_from_string(const std::string& s) {
    std::string v = to_lower(s);
    if (v == "exclusion") return InclusionMode::Exclusion;
    if (v == "random") return InclusionMode::Random;
    if (v == "inclusion") return InclusionMode::Inclusion;
    throw config_error("unknown inclusion mode: " + s);
}

CandidatePool build_pool(const std::string& query_id,
                         const std::vector<RunFile>& source_runs,
                         const RelevanceJudgments& qrels, int n, int depth) {
    if (n < 1) throw data_error("pool size n must be >= 1");

    CandidatePool pool;
    pool.query_id = query_id;

    std::set<std::string> positive_set;
    for (const auto& did : qrels.positives(query_id)) {
        positive_set.insert(did);
        pool.human_positive_ids.push_back(did);
        pool.source_tags[did] = "qrels";
    }

    std::vector<std::pair<std::vector<std::string>, std::string>> lists;
    for (const auto& run : source_runs) {
        if (!run.has_query(query_id)) continue;
        std::vector<std::string> ids;
        const auto& ranking = run.ranking(query_id);
        for (std::size_t i = 0; i < ranking.size() && (int)i < depth; ++i) {
            ids.push_back(ranking[i].doc_id);
        }
        lists.emplace_back(std::move(ids), run.tag);
    }
    if (lists.empty()) {
        throw data_error("no source run contains query " + query_id);
    }

    std::set<std::string> seen;
    std::size_t longest = 0;
    for (const auto& [ids, tag] : lists) longest = std::max(longest, ids.size());
    for (std::size_t round = 0; round < longest; ++round) {
        for (const auto& [ids, tag] : lists) {
            if (round >= ids.size()) continue;
            const auto& did = ids[round];
            if (!seen.insert(did).second) continue;
            if (positive_set.count(did)) continue;
            if ((int)pool.hard_negative_ids.size() < n) {
                pool.hard_negative_ids.push_back(did);
                pool.source_tags[did] = tag;
            }
        }
    }
    if ((int)pool.hard_negative_ids.size() < n) {
        throw data_error("pool underfull (" + std::to_string(pool.hard_negative_ids.size()) +
                         " available) for query " + query_id);
    }
    return pool;
}

EffectiveLabels labels_from_qrels(const CandidatePool& pool) {
    EffectiveLabels labels;
    labels.positive_ids = pool.human_positive_ids;
    labels.candidate_ids = pool.human_positive_ids;
    labels.candidate_ids.insert(labels.candidate_ids.end(), pool.hard_negative_ids.begin(),
                                pool.hard_negative_ids.end());
    return labels;
}

EffectiveLabels apply_inclusion_mode(const CandidatePool& pool,
                                     const AnnotationRecord& llm_record,
                                     InclusionMode mode, int m) {
    std::set<std::string> human(pool.human_positive_ids.begin(),
                                pool.human_positive_ids.end());
    EffectiveLabels labels;
    switch (mode) {
        case InclusionMode::Random:
            labels.positive_ids = llm_record.positive_ids;
            labels.candidate_ids = llm_record.candidate_ids;
            break;
        case InclusionMode::Exclusion:
            for (const auto& d : llm_record.positive_ids)
                if (!human.count(d)) labels.positive_ids.push_back(d);
            for (const auto& d : llm_record.candidate_ids)
                if (!human.count(d)) labels.candidate_ids.push_back(d);
            break;
        case InclusionMode::Inclusion: {
            if ((int)pool.human_positive_ids.size() > m) {
                throw data_error("query " + pool.query_id + ": " +
                                 std::to_string(pool.human_positive_ids.size()) +
                                 " human positives cannot fit in instances with m=" +
                                 std::to_string(m));
            }
            labels.positive_ids = llm_record.positive_ids;
            labels.candidate_ids = llm_record.candidate_ids;
            std::set<std::string> pos(labels.positive_ids.begin(), labels.positive_ids.end());
            std::set<std::string> cand(labels.candidate_ids.begin(), labels.candidate_ids.end());
            for (const auto& d : pool.human_positive_ids) {
                if (!cand.count(d)) labels.candidate_ids.push_back(d);
                if (!pos.count(d)) labels.positive_ids.push_back(d);
                labels.forced_positive_ids.push_back(d);
            }
            break;
        }
    }
    return labels;
}

int compute_pos_avg_target(const std::vector<std::size_t>& per_query_positive_counts) {
    if (per_query_positive_counts.empty()) return 1;
    double sum = 0.0;
    for (auto c : per_query_positive_counts) sum += (double)c;
    double mean = sum / (double)per_query_positive_counts.size();
    return std::max(1, (int)std::floor(mean + 0.5));
}

std::optional<TrainingInstance> try_sample_instance(const EffectiveLabels& labels,
                                                    const SamplingConfig& config,
                                                    const std::string& query_id,
                                                    DetRng& rng) {
    if (labels.positive_ids.empty()) return std::nullopt;
    const int m = config.m;
    const int total = m + 1;
    if ((int)labels.candidate_ids.size() < total) {
        throw data_error("query " + query_id + ": only " +
                         std::to_string(labels.candidate_ids.size()) +
                         " candidates for instance size " + std::to_string(total));
    }

    int target = 1;
    switch (config.pos_strategy) {
        case PosStrategy::PosOne:
            target = 1;
            break;
        case PosStrategy::PosAvg:
            if (config.pos_avg_target < 1) {
                throw config_error("Pos-avg requires pos_avg_target to be computed first");
            }
            target = std::min(config.pos_avg_target, (int)labels.positive_ids.size());
            break;
        case PosStrategy::PosAll:
            target = (int)labels.positive_ids.size();
            break;
    }
    // Cap at m so every instance keeps at least one non-positive slot.
    target = std::min(target, m);
    target = std::max(target, (int)labels.forced_positive_ids.size());

    std::set<std::string> forced(labels.forced_positive_ids.begin(),
                                 labels.forced_positive_ids.end());
    std::vector<std::string> optional_pos;
    for (const auto& d : labels.positive_ids)
        if (!forced.count(d)) optional_pos.push_back(d);

    TrainingInstance inst;
    inst.query_id = query_id;
    inst.positive_ids = labels.forced_positive_ids;
    int extra = target - (int)inst.positive_ids.size();
    if (extra > 0) {
        auto picked = rng.sample(optional_pos, std::min<std::size_t>(extra, optional_pos.size()));
        inst.positive_ids.insert(inst.positive_ids.end(), picked.begin(), picked.end());
    }

    std::set<std::string> chosen(inst.positive_ids.begin(), inst.positive_ids.end());
    std::set<std::string> positive_set(labels.positive_ids.begin(), labels.positive_ids.end());
    std::vector<std::string> negatives;
    std::vector<std::string> leftover_pos;
    for (const auto& d : labels.candidate_ids) {
        if (chosen.count(d)) continue;
        if (positive_set.count(d)) {
            leftover_pos.push_back(d);
        } else {
            negatives.push_back(d);
        }
    }

    int fill = total - (int)inst.positive_ids.size();
    std::vector<std::string> fill_pool;
    if (config.pos_strategy == PosStrategy::PosOne) {
        // Fill slots draw from remaining positives and negatives alike.
        fill_pool = leftover_pos;
        fill_pool.insert(fill_pool.end(), negatives.begin(), negatives.end());
    } else {
        fill_pool = negatives;
        if ((int)fill_pool.size() < fill) {
            // Not enough negatives; backfill the shortfall from the positives
            // we left out, keeping every negative in the instance.
            std::size_t shortfall = (std::size_t)(fill - (int)fill_pool.size());
            auto extra = rng.sample(leftover_pos, std::min(shortfall, leftover_pos.size()));
            fill_pool.insert(fill_pool.end(), extra.begin(), extra.end());
        }
    }
    if ((int)fill_pool.size() < fill) {
        throw data_error("query " + query_id + ": cannot fill instance, need " +
                         std::to_string(fill) + " more docs but only " +
                         std::to_string(fill_pool.size()) + " remain");
    }
    inst.negative_ids = rng.sample(fill_pool, (std::size_t)fill);
    return inst;
}

TrainingInstance sample_instance(const EffectiveLabels& labels, const SamplingConfig& config,
                                 const std::string& query_id, DetRng& rng) {
    auto inst = try_sample_instance(labels, config, query_id, rng);
    if (!inst) throw data_error("query " + query_id + ": no labeled positives to sample");
    return *inst;
}

void write_pools(const std::vector<CandidatePool>& pools, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& p : pools) {
        nlohmann::json j;
        j["query_id"] = p.query_id;
        j["positives"] = p.human_positive_ids;
        j["negatives"] = p.hard_negative_ids;
        j["sources"] = p.source_tags;
        out << j.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

std::vector<CandidatePool> read_pools(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path.string());
    std::vector<CandidatePool> pools;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad pool record: " + e.what());
        }
        CandidatePool p;
        p.query_id = j.at("query_id").get<std::string>();
        p.human_positive_ids = j.at("positives").get<std::vector<std::string>>();
        p.hard_negative_ids = j.at("negatives").get<std::vector<std::string>>();
        if (j.contains("sources")) {
            p.source_tags = j["sources"].get<std::map<std::string, std::string>>();
        }
        pools.push_back(std::move(p));
    }
    return pools;
}

}  // namespace annoret
