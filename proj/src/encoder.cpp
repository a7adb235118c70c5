#include "annoret/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "annoret/util.hpp"

namespace annoret {

namespace {

constexpr char kMagic[4] = {'A', 'N', 'R', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw format_error("truncated checkpoint while reading " + what);
    return value;
}

}  // namespace

HashedBowEncoder::HashedBowEncoder(int dim, int buckets, std::uint64_t hash_seed)
    : dim_(dim), buckets_(buckets), hash_seed_(hash_seed) {
    if (dim < 1 || buckets < 1) throw config_error("encoder dim and buckets must be >= 1");
    w_.assign((std::size_t)dim_ * buckets_, 0.0);
}

void HashedBowEncoder::init_random(DetRng& rng, double scale) {
    for (auto& x : w_) x = scale * rng.normal();
}

SparseVec HashedBowEncoder::featurize(const std::string& text) const {
    std::map<int, double> counts;
    for (const auto& tok : tokenize(text)) {
        int bucket = (int)(fnv1a64(tok, hash_seed_) % (std::uint64_t)buckets_);
        counts[bucket] += 1.0;
    }
    double norm = 0.0;
    for (const auto& [b, c] : counts) norm += c * c;
    norm = std::sqrt(norm);
    SparseVec v;
    v.entries.reserve(counts.size());
    for (const auto& [b, c] : counts) {
        v.entries.emplace_back(b, norm > 0.0 ? c / norm : 0.0);
    }
    return v;
}

std::vector<double> HashedBowEncoder::embed(const SparseVec& features) const {
    std::vector<double> e(dim_, 0.0);
    for (const auto& [bucket, weight] : features.entries) {
        const double* col = w_.data() + bucket;
        for (int k = 0; k < dim_; ++k) {
            e[k] += col[(std::size_t)k * buckets_] * weight;
        }
    }
    return e;
}

std::vector<double> HashedBowEncoder::encode_query(const std::string& text) const {
    return embed(featurize(text));
}

std::vector<double> HashedBowEncoder::encode_doc(const std::string& text) const {
    return embed(featurize(text));
}

double HashedBowEncoder::score(const std::vector<double>& query_emb,
                               const std::vector<double>& doc_emb) {
    double s = 0.0;
    for (std::size_t k = 0; k < query_emb.size(); ++k) s += query_emb[k] * doc_emb[k];
    return s;
}

void HashedBowEncoder::accumulate_score_gradient(const SparseVec& phi_q,
                                                 const std::vector<double>& emb_q,
                                                 const SparseVec& phi_d,
                                                 const std::vector<double>& emb_d,
                                                 double coeff, std::vector<double>& grad) const {
    for (const auto& [bucket, weight] : phi_q.entries) {
        double cw = coeff * weight;
        double* col = grad.data() + bucket;
        for (int k = 0; k < dim_; ++k) {
            col[(std::size_t)k * buckets_] += cw * emb_d[k];
        }
    }
    for (const auto& [bucket, weight] : phi_d.entries) {
        double cw = coeff * weight;
        double* col = grad.data() + bucket;
        for (int k = 0; k < dim_; ++k) {
            col[(std::size_t)k * buckets_] += cw * emb_q[k];
        }
    }
}

void HashedBowEncoder::save(const std::filesystem::path& path) const {
    std::ostringstream out(std::ios::out | std::ios::binary);
    out.write(kMagic, 4);
    write_raw<std::uint32_t>(out, kVersion);
    write_raw<std::uint32_t>(out, (std::uint32_t)dim_);
    write_raw<std::uint32_t>(out, (std::uint32_t)buckets_);
    write_raw<std::uint64_t>(out, hash_seed_);
    write_raw<std::uint64_t>(out, (std::uint64_t)w_.size());
    out.write(reinterpret_cast<const char*>(w_.data()), (std::streamsize)(w_.size() * 8));
    write_file_atomic(path, out.str());
}

HashedBowEncoder HashedBowEncoder::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw format_error(path.string() + ": not an encoder checkpoint (bad magic)");
    }
    auto version = read_raw<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw format_error(path.string() + ": unsupported checkpoint version " +
                           std::to_string(version));
    }
    auto dim = read_raw<std::uint32_t>(in, "dim");
    auto buckets = read_raw<std::uint32_t>(in, "buckets");
    auto hash_seed = read_raw<std::uint64_t>(in, "hash_seed");
    auto count = read_raw<std::uint64_t>(in, "parameter count");
    if (count != (std::uint64_t)dim * buckets) {
        throw format_error(path.string() + ": parameter count mismatch");
    }
    HashedBowEncoder enc((int)dim, (int)buckets, hash_seed);
    in.read(reinterpret_cast<char*>(enc.w_.data()), (std::streamsize)(count * 8));
    if (!in) throw format_error(path.string() + ": truncated parameter block");
    return enc;
}

}  // namespace annoret
