#pragma once

// Encoder contract plus the bundled desk-scale implementation: a single
// trainable linear map W (dim x buckets) applied to L2-normalized hashed
// bag-of-token features, shared between queries and documents. score(q, d)
// is the inner product of the two embeddings. The map is small enough to
// train on a laptop yet exposes the exact analytic gradients the trainer
// verifies against finite differences.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "annoret/rng.hpp"

namespace annoret {

class EncoderModel {
   public:
    virtual ~EncoderModel() = default;
    virtual int dim() const = 0;
    virtual std::vector<double> encode_query(const std::string& text) const = 0;
    virtual std::vector<double> encode_doc(const std::string& text) const = 0;
};

// Sparse hashed feature vector; entries are (bucket, weight), bucket-sorted.
struct SparseVec {
    std::vector<std::pair<int, double>> entries;
};

class HashedBowEncoder : public EncoderModel {
   public:
    HashedBowEncoder(int dim, int buckets, std::uint64_t hash_seed = kDefaultHashSeed);

    int dim() const override { return dim_; }
    int buckets() const { return buckets_; }
    std::uint64_t hash_seed() const { return hash_seed_; }

    // W ~ scale * N(0,1), drawn from the given stream.
    void init_random(DetRng& rng, double scale);

    SparseVec featurize(const std::string& text) const;
    std::vector<double> embed(const SparseVec& features) const;

    std::vector<double> encode_query(const std::string& text) const override;
    std::vector<double> encode_doc(const std::string& text) const override;

    static double score(const std::vector<double>& query_emb, const std::vector<double>& doc_emb);

    // d score(q,d) / d W[k][c] = emb_d[k]*phi_q[c] + emb_q[k]*phi_d[c];
    // accumulates coeff times that into grad (same layout as parameters()).
    void accumulate_score_gradient(const SparseVec& phi_q, const std::vector<double>& emb_q,
                                   const SparseVec& phi_d, const std::vector<double>& emb_d,
                                   double coeff, std::vector<double>& grad) const;

    std::vector<double>& parameters() { return w_; }
    const std::vector<double>& parameters() const { return w_; }

    // Versioned binary checkpoint (magic "ANRT"); the CLI adds a JSON
    // sidecar next to it.
    void save(const std::filesystem::path& path) const;
    static HashedBowEncoder load(const std::filesystem::path& path);

    static constexpr std::uint64_t kDefaultHashSeed = 0xcbf29ce484222325ULL;

   private:
    int dim_;
    int buckets_;
    std::uint64_t hash_seed_;
    std::vector<double> w_;  // row-major dim x buckets
};

}  // namespace annoret
