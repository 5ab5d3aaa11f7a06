#ifndef EIMLAB_TEXT_CODEC_HPP
#define EIMLAB_TEXT_CODEC_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace eimlab {

// A prompt token is (attribute, value), e.g. ("color", "red"). The reserved
// null token is ("", "") and realizes the CFG unconditional branch.
using Token = std::pair<std::string, std::string>;

inline Token null_token() { return {"", ""}; }
std::string token_name(const Token& tok);

struct TextEmbedding {
    Eigen::MatrixXd rows;            // l x d
    std::vector<Token> tokens;       // length l

    int length() const { return static_cast<int>(rows.rows()); }
    int width() const { return static_cast<int>(rows.cols()); }
    // row index of the token for `attribute`, -1 if absent
    int find_attribute(const std::string& attribute) const;
};

struct PooledEmbedding {
    Eigen::VectorXd vector;
};

enum class Subspace { Text, Image };

struct EditDirection {
    Subspace subspace = Subspace::Text;
    Eigen::MatrixXd delta;
    double degree = 0.0;
};

struct EditEntry {
    std::string attribute;
    std::string source_value;
    std::string target_value;
    double degree = 1.0;
};

// Multi-attribute plan; entries act on disjoint attributes (diagonal Lambda).
struct EditPlan {
    std::vector<EditEntry> entries;
};

// Deterministic token-embedding table over a small semantic vocabulary.
// Rows are seeded standard-normal draws normalized to unit length; with
// d >= 32 distinct tokens are near-orthogonal.
class SemanticVocabulary {
public:
    SemanticVocabulary(std::uint64_t seed,
                       std::vector<std::pair<std::string, std::vector<std::string>>> attributes,
                       int width);

    static SemanticVocabulary default_vocabulary(std::uint64_t seed = 17);

    int width() const { return width_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<std::pair<std::string, std::vector<std::string>>>& attributes() const {
        return attributes_;
    }
    const std::vector<std::string>* values_of(const std::string& attribute) const;

    bool has_token(const Token& tok) const;
    const Eigen::VectorXd& embedding(const Token& tok) const;

    TextEmbedding encode_prompt(const std::vector<Token>& prompt) const;
    TextEmbedding null_prompt() const;

    std::string to_json() const;
    static SemanticVocabulary from_json(const std::string& text);

private:
    std::uint64_t seed_;
    int width_;
    std::vector<std::pair<std::string, std::vector<std::string>>> attributes_;
    std::map<Token, Eigen::VectorXd> table_;
};

PooledEmbedding pool(const TextEmbedding& emb);

EditDirection text_direction(const TextEmbedding& z_c0, const TextEmbedding& z_c1, double alpha);

TextEmbedding apply_text_direction(const TextEmbedding& z_c0, const EditDirection& n);

TextEmbedding multi_attr_manipulate(const TextEmbedding& c0, const TextEmbedding& c1,
                                    const EditPlan& plan);

Eigen::VectorXd extended_direction(const Eigen::VectorXd& n_i, int block_index, int block_count);

} // namespace eimlab

#endif
