#include "eimlab/text_codec.hpp"

#include <stdexcept>

#include <json.hpp>

#include "eimlab/rng.hpp"

namespace eimlab {

std::string token_name(const Token& tok) {
    if (tok.first.empty() && tok.second.empty())
        return "<null>";
    return tok.first + "=" + tok.second;
}

int TextEmbedding::find_attribute(const std::string& attribute) const {
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].first == attribute)
            return static_cast<int>(i);
    return -1;
}

SemanticVocabulary::SemanticVocabulary(
    std::uint64_t seed,
    std::vector<std::pair<std::string, std::vector<std::string>>> attributes,
    int width)
    : seed_(seed), width_(width), attributes_(std::move(attributes)) {
    if (width_ < 1)
        throw std::invalid_argument("SemanticVocabulary: width must be positive");
    // One derived stream per token, keyed by its position in the declaration
    // order, so adding attributes later does not reshuffle existing rows.
    std::uint64_t index = 0;
    auto draw_row = [&](const Token& tok) {
        RngStream rng = derive_stream(seed_, 0x7e87'0000ULL + index++);
        Eigen::VectorXd v = rng.normal_matrix(width_, 1);
        v.normalize();
        table_.emplace(tok, std::move(v));
    };
    draw_row(null_token());
    for (const auto& [attr, values] : attributes_)
        for (const auto& val : values)
            draw_row({attr, val});
}

SemanticVocabulary SemanticVocabulary::default_vocabulary(std::uint64_t seed) {
    return SemanticVocabulary(
        seed,
        {{"color", {"red", "green", "blue"}},
         {"object", {"square", "circle"}},
         {"size", {"small", "large"}},
         {"expression", {"plain", "smile"}},
         {"coat", {"none", "purple"}}},
        32);
}

const std::vector<std::string>* SemanticVocabulary::values_of(const std::string& attribute) const {
    for (const auto& [attr, values] : attributes_)
        if (attr == attribute)
            return &values;
    return nullptr;
}

bool SemanticVocabulary::has_token(const Token& tok) const {
    return table_.count(tok) != 0;
}

const Eigen::VectorXd& SemanticVocabulary::embedding(const Token& tok) const {
    auto it = table_.find(tok);
    if (it == table_.end())
        throw std::invalid_argument("unknown token: " + token_name(tok));
    return it->second;
}

TextEmbedding SemanticVocabulary::encode_prompt(const std::vector<Token>& prompt) const {
    if (prompt.empty())
        throw std::invalid_argument("encode_prompt: empty prompt");
    TextEmbedding emb;
    emb.rows.resize(static_cast<int>(prompt.size()), width_);
    emb.tokens = prompt;
    for (std::size_t i = 0; i < prompt.size(); ++i)
        emb.rows.row(static_cast<int>(i)) = embedding(prompt[i]).transpose();
    return emb;
}

TextEmbedding SemanticVocabulary::null_prompt() const {
    return encode_prompt({null_token()});
}

std::string SemanticVocabulary::to_json() const {
    nlohmann::json j;
    j["seed"] = seed_;
    j["width"] = width_;
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& [attr, values] : attributes_)
        attrs.push_back({{"name", attr}, {"values", values}});
    j["attributes"] = attrs;
    return j.dump(2);
}

SemanticVocabulary SemanticVocabulary::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<std::pair<std::string, std::vector<std::string>>> attrs;
    for (const auto& a : j.at("attributes"))
        attrs.emplace_back(a.at("name").get<std::string>(),
                           a.at("values").get<std::vector<std::string>>());
    return SemanticVocabulary(j.at("seed").get<std::uint64_t>(), std::move(attrs),
                              j.at("width").get<int>());
}

PooledEmbedding pool(const TextEmbedding& emb) {
    if (emb.length() < 1)
        throw std::invalid_argument("pool: empty embedding");
    PooledEmbedding p;
    p.vector = emb.rows.colwise().mean().transpose();
    return p;
}

EditDirection text_direction(const TextEmbedding& z_c0, const TextEmbedding& z_c1, double alpha) {
    if (z_c0.rows.rows() != z_c1.rows.rows() || z_c0.rows.cols() != z_c1.rows.cols())
        throw std::invalid_argument("text_direction: shape mismatch");
    EditDirection n;
    n.subspace = Subspace::Text;
    n.delta = alpha * (z_c1.rows - z_c0.rows);
    n.degree = alpha;
    return n;
}

TextEmbedding apply_text_direction(const TextEmbedding& z_c0, const EditDirection& n) {
    if (n.subspace != Subspace::Text)
        throw std::invalid_argument("apply_text_direction: direction is not in the text subspace");
    if (n.delta.rows() != z_c0.rows.rows() || n.delta.cols() != z_c0.rows.cols())
        throw std::invalid_argument("apply_text_direction: shape mismatch");
    TextEmbedding out = z_c0;
    out.rows += n.delta;
    return out;
}

TextEmbedding multi_attr_manipulate(const TextEmbedding& c0, const TextEmbedding& c1,
                                    const EditPlan& plan) {
    if (c0.rows.rows() != c1.rows.rows() || c0.rows.cols() != c1.rows.cols())
        throw std::invalid_argument("multi_attr_manipulate: shape mismatch");
    TextEmbedding out = c0;
    for (const auto& entry : plan.entries) {
        const int r0 = c0.find_attribute(entry.attribute);
        const int r1 = c1.find_attribute(entry.attribute);
        if (r0 < 0 || r1 < 0 || r0 != r1)
            throw std::invalid_argument("multi_attr_manipulate: attribute '" + entry.attribute +
                                        "' not present at a common row");
        out.rows.row(r0) += entry.degree * (c1.rows.row(r0) - c0.rows.row(r0));
    }
    return out;
}

Eigen::VectorXd extended_direction(const Eigen::VectorXd& n_i, int block_index, int block_count) {
    if (block_index < 1 || block_index > block_count)
        throw std::invalid_argument("extended_direction: block index out of range");
    const int d = static_cast<int>(n_i.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<long>(block_count) * d);
    out.segment(static_cast<long>(block_index - 1) * d, d) = n_i;
    return out;
}

} // namespace eimlab
