#include "eimlab/gaussian_model.hpp"

#include <cmath>
#include <stdexcept>

namespace eimlab {

GaussianFactorModel::GaussianFactorModel(const SemanticVocabulary& vocab,
                                         std::vector<FactorBinding> bindings,
                                         Eigen::MatrixXd loading, Eigen::VectorXd base,
                                         Eigen::MatrixXd mixing, int token_count, int token_width,
                                         double var_cond, double var_free)
    : bindings_(std::move(bindings)), loading_(std::move(loading)), base_(std::move(base)),
      mixing_(std::move(mixing)), v_(token_count), d_(token_width), var_cond_(var_cond),
      var_free_(var_free) {
    const long D = static_cast<long>(v_) * d_;
    const long m = static_cast<long>(bindings_.size());
    if (loading_.rows() != D || loading_.cols() != m)
        throw std::invalid_argument("GaussianFactorModel: loading must be D x m");
    if (base_.size() != D)
        throw std::invalid_argument("GaussianFactorModel: base must be D");
    if (mixing_.rows() != m || mixing_.cols() != m)
        throw std::invalid_argument("GaussianFactorModel: mixing must be m x m");
    if (!(var_cond_ > 0.0) || !(var_free_ > 0.0))
        throw std::invalid_argument("GaussianFactorModel: variances must be positive");
    if (var_cond_ >= var_free_)
        throw std::invalid_argument("GaussianFactorModel: var_cond must be below var_free");

    // Per-factor reading axis: least-squares u with <e_val, u> = value for
    // every value of the bound attribute. Linear reads make interpolated
    // token rows condition interpolated means with no approximation.
    reading_axes_.reserve(bindings_.size());
    for (const auto& b : bindings_) {
        const int k = static_cast<int>(b.values.size());
        if (k < 1)
            throw std::invalid_argument("GaussianFactorModel: binding without values");
        Eigen::MatrixXd E(k, vocab.width());
        Eigen::VectorXd y(k);
        int row = 0;
        for (const auto& [name, value] : b.values) {
            E.row(row) = vocab.embedding({b.attribute, name}).transpose();
            y(row) = value;
            ++row;
        }
        reading_axes_.push_back(E.completeOrthogonalDecomposition().solve(y));
    }
}

GaussianFactorModel GaussianFactorModel::make_synthetic(const SemanticVocabulary& vocab,
                                                        std::vector<FactorBinding> bindings,
                                                        int token_count, int token_width,
                                                        std::uint64_t seed, bool entangled) {
    const long D = static_cast<long>(token_count) * token_width;
    const long m = static_cast<long>(bindings.size());
    RngStream rng = derive_stream(seed, 0x6a55ULL);
    Eigen::MatrixXd G = rng.normal_matrix(static_cast<int>(D), static_cast<int>(m));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd A =
        qr.householderQ() * Eigen::MatrixXd::Identity(D, m);
    Eigen::VectorXd base = 0.1 * rng.normal_matrix(static_cast<int>(D), 1);
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);
    if (entangled) {
        for (long i = 0; i < m; ++i)
            for (long j = 0; j < m; ++j)
                if (i != j)
                    M(i, j) = 0.3;
    }
    return GaussianFactorModel(vocab, std::move(bindings), std::move(A), std::move(base),
                               std::move(M), token_count, token_width);
}

double GaussianFactorModel::value_of(int factor, const std::string& value_name) const {
    return bindings_.at(static_cast<std::size_t>(factor)).values.at(value_name);
}

Eigen::VectorXd GaussianFactorModel::flatten(const Eigen::MatrixXd& tokens) const {
    if (tokens.rows() != v_ || tokens.cols() != d_)
        throw std::invalid_argument("GaussianFactorModel: latent shape mismatch");
    Eigen::MatrixXd tr = tokens.transpose();
    return Eigen::Map<const Eigen::VectorXd>(tr.data(), tr.size());
}

Eigen::MatrixXd GaussianFactorModel::unflatten(const Eigen::VectorXd& vec) const {
    return Eigen::Map<const Eigen::MatrixXd>(vec.data(), d_, v_).transpose();
}

void GaussianFactorModel::conditioned_prior(const TextEmbedding& cond, Eigen::VectorXd& prior_mean,
                                            Eigen::VectorXd& prior_var,
                                            std::vector<bool>& pinned) const {
    const int m = factor_count();
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(m);
    pinned.assign(static_cast<std::size_t>(m), false);
    for (int i = 0; i < m; ++i) {
        const int row = cond.find_attribute(bindings_[static_cast<std::size_t>(i)].attribute);
        if (row >= 0) {
            raw(i) = cond.rows.row(row).dot(reading_axes_[static_cast<std::size_t>(i)]);
            pinned[static_cast<std::size_t>(i)] = true;
        }
    }
    prior_mean = mixing_ * raw;
    prior_var.resize(m);
    for (int i = 0; i < m; ++i)
        prior_var(i) = pinned[static_cast<std::size_t>(i)] ? var_cond_ : var_free_;
}

FactorPosterior GaussianFactorModel::analytic_posterior(const LatentImage& z_t,
                                                        const TextEmbedding& cond, int t,
                                                        const NoiseSchedule& sched) const {
    Eigen::VectorXd prior_mean, prior_var;
    std::vector<bool> pinned;
    conditioned_prior(cond, prior_mean, prior_var, pinned);

    const Eigen::VectorXd z = flatten(z_t.tokens);
    FactorPosterior post;
    if (t == 0) {
        post.mean = z;
        post.factor_mean = loading_.transpose() * (z - base_);
        post.factor_var = Eigen::VectorXd::Zero(factor_count());
        return post;
    }
    const double a = std::sqrt(sched.alpha_bar(t));
    const double b2 = 1.0 - sched.alpha_bar(t);

    // y = A^T (z_t - a*base) = a f + sqrt(b2) e with e ~ N(0, I_m); the
    // orthogonal complement of col(A) carries no information about f.
    const Eigen::VectorXd y = loading_.transpose() * (z - a * base_);
    const int m = factor_count();
    post.factor_mean.resize(m);
    post.factor_var.resize(m);
    for (int i = 0; i < m; ++i) {
        const double prec = 1.0 / prior_var(i) + a * a / b2;
        post.factor_var(i) = 1.0 / prec;
        post.factor_mean(i) = (prior_mean(i) / prior_var(i) + a * y(i) / b2) / prec;
    }
    post.mean = base_ + loading_ * post.factor_mean;
    return post;
}

Eigen::MatrixXd GaussianFactorModel::analytic_eps(const LatentImage& z_t,
                                                  const TextEmbedding& cond, int t,
                                                  const NoiseSchedule& sched) const {
    if (t < 1)
        throw std::invalid_argument("analytic_eps: t must be at least 1");
    const FactorPosterior post = analytic_posterior(z_t, cond, t, sched);
    const double a = std::sqrt(sched.alpha_bar(t));
    const double b = std::sqrt(1.0 - sched.alpha_bar(t));
    const Eigen::VectorXd z = flatten(z_t.tokens);
    return unflatten((z - a * post.mean) / b);
}

Eigen::MatrixXd GaussianFactorModel::predict(const LatentImage& z_t, const TextEmbedding& cond,
                                             int t, const NoiseSchedule& sched) const {
    return analytic_eps(z_t, cond, t, sched);
}

Eigen::VectorXd GaussianFactorModel::recover_factors(const LatentImage& z0) const {
    return loading_.transpose() * (flatten(z0.tokens) - base_);
}

LatentImage GaussianFactorModel::sample_latent(const Eigen::VectorXd& factors) const {
    if (factors.size() != factor_count())
        throw std::invalid_argument("sample_latent: factor count mismatch");
    LatentImage z;
    z.tokens = unflatten(base_ + loading_ * factors);
    z.timestep = 0;
    return z;
}

std::vector<FactorBinding> default_bindings(const SemanticVocabulary& vocab) {
    std::vector<FactorBinding> bindings;
    for (const auto& [attribute, values] : vocab.attributes()) {
        FactorBinding b;
        b.attribute = attribute;
        const int k = static_cast<int>(values.size());
        for (int i = 0; i < k; ++i)
            b.values[values[static_cast<std::size_t>(i)]] =
                k == 1 ? 0.5 : 0.2 + 0.6 * i / (k - 1);
        bindings.push_back(std::move(b));
    }
    return bindings;
}

} // namespace eimlab
