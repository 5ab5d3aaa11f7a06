#include "eimlab/toy_model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "eimlab/rng.hpp"

namespace eimlab {

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
    Eigen::MatrixXd p(s.rows(), s.cols());
    for (long r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        Eigen::ArrayXd e = (s.row(r).array() - mx).exp();
        p.row(r) = (e / e.sum()).matrix();
    }
    return p;
}

// dS for P = softmax_rows(S): P .* (dP - rowsum(dP .* P))
Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& p, const Eigen::MatrixXd& dp) {
    Eigen::VectorXd dot = (dp.array() * p.array()).rowwise().sum();
    return (p.array() * (dp.array().colwise() - dot.array())).matrix();
}

Eigen::MatrixXd sinusoidal_table(int positions, int d) {
    Eigen::MatrixXd pos(positions, d);
    for (int i = 0; i < positions; ++i) {
        for (int k = 0; k < d / 2; ++k) {
            const double freq = std::pow(10000.0, -2.0 * k / d);
            pos(i, 2 * k) = std::sin(i * freq);
            pos(i, 2 * k + 1) = std::cos(i * freq);
        }
    }
    return pos;
}

} // namespace

struct ToyAttentionModel::Cache {
    int t = 0;
    int v = 0, l = 0;
    Eigen::MatrixXd text_in; // conditioning rows with positional offsets
    struct LayerCache {
        Eigen::MatrixXd x_in;               // input to self-attention
        Eigen::MatrixXd q, k, vv, o;        // self-attention intermediates
        std::vector<Eigen::MatrixXd> p;     // per head
        Eigen::MatrixXd x_self;             // after self-attention residual
        Eigen::MatrixXd qc, kc, vc, oc;     // cross-attention intermediates
        std::vector<Eigen::MatrixXd> pc;
        Eigen::MatrixXd x_mid;              // input to FFN
        Eigen::MatrixXd h1;                 // activation output
    };
    std::vector<LayerCache> layers;
    Eigen::MatrixXd x_final; // image rows feeding the output head
};

ToyAttentionModel::ToyAttentionModel(ToyConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.width % cfg_.heads != 0)
        throw std::invalid_argument("ToyAttentionModel: heads must divide width");
    const int d = cfg_.width;
    const int ff = cfg_.ffn_width;
    RngStream rng = derive_stream(seed, 0x70115ULL);
    const double ws = 0.5 / std::sqrt(static_cast<double>(d));
    const double fs = 0.5 / std::sqrt(static_cast<double>(ff));
    layers_.resize(static_cast<std::size_t>(cfg_.layers));
    for (auto& L : layers_) {
        L.Wq = ws * rng.normal_matrix(d, d);
        L.Wk = ws * rng.normal_matrix(d, d);
        L.Wv = ws * rng.normal_matrix(d, d);
        L.Wo = ws * rng.normal_matrix(d, d);
        if (cfg_.mode == ConditioningMode::CrossAttention) {
            L.Cq = ws * rng.normal_matrix(d, d);
            L.Ck = ws * rng.normal_matrix(d, d);
            L.Cv = ws * rng.normal_matrix(d, d);
            L.Co = ws * rng.normal_matrix(d, d);
        }
        L.W1 = ws * rng.normal_matrix(d, ff);
        L.b1 = Eigen::MatrixXd::Zero(1, ff);
        L.W2 = fs * rng.normal_matrix(ff, d);
        L.b2 = Eigen::MatrixXd::Zero(1, d);
    }
    temb_ = 0.01 * rng.normal_matrix(cfg_.max_timestep + 1, d);
    Wout_ = (1.0 / std::sqrt(static_cast<double>(d))) * rng.normal_matrix(d, d);
    bout_ = Eigen::MatrixXd::Zero(1, d);
    pos_ = sinusoidal_table(128, d);
}

std::vector<Eigen::MatrixXd*> ToyAttentionModel::param_views() {
    std::vector<Eigen::MatrixXd*> out;
    for (auto& L : layers_) {
        out.push_back(&L.Wq);
        out.push_back(&L.Wk);
        out.push_back(&L.Wv);
        out.push_back(&L.Wo);
        if (cfg_.mode == ConditioningMode::CrossAttention) {
            out.push_back(&L.Cq);
            out.push_back(&L.Ck);
            out.push_back(&L.Cv);
            out.push_back(&L.Co);
        }
        out.push_back(&L.W1);
        out.push_back(&L.b1);
        out.push_back(&L.W2);
        out.push_back(&L.b2);
    }
    out.push_back(&temb_);
    out.push_back(&Wout_);
    out.push_back(&bout_);
    return out;
}

std::vector<const Eigen::MatrixXd*> ToyAttentionModel::param_views() const {
    auto* self = const_cast<ToyAttentionModel*>(this);
    std::vector<const Eigen::MatrixXd*> out;
    for (auto* p : self->param_views())
        out.push_back(p);
    return out;
}

std::vector<std::string> ToyAttentionModel::param_names() const {
    std::vector<std::string> out;
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        for (const char* n : {"Wq", "Wk", "Wv", "Wo"})
            out.push_back(p + n);
        if (cfg_.mode == ConditioningMode::CrossAttention)
            for (const char* n : {"Cq", "Ck", "Cv", "Co"})
                out.push_back(p + n);
        for (const char* n : {"W1", "b1", "W2", "b2"})
            out.push_back(p + n);
    }
    out.push_back("temb");
    out.push_back("Wout");
    out.push_back("bout");
    return out;
}

std::vector<Eigen::MatrixXd> ToyAttentionModel::zero_grads() const {
    std::vector<Eigen::MatrixXd> g;
    for (const auto* p : param_views())
        g.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    return g;
}

std::uint64_t ToyAttentionModel::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* p : param_views()) {
        const double* data = p->data();
        const auto* bytes = reinterpret_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(p->size()); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// Self-attention sublayer shared by both modes. Returns the pre-projection
// head concatenation and fills q/k/v/p caches.
static Eigen::MatrixXd attend(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                              const Eigen::MatrixXd& v, int heads,
                              std::vector<Eigen::MatrixXd>& p_cache) {
    const int d = static_cast<int>(q.cols());
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Eigen::MatrixXd o(q.rows(), d);
    p_cache.clear();
    for (int h = 0; h < heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        Eigen::MatrixXd p = softmax_rows(scale * (qh * kh.transpose()));
        o.middleCols(h * dh, dh) = p * vh;
        p_cache.push_back(std::move(p));
    }
    return o;
}

static void attend_backward(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                            const Eigen::MatrixXd& v, const std::vector<Eigen::MatrixXd>& p_cache,
                            const Eigen::MatrixXd& d_o, Eigen::MatrixXd& d_q, Eigen::MatrixXd& d_k,
                            Eigen::MatrixXd& d_v) {
    const int d = static_cast<int>(q.cols());
    const int heads = static_cast<int>(p_cache.size());
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    d_q.setZero(q.rows(), d);
    d_k.setZero(k.rows(), d);
    d_v.setZero(v.rows(), d);
    for (int h = 0; h < heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        const auto doh = d_o.middleCols(h * dh, dh);
        const Eigen::MatrixXd& p = p_cache[static_cast<std::size_t>(h)];
        Eigen::MatrixXd dp = doh * vh.transpose();
        Eigen::MatrixXd ds = softmax_rows_backward(p, dp);
        d_q.middleCols(h * dh, dh) = scale * ds * kh;
        d_k.middleCols(h * dh, dh) = scale * ds.transpose() * qh;
        d_v.middleCols(h * dh, dh) = p.transpose() * doh;
    }
}

Eigen::MatrixXd ToyAttentionModel::run_forward(const Eigen::MatrixXd& z_t,
                                               const TextEmbedding& cond, int t, Cache* cache,
                                               std::vector<Eigen::MatrixXd>* taps) const {
    const int d = cfg_.width;
    if (static_cast<int>(z_t.cols()) != d || cond.width() != d)
        throw std::invalid_argument("ToyAttentionModel: width mismatch");
    if (t < 0 || t > cfg_.max_timestep)
        throw std::invalid_argument("ToyAttentionModel: timestep out of range");
    const int v = static_cast<int>(z_t.rows());
    const int l = cond.length();
    const bool joint = cfg_.mode == ConditioningMode::JointSelfAttention;

    Eigen::MatrixXd img = z_t;
    img.rowwise() += temb_.row(t);
    Eigen::MatrixXd text = cond.rows;
    if (cfg_.positional) {
        img += pos_.topRows(v);
        // text positions follow the image block in joint mode
        text += joint ? pos_.middleRows(v, l) : pos_.topRows(l);
    }

    Eigen::MatrixXd x;
    if (joint) {
        x.resize(v + l, d);
        x.topRows(v) = img;
        x.bottomRows(l) = text;
    } else {
        x = img;
    }

    if (cache) {
        cache->t = t;
        cache->v = v;
        cache->l = l;
        cache->text_in = text;
        cache->layers.resize(layers_.size());
    }
    if (taps)
        taps->clear();

    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& L = layers_[li];
        Cache::LayerCache* lc = cache ? &cache->layers[li] : nullptr;

        if (!cfg_.linear_only) {
            // self-attention
            Eigen::MatrixXd q = x * L.Wq, k = x * L.Wk, vv = x * L.Wv;
            std::vector<Eigen::MatrixXd> p;
            Eigen::MatrixXd o = attend(q, k, vv, cfg_.heads, p);
            if (lc) {
                lc->x_in = x;
                lc->q = q;
                lc->k = k;
                lc->vv = vv;
                lc->o = o;
                lc->p = p;
            }
            if (taps && joint) {
                Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(p[0].rows(), p[0].cols());
                for (const auto& ph : p)
                    avg += ph;
                taps->push_back(avg / static_cast<double>(p.size()));
            }
            x += o * L.Wo;

            if (!joint) {
                if (lc)
                    lc->x_self = x;
                const Eigen::MatrixXd& text_in = cache ? cache->text_in : text;
                Eigen::MatrixXd qc = x * L.Cq, kc = text_in * L.Ck, vc = text_in * L.Cv;
                std::vector<Eigen::MatrixXd> pc;
                Eigen::MatrixXd oc = attend(qc, kc, vc, cfg_.heads, pc);
                if (lc) {
                    lc->qc = qc;
                    lc->kc = kc;
                    lc->vc = vc;
                    lc->oc = oc;
                    lc->pc = pc;
                }
                if (taps) {
                    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(pc[0].rows(), pc[0].cols());
                    for (const auto& ph : pc)
                        avg += ph;
                    taps->push_back(avg / static_cast<double>(pc.size()));
                }
                x += oc * L.Co;
            }
        } else if (lc) {
            lc->x_in = x;
        }

        // feed-forward
        Eigen::MatrixXd z1 = x * L.W1;
        z1.rowwise() += L.b1.row(0);
        Eigen::MatrixXd h1 = cfg_.linear_only ? z1 : z1.array().tanh().matrix();
        if (lc) {
            lc->x_mid = x;
            lc->h1 = h1;
        }
        Eigen::MatrixXd f = h1 * L.W2;
        f.rowwise() += L.b2.row(0);
        x += f;
    }

    Eigen::MatrixXd x_img = joint ? x.topRows(v).eval() : x;
    if (cache)
        cache->x_final = x_img;
    Eigen::MatrixXd eps = x_img * Wout_;
    eps.rowwise() += bout_.row(0);
    return eps;
}

void ToyAttentionModel::run_backward(const Cache& cache, const Eigen::MatrixXd& d_eps,
                                     std::vector<Eigen::MatrixXd>& grads) const {
    const int v = cache.v;
    const int l = cache.l;
    const bool joint = cfg_.mode == ConditioningMode::JointSelfAttention;
    const int n = joint ? v + l : v;

    // grads layout mirrors param_views()
    const int per_layer = joint ? 8 : 12;
    auto g = [&](std::size_t li, int slot) -> Eigen::MatrixXd& {
        return grads[li * static_cast<std::size_t>(per_layer) + static_cast<std::size_t>(slot)];
    };
    Eigen::MatrixXd& g_temb = grads[grads.size() - 3];
    Eigen::MatrixXd& g_wout = grads[grads.size() - 2];
    Eigen::MatrixXd& g_bout = grads[grads.size() - 1];

    g_wout += cache.x_final.transpose() * d_eps;
    g_bout.row(0) += d_eps.colwise().sum();

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, cfg_.width);
    dx.topRows(v) = d_eps * Wout_.transpose();

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& L = layers_[li];
        const Cache::LayerCache& lc = cache.layers[li];
        const int iW1 = joint ? 4 : 8;

        // FFN backward
        {
            const Eigen::MatrixXd& d_f = dx;
            g(li, iW1 + 2) += lc.h1.transpose() * d_f;                 // W2
            g(li, iW1 + 3).row(0) += d_f.colwise().sum();              // b2
            Eigen::MatrixXd dh1 = d_f * L.W2.transpose();
            Eigen::MatrixXd dz1 =
                cfg_.linear_only
                    ? dh1
                    : (dh1.array() * (1.0 - lc.h1.array().square())).matrix();
            g(li, iW1) += lc.x_mid.transpose() * dz1;                  // W1
            g(li, iW1 + 1).row(0) += dz1.colwise().sum();              // b1
            dx = dx + dz1 * L.W1.transpose();
        }

        if (cfg_.linear_only)
            continue;

        if (!joint) {
            // cross-attention backward: x_mid = x_self + oc*Co
            Eigen::MatrixXd d_oc = dx * L.Co.transpose();
            g(li, 7) += lc.oc.transpose() * dx; // Co
            Eigen::MatrixXd dqc, dkc, dvc;
            attend_backward(lc.qc, lc.kc, lc.vc, lc.pc, d_oc, dqc, dkc, dvc);
            g(li, 4) += lc.x_self.transpose() * dqc;      // Cq
            g(li, 5) += cache.text_in.transpose() * dkc;  // Ck
            g(li, 6) += cache.text_in.transpose() * dvc;  // Cv
            dx = dx + dqc * L.Cq.transpose();
            // text rows are frozen embeddings; their grads stop here
        }

        // self-attention backward: x_self = x_in + o*Wo
        Eigen::MatrixXd d_o = dx * L.Wo.transpose();
        g(li, 3) += lc.o.transpose() * dx; // Wo
        Eigen::MatrixXd dq, dk, dv;
        attend_backward(lc.q, lc.k, lc.vv, lc.p, d_o, dq, dk, dv);
        g(li, 0) += lc.x_in.transpose() * dq;
        g(li, 1) += lc.x_in.transpose() * dk;
        g(li, 2) += lc.x_in.transpose() * dv;
        dx = dx + dq * L.Wq.transpose() + dk * L.Wk.transpose() + dv * L.Wv.transpose();
    }

    g_temb.row(cache.t) += dx.topRows(v).colwise().sum();
}

Eigen::MatrixXd ToyAttentionModel::predict(const LatentImage& z_t, const TextEmbedding& cond,
                                           int t, const NoiseSchedule&) const {
    return run_forward(z_t.tokens, cond, t, nullptr, nullptr);
}

ForwardTaps ToyAttentionModel::forward(const Eigen::MatrixXd& z_t, const TextEmbedding& cond,
                                       int t) const {
    ForwardTaps taps;
    taps.eps = run_forward(z_t, cond, t, nullptr, &taps.attention);
    return taps;
}

double ToyAttentionModel::batch_loss_grad(const std::vector<TrainExample>& batch,
                                          std::vector<Eigen::MatrixXd>* grads) const {
    if (batch.empty())
        throw std::invalid_argument("batch_loss_grad: empty batch");
    double loss = 0.0;
    double count = 0.0;
    for (const auto& ex : batch)
        count += static_cast<double>(ex.target.size());
    for (const auto& ex : batch) {
        Cache cache;
        Eigen::MatrixXd eps = run_forward(ex.z_t, ex.cond, ex.t, grads ? &cache : nullptr, nullptr);
        Eigen::MatrixXd diff = eps - ex.target;
        loss += diff.squaredNorm();
        if (grads)
            run_backward(cache, (2.0 / count) * diff, *grads);
    }
    return loss / count;
}

std::vector<AttentionMap> extract_attention_maps(const ForwardTaps& taps,
                                                 const TextEmbedding& cond, const Token& token,
                                                 ConditioningMode mode, int image_tokens) {
    int col = -1;
    for (int i = 0; i < cond.length(); ++i)
        if (cond.tokens[static_cast<std::size_t>(i)] == token)
            col = i;
    if (col < 0)
        throw std::invalid_argument("extract_attention_maps: token not in prompt: " +
                                    token_name(token));
    std::vector<AttentionMap> out;
    for (std::size_t layer = 0; layer < taps.attention.size(); ++layer) {
        AttentionMap m;
        m.layer = static_cast<int>(layer);
        m.token = token;
        const Eigen::MatrixXd& p = taps.attention[layer];
        if (mode == ConditioningMode::JointSelfAttention)
            m.mass = p.block(0, image_tokens + col, image_tokens, 1);
        else
            m.mass = p.block(0, col, image_tokens, 1);
        out.push_back(std::move(m));
    }
    return out;
}

double finite_diff_check(ToyAttentionModel& model, const std::vector<TrainExample>& batch,
                         int probes, std::uint64_t seed, double step) {
    if (probes < 1)
        throw std::invalid_argument("finite_diff_check: probe count must be positive");
    auto grads = model.zero_grads();
    model.batch_loss_grad(batch, &grads);
    auto params = model.param_views();

    RngStream rng = derive_stream(seed, 0xfdc3ULL);
    double max_rel = 0.0;
    for (int p = 0; p < probes; ++p) {
        const auto pi = static_cast<std::size_t>(rng.below(params.size()));
        Eigen::MatrixXd& mat = *params[pi];
        const auto idx = static_cast<long>(rng.below(static_cast<std::uint64_t>(mat.size())));
        const double saved = mat.data()[idx];
        mat.data()[idx] = saved + step;
        const double lp = model.batch_loss_grad(batch, nullptr);
        mat.data()[idx] = saved - step;
        const double lm = model.batch_loss_grad(batch, nullptr);
        mat.data()[idx] = saved;
        const double numeric = (lp - lm) / (2.0 * step);
        const double analytic = grads[pi].data()[idx];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
    }
    return max_rel;
}

static void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

static std::uint32_t read_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void ToyAttentionModel::save(const std::string& path_base) const {
    std::ofstream bin(path_base + ".bin", std::ios::binary);
    if (!bin)
        throw std::runtime_error("cannot open " + path_base + ".bin for writing");
    bin.write("EIMT", 4);
    write_u32(bin, 1); // version
    write_u32(bin, cfg_.mode == ConditioningMode::JointSelfAttention ? 0u : 1u);
    write_u32(bin, static_cast<std::uint32_t>(cfg_.layers));
    write_u32(bin, static_cast<std::uint32_t>(cfg_.heads));
    write_u32(bin, static_cast<std::uint32_t>(cfg_.width));
    for (const auto* p : param_views()) {
        for (long i = 0; i < p->size(); ++i) {
            const float f = static_cast<float>(p->data()[i]);
            bin.write(reinterpret_cast<const char*>(&f), sizeof(f));
        }
    }

    nlohmann::json j;
    j["mode"] = cfg_.mode == ConditioningMode::JointSelfAttention ? "joint" : "cross";
    j["layers"] = cfg_.layers;
    j["heads"] = cfg_.heads;
    j["width"] = cfg_.width;
    j["ffn_width"] = cfg_.ffn_width;
    j["max_timestep"] = cfg_.max_timestep;
    j["positional"] = cfg_.positional;
    j["trained"] = trained_;
    nlohmann::json shapes = nlohmann::json::array();
    auto names = param_names();
    auto views = param_views();
    for (std::size_t i = 0; i < views.size(); ++i)
        shapes.push_back({{"name", names[i]},
                          {"rows", views[i]->rows()},
                          {"cols", views[i]->cols()}});
    j["tensors"] = shapes;
    std::ofstream side(path_base + ".json");
    side << j.dump(2) << "\n";
}

ToyAttentionModel ToyAttentionModel::load(const std::string& path_base) {
    std::ifstream side(path_base + ".json");
    if (!side)
        throw std::runtime_error("cannot open " + path_base + ".json");
    nlohmann::json j = nlohmann::json::parse(side);
    ToyConfig cfg;
    cfg.mode = j.at("mode") == "joint" ? ConditioningMode::JointSelfAttention
                                       : ConditioningMode::CrossAttention;
    cfg.layers = j.at("layers");
    cfg.heads = j.at("heads");
    cfg.width = j.at("width");
    cfg.ffn_width = j.at("ffn_width");
    cfg.max_timestep = j.at("max_timestep");
    cfg.positional = j.at("positional");

    ToyAttentionModel model(cfg, 0);
    std::ifstream bin(path_base + ".bin", std::ios::binary);
    if (!bin)
        throw std::runtime_error("cannot open " + path_base + ".bin");
    char magic[4];
    bin.read(magic, 4);
    if (std::memcmp(magic, "EIMT", 4) != 0)
        throw std::runtime_error("bad model file magic");
    if (read_u32(bin) != 1)
        throw std::runtime_error("unsupported model file version");
    read_u32(bin); // mode, already in sidecar
    read_u32(bin);
    read_u32(bin);
    read_u32(bin);
    for (auto* p : model.param_views()) {
        for (long i = 0; i < p->size(); ++i) {
            float f = 0.0f;
            bin.read(reinterpret_cast<char*>(&f), sizeof(f));
            p->data()[i] = static_cast<double>(f);
        }
    }
    if (!bin)
        throw std::runtime_error("model file truncated");
    model.trained_ = j.value("trained", false);
    return model;
}

} // namespace eimlab
