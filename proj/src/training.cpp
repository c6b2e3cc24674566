#include "c3/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace c3 {

Eigen::VectorXd concat_input(const Eigen::VectorXd& context, const Eigen::VectorXd& arm) {
    Eigen::VectorXd x(context.size() + arm.size());
    x << context, arm;
    return x;
}

Eigen::VectorXd LoggedSample::input() const { return concat_input(context, arm); }

void TrainingConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("training: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("training: batch_size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("training: learning_rate must be positive");
    if (!(lr_decay > 0)) throw std::invalid_argument("training: lr_decay must be positive");
    if (!(lambda_ece >= 0)) throw std::invalid_argument("training: lambda_ece must be >= 0");
    if (ece_bins < 1) throw std::invalid_argument("training: ece_bins must be >= 1");
    if (!(ref_fraction > 0 && ref_fraction < 1)) throw std::invalid_argument("training: ref_fraction must be in (0,1)");
    if (!(sample_fraction > 0 && sample_fraction <= 1))
        throw std::invalid_argument("training: sample_fraction must be in (0,1]");
    if (time_intervals < 1) throw std::invalid_argument("training: time_intervals must be >= 1");
    if (!(validation_fraction >= 0 && validation_fraction < 1))
        throw std::invalid_argument("training: validation_fraction must be in [0,1)");
    kernel().validate();
}

KernelConfigd TrainingConfig::kernel() const { return {sigma, truncation_radius}; }

double bce_loss(double p_hat, int reward) {
    const double p = std::clamp(p_hat, kPredictionClamp, 1.0 - kPredictionClamp);
    return reward ? -std::log(p) : -std::log1p(-p);
}

namespace {

int ece_bin(double p, int bins) { return std::clamp(int(p * bins), 0, bins - 1); }

// Per-bin signed gap sum(p - r); ECE = sum |gap| / N.
std::vector<double> ece_gaps(std::span<const double> p, std::span<const int> r, int bins) {
    std::vector<double> gap(std::size_t(bins), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) gap[std::size_t(ece_bin(p[i], bins))] += p[i] - double(r[i]);
    return gap;
}

}  // namespace

double ece_loss(std::span<const double> p_hats, std::span<const int> rewards, int bins) {
    if (p_hats.size() != rewards.size()) throw std::invalid_argument("ece_loss: length mismatch");
    if (p_hats.empty()) throw std::invalid_argument("ece_loss: empty batch");
    if (bins < 1) throw std::invalid_argument("ece_loss: bins must be >= 1");
    double total = 0.0;
    for (double g : ece_gaps(p_hats, rewards, bins)) total += std::abs(g);
    return total / double(p_hats.size());
}

namespace {

struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
    Eigen::MatrixXd output;
};

ForwardCache forward_cached(const MlpParamsd& params, const Eigen::MatrixXd& x) {
    check_same_dim(x.rows(), params.input_dim(), "mlp_forward");
    ForwardCache c;
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& l = params.layers[i];
        Eigen::MatrixXd z = (l.weight * a).colwise() + l.bias;
        c.inputs.push_back(std::move(a));
        if (i + 1 < params.layers.size())
            a = z.unaryExpr([](double v) { return softplus(v); });
        else
            a = z;
        c.pre.push_back(std::move(z));
    }
    c.output = std::move(a);
    return c;
}

MlpParamsd backward(const MlpParamsd& params, const ForwardCache& cache, Eigen::MatrixXd d_out) {
    MlpParamsd grad = params.zeros_like();
    Eigen::MatrixXd dz = std::move(d_out);
    for (std::size_t i = params.layers.size(); i-- > 0;) {
        grad.layers[i].weight = dz * cache.inputs[i].transpose();
        grad.layers[i].bias = dz.rowwise().sum();
        if (i == 0) break;
        Eigen::MatrixXd da = params.layers[i].weight.transpose() * dz;
        dz = da.cwiseProduct(cache.pre[i - 1].unaryExpr([](double v) { return sigmoid(v); }));
    }
    return grad;
}

/// Distinct network inputs of refs followed by queries; repeated inputs
/// (common with one-hot arms and no context) are embedded once.
struct UniqueInputs {
    Eigen::MatrixXd x;              // in x u
    std::vector<Eigen::Index> col;  // sample -> unique column
};

UniqueInputs unique_inputs(std::span<const LoggedSample> a, std::span<const LoggedSample> b) {
    UniqueInputs u;
    std::map<std::vector<double>, Eigen::Index> seen;
    std::vector<Eigen::VectorXd> cols;
    auto add = [&](const LoggedSample& s) {
        Eigen::VectorXd v = s.input();
        std::vector<double> key(v.data(), v.data() + v.size());
        const auto [it, inserted] = seen.try_emplace(std::move(key), Eigen::Index(cols.size()));
        if (inserted) cols.push_back(std::move(v));
        u.col.push_back(it->second);
    };
    for (const auto& s : a) add(s);
    for (const auto& s : b) add(s);
    u.x.resize(cols.front().size(), Eigen::Index(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) u.x.col(Eigen::Index(i)) = cols[i];
    return u;
}

/// Everything the loss and its gradient need from one forward pass.
struct BatchForward {
    ForwardCache cache;             // over the unique inputs
    std::vector<Eigen::Index> col;  // refs then queries -> unique column
    std::vector<double> ref_count;  // refs per unique column
    Eigen::Index n_refs = 0;
    std::vector<int> rewards;
    // g_j over all refs, filled only for refs some query in the batch can
    // see; the rest stay 0 and are never read.
    std::vector<double> accum;
    std::map<int, std::vector<std::size_t>> by_interval;
    double fallback = 0.0;
    struct Query {
        int interval = 0;
        bool supported = false;  // false: fallback prediction
        Eigen::VectorXd kvec;
        double denom = 0.0;
        double p = 0.0;
    };
    std::vector<Query> queries;

    auto embedding(std::size_t sample) const { return cache.output.col(col[sample]); }
};

int effective_interval(const LoggedSample& s, const TrainingConfig& config) {
    return config.time_intervals > 1 ? s.interval : 0;
}

BatchForward forward_batch(const MlpParamsd& params, std::span<const LoggedSample> queries,
                           std::span<const LoggedSample> refs, const TrainingConfig& config) {
    if (refs.empty()) throw std::invalid_argument("iwkr batch: no reference samples");
    BatchForward f;
    f.n_refs = Eigen::Index(refs.size());
    auto u = unique_inputs(refs, queries);
    f.cache = forward_cached(params, u.x);
    f.col = std::move(u.col);
    const auto& out = f.cache.output;
    const auto kc = config.kernel();

    f.ref_count.assign(std::size_t(out.cols()), 0.0);
    std::vector<Eigen::Index> ref_cols;
    double reward_sum = 0.0;
    for (std::size_t j = 0; j < refs.size(); ++j) {
        if (f.ref_count[std::size_t(f.col[j])]++ == 0.0) ref_cols.push_back(f.col[j]);
        f.rewards.push_back(refs[j].reward);
        f.by_interval[effective_interval(refs[j], config)].push_back(j);
        reward_sum += refs[j].reward;
    }
    f.fallback = reward_sum / double(refs.size());

    // Embeddings of the distinct ref inputs and their multiplicities.
    Eigen::MatrixXd R(out.rows(), Eigen::Index(ref_cols.size()));
    Eigen::ArrayXd mult(Eigen::Index(ref_cols.size()));
    for (std::size_t c = 0; c < ref_cols.size(); ++c) {
        R.col(Eigen::Index(c)) = out.col(ref_cols[c]);
        mult(Eigen::Index(c)) = f.ref_count[std::size_t(ref_cols[c])];
    }
    std::vector<double> accum_by_col(std::size_t(out.cols()), -1.0);
    f.accum.assign(refs.size(), 0.0);
    auto ensure_accum = [&](std::size_t j) {
        auto& g = accum_by_col[std::size_t(f.col[j])];
        if (g < 0.0) {
            Eigen::ArrayXd k = (R.colwise() - out.col(f.col[j])).colwise().squaredNorm().transpose().array();
            rbf_in_place(k, kc);
            g = (k * mult).sum();
        }
        f.accum[j] = g;
    };

    f.queries.resize(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto& fq = f.queries[q];
        fq.p = f.fallback;
        const auto it = f.by_interval.find(effective_interval(queries[q], config));
        if (it == f.by_interval.end()) continue;
        const auto e = f.embedding(refs.size() + q);
        const auto& idx = it->second;
        Eigen::ArrayXd k(Eigen::Index(idx.size()));
        for (std::size_t t = 0; t < idx.size(); ++t) k(Eigen::Index(t)) = (f.embedding(idx[t]) - e).squaredNorm();
        rbf_in_place(k, kc);
        fq.kvec = k.matrix();
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < idx.size(); ++t) {
            const auto j = idx[t];
            if (fq.kvec(Eigen::Index(t)) == 0.0) continue;
            ensure_accum(j);
            const double a = fq.kvec(Eigen::Index(t)) / f.accum[j];
            num += a * f.rewards[j];
            den += a;
        }
        if (!(den > 0.0)) continue;
        fq.interval = it->first;
        fq.supported = true;
        fq.denom = den;
        fq.p = std::clamp(num / den, 0.0, 1.0);
    }
    return f;
}

double loss_from_predictions(std::span<const double> p, std::span<const LoggedSample> queries,
                             const TrainingConfig& config) {
    std::vector<int> r;
    double bce = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        bce += bce_loss(p[q], queries[q].reward);
        r.push_back(queries[q].reward);
    }
    bce /= double(queries.size());
    if (config.lambda_ece == 0.0) return bce;
    return bce + config.lambda_ece * ece_loss(p, r, config.ece_bins);
}

std::vector<double> predictions_of(const BatchForward& f) {
    std::vector<double> p;
    for (const auto& q : f.queries) p.push_back(q.p);
    return p;
}

}  // namespace

Eigen::VectorXd iwkr_forward_batch(const MlpParamsd& params, std::span<const LoggedSample> queries,
                                   std::span<const LoggedSample> refs, const TrainingConfig& config) {
    const auto f = forward_batch(params, queries, refs, config);
    Eigen::VectorXd p(Eigen::Index(queries.size()));
    for (std::size_t q = 0; q < queries.size(); ++q) p(Eigen::Index(q)) = f.queries[q].p;
    return p;
}

double batch_loss(const MlpParamsd& params, std::span<const LoggedSample> queries,
                  std::span<const LoggedSample> refs, const TrainingConfig& config) {
    if (queries.empty()) throw std::invalid_argument("batch_loss: empty query batch");
    const auto f = forward_batch(params, queries, refs, config);
    return loss_from_predictions(predictions_of(f), queries, config);
}

LossAndGrad loss_and_grad(const MlpParamsd& params, std::span<const LoggedSample> queries,
                          std::span<const LoggedSample> refs, const TrainingConfig& config) {
    if (queries.empty()) throw std::invalid_argument("loss_and_grad: empty query batch");
    const auto f = forward_batch(params, queries, refs, config);
    const auto p = predictions_of(f);
    LossAndGrad result;
    result.loss = loss_from_predictions(p, queries, config);
    if (!std::isfinite(result.loss)) throw TrainingDiverged("non-finite training loss", {result.loss});

    const auto B = queries.size();
    const double inv_b = 1.0 / double(B);

    // dL/dp per query.
    std::vector<double> dp(B, 0.0);
    for (std::size_t q = 0; q < B; ++q) {
        const double pq = p[q];
        if (pq > kPredictionClamp && pq < 1.0 - kPredictionClamp)
            dp[q] = inv_b * (queries[q].reward ? -1.0 / pq : 1.0 / (1.0 - pq));
    }
    if (config.lambda_ece != 0.0) {
        std::vector<int> r;
        for (const auto& s : queries) r.push_back(s.reward);
        const auto gaps = ece_gaps(p, r, config.ece_bins);
        for (std::size_t q = 0; q < B; ++q) {
            const double gap = gaps[std::size_t(ece_bin(p[q], config.ece_bins))];
            const double sign = gap > 0 ? 1.0 : (gap < 0 ? -1.0 : 0.0);
            dp[q] += config.lambda_ece * sign * inv_b;
        }
    }

    const auto& out = f.cache.output;
    const Eigen::Index m = f.n_refs;
    const double inv_sigma_sq = 1.0 / (config.sigma * config.sigma);
    const auto& g = f.accum;
    const auto& rewards = f.rewards;
    // Gradient with respect to each unique embedding column.
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(out.rows(), out.cols());
    Eigen::VectorXd d_accum = Eigen::VectorXd::Zero(config.differentiate_weights ? m : 0);

    for (std::size_t q = 0; q < B; ++q) {
        const auto& fq = f.queries[q];
        if (!fq.supported || dp[q] == 0.0) continue;
        const auto& indices = f.by_interval.at(fq.interval);
        const Eigen::Index qc = f.col[std::size_t(m) + q];
        const Eigen::VectorXd e = out.col(qc);
        for (std::size_t t = 0; t < indices.size(); ++t) {
            const auto j = indices[t];
            const double k = fq.kvec(Eigen::Index(t));
            if (k == 0.0) continue;
            const double w = 1.0 / g[j];
            const double dp_da = (double(rewards[j]) - fq.p) / fq.denom;  // da = d(k w)
            const double dl_dk = dp[q] * dp_da * w;
            const Eigen::Index jc = f.col[j];
            const Eigen::VectorXd diff = out.col(jc) - e;  // s_j - e_q
            d_out.col(qc) += (dl_dk * k * inv_sigma_sq) * diff;
            d_out.col(jc) -= (dl_dk * k * inv_sigma_sq) * diff;
            if (config.differentiate_weights) d_accum(Eigen::Index(j)) += dp[q] * dp_da * k * (-w * w);
        }
    }

    if (config.differentiate_weights) {
        // g_j = sum_l k(s_j, s_l), so with G_j = dL/dg_j each ref l adds
        // G_j k_jl (s_l - s_j) / sigma^2 to dL/ds_j and the negation to dL/ds_l.
        // Refs sharing an input are summed through their multiplicity.
        const auto kc = config.kernel();
        for (Eigen::Index j = 0; j < m; ++j) {
            if (d_accum(j) == 0.0) continue;
            const Eigen::Index jc = f.col[std::size_t(j)];
            for (Eigen::Index c = 0; c < out.cols(); ++c) {
                const double count = f.ref_count[std::size_t(c)];
                if (count == 0.0 || c == jc) continue;
                const Eigen::VectorXd diff = out.col(c) - out.col(jc);
                const double k = rbf_from_sq_dist(diff.squaredNorm(), kc);
                if (k == 0.0) continue;
                const double coef = count * k * d_accum(j) * inv_sigma_sq;
                d_out.col(jc) += coef * diff;
                d_out.col(c) -= coef * diff;
            }
        }
    }

    result.grad = backward(params, f.cache, std::move(d_out));
    return result;
}

namespace {

struct Adam {
    explicit Adam(std::size_t n) : m(Eigen::VectorXd::Zero(Eigen::Index(n))), v(m) {}

    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, double(t));
        const double c2 = 1.0 - std::pow(beta2, double(t));
        theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }

    static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Eigen::VectorXd m, v;
    long t = 0;
};

std::vector<LoggedSample> gather(std::span<const LoggedSample> data, std::span<const std::size_t> idx) {
    std::vector<LoggedSample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(data[i]);
    return out;
}

}  // namespace

TrainResult train(std::span<const LoggedSample> dataset, const TrainingConfig& config, MlpParamsd init) {
    config.validate();
    init.validate();
    TrainResult result;
    result.params = std::move(init);
    if (config.epochs == 0) return result;
    if (dataset.size() < 2) throw std::invalid_argument("train: need at least two samples");
    for (const auto& s : dataset)
        if (s.interval < 0 || s.interval >= config.time_intervals) {
            if (config.time_intervals > 1)
                throw std::invalid_argument("train: interval label outside [0, time_intervals)");
        }

    Rng rng = make_rng(config.seed, "train");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<LoggedSample> validation;
    const auto n_val = std::size_t(std::llround(config.validation_fraction * double(dataset.size())));
    if (n_val > 0) {
        validation = gather(dataset, std::span(order).first(n_val));
        order.erase(order.begin(), order.begin() + std::ptrdiff_t(n_val));
    }
    if (order.size() < 2) throw std::invalid_argument("train: not enough samples after the validation split");

    Eigen::VectorXd theta = result.params.flatten();
    MlpParamsd work = result.params;
    Adam adam(std::size_t(theta.size()));
    double lr = config.learning_rate;
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        auto k = std::size_t(std::llround(config.sample_fraction * double(order.size())));
        k = std::clamp<std::size_t>(k, 2, order.size());
        auto n_ref = std::size_t(std::llround(config.ref_fraction * double(k)));
        n_ref = std::clamp<std::size_t>(n_ref, 1, k - 1);
        const auto refs = gather(dataset, std::span(order).first(n_ref));
        const auto queries = gather(dataset, std::span(order).subspan(n_ref, k - n_ref));

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < queries.size(); start += std::size_t(config.batch_size)) {
            const auto len = std::min(std::size_t(config.batch_size), queries.size() - start);
            const std::span<const LoggedSample> batch(queries.data() + start, len);
            LossAndGrad lg;
            try {
                lg = loss_and_grad(work, batch, refs, config);
            } catch (const TrainingDiverged&) {
                auto trace = result.epoch_losses;
                trace.push_back(std::numeric_limits<double>::quiet_NaN());
                throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch), trace);
            }
            adam.step(theta, lg.grad.flatten(), lr);
            if (!theta.allFinite()) {
                auto trace = result.epoch_losses;
                trace.push_back(std::numeric_limits<double>::quiet_NaN());
                throw TrainingDiverged("non-finite parameters in epoch " + std::to_string(epoch), trace);
            }
            work.unflatten(theta);
            loss_sum += lg.loss;
            ++batches;
        }
        result.epoch_losses.push_back(loss_sum / double(batches));
        lr *= config.lr_decay;

        if (!validation.empty()) {
            const double val = batch_loss(work, validation, refs, config);
            result.validation_losses.push_back(val);
            if (val < best_val) {
                best_val = val;
                result.params = work;
                result.selected_epoch = epoch;
            }
        }
    }
    if (validation.empty()) {
        result.params = work;
        result.selected_epoch = config.epochs - 1;
    }
    return result;
}

}  // namespace c3
