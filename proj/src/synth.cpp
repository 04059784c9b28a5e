#include "fusionbench/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "fusionbench/errors.hpp"
#include "fusionbench/text_io.hpp"

namespace fusionbench {

void SynthTaskSpec::validate() const {
    if (n_q < 1 || n_v < 1) {
        throw ParameterError("synth task: modality dims must be >= 1");
    }
    if (classes < 2) {
        throw ParameterError("synth task: need at least 2 classes, got " +
                             std::to_string(classes));
    }
    if (rank < 1 || rank > std::min(n_q, n_v)) {
        throw ParameterError("synth task: rank " + std::to_string(rank) +
                             " must be in [1, min(n_q, n_v)] = [1, " +
                             std::to_string(std::min(n_q, n_v)) + "]");
    }
    if (n_train < 1 || n_test < 1) {
        throw ParameterError("synth task: sample counts must be >= 1");
    }
    if (noise_sigma < 0.0) {
        throw ParameterError("synth task: noise sigma must be >= 0");
    }
    if (scorers == TaskScorers::CrossIndex) {
        if (classes != 2 || rank != 1) {
            throw ParameterError("synth task: cross-index scorers require classes=2, rank=1");
        }
        if (n_v < 2) {
            throw ParameterError("synth task: cross-index scorers require n_v >= 2");
        }
    }
    if (min_margin > 0.0 && scorers != TaskScorers::CrossIndex) {
        throw ParameterError("synth task: min_margin only applies to cross-index scorers");
    }
    if (mirror_pairs && (n_train % 2 != 0 || n_test % 2 != 0)) {
        throw ParameterError("synth task: mirrored pairs need even sample counts");
    }
}

namespace {

Tensor gaussian_vec(Rng& rng, std::size_t n) {
    return gaussian_tensor(rng, {n}, 1.0);
}

std::size_t argmax_lowest(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) {
            best = k;
        }
    }
    return best;
}

SynthSample label_sample(const SynthDataset& data, Tensor q, Tensor v, Rng& rng) {
    const std::size_t k_classes = data.spec.classes;
    std::vector<double> scores(k_classes);
    for (std::size_t k = 0; k < k_classes; ++k) {
        scores[k] = task_score(data, q, v, k);
        if (data.spec.noise_sigma > 0.0) {
            scores[k] += rng.next_gaussian(data.spec.noise_sigma);
        }
    }
    return {std::move(q), std::move(v), argmax_lowest(scores)};
}

// Mirror partner: negate every coordinate except the first, both modalities.
Tensor mirror(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 1; i < out.numel(); ++i) {
        out[i] = -out[i];
    }
    return out;
}

void fill_split(SynthDataset& data, std::vector<SynthSample>& split, std::size_t count,
                Rng& rng) {
    const SynthTaskSpec& spec = data.spec;
    while (split.size() < count) {
        Tensor q = gaussian_vec(rng, spec.n_q);
        Tensor v = gaussian_vec(rng, spec.n_v);
        if (spec.scorers == TaskScorers::CrossIndex && spec.min_margin > 0.0 &&
            std::abs(q[0] * v[1]) < spec.min_margin) {
            continue;
        }
        if (spec.mirror_pairs) {
            Tensor mq = mirror(q);
            Tensor mv = mirror(v);
            split.push_back(label_sample(data, std::move(q), std::move(v), rng));
            split.push_back(label_sample(data, std::move(mq), std::move(mv), rng));
        } else {
            split.push_back(label_sample(data, std::move(q), std::move(v), rng));
        }
    }
}

}  // namespace

SynthDataset gen_task(const SynthTaskSpec& spec) {
    spec.validate();
    SynthDataset data;
    data.spec = spec;
    Rng rng(spec.seed);

    if (spec.scorers == TaskScorers::CrossIndex) {
        Tensor b = Tensor::zeros({spec.n_q, spec.n_v});
        b.at(0, 1) = 1.0;
        data.scorers.push_back(b);
        data.scorers.push_back(scale(b, -1.0));
    } else {
        for (std::size_t k = 0; k < spec.classes; ++k) {
            Tensor b = Tensor::zeros({spec.n_q, spec.n_v});
            for (std::size_t r = 0; r < spec.rank; ++r) {
                b = add(b, outer(gaussian_vec(rng, spec.n_q), gaussian_vec(rng, spec.n_v)));
            }
            data.scorers.push_back(std::move(b));
        }
    }

    fill_split(data, data.train, spec.n_train, rng);
    fill_split(data, data.test, spec.n_test, rng);
    return data;
}

double task_score(const SynthDataset& data, const Tensor& q, const Tensor& v,
                  std::size_t k) {
    return dot(matvec(data.scorers[k], v), q);
}

void adam_step(std::vector<double>& theta, const std::vector<double>& grad,
               AdamState& state, const TrainConfig& cfg) {
    if (state.m.empty()) {
        state.m.assign(theta.size(), 0.0);
        state.u.assign(theta.size(), 0.0);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.u[i] = cfg.beta2 * state.u[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double uhat = state.u[i] / bc2;
        theta[i] -= cfg.lr * mhat / (std::sqrt(uhat) + cfg.eps);
    }
}

double cross_entropy(const Tensor& logits, std::size_t label) {
    double mx = logits[0];
    for (std::size_t i = 1; i < logits.numel(); ++i) {
        mx = std::max(mx, logits[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        sum += std::exp(logits[i] - mx);
    }
    return mx + std::log(sum) - logits[label];
}

Tensor cross_entropy_grad(const Tensor& logits, std::size_t label) {
    double mx = logits[0];
    for (std::size_t i = 1; i < logits.numel(); ++i) {
        mx = std::max(mx, logits[i]);
    }
    double sum = 0.0;
    Tensor g = logits;
    for (std::size_t i = 0; i < g.numel(); ++i) {
        g[i] = std::exp(logits[i] - mx);
        sum += g[i];
    }
    for (std::size_t i = 0; i < g.numel(); ++i) {
        g[i] /= sum;
    }
    g[label] -= 1.0;
    return g;
}

namespace {

std::vector<Tensor*> tensor_views(ModelParams& p) {
    std::vector<Tensor*> out;
    p.for_each_tensor([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<double> flatten(ModelParams& p) {
    std::vector<double> out;
    p.for_each_tensor([&](const std::string&, Tensor& t) {
        out.insert(out.end(), t.data().begin(), t.data().end());
    });
    return out;
}

void unflatten(ModelParams& p, const std::vector<double>& flat) {
    std::size_t off = 0;
    p.for_each_tensor([&](const std::string&, Tensor& t) {
        std::copy(flat.begin() + off, flat.begin() + off + t.numel(), t.data().begin());
        off += t.numel();
    });
}

ModelParams zero_grads(const ModelParams& model) {
    ModelParams g;
    g.spec = model.spec;
    g.seed = model.seed;
    if (model.spec.has_projections()) {
        g.proj_txt_w = Tensor::zeros(model.proj_txt_w.shape());
        g.proj_txt_b = Tensor::zeros(model.proj_txt_b.shape());
        g.proj_img_w = Tensor::zeros(model.proj_img_w.shape());
        g.proj_img_b = Tensor::zeros(model.proj_img_b.shape());
    }
    if (model.mutan) {
        MutanParams mp;
        mp.w_q = Tensor::zeros(model.mutan->w_q.shape());
        mp.b_q = Tensor::zeros(model.mutan->b_q.shape());
        mp.w_v = Tensor::zeros(model.mutan->w_v.shape());
        mp.b_v = Tensor::zeros(model.mutan->b_v.shape());
        for (const Tensor& t : model.mutan->m) mp.m.push_back(Tensor::zeros(t.shape()));
        for (const Tensor& t : model.mutan->n) mp.n.push_back(Tensor::zeros(t.shape()));
        g.mutan = std::move(mp);
    }
    g.cls_hidden_w = Tensor::zeros(model.cls_hidden_w.shape());
    g.cls_hidden_b = Tensor::zeros(model.cls_hidden_b.shape());
    g.cls_out_w = Tensor::zeros(model.cls_out_w.shape());
    g.cls_out_b = Tensor::zeros(model.cls_out_b.shape());
    return g;
}

void accumulate(ModelParams& acc, ModelParams&& delta) {
    std::vector<Tensor*> a = tensor_views(acc);
    std::vector<Tensor*> d = tensor_views(delta);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i]->numel(); ++j) {
            (*a[i])[j] += (*d[i])[j];
        }
    }
}

void check_dims(const ModelParams& model, const SynthDataset& data) {
    const ModelSpec& spec = model.spec;
    if (spec.n_txt != data.spec.n_q || spec.n_img != data.spec.n_v) {
        throw ConfigError("train: model feature dims (n_txt=" + std::to_string(spec.n_txt) +
                          ", n_img=" + std::to_string(spec.n_img) +
                          ") do not match task dims (n_q=" + std::to_string(data.spec.n_q) +
                          ", n_v=" + std::to_string(data.spec.n_v) + ")");
    }
    if (spec.classes != data.spec.classes) {
        throw ConfigError("train: model classes " + std::to_string(spec.classes) +
                          " do not match task classes " + std::to_string(data.spec.classes));
    }
}

}  // namespace

TrainReport train(ModelParams& model, const SynthDataset& data, const TrainConfig& cfg) {
    if (!(cfg.lr >= 0.0)) {
        throw ParameterError("train: learning rate must be >= 0");
    }
    if (cfg.batch < 1 || cfg.epochs < 1) {
        throw ParameterError("train: batch and epochs must be >= 1");
    }
    check_dims(model, data);

    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    report.seed = cfg.seed;
    report.model_spec = model.spec;
    report.task_spec = data.spec;

    Rng shuffle_rng(cfg.seed);
    AdamState adam;
    std::vector<double> theta = flatten(model);
    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Fisher-Yates on the portable generator keeps the permutation
        // sequence reproducible across platforms.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_index(i)) - 1;
            std::swap(order[i - 1], order[j]);
        }

        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(start + cfg.batch, order.size());
            ModelParams grads = zero_grads(model);
            double batch_loss = 0.0;
            for (std::size_t s = start; s < stop; ++s) {
                const SynthSample& sample = data.train[order[s]];
                ForwardTrace trace = forward_trace(model, sample.v, sample.q);
                batch_loss += cross_entropy(trace.logits, sample.label);
                Tensor g_logits = cross_entropy_grad(trace.logits, sample.label);
                accumulate(grads, backward(model, trace, g_logits, sample.v, sample.q));
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            batch_loss *= inv;
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError("train: non-finite loss at epoch " +
                                      std::to_string(epoch), epoch);
            }
            std::vector<double> flat_grad = flatten(grads);
            for (double& g : flat_grad) {
                g *= inv;
            }
            adam_step(theta, flat_grad, adam, cfg);
            unflatten(model, theta);
        }

        EpochStats stats;
        EvalResult on_train = evaluate(model, std::span(data.train));
        EvalResult on_test = evaluate(model, std::span(data.test));
        stats.train_loss = on_train.mean_loss;
        stats.train_acc = on_train.accuracy;
        stats.test_loss = on_test.mean_loss;
        stats.test_acc = on_test.accuracy;
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.test_loss)) {
            throw DivergenceError("train: non-finite loss at epoch " +
                                  std::to_string(epoch), epoch);
        }
        report.epochs.push_back(stats);
        if (epoch == cfg.epochs) {
            report.confusion = on_test.confusion;
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

EvalResult evaluate(const ModelParams& model, std::span<const SynthSample> part) {
    return evaluate_with(
        [&](const SynthSample& s) { return forward(model, s.v, s.q); },
        model.spec.classes, part);
}

EvalResult evaluate_with(const std::function<Tensor(const SynthSample&)>& logits_fn,
                         std::size_t classes, std::span<const SynthSample> part) {
    if (part.empty()) {
        throw ParameterError("evaluate: empty partition");
    }
    EvalResult res;
    res.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    std::size_t correct = 0;
    double loss = 0.0;
    for (const SynthSample& s : part) {
        const Tensor logits = logits_fn(s);
        std::size_t pred = 0;
        for (std::size_t k = 1; k < logits.numel(); ++k) {
            if (logits[k] > logits[pred]) {
                pred = k;
            }
        }
        res.confusion[s.label][pred] += 1;
        correct += pred == s.label;
        loss += cross_entropy(logits, s.label);
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(part.size());
    res.mean_loss = loss / static_cast<double>(part.size());
    return res;
}

void write_report_csv(const TrainReport& report, std::ostream& out) {
    out << "epoch,train_loss,train_acc,test_loss,test_acc\n";
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const EpochStats& s = report.epochs[e];
        out << (e + 1) << ',' << format_double(s.train_loss) << ','
            << format_double(s.train_acc) << ',' << format_double(s.test_loss) << ','
            << format_double(s.test_acc) << '\n';
    }
}

void write_confusion_csv(const TrainReport& report, std::ostream& out) {
    out << "true_class,pred_class,count\n";
    for (std::size_t i = 0; i < report.confusion.size(); ++i) {
        for (std::size_t j = 0; j < report.confusion[i].size(); ++j) {
            out << i << ',' << j << ',' << report.confusion[i][j] << '\n';
        }
    }
}

}  // namespace fusionbench
