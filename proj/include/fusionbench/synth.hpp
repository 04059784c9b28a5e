#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "fusionbench/vqahead.hpp"

namespace fusionbench {

// Ground-truth scorer family for the synthetic task.
//   RandomLowRank: one random rank-`rank` bilinear scorer per class.
//   CrossIndex:    the fixed two-class pair B_0 = e_1 (x) e_2, B_1 = -B_0,
//                  i.e. the label is the sign of q[0] * v[1]. This target has
//                  no same-index component, which is what the
//                  representation-gap experiment needs.
enum class TaskScorers { RandomLowRank, CrossIndex };

struct SynthTaskSpec {
    std::size_t n_q = 2;
    std::size_t n_v = 2;
    std::size_t classes = 2;
    std::size_t rank = 1;
    std::size_t n_train = 256;
    std::size_t n_test = 128;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    TaskScorers scorers = TaskScorers::RandomLowRank;
    // Emit samples in mirrored pairs: the partner has every coordinate except
    // the first negated in both q and v. The pair shares the element-wise
    // feature q (x) v exactly, while the cross-index score flips sign, so no
    // function of q (x) v can tell the two labels apart.
    bool mirror_pairs = false;
    // CrossIndex only: redraw samples until |q[0] * v[1]| >= min_margin.
    double min_margin = 0.0;

    void validate() const;
};

struct SynthSample {
    Tensor q;
    Tensor v;
    std::size_t label = 0;
};

struct SynthDataset {
    SynthTaskSpec spec;
    std::vector<Tensor> scorers;  // classes x [n_q x n_v]
    std::vector<SynthSample> train;
    std::vector<SynthSample> test;
};

SynthDataset gen_task(const SynthTaskSpec& spec);

// Noise-free score of class k for a sample.
double task_score(const SynthDataset& data, const Tensor& q, const Tensor& v,
                  std::size_t k);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch = 32;
    std::size_t epochs = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_loss = 0.0;
    double test_acc = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::vector<std::vector<std::size_t>> confusion;  // final, on test split
    double wall_seconds = 0.0;                        // not serialized to CSV
    std::uint64_t seed = 0;
    ModelSpec model_spec;
    SynthTaskSpec task_spec;
};

// One Adam update over flat parameter/gradient vectors, with bias
// correction. Step count lives in the state. Exposed for direct testing.
struct AdamState {
    std::vector<double> m;
    std::vector<double> u;
    std::size_t step = 0;
};
void adam_step(std::vector<double>& theta, const std::vector<double>& grad,
               AdamState& state, const TrainConfig& cfg);

// Numerically stable softmax cross-entropy and its logits gradient.
double cross_entropy(const Tensor& logits, std::size_t label);
Tensor cross_entropy_grad(const Tensor& logits, std::size_t label);

// Minibatch Adam training. Deterministic given cfg.seed: the per-epoch
// shuffle is a Fisher-Yates driven by the portable Rng, batch gradients are
// accumulated in a fixed order. Raises DivergenceError when the loss goes
// non-finite.
TrainReport train(ModelParams& model, const SynthDataset& data, const TrainConfig& cfg);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
};

// Argmax prediction with lowest-index tie break.
EvalResult evaluate(const ModelParams& model, std::span<const SynthSample> part);
// Same, for an arbitrary logits function (used for oracle predictors).
EvalResult evaluate_with(const std::function<Tensor(const SynthSample&)>& logits_fn,
                         std::size_t classes, std::span<const SynthSample> part);

// epoch,train_loss,train_acc,test_loss,test_acc
void write_report_csv(const TrainReport& report, std::ostream& out);
// true_class,pred_class,count
void write_confusion_csv(const TrainReport& report, std::ostream& out);

}  // namespace fusionbench
