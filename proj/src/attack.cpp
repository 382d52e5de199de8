#include "fedleak/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fedleak {

ModelSpec predictor_model_spec(const PredictorSpec& pspec) {
  if (pspec.input_dim == 0 || pspec.output_dim == 0)
    throw std::invalid_argument("predictor dims must be positive");
  ModelSpec spec;
  size_t width = pspec.input_dim;
  for (size_t h : pspec.hidden) {
    spec.layers.push_back(LayerSpec::dense(width, h));
    spec.layers.push_back(LayerSpec::relu());
    width = h;
  }
  spec.layers.push_back(LayerSpec::dense(width, pspec.output_dim));
  spec.layers.push_back(LayerSpec::softmax());
  spec.loss = LossKind::CrossEntropy;
  return spec;
}

namespace {

struct RawDummy {
  std::vector<double> flat;
  LabelDistribution y;
  double alpha;
};

std::vector<RawDummy> train_dummies(const ModelSpec& spec,
                                    const ModelParams& global_params,
                                    const Dataset& proxy,
                                    const std::vector<double>& alphas,
                                    size_t n_per_alpha,
                                    const AttackClientHyper& hyper,
                                    const NoiseConfig& noise, uint64_t seed,
                                    uint64_t split_tag) {
  IndexPool pool = IndexPool::from_dataset(proxy);
  std::vector<RawDummy> out;
  out.reserve(alphas.size() * n_per_alpha);
  size_t id = 0;
  for (double alpha : alphas) {
    for (size_t i = 0; i < n_per_alpha; ++i, ++id) {
      Rng dir_rng =
          make_rng(mix_seed(seed, kStreamDirichlet, split_tag, id));
      LabelDistribution want =
          sample_dirichlet(alpha, proxy.label_count, dir_rng);
      std::vector<size_t> indices = partition_from_distribution(
          proxy, want, hyper.samples_per_client,
          mix_seed(seed, kStreamDummy, split_tag, id), pool);

      RawDummy d;
      d.y = empirical_distribution(indices, proxy);
      d.alpha = alpha;
      ClientResult res = client_update(
          spec, global_params, proxy, indices, hyper.epochs, hyper.batch_size,
          hyper.eta, noise, mix_seed(seed, kStreamClient, split_tag, id));
      d.flat = flatten(res.params);
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace

MetaBuildResult build_meta_dataset(
    const ModelSpec& spec, const ModelParams& global_params,
    const Dataset& proxy_train, const Dataset& proxy_test,
    const std::vector<double>& alphas, size_t n_train_per_alpha,
    size_t n_test_per_alpha, const AttackClientHyper& hyper,
    const NoiseConfig& noise, size_t pca_dims, uint64_t seed) {
  if (alphas.empty()) throw std::invalid_argument("no alpha values given");
  if (n_train_per_alpha == 0)
    throw std::invalid_argument("need at least one train dummy per alpha");
  if (hyper.samples_per_client == 0)
    throw std::invalid_argument("dummy clients need at least one sample");

  std::vector<RawDummy> train =
      train_dummies(spec, global_params, proxy_train, alphas,
                    n_train_per_alpha, hyper, noise, seed, 0);
  std::vector<RawDummy> test =
      train_dummies(spec, global_params, proxy_test, alphas, n_test_per_alpha,
                    hyper, noise, seed, 1);

  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (auto& d : train) rows.push_back(d.flat);
  PcaModel pca = pca_fit(rows, pca_dims);

  // Standardize each projected dimension to zero mean and unit variance over
  // the train split, folding the affine correction into the PCA model so one
  // pca_apply covers the whole reduction. Client updates at realistic
  // learning rates move the parameters by tiny amounts, and without this
  // rescaling the predictor would start from near-zero activations.
  {
    size_t d_out = pca.out_dim(), D = pca.in_dim(), n = rows.size();
    std::vector<double> m(d_out, 0.0), s(d_out, 0.0);
    std::vector<std::vector<double>> proj(n);
    for (size_t k = 0; k < n; ++k) {
      proj[k] = pca_apply(pca, rows[k]);
      for (size_t r = 0; r < d_out; ++r) m[r] += proj[k][r];
    }
    for (double& v : m) v /= double(n);
    for (size_t k = 0; k < n; ++k)
      for (size_t r = 0; r < d_out; ++r) {
        double c = proj[k][r] - m[r];
        s[r] += c * c;
      }
    for (double& v : s) v = std::sqrt(v / double(n));
    // Shift the center along the components first; that step needs the
    // original orthonormal rows.
    for (size_t r = 0; r < d_out; ++r) {
      const double* c = pca.components.data() + r * D;
      for (size_t j = 0; j < D; ++j) pca.mean[j] += m[r] * c[j];
    }
    for (size_t r = 0; r < d_out; ++r) {
      double scale = s[r] > 1e-12 ? 1.0 / s[r] : 1.0;
      double* c = pca.components.data() + r * D;
      for (size_t j = 0; j < D; ++j) c[j] *= scale;
    }
  }

  MetaBuildResult result;
  result.pca = std::move(pca);
  auto to_sample = [&](RawDummy& d) {
    MetaSample s;
    s.x = pca_apply(result.pca, d.flat);
    s.y = std::move(d.y);
    s.alpha = d.alpha;
    return s;
  };
  result.meta.train.reserve(train.size());
  for (auto& d : train) result.meta.train.push_back(to_sample(d));
  result.meta.test.reserve(test.size());
  for (auto& d : test) result.meta.test.push_back(to_sample(d));
  return result;
}

namespace {

Tensor split_inputs(const std::vector<MetaSample>& split,
                    const std::vector<size_t>& idx) {
  size_t d = split[0].x.size();
  Tensor x = Tensor::zeros({idx.size(), d});
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy(split[idx[r]].x.begin(), split[idx[r]].x.end(),
              x.values.begin() + r * d);
  return x;
}

Tensor split_targets(const std::vector<MetaSample>& split,
                     const std::vector<size_t>& idx) {
  size_t l = split[0].y.probs.size();
  Tensor y = Tensor::zeros({idx.size(), l});
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy(split[idx[r]].y.probs.begin(), split[idx[r]].y.probs.end(),
              y.values.begin() + r * l);
  return y;
}

double split_loss(const ModelSpec& spec, const ModelParams& params,
                  const std::vector<MetaSample>& split) {
  constexpr size_t kChunk = 256;
  double sum = 0.0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < split.size(); start += kChunk) {
    size_t end = std::min(start + kChunk, split.size());
    idx.clear();
    for (size_t i = start; i < end; ++i) idx.push_back(i);
    double l = loss_value(spec, params, split_inputs(split, idx),
                          split_targets(split, idx));
    sum += l * double(idx.size());
  }
  return sum / double(split.size());
}

}  // namespace

PredictorResult train_predictor(const MetaDataset& meta,
                                const PredictorSpec& pspec, uint64_t seed) {
  if (meta.train.empty())
    throw std::invalid_argument("meta-dataset train split is empty");
  if (meta.x_dim() != pspec.input_dim)
    throw std::invalid_argument("meta-dataset x dimension " +
                                std::to_string(meta.x_dim()) +
                                " does not match predictor input " +
                                std::to_string(pspec.input_dim));
  if (meta.label_count() != pspec.output_dim)
    throw std::invalid_argument("label count mismatch");

  ModelSpec spec = predictor_model_spec(pspec);
  // Deep relu stacks need the larger He-style bound to keep activations
  // alive; the default fan-in bound collapses after eight hidden layers.
  PredictorResult res;
  res.params =
      init_params(spec, mix_seed(seed, kStreamPredictor, 0), std::sqrt(6.0));

  Rng rng = make_rng(mix_seed(seed, kStreamPredictor, 1));
  std::vector<size_t> order(meta.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double eta = pspec.eta;
  double prev = split_loss(spec, res.params, meta.train);
  double prev_test = meta.test.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : split_loss(spec, res.params, meta.test);
  for (size_t epoch = 0; epoch < pspec.epochs; ++epoch) {
    ModelParams snapshot = res.params;
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size();
         start += pspec.batch_size) {
      size_t end = std::min(start + pspec.batch_size, order.size());
      std::vector<size_t> bi(order.begin() + start, order.begin() + end);
      LossGrad lg = loss_and_grad(spec, res.params,
                                  split_inputs(meta.train, bi),
                                  split_targets(meta.train, bi));
      res.params = sgd_step(res.params, lg.grads, eta);
    }
    res.eta_used.push_back(eta);
    double cur = split_loss(spec, res.params, meta.train);
    if (cur > prev) {
      // Roll the epoch back so the curve reflects the params we keep.
      res.params = std::move(snapshot);
      eta *= 0.5;
      res.train_loss.push_back(prev);
      res.test_loss.push_back(prev_test);
    } else {
      prev = cur;
      prev_test = meta.test.empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : split_loss(spec, res.params, meta.test);
      res.train_loss.push_back(cur);
      res.test_loss.push_back(prev_test);
    }
  }
  return res;
}

LabelDistribution predict_distribution(const PredictorSpec& pspec,
                                       const ModelParams& predictor,
                                       const PcaModel& pca,
                                       const ModelParams& intercepted) {
  std::vector<double> flat = flatten(intercepted);
  std::vector<double> x = pca_apply(pca, flat);
  if (x.size() != pspec.input_dim)
    throw std::invalid_argument("PCA output dimension " +
                                std::to_string(x.size()) +
                                " does not match predictor input");
  Tensor batch = Tensor::zeros({1, x.size()});
  batch.values = x;
  Tensor out = forward(predictor_model_spec(pspec), predictor, batch);
  LabelDistribution dist;
  dist.probs.assign(out.values.begin(), out.values.end());
  return dist;
}

double cross_entropy(const std::vector<double>& y,
                     const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("distribution size mismatch");
  double ce = 0.0;
  for (size_t i = 0; i < y.size(); ++i)
    ce -= y[i] * std::log(std::max(yhat[i], 1e-12));
  return ce;
}

double kl_divergence(const std::vector<double>& y,
                     const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("distribution size mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] <= 0.0) continue;
    kl += y[i] * (std::log(y[i]) - std::log(std::max(yhat[i], 1e-12)));
  }
  return kl;
}

PredictorEval evaluate_predictor(const PredictorSpec& pspec,
                                 const ModelParams& predictor,
                                 const std::vector<MetaSample>& split) {
  if (split.empty()) throw std::invalid_argument("empty evaluation split");
  ModelSpec spec = predictor_model_spec(pspec);
  constexpr size_t kChunk = 256;
  PredictorEval eval;
  std::vector<size_t> idx;
  size_t l = split[0].y.probs.size();
  for (size_t start = 0; start < split.size(); start += kChunk) {
    size_t end = std::min(start + kChunk, split.size());
    idx.clear();
    for (size_t i = start; i < end; ++i) idx.push_back(i);
    Tensor out = forward(spec, predictor, split_inputs(split, idx));
    for (size_t r = 0; r < idx.size(); ++r) {
      std::vector<double> yhat(out.values.begin() + r * l,
                               out.values.begin() + (r + 1) * l);
      eval.mean_cross_entropy += cross_entropy(split[idx[r]].y.probs, yhat);
      eval.mean_kl += kl_divergence(split[idx[r]].y.probs, yhat);
    }
  }
  eval.mean_cross_entropy /= double(split.size());
  eval.mean_kl /= double(split.size());
  return eval;
}

namespace {

constexpr uint64_t kMetaMagic = 0x31304154454d4c46ull;  // "FLMETA01"

void put_u64(std::ofstream& f, uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), 8);
}

uint64_t get_u64(std::ifstream& f, const std::string& path) {
  uint64_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 8))
    throw std::runtime_error("truncated meta-dataset file: " + path);
  return v;
}

void put_doubles(std::ofstream& f, const std::vector<double>& v) {
  f.write(reinterpret_cast<const char*>(v.data()),
          std::streamsize(v.size() * 8));
}

void get_doubles(std::ifstream& f, std::vector<double>& v,
                 const std::string& path) {
  if (!f.read(reinterpret_cast<char*>(v.data()),
              std::streamsize(v.size() * 8)))
    throw std::runtime_error("truncated meta-dataset file: " + path);
}

void write_split(std::ofstream& f, const std::vector<MetaSample>& split) {
  for (const auto& s : split) {
    put_doubles(f, s.x);
    put_doubles(f, s.y.probs);
    put_doubles(f, {s.alpha});
  }
}

void read_split(std::ifstream& f, std::vector<MetaSample>& split, size_t n,
                size_t d, size_t l, const std::string& path) {
  split.resize(n);
  for (auto& s : split) {
    s.x.resize(d);
    get_doubles(f, s.x, path);
    s.y.probs.resize(l);
    get_doubles(f, s.y.probs, path);
    std::vector<double> a(1);
    get_doubles(f, a, path);
    s.alpha = a[0];
  }
}

}  // namespace

void save_meta_dataset(const std::string& path, const MetaDataset& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  put_u64(f, kMetaMagic);
  put_u64(f, meta.x_dim());
  put_u64(f, meta.label_count());
  put_u64(f, meta.train.size());
  put_u64(f, meta.test.size());
  write_split(f, meta.train);
  write_split(f, meta.test);
  if (!f) throw std::runtime_error("write failed: " + path);
}

MetaDataset load_meta_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  if (get_u64(f, path) != kMetaMagic)
    throw std::runtime_error("not a meta-dataset file: " + path);
  size_t d = get_u64(f, path);
  size_t l = get_u64(f, path);
  size_t n_train = get_u64(f, path);
  size_t n_test = get_u64(f, path);
  MetaDataset meta;
  read_split(f, meta.train, n_train, d, l, path);
  read_split(f, meta.test, n_test, d, l, path);
  return meta;
}

}  // namespace fedleak
