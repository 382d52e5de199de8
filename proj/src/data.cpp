#include "fedleak/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace fedleak {

Tensor Dataset::batch(const std::vector<size_t>& indices) const {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  size_t d = sample_numel();
  std::vector<size_t> shape;
  shape.push_back(indices.size());
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor out = Tensor::zeros(shape);
  for (size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size())
      throw std::out_of_range("sample index " + std::to_string(indices[r]) +
                              " out of range");
    std::copy(inputs.begin() + indices[r] * d,
              inputs.begin() + (indices[r] + 1) * d,
              out.values.begin() + r * d);
  }
  return out;
}

std::vector<int> Dataset::batch_labels(const std::vector<size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (size_t i : indices) {
    if (i >= size())
      throw std::out_of_range("sample index " + std::to_string(i) +
                              " out of range");
    out.push_back(labels[i]);
  }
  return out;
}

void validate_distribution(const LabelDistribution& dist) {
  if (dist.probs.empty())
    throw std::invalid_argument("label distribution is empty");
  double sum = 0.0;
  for (double p : dist.probs) {
    if (!(p >= 0.0))
      throw std::invalid_argument("label distribution has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("label distribution sums to " +
                                std::to_string(sum) + ", expected 1");
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t read_be32(const std::vector<unsigned char>& b, size_t off,
                   const std::string& path) {
  if (off + 4 > b.size())
    throw std::runtime_error("truncated file: " + path);
  return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) |
         (uint32_t(b[off + 2]) << 8) | uint32_t(b[off + 3]);
}

}  // namespace

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path) {
  auto img = read_file(images_path);
  auto lab = read_file(labels_path);

  uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("bad image magic in " + images_path +
                             " (expected 0x00000803)");
  uint32_t n = read_be32(img, 4, images_path);
  uint32_t rows = read_be32(img, 8, images_path);
  uint32_t cols = read_be32(img, 12, images_path);
  size_t expect = 16 + size_t(n) * rows * cols;
  if (img.size() != expect)
    throw std::runtime_error("truncated file: " + images_path + " (expected " +
                             std::to_string(expect) + " bytes, got " +
                             std::to_string(img.size()) + ")");

  uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("bad label magic in " + labels_path +
                             " (expected 0x00000801)");
  uint32_t ln = read_be32(lab, 4, labels_path);
  if (lab.size() != 8 + size_t(ln))
    throw std::runtime_error("truncated file: " + labels_path);
  if (ln != n)
    throw std::runtime_error("image/label count mismatch: " +
                             std::to_string(n) + " vs " + std::to_string(ln));

  Dataset ds;
  ds.sample_shape = {rows, cols};
  ds.label_count = 10;
  ds.inputs.resize(size_t(n) * rows * cols);
  ds.labels.resize(n);
  for (size_t i = 0; i < ds.inputs.size(); ++i)
    ds.inputs[i] = double(img[16 + i]) / 255.0;
  for (uint32_t i = 0; i < n; ++i) {
    unsigned char l = lab[8 + i];
    if (l > 9)
      throw std::runtime_error("label byte " + std::to_string(int(l)) +
                               " out of range in " + labels_path);
    ds.labels[i] = int(l);
  }
  return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
  if (batch_paths.empty())
    throw std::invalid_argument("no CIFAR batch files given");
  constexpr size_t kRecord = 3073;
  Dataset ds;
  ds.sample_shape = {3, 32, 32};
  ds.label_count = 10;
  for (const auto& path : batch_paths) {
    auto bytes = read_file(path);
    if (bytes.size() % kRecord != 0)
      throw std::runtime_error("file length " + std::to_string(bytes.size()) +
                               " of " + path + " is not a multiple of 3073");
    size_t records = bytes.size() / kRecord;
    for (size_t r = 0; r < records; ++r) {
      const unsigned char* rec = bytes.data() + r * kRecord;
      if (rec[0] > 9)
        throw std::runtime_error("label byte " + std::to_string(int(rec[0])) +
                                 " out of range in " + path);
      ds.labels.push_back(int(rec[0]));
      for (size_t i = 0; i < 3072; ++i)
        ds.inputs.push_back(double(rec[1 + i]) / 255.0);
    }
  }
  return ds;
}

Dataset synth_dataset(size_t label_count, size_t n,
                      const std::vector<size_t>& sample_shape, uint64_t seed,
                      uint64_t split, double sigma) {
  if (label_count == 0) throw std::invalid_argument("label count must be > 0");
  if (n < label_count)
    throw std::invalid_argument("need at least one sample per label");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  size_t d = shape_numel(sample_shape);

  // Class means depend on the seed alone, so different splits of the same
  // seed describe one distribution and only the sample noise differs.
  Rng mean_rng = make_rng(mix_seed(seed, kStreamSynth, 0));
  std::uniform_real_distribution<double> mean_u(0.2, 0.8);
  std::vector<double> means(label_count * d);
  for (double& m : means) m = mean_u(mean_rng);

  Dataset ds;
  ds.sample_shape = sample_shape;
  ds.label_count = label_count;
  ds.inputs.resize(n * d);
  ds.labels.resize(n);
  Rng rng = make_rng(mix_seed(seed, kStreamSynth, 1 + split));
  std::normal_distribution<double> noise(0.0, sigma);
  for (size_t i = 0; i < n; ++i) {
    int label = int(i % label_count);
    ds.labels[i] = label;
    const double* m = means.data() + size_t(label) * d;
    for (size_t j = 0; j < d; ++j)
      ds.inputs[i * d + j] = std::clamp(m[j] + noise(rng), 0.0, 1.0);
  }
  return ds;
}

Partition partition_uniform(const Dataset& dataset, size_t clients,
                            size_t n_per_client, uint64_t seed) {
  if (clients == 0 || n_per_client == 0)
    throw std::invalid_argument("clients and samples per client must be > 0");
  if (clients * n_per_client > dataset.size())
    throw std::invalid_argument(
        "partition needs " + std::to_string(clients * n_per_client) +
        " samples but the dataset has " + std::to_string(dataset.size()));
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = make_rng(mix_seed(seed, kStreamPartition, 0));
  std::shuffle(order.begin(), order.end(), rng);

  Partition part;
  part.assignments.resize(clients);
  for (size_t k = 0; k < clients; ++k)
    part.assignments[k].assign(order.begin() + k * n_per_client,
                               order.begin() + (k + 1) * n_per_client);
  return part;
}

SkewedPartition partition_8020(const Dataset& dataset, size_t clients_per_label,
                               size_t n_per_client, uint64_t seed) {
  size_t L = dataset.label_count;
  if (clients_per_label == 0 || n_per_client == 0)
    throw std::invalid_argument("clients and samples per client must be > 0");
  if (L < 2)
    throw std::invalid_argument("80/20 scheme needs at least two labels");

  IndexPool pool = IndexPool::from_dataset(dataset);
  Rng rng = make_rng(mix_seed(seed, kStreamPartition, 1));
  for (auto& p : pool.by_label) std::shuffle(p.begin(), p.end(), rng);

  size_t dominant_count = size_t(0.8 * double(n_per_client));
  SkewedPartition out;
  out.partition.assignments.resize(L * clients_per_label);
  out.dominant.resize(L * clients_per_label);

  auto take = [&](size_t label) -> size_t {
    auto& p = pool.by_label[label];
    if (p.empty())
      throw std::invalid_argument("insufficient samples of label " +
                                  std::to_string(label));
    size_t idx = p.back();
    p.pop_back();
    return idx;
  };

  for (size_t l = 0; l < L; ++l) {
    std::vector<size_t> others;
    for (size_t o = 0; o < L; ++o)
      if (o != l) others.push_back(o);
    for (size_t j = 0; j < clients_per_label; ++j) {
      size_t client = l * clients_per_label + j;
      out.dominant[client] = int(l);
      auto& set = out.partition.assignments[client];
      for (size_t i = 0; i < dominant_count; ++i) set.push_back(take(l));
      for (size_t i = 0; i + dominant_count < n_per_client; ++i)
        set.push_back(take(others[i % others.size()]));
    }
  }
  return out;
}

LabelDistribution sample_dirichlet(double alpha, size_t label_count, Rng& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (label_count == 0) throw std::invalid_argument("label count must be > 0");
  LabelDistribution dist;
  dist.probs.resize(label_count);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double sum = 0.0;
  do {
    sum = 0.0;
    for (double& p : dist.probs) {
      p = gamma(rng);
      sum += p;
    }
  } while (sum <= 0.0);  // guards against all-underflow at tiny alpha
  for (double& p : dist.probs) p /= sum;
  return dist;
}

LabelDistribution sample_dirichlet(double alpha, size_t label_count,
                                   uint64_t seed) {
  Rng rng = make_rng(mix_seed(seed, kStreamDirichlet));
  return sample_dirichlet(alpha, label_count, rng);
}

IndexPool IndexPool::from_dataset(const Dataset& dataset) {
  IndexPool pool;
  pool.by_label.resize(dataset.label_count);
  for (size_t i = 0; i < dataset.size(); ++i)
    pool.by_label[size_t(dataset.labels[i])].push_back(i);
  return pool;
}

IndexPool IndexPool::from_indices(const Dataset& dataset,
                                  const std::vector<size_t>& indices) {
  IndexPool pool;
  pool.by_label.resize(dataset.label_count);
  for (size_t i : indices) {
    if (i >= dataset.size())
      throw std::out_of_range("pool index " + std::to_string(i) +
                              " out of range");
    pool.by_label[size_t(dataset.labels[i])].push_back(i);
  }
  return pool;
}

size_t IndexPool::remaining() const {
  size_t n = 0;
  for (const auto& p : by_label) n += p.size();
  return n;
}

namespace {

// Multinomial counts by sequential binomial decomposition.
std::vector<size_t> multinomial_counts(const std::vector<double>& probs,
                                       size_t n, Rng& rng) {
  std::vector<size_t> counts(probs.size(), 0);
  size_t remaining = n;
  double rest = 1.0;
  for (size_t c = 0; c < probs.size() && remaining > 0; ++c) {
    if (c + 1 == probs.size()) {
      counts[c] = remaining;
      remaining = 0;
      break;
    }
    double p = rest > 0.0 ? std::clamp(probs[c] / rest, 0.0, 1.0) : 0.0;
    std::binomial_distribution<size_t> bin(remaining, p);
    size_t k = bin(rng);
    counts[c] = k;
    remaining -= k;
    rest -= probs[c];
  }
  return counts;
}

}  // namespace

std::vector<size_t> partition_from_distribution(const Dataset& dataset,
                                                const LabelDistribution& dist,
                                                size_t n, uint64_t seed,
                                                IndexPool& pool) {
  validate_distribution(dist);
  if (dist.probs.size() != dataset.label_count)
    throw std::invalid_argument("distribution has " +
                                std::to_string(dist.probs.size()) +
                                " entries for " +
                                std::to_string(dataset.label_count) +
                                " labels");
  if (n == 0) return {};
  if (pool.remaining() < n)
    throw std::invalid_argument("pool exhausted: " +
                                std::to_string(pool.remaining()) +
                                " samples left, " + std::to_string(n) +
                                " requested");

  Rng rng = make_rng(mix_seed(seed, kStreamPartition, 2));
  size_t L = dataset.label_count;
  std::vector<size_t> result;
  result.reserve(n);

  std::vector<double> probs = dist.probs;
  size_t need = n;
  while (need > 0) {
    auto want = multinomial_counts(probs, need, rng);
    size_t taken = 0;
    for (size_t c = 0; c < L; ++c) {
      auto& p = pool.by_label[c];
      size_t k = std::min(want[c], p.size());
      for (size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<size_t> pick(0, p.size() - 1);
        size_t j = pick(rng);
        result.push_back(p[j]);
        p[j] = p.back();
        p.pop_back();
      }
      taken += k;
    }
    need -= taken;
    if (need == 0) break;
    // Some class pools ran dry; re-draw the unmet portion from classes that
    // still have samples, weighted by the requested distribution.
    double mass = 0.0;
    for (size_t c = 0; c < L; ++c) {
      probs[c] = pool.by_label[c].empty() ? 0.0 : dist.probs[c];
      mass += probs[c];
    }
    if (mass <= 0.0) {
      size_t avail = 0;
      for (size_t c = 0; c < L; ++c) {
        probs[c] = pool.by_label[c].empty() ? 0.0 : 1.0;
        avail += probs[c] > 0.0 ? 1 : 0;
      }
      if (avail == 0)
        throw std::invalid_argument("pool exhausted during redistribution");
      mass = double(avail);
    }
    for (double& p : probs) p /= mass;
  }
  return result;
}

LabelDistribution empirical_distribution(const std::vector<size_t>& indices,
                                         const Dataset& dataset) {
  if (indices.empty())
    throw std::invalid_argument("cannot take the distribution of an empty set");
  LabelDistribution dist;
  dist.probs.assign(dataset.label_count, 0.0);
  for (size_t i : indices) {
    if (i >= dataset.size())
      throw std::out_of_range("sample index " + std::to_string(i) +
                              " out of range");
    dist.probs[size_t(dataset.labels[i])] += 1.0;
  }
  for (double& p : dist.probs) p /= double(indices.size());
  return dist;
}

}  // namespace fedleak
