#include "pilekd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "pilekd/errors.hpp"

namespace pilekd {

namespace {

// Cumulative grade proportions for the 10/20/40/20/10% bucketing.
constexpr double kGradeCdf[] = {0.1, 0.3, 0.7, 0.9};

std::vector<int> bucket_labels(const std::vector<double>& scores) {
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double thresholds[4];
  for (int t = 0; t < 4; ++t) {
    auto idx = static_cast<std::size_t>(std::floor(kGradeCdf[t] * n));
    if (idx >= sorted.size()) idx = sorted.size() - 1;
    thresholds[t] = sorted[idx];
  }
  std::vector<int> labels;
  labels.reserve(scores.size());
  for (double s : scores) {
    int grade = 0;
    for (int t = 0; t < 4; ++t) {
      if (s >= thresholds[t]) grade = t + 1;
    }
    labels.push_back(grade);
  }
  return labels;
}

std::vector<std::size_t> choose_subset(std::size_t total, std::size_t count,
                                       Rng& rng) {
  std::vector<std::size_t> indices(total);
  for (std::size_t i = 0; i < total; ++i) indices[i] = i;
  rng.shuffle(indices);
  indices.resize(count);
  std::sort(indices.begin(), indices.end());
  return indices;
}

StudentParams train_teacher(const Dataset& full,
                            const std::vector<std::size_t>& query_indices,
                            const SynthConfig& config, int epochs,
                            std::uint64_t seed) {
  Dataset subset;
  subset.feature_dim = full.feature_dim;
  subset.num_teachers = 0;
  subset.groups.reserve(query_indices.size());
  for (std::size_t g : query_indices) subset.groups.push_back(full.groups[g]);

  Rng init_rng(derive_seed(seed, 0));
  StudentParams initial = init_params(Architecture::Mlp, config.teacher_hidden,
                                      full.feature_dim, init_rng);
  TrainConfig tc;
  tc.learning_rate = config.teacher_lr;
  tc.epochs = epochs;
  tc.batch_pairs = config.teacher_batch_pairs;
  tc.kd_alpha = 0.0;
  tc.seed = derive_seed(seed, 1);
  return train(subset, std::nullopt, std::move(initial), tc).params;
}

}  // namespace

void validate_config(const SynthConfig& config) {
  if (config.num_queries < 1) throw ConfigError("num_queries must be >= 1");
  if (config.docs_per_query_min < 1) {
    throw ConfigError("docs_per_query_min must be >= 1");
  }
  if (config.docs_per_query_max < config.docs_per_query_min) {
    throw ConfigError("docs_per_query_max must be >= docs_per_query_min");
  }
  if (config.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (config.num_teachers < 1) throw ConfigError("num_teachers must be >= 1");
  if (!(config.subset_fraction > 0.0 && config.subset_fraction <= 1.0)) {
    throw ConfigError("subset_fraction must be in (0, 1]");
  }
  if (!(config.label_noise >= 0.0 && config.label_noise < 1.0)) {
    throw ConfigError("label_noise must be in [0, 1)");
  }
  if (config.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (config.bias_magnitude < 0.0) {
    throw ConfigError("bias_magnitude must be >= 0");
  }
  if (!(config.biased_query_fraction >= 0.0 &&
        config.biased_query_fraction <= 1.0)) {
    throw ConfigError("biased_query_fraction must be in [0, 1]");
  }
  if (config.teacher_epochs < 0) throw ConfigError("teacher_epochs must be >= 0");
  if (config.teacher_lr <= 0.0) throw ConfigError("teacher_lr must be > 0");
  if (config.teacher_batch_pairs < 1) {
    throw ConfigError("teacher_batch_pairs must be >= 1");
  }
  for (int h : config.teacher_hidden) {
    if (h < 1) throw ConfigError("teacher_hidden sizes must be >= 1");
  }
}

GroundTruth gen_ground_truth(const SynthConfig& config, Rng& rng) {
  validate_config(config);

  GroundTruth out;
  out.oracle = init_params(Architecture::Mlp, {16, 16}, config.feature_dim, rng);
  // At fan-in init scale a tanh net is nearly linear in its inputs, which
  // would let any scorer family rank it equally well. Widening the weights
  // pushes the units into their curved regime and gives the hidden function
  // real structure worth distilling.
  for (double& w : out.oracle.weights) w *= 8.0;
  out.dataset.feature_dim = config.feature_dim;
  out.dataset.num_teachers = 0;

  std::vector<double> true_scores;
  const std::size_t span =
      config.docs_per_query_max - config.docs_per_query_min + 1;
  for (std::size_t g = 0; g < config.num_queries; ++g) {
    QueryGroup group;
    group.query_id = "q" + std::to_string(g);
    const std::size_t n_docs =
        config.docs_per_query_min + (span > 1 ? rng.below(span) : 0);
    group.docs.reserve(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
      DocEntry doc;
      doc.doc_id = "q" + std::to_string(g) + "_d" + std::to_string(i);
      doc.features.reserve(config.feature_dim);
      for (std::size_t f = 0; f < config.feature_dim; ++f) {
        doc.features.push_back(rng.normal());
      }
      true_scores.push_back(score(out.oracle, doc.features));
      group.docs.push_back(std::move(doc));
    }
    out.dataset.groups.push_back(std::move(group));
  }

  const std::vector<int> grades = bucket_labels(true_scores);
  std::size_t cursor = 0;
  for (auto& group : out.dataset.groups) {
    for (auto& doc : group.docs) {
      doc.label.value = grades[cursor++];
    }
  }

  if (config.label_noise > 0.0) {
    apply_label_noise(out.dataset, config.label_noise, rng);
  }
  return out;
}

void apply_label_noise(Dataset& dataset, double noise, Rng& rng) {
  if (noise < 0.0 || noise >= 1.0 || !std::isfinite(noise)) {
    throw ConfigError("label noise must be in [0, 1), got " +
                      std::to_string(noise));
  }
  if (noise == 0.0) return;
  for (auto& group : dataset.groups) {
    for (auto& doc : group.docs) {
      const double u = rng.uniform();
      if (u >= noise) continue;
      int& grade = doc.label.value;
      const bool down = u < noise * 0.5;
      if (grade == kMinGrade) {
        grade = kMinGrade + 1;
      } else if (grade == kMaxGrade) {
        grade = kMaxGrade - 1;
      } else {
        grade += down ? -1 : 1;
      }
    }
  }
}

std::vector<std::vector<double>> score_dataset(const StudentParams& model,
                                               const Dataset& dataset) {
  std::vector<std::vector<double>> scores;
  scores.reserve(dataset.groups.size());
  for (const auto& group : dataset.groups) {
    std::vector<double> group_scores;
    group_scores.reserve(group.docs.size());
    for (const auto& doc : group.docs) {
      group_scores.push_back(score(model, doc.features));
    }
    scores.push_back(std::move(group_scores));
  }
  return scores;
}

TeacherResult make_teachers(const GroundTruth& truth, const SynthConfig& config,
                            Rng& rng) {
  validate_config(config);
  if (truth.dataset.num_teachers != 0) {
    throw InvalidInputError("make_teachers: dataset already has " +
                            std::to_string(truth.dataset.num_teachers) +
                            " teacher logits per doc");
  }

  TeacherResult out;
  out.dataset = truth.dataset;
  const std::size_t K = config.num_teachers;
  out.dataset.num_teachers = K;
  for (auto& group : out.dataset.groups) {
    for (auto& doc : group.docs) doc.teacher_logits.assign(K, 0.0);
  }
  const std::size_t Q = truth.dataset.groups.size();

  if (config.teacher_mode == TeacherMode::Trained) {
    // One derived seed per teacher covers its subset choice, init, and
    // training stream, so the teachers are independent and can train in
    // parallel without changing results.
    const std::uint64_t base = rng.next();
    std::vector<std::vector<std::size_t>> subsets(K);
    std::vector<std::uint64_t> seeds(K);
    for (std::size_t k = 0; k < K; ++k) {
      seeds[k] = derive_seed(base, k);
      if (k == 0) {
        subsets[k].resize(Q);
        for (std::size_t g = 0; g < Q; ++g) subsets[k][g] = g;
      } else {
        const auto count = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(
                   config.subset_fraction * static_cast<double>(Q))));
        Rng subset_rng(derive_seed(seeds[k], 2));
        subsets[k] = choose_subset(Q, count, subset_rng);
      }
    }

    // Subset teachers see fewer pairs per epoch, so at a fixed epoch count
    // they would sit earlier on the learning curve than the full-data
    // teacher. Scaling their epochs by 1/subset_fraction equalizes the
    // optimizer-step budget; the full-data teacher keeps only its genuine
    // data advantage.
    const int subset_epochs = static_cast<int>(
        std::lround(config.teacher_epochs / config.subset_fraction));

    out.teacher_models.resize(K);
    std::vector<std::exception_ptr> failures(K);
    std::vector<std::thread> workers;
    workers.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      workers.emplace_back([&, k]() {
        try {
          out.teacher_models[k] = train_teacher(
              truth.dataset, subsets[k], config,
              k == 0 ? config.teacher_epochs : subset_epochs, seeds[k]);
        } catch (...) {
          failures[k] = std::current_exception();
        }
      });
    }
    for (auto& worker : workers) worker.join();
    for (std::size_t k = 0; k < K; ++k) {
      if (failures[k]) std::rethrow_exception(failures[k]);
    }

    for (auto& group : out.dataset.groups) {
      for (auto& doc : group.docs) {
        for (std::size_t k = 0; k < K; ++k) {
          doc.teacher_logits[k] = score(out.teacher_models[k], doc.features);
        }
      }
    }
    return out;
  }

  // Perturbed mode. The bias carries a per-doc random sign: a same-sign
  // offset on every doc of a query would cancel out of every within-query
  // comparison and change nothing measurable.
  std::vector<std::vector<double>> truth_scores =
      score_dataset(truth.oracle, truth.dataset);
  const auto biased_count = static_cast<std::size_t>(
      std::floor(config.biased_query_fraction * static_cast<double>(Q)));
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::uint8_t> biased(Q, 0);
    if (config.bias_magnitude > 0.0 && biased_count > 0) {
      for (std::size_t g : choose_subset(Q, biased_count, rng)) biased[g] = 1;
    }
    for (std::size_t g = 0; g < Q; ++g) {
      auto& docs = out.dataset.groups[g].docs;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        double logit = truth_scores[g][i];
        if (config.noise_sigma > 0.0) {
          logit += config.noise_sigma * rng.normal();
        }
        if (biased[g]) {
          logit += rng.bernoulli(0.5) ? config.bias_magnitude
                                      : -config.bias_magnitude;
        }
        docs[i].teacher_logits[k] = logit;
      }
    }
  }
  return out;
}

}  // namespace pilekd
