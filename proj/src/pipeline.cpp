#include "ltr/pipeline.hpp"

#include "ltr/errors.hpp"
#include "ltr/parallel.hpp"

namespace ltr {

std::map<std::string, Vocabulary> resolve_vocabs(const RunConfig& run,
                                                 const std::vector<ExampleList>& train_lists) {
  std::map<std::string, Vocabulary> vocabs;
  std::map<std::string, VocabSource> declared;
  for (const auto& src : run.vocab_sources) declared[src.id] = src;

  for (const auto& spec : run.ranking.feature_specs) {
    if (!spec.categorical || vocabs.count(spec.vocabulary_id)) continue;
    auto it = declared.find(spec.vocabulary_id);
    if (it != declared.end() && !it->second.file.empty()) {
      vocabs[spec.vocabulary_id] =
          load_vocab_file(it->second.file, it->second.oov_buckets, spec.vocabulary_id);
      continue;
    }
    // Tokens of every feature mapped to this vocabulary, across the data.
    std::vector<std::string> tokens;
    for (const auto& s : run.ranking.feature_specs) {
      if (!s.categorical || s.vocabulary_id != spec.vocabulary_id) continue;
      for (const auto& list : train_lists) {
        if (s.scope == FeatureScope::kContext) {
          auto f = list.context_tokens.find(s.name);
          if (f != list.context_tokens.end()) {
            tokens.insert(tokens.end(), f->second.begin(), f->second.end());
          }
        } else {
          for (size_t i = 0; i < list.size(); ++i) {
            if (!list.mask[i]) continue;
            auto f = list.items[i].tokens.find(s.name);
            if (f != list.items[i].tokens.end()) {
              tokens.insert(tokens.end(), f->second.begin(), f->second.end());
            }
          }
        }
      }
    }
    const size_t min_freq =
        it != declared.end() ? it->second.min_frequency : run.ranking.vocab_min_frequency;
    const size_t oov =
        it != declared.end() ? it->second.oov_buckets : run.ranking.vocab_oov_buckets;
    vocabs[spec.vocabulary_id] = build_vocab(tokens, min_freq, oov, spec.vocabulary_id);
  }
  return vocabs;
}

TrainPipelineResult train_pipeline(RunConfig run) {
  auto raw_lists = read_lists(run.train_path);
  if (raw_lists.empty()) throw DomainError("training file '" + run.train_path + "' is empty");
  if (run.ranking.feature_specs.empty()) {
    run.ranking.feature_specs =
        infer_feature_specs(raw_lists, run.ranking.default_embedding_dim);
  }
  auto vocabs = resolve_vocabs(run, raw_lists);
  Rng root(run.ranking.seed);
  auto lists = pad_all(std::move(raw_lists), run.ranking.list_size, root.fork("pad_train"),
                       run.ranking.truncate_policy);

  auto model = Model::build(run.ranking, std::move(vocabs));
  TrainPipelineResult result{std::move(model), {}, 0.0, 0, run};
  if (run.ranking.worker_count > 1) {
    auto async = train_async(result.model, lists, run.ranking.num_steps,
                             run.ranking.worker_count);
    result.loss_trace = std::move(async.loss_trace);
    result.steps_per_sec = async.steps_per_sec;
    result.dropped_updates = async.dropped_updates;
  } else {
    auto train = result.model.train(lists, run.ranking.num_steps);
    result.loss_trace = std::move(train.loss_trace);
  }
  return result;
}

EvalReport eval_pipeline(const Model& model, const std::string& eval_path) {
  Rng root(model.config().seed);
  auto lists = pad_all(read_lists(eval_path), model.config().list_size,
                       root.fork("pad_eval"), model.config().truncate_policy);
  return model.evaluate(lists);
}

std::vector<PredictRow> predict_pipeline(const Model& model, const std::string& data_path) {
  return model.predict(read_lists(data_path));
}

}  // namespace ltr
