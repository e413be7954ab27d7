#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ctxnmt/corpus.hpp"
#include "ctxnmt/graph.hpp"
#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

struct TrainingConfig {
  int embedding_dim = 16;  // E
  int context_dim = 16;    // C
  int encoder_hidden = 32; // H, per direction
  int decoder_hidden = 32; // H'
  int source_vocab = 0;    // |V|, reserved ids included
  int target_vocab = 0;    // |V'|
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_threshold = 1.0;
  int batch_size = 16;
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 1;
  bool contextualize = true;
  bool mask_output_embeddings = false;  // also gate E_y inside the softmax
  std::string early_stop_metric = "nll";  // "nll" or "bleu"

  void validate() const;  // throws std::invalid_argument
};

struct LstmWeights {
  Tensor W_i, U_i, b_i;
  Tensor W_f, U_f, b_f;
  Tensor W_g, U_g, b_g;
  Tensor W_o, U_o, b_o;
};

/// All trainable tensors. Always allocates the contextualizer weights so a
/// checkpoint's shape does not depend on the flag; the graph simply skips
/// them when contextualize is off.
struct ModelParameters {
  TrainingConfig config;

  Tensor E_x;    // |V| x E
  Tensor E_y;    // |V'| x E
  Tensor c_out;  // |V'|

  LstmWeights enc_fwd;  // input E, hidden H
  LstmWeights enc_rev;  // input E, hidden H
  LstmWeights dec;      // input E + 2H, hidden H'

  Tensor attn_U;  // H x H'
  Tensor attn_V;  // H x 2H
  Tensor attn_v;  // H

  Tensor ctx_W1, ctx_b1;  // C x E, C
  Tensor ctx_W2, ctx_b2;  // C x C, C
  Tensor W_x, b_x;        // E x C, E
  Tensor W_y, b_y;        // E x C, E

  Tensor init_W, init_b;  // H' x 2H, H'  (decoder start state)
  Tensor out_P, out_b;    // E x H', E    (projection in front of E_y)

  // uniform(-0.08, 0.08) weights, zero biases except forget gates at 1
  static ModelParameters init(const TrainingConfig& config);

  // fixed enumeration order shared by the optimizer and the checkpoint
  void visit(const std::function<void(const std::string&, Tensor&)>& fn);
  std::vector<Tensor*> parameters();
};

/// Checkpoint on disk: `path` holds the named tensors, `path + ".meta.json"`
/// holds the TrainingConfig and vocabulary file references.
void save_model(const std::string& path, ModelParameters& params,
                const std::string& src_vocab_ref,
                const std::string& tgt_vocab_ref);

struct LoadedModel {
  ModelParameters params;
  std::string src_vocab_ref;
  std::string tgt_vocab_ref;
};
LoadedModel load_model(const std::string& path);

/// Parameter leaves bound into one graph, same member layout.
struct LstmNodes {
  Graph::NodeId W_i, U_i, b_i, W_f, U_f, b_f, W_g, U_g, b_g, W_o, U_o, b_o;
};
struct ModelNodes {
  Graph::NodeId E_x, E_y, c_out;
  LstmNodes enc_fwd, enc_rev, dec;
  Graph::NodeId attn_U, attn_V, attn_v;
  Graph::NodeId ctx_W1, ctx_b1, ctx_W2, ctx_b2;
  Graph::NodeId W_x, b_x, W_y, b_y;
  Graph::NodeId init_W, init_b, out_P, out_b;
};
ModelNodes bind_params(Graph& g, ModelParameters& params);

/// Per-sentence encoder output, all node ids in the binding graph.
struct EncodedSource {
  int T = 0;                              // source length as given (EOS included)
  std::vector<Graph::NodeId> annotations; // h_t, each {2H}
  Graph::NodeId annotation_matrix = -1;   // {T, 2H}
  Graph::NodeId context = -1;             // c^x {C}; -1 when contextualize off
  Graph::NodeId mask_x = -1;              // {E};    -1 when contextualize off
  Graph::NodeId mask_y = -1;              // {E};    -1 when contextualize off
  Graph::NodeId z0 = -1, cell0 = -1;      // decoder start state {H'}
};

/// Embed + contextual masking + bidirectional encoding. Throws on empty
/// input or an id outside the embedding matrix.
EncodedSource encode_source(Graph& g, const ModelNodes& nodes,
                            const TrainingConfig& config,
                            const std::vector<int>& src_ids);

struct StepResult {
  Graph::NodeId z, cell;   // new decoder state, {H'} each
  Graph::NodeId logits;    // {|V'|}
  Graph::NodeId attention; // alpha {T}
};

/// One teacher-forced / search step conditioned on prev_id.
StepResult decode_step(Graph& g, const ModelNodes& nodes,
                       const TrainingConfig& config, const EncodedSource& enc,
                       Graph::NodeId z, Graph::NodeId cell, int prev_id);

/// Sum over target positions of -log p(w_t | ...). tgt_ids must be nonempty
/// and end with the EOS id; the BOS embedding is the first decoder input and
/// must not be part of tgt_ids.
Graph::NodeId sentence_loss_node(Graph& g, const ModelNodes& nodes,
                                 const TrainingConfig& config,
                                 const std::vector<int>& src_ids,
                                 const std::vector<int>& tgt_ids);

/// Convenience forward pass (builds a throwaway graph).
double sentence_loss(ModelParameters& params, const std::vector<int>& src_ids,
                     const std::vector<int>& tgt_ids);

struct DecodeResult {
  std::vector<int> tokens;  // EOS not included
  double log_prob = 0.0;    // cumulative, EOS emission included
};

/// Iterated argmax with the output length capped at 2*|src| + 10. Ties break
/// toward the lowest token id. The special-token ids are overridable for
/// hand-built toy models whose vocabularies are smaller than the reserved
/// block.
DecodeResult greedy_decode(ModelParameters& params,
                           const std::vector<int>& src_ids,
                           int eos_id = Vocabulary::kEos,
                           int bos_id = Vocabulary::kBos);

/// Standard beam search, `width` best unfinished hypotheses kept per step,
/// finished ones moved to a completed pool. Returns the best completed
/// hypothesis, falling back to the best unfinished one at the length cap.
/// max_steps = 0 uses the 2*|src| + 10 cap.
DecodeResult beam_search(ModelParameters& params, const std::vector<int>& src_ids,
                         int width, int eos_id = Vocabulary::kEos,
                         int bos_id = Vocabulary::kBos, long max_steps = 0);

struct EpochMetrics {
  int epoch = 0;
  double train_nll = 0.0;  // per token
  double dev_nll = 0.0;    // per token
  double dev_bleu = 0.0;
};

struct TrainResult {
  ModelParameters params;  // best-validation snapshot
  std::vector<EpochMetrics> metrics;
  int best_epoch = 0;
  bool diverged = false;   // params then hold the last finite-loss epoch
};

/// Shuffled minibatch Adam with early stopping on the configured dev metric.
/// Metrics lines ("epoch<TAB>train-NLL<TAB>dev-NLL<TAB>dev-BLEU") go to
/// metrics_out when given. Deterministic for a fixed config.
TrainResult train(const std::vector<SentencePair>& train_pairs,
                  const std::vector<SentencePair>& dev_pairs,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                  const TrainingConfig& config,
                  std::ostream* metrics_out = nullptr);

std::string format_metrics_line(const EpochMetrics& m);

}  // namespace ctxnmt
