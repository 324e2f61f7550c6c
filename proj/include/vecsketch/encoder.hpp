#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vecsketch/autodiff.hpp"
#include "vecsketch/bezier.hpp"
#include "vecsketch/encoded.hpp"
#include "vecsketch/rnn.hpp"
#include "vecsketch/sketch.hpp"

namespace vecsketch::encoder {

struct EncoderConfig {
    int hidden = 256;                 // h
    int degree_min = 3;
    int degree_max = 9;
    double beta = 1e-3;               // smoothness regularizer weight
    double tolerance = 1e-3;          // per-point loss bound for degree choice
    std::size_t max_stroke_len = 128;
    bool delta_features = true;       // feed [X_i; X_i - X_{i-1}] per step
    diff::AdamConfig adam;
    bool use_sgd = false;
    double sgd_lr = 1e-2;
    double grad_clip = 1.0;
    int batch_size = 32;

    int feature_dim() const { return delta_features ? 4 : 2; }
    std::string to_json() const;
    std::string hash() const;
};

/// One degree's prediction: control polygon (P_0 pinned to the origin),
/// per-point curve parameters, and the reconstruction loss.
struct DegreeFit {
    int degree = 0;
    bezier::ControlPolygon poly;
    bezier::ParamVector params;
    double loss = 0.0;  // sum of squared residuals
};

struct FitResult {
    std::vector<DegreeFit> fits;  // degree_min..degree_max in order
    std::size_t stroke_len = 0;
    int selected_degree = 0;

    const DegreeFit& at_degree(int n) const;
};

/// Sum of squared residuals between the decoded curve at t_i and the stroke.
double reconstruction_loss(const bezier::ControlPolygon& poly,
                           const bezier::ParamVector& t, const sketch::Stroke& stroke);

/// Sum of squared consecutive control-point gaps.
double smoothness_penalty(const bezier::ControlPolygon& poly);

/// Sum over degrees of reconstruction loss plus beta times smoothness.
double total_loss(const FitResult& result, const sketch::Stroke& stroke, double beta);

/// Smallest degree whose per-point loss (loss / stroke length) is within
/// tolerance; degree_max when none qualifies.
int select_degree(const FitResult& result, double tolerance);

enum class EmbedMode { MultiDegree, FixedDegree };

class EncoderModel {
  public:
    EncoderModel(const EncoderConfig& config, std::uint64_t init_seed);

    const EncoderConfig& config() const { return config_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }
    std::size_t parameter_count() const { return store_.parameter_count(); }

    /// One-shot multi-degree prediction for a normalized stroke.
    FitResult encode_stroke(const sketch::Stroke& stroke) const;

    /// Embed a whole sketch. Strokes are normalized (and split when longer
    /// than the configured maximum) before encoding. Requires training.
    sketch::EncodedSketch embed_sketch(const sketch::StrokeSequence& sequence,
                                       EmbedMode mode) const;

    /// Mean total loss over the strokes without updating parameters.
    double evaluate(const std::vector<sketch::Stroke>& strokes) const;

    void save(const std::string& path) const;
    static EncoderModel load(const std::string& path);

    // Training-facing internals.
    diff::ParamStore& store() { return store_; }
    const diff::ParamStore& store() const { return store_; }

    struct GraphOut {
        diff::Var total;                       // sum_n (L_n + beta R_n)
        std::vector<diff::Var> recon_losses;   // L_n per degree
        std::vector<diff::Var> smooth_losses;  // R_n per degree
        std::vector<diff::Var> polygons;       // (n+1, 2) including zero row
        std::vector<diff::Var> params;         // (N) t-hat per degree
    };
    GraphOut build_graph(diff::Tape& tape, const diff::ParamBinder& binder,
                         const sketch::Stroke& stroke) const;
    /// Binder used in training: tape.param over the live store.
    GraphOut build_training_graph(diff::Tape& tape, const sketch::Stroke& stroke);

  private:
    void attach_params(std::uint64_t init_seed);
    void check_stroke(const sketch::Stroke& stroke) const;

    EncoderConfig config_;
    diff::ParamStore store_;
    diff::BiGru rnn_;
    std::vector<int> head_p_;  // slot of W_P per degree, shape (2n, 2h)
    std::vector<int> head_t_;  // slot of w_t per degree, shape (2h)
    bool trained_ = false;
};

struct TrainOptions {
    int epochs = 20;
    std::uint64_t seed = 1;
    std::string checkpoint_dir;  // per-epoch checkpoints when nonempty
    int workers = 1;
    /// Called after each epoch with (epoch, mean loss).
    std::function<void(int, double)> on_epoch;
};

struct TrainHistory {
    std::vector<double> epoch_loss;  // mean per-example total loss
};

/// SGD/Adam training over normalized strokes. Deterministic for a fixed
/// seed and worker count. Throws Error(Numeric) on a non-finite loss.
TrainHistory train_encoder(EncoderModel& model,
                           const std::vector<sketch::Stroke>& strokes,
                           const TrainOptions& options);

}  // namespace vecsketch::encoder
