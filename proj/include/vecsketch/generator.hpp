#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vecsketch/autodiff.hpp"
#include "vecsketch/encoded.hpp"
#include "vecsketch/rnn.hpp"

namespace vecsketch::gen {

enum class Mode { Stroke, ControlPoint };

struct GeneratorConfig {
    Mode mode = Mode::Stroke;
    int latent = 128;          // N_z
    int decoder_hidden = 512;  // H^d
    int encoder_hidden = 256;  // per-direction width of the sketch encoder
    int mixtures = 10;         // M
    int max_steps = 64;        // N_max
    int stroke_degree = 9;     // fixed embedding degree in stroke mode
    double kl_weight = 0.5;
    double kl_warmup_frac = 0.25;  // linear warm-up over first 25% of steps
    double free_bits = 0.05;       // nats per latent dimension
    diff::AdamConfig adam;
    double grad_clip = 1.0;
    int batch_size = 32;

    /// Per-step vector width the decoder models.
    int step_dim() const { return mode == Mode::Stroke ? 2 * stroke_degree + 2 : 2; }
    /// Decoder input width (previous step vector or 5-tuple, plus z).
    int input_dim() const {
        return (mode == Mode::Stroke ? step_dim() : 5) + latent;
    }
    std::string to_json() const;
    std::string hash() const;
};

/// Diagonal-Gaussian mixture parameters (weights sum to 1, variances > 0).
struct Gmm {
    std::vector<double> weight;
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> var;

    std::size_t mixtures() const { return weight.size(); }
    std::size_t dim() const { return mean.empty() ? 0 : mean.front().size(); }
};

/// log sum_m pi_m N(x; mu_m, diag var_m), computed via log-sum-exp.
double gmm_log_likelihood(const std::vector<double>& x, const Gmm& params);

/// Standard diagonal-Gaussian KL to N(0, I), averaged over dimensions:
/// -(1/2Nz) sum_i (1 + log sigma_i^2 - mu_i^2 - sigma_i^2).
double kl_divergence(const std::vector<double>& mu, const std::vector<double>& sigma);

struct LatentCode {
    std::vector<double> z;
    std::vector<double> mu;
    std::vector<double> sigma;
};

/// Stroke-mode sketch: per step the flattened control-point differences of
/// one fixed-degree stroke plus its start location.
using StepVector = std::vector<double>;
using StrokeModeSketch = std::vector<StepVector>;

StrokeModeSketch to_step_vectors(const sketch::EncodedSketch& sketch, int degree);
sketch::EncodedSketch from_step_vectors(const StrokeModeSketch& steps, int degree,
                                        const std::string& category = "");

/// Control-point-mode 5-tuple (dP_x, dP_y, q1, q2, q3) with exactly one flag.
struct CpTuple {
    double dx = 0.0;
    double dy = 0.0;
    int flag = 0;  // 0: within stroke, 1: stroke end, 2: sketch end
};
using CpSequence = std::vector<CpTuple>;

/// Flatten a multi-degree embedded sketch into SketchRNN-style tuples of
/// successive control-point differences. Total tuples = sum_j (degree_j + 1).
CpSequence build_cp_sequence(const sketch::EncodedSketch& sketch);
/// Inverse of build_cp_sequence; strokes with fewer than two control points
/// are dropped (possible in sampled sequences).
sketch::EncodedSketch cp_sequence_to_sketch(const CpSequence& seq,
                                            const std::string& category = "");

struct LossBreakdown {
    double reconstruction = 0.0;  // -(1/Nmax) sum log GMM
    double stop = 0.0;            // (1/Nmax) sum BCE (or flag cross-entropy)
    double kl = 0.0;              // raw KL value
    double kl_term = 0.0;         // weight * max(kl, free_bits)
    double total = 0.0;           // reconstruction + stop + kl_term
};

class GeneratorModel {
  public:
    GeneratorModel(const GeneratorConfig& config, std::uint64_t init_seed);

    const GeneratorConfig& config() const { return config_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }
    std::size_t parameter_count() const { return store_.parameter_count(); }

    /// Reparameterized latent code for a sketch; eval=true forces eps = 0.
    LatentCode vae_encode(const StrokeModeSketch& sketch, Rng& rng,
                          bool eval = false) const;
    LatentCode vae_encode_cp(const CpSequence& seq, Rng& rng, bool eval = false) const;

    struct DecodeState {
        std::vector<double> hidden;
    };
    DecodeState initial_state(const std::vector<double>& z) const;
    struct StepOutput {
        Gmm gmm;
        double stop_probability = 0.0;          // stroke mode
        std::vector<double> flag_probability;   // cp mode, 3 values sum to 1
        DecodeState state;
    };
    /// One autoregressive decoder step from the previous step vector
    /// (stroke mode) or previous 5-tuple (cp mode, packed as 5 values).
    StepOutput decode_step(const std::vector<double>& previous,
                           const std::vector<double>& z, const DecodeState& state) const;

    /// Teacher-forced per-step loss of one example; kl_scale multiplies the
    /// annealed KL weight. eps is the reparameterization draw.
    LossBreakdown example_loss(diff::Tape& tape, const diff::ParamBinder& binder,
                               const StrokeModeSketch& stroke_targets,
                               const CpSequence& cp_targets,
                               const std::vector<double>& eps, double kl_scale,
                               diff::Var* total_out) const;

    sketch::EncodedSketch sample_unconditional(double temperature, Rng& rng) const;
    sketch::EncodedSketch sample_conditional(const sketch::EncodedSketch& input,
                                             double temperature, Rng& rng) const;

    /// Teacher-forced stop-bit (or sketch-end flag) probabilities per step.
    std::vector<double> stop_profile(const sketch::EncodedSketch& sketch) const;

    void save(const std::string& path) const;
    static GeneratorModel load(const std::string& path);

    diff::ParamStore& store() { return store_; }
    const diff::ParamStore& store() const { return store_; }

  private:
    void attach_params(std::uint64_t init_seed);
    StepOutput parse_output(const std::vector<double>& out) const;
    sketch::EncodedSketch sample_from_z(const std::vector<double>& z,
                                        double temperature, Rng& rng) const;
    LatentCode encode_steps(const std::vector<std::vector<double>>& inputs, Rng& rng,
                            bool eval) const;

    GeneratorConfig config_;
    diff::ParamStore store_;
    diff::BiGru encoder_;
    diff::GruCell decoder_;
    int w_mu_ = -1, b_mu_ = -1, w_sigma_ = -1, b_sigma_ = -1;
    int w_init_ = -1, b_init_ = -1;
    int w_out_ = -1, b_out_ = -1;
    bool trained_ = false;
};

struct GenTrainOptions {
    int epochs = 50;
    std::uint64_t seed = 1;
    double aug_noise = 0.0;  // control-point augmentation scale per example
    std::string checkpoint_dir;
    int workers = 1;
    std::function<void(int, const LossBreakdown&)> on_epoch;
};

struct GenTrainHistory {
    std::vector<LossBreakdown> epochs;  // mean per-example terms
};

GenTrainHistory train_generator(GeneratorModel& model,
                                const std::vector<sketch::EncodedSketch>& dataset,
                                const GenTrainOptions& options);

}  // namespace vecsketch::gen
