#include "vecsketch/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::gen {

using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;
}

std::string GeneratorConfig::to_json() const {
    nlohmann::json j;
    j["mode"] = mode == Mode::Stroke ? "stroke" : "cp";
    j["latent"] = latent;
    j["decoder_hidden"] = decoder_hidden;
    j["encoder_hidden"] = encoder_hidden;
    j["mixtures"] = mixtures;
    j["max_steps"] = max_steps;
    j["stroke_degree"] = stroke_degree;
    j["kl_weight"] = kl_weight;
    j["kl_warmup_frac"] = kl_warmup_frac;
    j["free_bits"] = free_bits;
    j["adam"] = {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}};
    j["grad_clip"] = grad_clip;
    j["batch_size"] = batch_size;
    return j.dump();
}

std::string GeneratorConfig::hash() const { return diff::fnv1a_hex(to_json()); }

namespace {

GeneratorConfig config_from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.mode = j.at("mode").get<std::string>() == "stroke" ? Mode::Stroke
                                                         : Mode::ControlPoint;
    c.latent = j.at("latent").get<int>();
    c.decoder_hidden = j.at("decoder_hidden").get<int>();
    c.encoder_hidden = j.at("encoder_hidden").get<int>();
    c.mixtures = j.at("mixtures").get<int>();
    c.max_steps = j.at("max_steps").get<int>();
    c.stroke_degree = j.at("stroke_degree").get<int>();
    c.kl_weight = j.at("kl_weight").get<double>();
    c.kl_warmup_frac = j.at("kl_warmup_frac").get<double>();
    c.free_bits = j.at("free_bits").get<double>();
    c.adam.lr = j.at("adam").at("lr").get<double>();
    c.adam.beta1 = j.at("adam").at("beta1").get<double>();
    c.adam.beta2 = j.at("adam").at("beta2").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    return c;
}

std::vector<double> tuple_values(const CpTuple& t) {
    return {t.dx, t.dy, t.flag == 0 ? 1.0 : 0.0, t.flag == 1 ? 1.0 : 0.0,
            t.flag == 2 ? 1.0 : 0.0};
}

}  // namespace

double gmm_log_likelihood(const std::vector<double>& x, const Gmm& params) {
    if (params.mixtures() == 0) throw std::invalid_argument("empty mixture");
    const std::size_t d = x.size();
    std::vector<double> joint(params.mixtures());
    for (std::size_t m = 0; m < params.mixtures(); ++m) {
        if (params.mean[m].size() != d || params.var[m].size() != d)
            throw std::invalid_argument("mixture dimension mismatch");
        double acc = std::log(params.weight[m]);
        for (std::size_t i = 0; i < d; ++i) {
            double v = params.var[m][i];
            double r = x[i] - params.mean[m][i];
            acc += -0.5 * (kLogTwoPi + std::log(v) + r * r / v);
        }
        joint[m] = acc;
    }
    double mx = *std::max_element(joint.begin(), joint.end());
    double z = 0.0;
    for (double j : joint) z += std::exp(j - mx);
    return mx + std::log(z);
}

double kl_divergence(const std::vector<double>& mu, const std::vector<double>& sigma) {
    if (mu.size() != sigma.size() || mu.empty())
        throw std::invalid_argument("kl_divergence: bad diagnostics");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double s2 = sigma[i] * sigma[i];
        acc += 1.0 + std::log(s2) - mu[i] * mu[i] - s2;
    }
    return -acc / (2.0 * static_cast<double>(mu.size()));
}

StrokeModeSketch to_step_vectors(const sketch::EncodedSketch& sk, int degree) {
    StrokeModeSketch out;
    out.reserve(sk.strokes.size());
    for (const sketch::EncodedStroke& s : sk.strokes) {
        if (s.poly.degree != degree)
            throw Error(ErrorCategory::Config,
                        "stroke mode needs a uniform embedding degree of " +
                            std::to_string(degree) + ", found " +
                            std::to_string(s.poly.degree));
        StepVector v;
        v.reserve(2 * degree + 2);
        for (int i = 1; i <= degree; ++i) {
            Vec2 d = s.poly.points[i] - s.poly.points[i - 1];
            v.push_back(d.x);
            v.push_back(d.y);
        }
        v.push_back(s.offset.x);
        v.push_back(s.offset.y);
        out.push_back(std::move(v));
    }
    return out;
}

sketch::EncodedSketch from_step_vectors(const StrokeModeSketch& steps, int degree,
                                        const std::string& category) {
    sketch::EncodedSketch out;
    out.category = category;
    for (const StepVector& v : steps) {
        if (v.size() != static_cast<std::size_t>(2 * degree + 2))
            throw std::invalid_argument("step vector width mismatch");
        Polyline pts(degree + 1);
        pts[0] = {0, 0};
        for (int i = 1; i <= degree; ++i)
            pts[i] = pts[i - 1] + Vec2{v[2 * (i - 1)], v[2 * (i - 1) + 1]};
        sketch::EncodedStroke s;
        s.poly = bezier::ControlPolygon(degree, std::move(pts));
        s.offset = {v[2 * degree], v[2 * degree + 1]};
        out.strokes.push_back(std::move(s));
    }
    return out;
}

CpSequence build_cp_sequence(const sketch::EncodedSketch& sk) {
    if (sk.strokes.empty())
        throw Error(ErrorCategory::Config, "cannot flatten an empty sketch");
    CpSequence out;
    Vec2 prev{0, 0};
    for (std::size_t j = 0; j < sk.strokes.size(); ++j) {
        const sketch::EncodedStroke& s = sk.strokes[j];
        for (std::size_t i = 0; i < s.poly.points.size(); ++i) {
            Vec2 abs = s.poly.points[i] + s.offset;
            CpTuple t;
            t.dx = abs.x - prev.x;
            t.dy = abs.y - prev.y;
            bool stroke_end = i + 1 == s.poly.points.size();
            bool sketch_end = stroke_end && j + 1 == sk.strokes.size();
            t.flag = sketch_end ? 2 : (stroke_end ? 1 : 0);
            out.push_back(t);
            prev = abs;
        }
    }
    return out;
}

sketch::EncodedSketch cp_sequence_to_sketch(const CpSequence& seq,
                                            const std::string& category) {
    sketch::EncodedSketch out;
    out.category = category;
    Vec2 pos{0, 0};
    Polyline run;
    auto flush = [&] {
        if (run.size() >= 2) {
            sketch::EncodedStroke s;
            s.offset = run.front();
            Polyline pts(run.size());
            for (std::size_t i = 0; i < run.size(); ++i) pts[i] = run[i] - run[0];
            s.poly = bezier::ControlPolygon(static_cast<int>(run.size()) - 1,
                                            std::move(pts));
            out.strokes.push_back(std::move(s));
        }
        run.clear();
    };
    for (const CpTuple& t : seq) {
        pos += Vec2{t.dx, t.dy};
        run.push_back(pos);
        if (t.flag != 0) flush();
        if (t.flag == 2) break;
    }
    flush();
    return out;
}

GeneratorModel::GeneratorModel(const GeneratorConfig& config, std::uint64_t init_seed)
    : config_(config) {
    if (config_.latent < 1 || config_.decoder_hidden < 1 || config_.encoder_hidden < 1)
        throw Error(ErrorCategory::Config, "bad generator dimensions");
    if (config_.mixtures < 1)
        throw Error(ErrorCategory::Config, "need at least one mixture component");
    if (config_.max_steps < 1)
        throw Error(ErrorCategory::Config, "max_steps must be positive");
    attach_params(init_seed);
}

void GeneratorModel::attach_params(std::uint64_t init_seed) {
    Rng rng(init_seed);
    const int enc_in = config_.mode == Mode::Stroke ? config_.step_dim() : 5;
    const int two_he = 2 * config_.encoder_hidden;
    const int data_dim = config_.mode == Mode::Stroke ? config_.step_dim() : 2;
    const int out_dim = config_.mixtures * (2 * data_dim + 1) +
                        (config_.mode == Mode::Stroke ? 1 : 3);

    encoder_ = diff::BiGru::attach(store_, "gen.enc", enc_in, config_.encoder_hidden,
                                   rng);
    decoder_ = diff::GruCell::attach(store_, "gen.dec", config_.input_dim(),
                                     config_.decoder_hidden, rng);
    const double hb = 1.0 / std::sqrt(static_cast<double>(two_he));
    const double zb = 1.0 / std::sqrt(static_cast<double>(config_.latent));
    const double db = 1.0 / std::sqrt(static_cast<double>(config_.decoder_hidden));
    w_mu_ = diff::ensure_param(store_, "gen.w_mu", {config_.latent, two_he}, hb, rng);
    b_mu_ = diff::ensure_param(store_, "gen.b_mu", {config_.latent}, 0.0, rng);
    w_sigma_ =
        diff::ensure_param(store_, "gen.w_sigma", {config_.latent, two_he}, hb, rng);
    b_sigma_ = diff::ensure_param(store_, "gen.b_sigma", {config_.latent}, 0.0, rng);
    w_init_ = diff::ensure_param(store_, "gen.w_init",
                                 {config_.decoder_hidden, config_.latent}, zb, rng);
    b_init_ = diff::ensure_param(store_, "gen.b_init", {config_.decoder_hidden}, 0.0,
                                 rng);
    w_out_ = diff::ensure_param(store_, "gen.w_out", {out_dim, config_.decoder_hidden},
                                db, rng);
    b_out_ = diff::ensure_param(store_, "gen.b_out", {out_dim}, 0.0, rng);
}

LatentCode GeneratorModel::encode_steps(const std::vector<std::vector<double>>& inputs,
                                        Rng& rng, bool eval) const {
    if (inputs.empty()) throw Error(ErrorCategory::Config, "empty sketch");
    if (inputs.size() > static_cast<std::size_t>(config_.max_steps))
        throw Error(ErrorCategory::Config, "sketch exceeds max_steps");
    Tape tape;
    auto binder = diff::frozen_binder(store_);
    std::vector<Var> in_vars(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i)
        in_vars[i] = tape.constant(Tensor::vector(inputs[i]));
    diff::BiGru::Output enc = encoder_.run(tape, binder, in_vars);
    Var mu = tape.add(tape.matmul(binder(tape, w_mu_), enc.last), binder(tape, b_mu_));
    Var s = tape.add(tape.matmul(binder(tape, w_sigma_), enc.last),
                     binder(tape, b_sigma_));
    LatentCode code;
    code.mu = tape.value(mu).data;
    code.sigma = tape.value(s).data;
    for (double& v : code.sigma) v = std::exp(v);
    code.z.resize(code.mu.size());
    for (std::size_t i = 0; i < code.z.size(); ++i) {
        double eps = eval ? 0.0 : rng.normal();
        code.z[i] = code.mu[i] + code.sigma[i] * eps;
    }
    return code;
}

LatentCode GeneratorModel::vae_encode(const StrokeModeSketch& sk, Rng& rng,
                                      bool eval) const {
    if (config_.mode != Mode::Stroke)
        throw Error(ErrorCategory::Config, "model is not in stroke mode");
    return encode_steps(sk, rng, eval);
}

LatentCode GeneratorModel::vae_encode_cp(const CpSequence& seq, Rng& rng,
                                         bool eval) const {
    if (config_.mode != Mode::ControlPoint)
        throw Error(ErrorCategory::Config, "model is not in control-point mode");
    std::vector<std::vector<double>> in;
    in.reserve(seq.size());
    for (const CpTuple& t : seq) in.push_back(tuple_values(t));
    return encode_steps(in, rng, eval);
}

GeneratorModel::DecodeState GeneratorModel::initial_state(
    const std::vector<double>& z) const {
    Tape tape;
    auto binder = diff::frozen_binder(store_);
    Var zv = tape.constant(Tensor::vector(z));
    Var g0 = tape.tanh(tape.add(tape.matmul(binder(tape, w_init_), zv),
                                binder(tape, b_init_)));
    return DecodeState{tape.value(g0).data};
}

GeneratorModel::StepOutput GeneratorModel::parse_output(
    const std::vector<double>& out) const {
    const int M = config_.mixtures;
    const int D = config_.mode == Mode::Stroke ? config_.step_dim() : 2;
    StepOutput step;
    step.gmm.weight.resize(M);
    step.gmm.mean.assign(M, std::vector<double>(D));
    step.gmm.var.assign(M, std::vector<double>(D));
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < D; ++i) {
            step.gmm.mean[m][i] = out[m * D + i];
            step.gmm.var[m][i] = std::exp(out[M * D + m * D + i]);
        }
    // Softmax over mixture logits.
    double mx = out[2 * M * D];
    for (int m = 1; m < M; ++m) mx = std::max(mx, out[2 * M * D + m]);
    double z = 0.0;
    for (int m = 0; m < M; ++m) {
        step.gmm.weight[m] = std::exp(out[2 * M * D + m] - mx);
        z += step.gmm.weight[m];
    }
    for (double& w : step.gmm.weight) w /= z;

    const int tail = 2 * M * D + M;
    if (config_.mode == Mode::Stroke) {
        step.stop_probability = 1.0 / (1.0 + std::exp(-out[tail]));
    } else {
        double fm = std::max({out[tail], out[tail + 1], out[tail + 2]});
        double fz = 0.0;
        step.flag_probability.resize(3);
        for (int k = 0; k < 3; ++k) {
            step.flag_probability[k] = std::exp(out[tail + k] - fm);
            fz += step.flag_probability[k];
        }
        for (double& p : step.flag_probability) p /= fz;
    }
    return step;
}

GeneratorModel::StepOutput GeneratorModel::decode_step(
    const std::vector<double>& previous, const std::vector<double>& z,
    const DecodeState& state) const {
    Tape tape;
    auto binder = diff::frozen_binder(store_);
    Var input = tape.constant(Tensor::vector(previous));
    Var zv = tape.constant(Tensor::vector(z));
    Var g = tape.constant(Tensor::vector(state.hidden));
    Var g_next = decoder_.step(tape, binder, tape.concat({input, zv}, 0), g);
    Var out = tape.add(tape.matmul(binder(tape, w_out_), g_next), binder(tape, b_out_));
    StepOutput step = parse_output(tape.value(out).data);
    step.state.hidden = tape.value(g_next).data;
    return step;
}

LossBreakdown GeneratorModel::example_loss(Tape& tape, const diff::ParamBinder& binder,
                                           const StrokeModeSketch& stroke_targets,
                                           const CpSequence& cp_targets,
                                           const std::vector<double>& eps,
                                           double kl_scale, Var* total_out) const {
    const bool stroke_mode = config_.mode == Mode::Stroke;
    const int M = config_.mixtures;
    const int D = stroke_mode ? config_.step_dim() : 2;
    const int n_max = config_.max_steps;
    const std::size_t n_real =
        stroke_mode ? stroke_targets.size() : cp_targets.size();
    if (n_real == 0) throw Error(ErrorCategory::Config, "empty training example");
    if (n_real > static_cast<std::size_t>(n_max))
        throw Error(ErrorCategory::Config, "example exceeds max_steps");

    // Encoder over the real steps.
    std::vector<Var> enc_in(n_real);
    for (std::size_t j = 0; j < n_real; ++j)
        enc_in[j] = tape.constant(Tensor::vector(
            stroke_mode ? stroke_targets[j] : tuple_values(cp_targets[j])));
    diff::BiGru::Output enc = encoder_.run(tape, binder, enc_in);
    Var mu = tape.add(tape.matmul(binder(tape, w_mu_), enc.last), binder(tape, b_mu_));
    Var log_sigma = tape.add(tape.matmul(binder(tape, w_sigma_), enc.last),
                             binder(tape, b_sigma_));
    Var z = tape.add(mu, tape.mul(tape.exp(log_sigma),
                                  tape.constant(Tensor::vector(eps))));

    Var g = tape.tanh(
        tape.add(tape.matmul(binder(tape, w_init_), z), binder(tape, b_init_)));

    const std::size_t n_steps = stroke_mode ? n_real : static_cast<std::size_t>(n_max);
    Var ll_sum;          // sum_j log GMM over real steps
    Var stop_or_ce_sum;  // stroke: summed BCE on stop bits; cp: flag CE
    std::vector<Var> stop_logits;

    for (std::size_t j = 0; j < n_steps; ++j) {
        std::vector<double> prev_values;
        if (j == 0) {
            prev_values.assign(stroke_mode ? D : 5, 0.0);
        } else if (stroke_mode) {
            prev_values = stroke_targets[j - 1];
        } else {
            prev_values = j - 1 < n_real ? tuple_values(cp_targets[j - 1])
                                         : std::vector<double>{0, 0, 0, 0, 1};
        }
        Var input = tape.concat({tape.constant(Tensor::vector(prev_values)), z}, 0);
        g = decoder_.step(tape, binder, input, g);
        Var out = tape.add(tape.matmul(binder(tape, w_out_), g), binder(tape, b_out_));

        if (j < n_real) {
            Var means = tape.reshape(tape.slice(out, 0, 0, M * D), {M, D});
            Var logvars = tape.reshape(tape.slice(out, 0, M * D, M * D), {M, D});
            Var logits = tape.slice(out, 0, 2 * M * D, M);
            std::vector<double> target =
                stroke_mode ? stroke_targets[j]
                            : std::vector<double>{cp_targets[j].dx, cp_targets[j].dy};
            std::vector<double> rep;
            rep.reserve(static_cast<std::size_t>(M) * D);
            for (int m = 0; m < M; ++m)
                rep.insert(rep.end(), target.begin(), target.end());
            Var x_rep = tape.constant(Tensor::matrix(M, D, std::move(rep)));
            Var energy = tape.add(
                logvars, tape.mul(tape.squared_difference(x_rep, means),
                                  tape.exp(tape.neg(logvars))));
            Var row_log = tape.add_scalar(tape.scale(tape.row_sum(energy), -0.5),
                                          -0.5 * D * kLogTwoPi);
            Var ll = tape.sub(tape.logsumexp(tape.add(logits, row_log)),
                              tape.logsumexp(logits));
            ll_sum = j == 0 ? ll : tape.add(ll_sum, ll);
        }

        const int tail = 2 * M * D + M;
        if (stroke_mode) {
            stop_logits.push_back(tape.slice(out, 0, tail, 1));
        } else {
            Var flag_logits = tape.slice(out, 0, tail, 3);
            int target_flag = j < n_real ? cp_targets[j].flag : 2;
            Var ce = tape.sub(tape.logsumexp(flag_logits),
                              tape.slice(flag_logits, 0, target_flag, 1));
            stop_or_ce_sum = j == 0 ? ce : tape.add(stop_or_ce_sum, ce);
        }
    }

    if (stroke_mode) {
        std::vector<double> targets(n_real, 0.0);
        targets.back() = 1.0;  // b_j = 1[j = N]
        Var stops = tape.concat(stop_logits, 0);
        stop_or_ce_sum = tape.sum(tape.bce_with_logits(stops, std::move(targets)));
    }

    Var recon = tape.scale(ll_sum, -1.0 / n_max);
    Var stop_term = tape.scale(stop_or_ce_sum, 1.0 / n_max);

    // KL with sigma = exp(log_sigma):
    // -(1/2Nz) sum (1 + 2*log_sigma - mu^2 - exp(2*log_sigma)).
    Var two_ls = tape.scale(log_sigma, 2.0);
    Var kl_inner = tape.sub(tape.sub(tape.add_scalar(two_ls, 1.0), tape.mul(mu, mu)),
                            tape.exp(two_ls));
    Var kl = tape.scale(tape.sum(kl_inner), -0.5 / config_.latent);

    LossBreakdown parts;
    parts.reconstruction = tape.value(recon).data[0];
    parts.stop = tape.value(stop_term).data[0];
    parts.kl = tape.value(kl).data[0];

    const double weight = config_.kl_weight * kl_scale;
    Var kl_term = parts.kl < config_.free_bits
                      ? tape.constant_scalar(weight * config_.free_bits)
                      : tape.scale(kl, weight);
    parts.kl_term = tape.value(kl_term).data[0];

    Var total = tape.add(tape.add(recon, stop_term), kl_term);
    parts.total = tape.value(total).data[0];
    if (total_out) *total_out = total;
    return parts;
}

namespace {

std::size_t pick_category(const std::vector<double>& probs, double temperature,
                          Rng& rng) {
    // softmax(l/tau) realized as p^(1/tau) renormalized.
    std::vector<double> w(probs.size());
    double z = 0.0;
    double inv_tau = 1.0 / std::max(temperature, 1e-9);
    double mx = *std::max_element(probs.begin(), probs.end());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::pow(probs[i] / mx, inv_tau);
        z += w[i];
    }
    double u = rng.uniform() * z;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u <= acc) return i;
    }
    return w.size() - 1;
}

std::vector<double> sample_gmm(const Gmm& gmm, double temperature, Rng& rng) {
    std::size_t m = pick_category(gmm.weight, temperature, rng);
    std::vector<double> x(gmm.dim());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = gmm.mean[m][i] + std::sqrt(gmm.var[m][i] * temperature) * rng.normal();
    return x;
}

}  // namespace

sketch::EncodedSketch GeneratorModel::sample_from_z(const std::vector<double>& z,
                                                    double temperature,
                                                    Rng& rng) const {
    DecodeState state = initial_state(z);
    if (config_.mode == Mode::Stroke) {
        StrokeModeSketch steps;
        std::vector<double> prev(config_.step_dim(), 0.0);
        for (int j = 0; j < config_.max_steps; ++j) {
            StepOutput out = decode_step(prev, z, state);
            state = out.state;
            prev = sample_gmm(out.gmm, temperature, rng);
            steps.push_back(prev);
            if (out.stop_probability > 0.5) break;
        }
        return from_step_vectors(steps, config_.stroke_degree);
    }
    CpSequence seq;
    std::vector<double> prev(5, 0.0);
    for (int j = 0; j < config_.max_steps; ++j) {
        StepOutput out = decode_step(prev, z, state);
        state = out.state;
        std::vector<double> dp = sample_gmm(out.gmm, temperature, rng);
        CpTuple t;
        t.dx = dp[0];
        t.dy = dp[1];
        t.flag = static_cast<int>(pick_category(out.flag_probability, temperature, rng));
        seq.push_back(t);
        prev = tuple_values(t);
        if (t.flag == 2) break;
    }
    if (seq.empty() || seq.back().flag != 2) {
        if (!seq.empty()) seq.back().flag = 2;
    }
    return cp_sequence_to_sketch(seq);
}

sketch::EncodedSketch GeneratorModel::sample_unconditional(double temperature,
                                                           Rng& rng) const {
    if (!trained_)
        throw Error(ErrorCategory::Model, "generator has not been trained");
    if (temperature <= 0.0)
        throw Error(ErrorCategory::Config, "temperature must be > 0");
    std::vector<double> z(config_.latent);
    for (double& v : z) v = rng.normal();
    return sample_from_z(z, temperature, rng);
}

sketch::EncodedSketch GeneratorModel::sample_conditional(
    const sketch::EncodedSketch& input, double temperature, Rng& rng) const {
    if (!trained_)
        throw Error(ErrorCategory::Model, "generator has not been trained");
    LatentCode code =
        config_.mode == Mode::Stroke
            ? vae_encode(to_step_vectors(input, config_.stroke_degree), rng)
            : vae_encode_cp(build_cp_sequence(input), rng);
    return sample_from_z(code.z, temperature, rng);
}

std::vector<double> GeneratorModel::stop_profile(
    const sketch::EncodedSketch& sk) const {
    Rng dummy(0);
    std::vector<double> probs;
    if (config_.mode == Mode::Stroke) {
        StrokeModeSketch steps = to_step_vectors(sk, config_.stroke_degree);
        LatentCode code = vae_encode(steps, dummy, /*eval=*/true);
        DecodeState state = initial_state(code.z);
        std::vector<double> prev(config_.step_dim(), 0.0);
        for (const StepVector& target : steps) {
            StepOutput out = decode_step(prev, code.z, state);
            probs.push_back(out.stop_probability);
            state = out.state;
            prev = target;
        }
    } else {
        CpSequence seq = build_cp_sequence(sk);
        LatentCode code = vae_encode_cp(seq, dummy, /*eval=*/true);
        DecodeState state = initial_state(code.z);
        std::vector<double> prev(5, 0.0);
        for (const CpTuple& t : seq) {
            StepOutput out = decode_step(prev, code.z, state);
            probs.push_back(out.flag_probability[2]);
            state = out.state;
            prev = tuple_values(t);
        }
    }
    return probs;
}

void GeneratorModel::save(const std::string& path) const {
    nlohmann::json tag;
    tag["kind"] = "generator";
    tag["config"] = nlohmann::json::parse(config_.to_json());
    tag["trained"] = trained_;
    store_.save_checkpoint(path, config_.hash(), tag.dump());
}

GeneratorModel GeneratorModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::Io, "cannot read checkpoint " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Io, std::string("bad checkpoint: ") + e.what());
    }
    nlohmann::json tag = nlohmann::json::parse(doc.value("tag", "{}"));
    if (tag.value("kind", "") != "generator")
        throw Error(ErrorCategory::Model, "checkpoint is not a generator model");
    GeneratorConfig config = config_from_json(tag.at("config"));

    GeneratorModel model(config, 0);
    model.store_ = diff::ParamStore();
    model.store_.load_checkpoint(path, config.hash());
    model.attach_params(0);
    model.trained_ = tag.value("trained", false);
    return model;
}

GenTrainHistory train_generator(GeneratorModel& model,
                                const std::vector<sketch::EncodedSketch>& dataset,
                                const GenTrainOptions& options) {
    if (dataset.empty())
        throw Error(ErrorCategory::Config, "training requires a nonempty dataset");
    const GeneratorConfig& config = model.config();
    const bool stroke_mode = config.mode == Mode::Stroke;

    // Keep examples that fit within max_steps.
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        std::size_t len = stroke_mode ? dataset[i].strokes.size()
                                      : build_cp_sequence(dataset[i]).size();
        if (len >= 1 && len <= static_cast<std::size_t>(config.max_steps))
            usable.push_back(i);
    }
    if (usable.empty())
        throw Error(ErrorCategory::Config,
                    "no training example fits within max_steps");

    const int workers = std::max(1, options.workers);
    Rng rng(options.seed);
    std::vector<std::size_t> order = usable;

    const std::size_t batches_per_epoch =
        (usable.size() + config.batch_size - 1) / config.batch_size;
    const double total_steps =
        static_cast<double>(batches_per_epoch) * options.epochs;
    const double warmup_steps = std::max(1.0, config.kl_warmup_frac * total_steps);

    GenTrainHistory history;
    long global_step = 0;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(order);
        LossBreakdown epoch_sum;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(config.batch_size));
            ++global_step;
            const double kl_scale = std::min(1.0, global_step / warmup_steps);
            std::vector<LossBreakdown> parts(end - start);

            auto process = [&](diff::ParamStore& grad_store, std::size_t k) {
                std::size_t idx = order[k];
                Rng ex_rng(mix_seed(options.seed, static_cast<std::uint64_t>(epoch),
                                    idx));
                sketch::EncodedSketch example = dataset[idx];
                if (options.aug_noise > 0.0)
                    example =
                        sketch::augment_control_points(example, options.aug_noise,
                                                       ex_rng);
                StrokeModeSketch steps;
                CpSequence tuples;
                if (stroke_mode)
                    steps = to_step_vectors(example, config.stroke_degree);
                else
                    tuples = build_cp_sequence(example);
                std::vector<double> eps(config.latent);
                for (double& v : eps) v = ex_rng.normal();

                Tape tape;
                Var total;
                parts[k - start] =
                    model.example_loss(tape, diff::train_binder(grad_store), steps,
                                       tuples, eps, kl_scale, &total);
                tape.backward(total, grad_store);
            };

            if (workers == 1) {
                for (std::size_t k = start; k < end; ++k) process(model.store(), k);
            } else {
                std::vector<diff::ParamStore> local(workers, model.store());
                for (auto& s : local) s.zero_grad();
                std::vector<std::thread> pool;
                for (int w = 0; w < workers; ++w)
                    pool.emplace_back([&, w] {
                        for (std::size_t k = start + w; k < end;
                             k += static_cast<std::size_t>(workers))
                            process(local[w], k);
                    });
                for (auto& th : pool) th.join();
                for (int w = 0; w < workers; ++w)
                    for (std::size_t slot = 0; slot < model.store().size(); ++slot) {
                        diff::Tensor& g = model.store().grad(static_cast<int>(slot));
                        const diff::Tensor& lg = local[w].grad(static_cast<int>(slot));
                        for (std::size_t i = 0; i < g.data.size(); ++i)
                            g.data[i] += lg.data[i];
                    }
            }

            double batch_total = 0.0;
            for (const LossBreakdown& p : parts) {
                batch_total += p.total;
                epoch_sum.reconstruction += p.reconstruction;
                epoch_sum.stop += p.stop;
                epoch_sum.kl += p.kl;
                epoch_sum.kl_term += p.kl_term;
                epoch_sum.total += p.total;
            }
            if (!std::isfinite(batch_total))
                throw Error(ErrorCategory::Numeric,
                            "non-finite generator loss at epoch " +
                                std::to_string(epoch));

            const double inv = 1.0 / static_cast<double>(end - start);
            model.store().clip_grad_norm(config.grad_clip *
                                         static_cast<double>(end - start));
            for (std::size_t slot = 0; slot < model.store().size(); ++slot) {
                diff::Tensor& g = model.store().grad(static_cast<int>(slot));
                for (double& v : g.data) v *= inv;
            }
            model.store().adam_step(config.adam);
        }

        const double inv_n = 1.0 / static_cast<double>(order.size());
        LossBreakdown mean;
        mean.reconstruction = epoch_sum.reconstruction * inv_n;
        mean.stop = epoch_sum.stop * inv_n;
        mean.kl = epoch_sum.kl * inv_n;
        mean.kl_term = epoch_sum.kl_term * inv_n;
        mean.total = epoch_sum.total * inv_n;
        history.epochs.push_back(mean);
        model.mark_trained();
        if (options.on_epoch) options.on_epoch(epoch, mean);
        if (!options.checkpoint_dir.empty())
            model.save(options.checkpoint_dir + "/generator-epoch-" +
                       std::to_string(epoch) + ".json");
    }
    return history;
}

}  // namespace vecsketch::gen
