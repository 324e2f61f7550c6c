#include "vecsketch/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::encoder {

using diff::Tape;
using diff::Tensor;
using diff::Var;

std::string EncoderConfig::to_json() const {
    nlohmann::json j;
    j["hidden"] = hidden;
    j["degree_min"] = degree_min;
    j["degree_max"] = degree_max;
    j["beta"] = beta;
    j["tolerance"] = tolerance;
    j["max_stroke_len"] = max_stroke_len;
    j["delta_features"] = delta_features;
    j["adam"] = {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}};
    j["use_sgd"] = use_sgd;
    j["sgd_lr"] = sgd_lr;
    j["grad_clip"] = grad_clip;
    j["batch_size"] = batch_size;
    return j.dump();
}

std::string EncoderConfig::hash() const { return diff::fnv1a_hex(to_json()); }

namespace {

EncoderConfig config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.hidden = j.at("hidden").get<int>();
    c.degree_min = j.at("degree_min").get<int>();
    c.degree_max = j.at("degree_max").get<int>();
    c.beta = j.at("beta").get<double>();
    c.tolerance = j.at("tolerance").get<double>();
    c.max_stroke_len = j.at("max_stroke_len").get<std::size_t>();
    c.delta_features = j.at("delta_features").get<bool>();
    c.adam.lr = j.at("adam").at("lr").get<double>();
    c.adam.beta1 = j.at("adam").at("beta1").get<double>();
    c.adam.beta2 = j.at("adam").at("beta2").get<double>();
    c.use_sgd = j.at("use_sgd").get<bool>();
    c.sgd_lr = j.at("sgd_lr").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    return c;
}

bool is_normalized(const sketch::Stroke& s) {
    return s.points.front().x == 0.0 && s.points.front().y == 0.0;
}

}  // namespace

const DegreeFit& FitResult::at_degree(int n) const {
    for (const DegreeFit& f : fits)
        if (f.degree == n) return f;
    throw std::invalid_argument("no fit at degree " + std::to_string(n));
}

double reconstruction_loss(const bezier::ControlPolygon& poly,
                           const bezier::ParamVector& t, const sketch::Stroke& stroke) {
    if (t.size() != stroke.size())
        throw std::invalid_argument("parameter/point count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        acc += (bezier::eval_curve(poly, t[i]) - stroke.points[i]).norm2();
    return acc;
}

double smoothness_penalty(const bezier::ControlPolygon& poly) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < poly.points.size(); ++i)
        acc += (poly.points[i + 1] - poly.points[i]).norm2();
    return acc;
}

double total_loss(const FitResult& result, const sketch::Stroke& stroke, double beta) {
    double acc = 0.0;
    for (const DegreeFit& f : result.fits)
        acc += reconstruction_loss(f.poly, f.params, stroke) +
               beta * smoothness_penalty(f.poly);
    return acc;
}

int select_degree(const FitResult& result, double tolerance) {
    if (result.fits.empty()) throw std::invalid_argument("empty fit result");
    const double n_points = static_cast<double>(result.stroke_len);
    for (const DegreeFit& f : result.fits)
        if (f.loss / n_points <= tolerance) return f.degree;
    return result.fits.back().degree;
}

EncoderModel::EncoderModel(const EncoderConfig& config, std::uint64_t init_seed)
    : config_(config) {
    if (config_.degree_min < 1 || config_.degree_max < config_.degree_min ||
        config_.degree_max > bezier::kMaxDegree)
        throw Error(ErrorCategory::Config, "bad encoder degree range");
    if (config_.hidden < 1) throw Error(ErrorCategory::Config, "bad hidden width");
    if (config_.beta < 0.0) throw Error(ErrorCategory::Config, "beta must be >= 0");
    attach_params(init_seed);
}

void EncoderModel::attach_params(std::uint64_t init_seed) {
    Rng rng(init_seed);
    rnn_ = diff::BiGru::attach(store_, "enc.rnn", config_.feature_dim(),
                               config_.hidden, rng);
    head_p_.clear();
    head_t_.clear();
    const int two_h = 2 * config_.hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(two_h));
    for (int n = config_.degree_min; n <= config_.degree_max; ++n) {
        head_p_.push_back(diff::ensure_param(store_, "enc.head_p." + std::to_string(n),
                                             {2 * n, two_h}, bound, rng));
        head_t_.push_back(diff::ensure_param(store_, "enc.head_t." + std::to_string(n),
                                             {two_h}, bound, rng));
    }
}

void EncoderModel::check_stroke(const sketch::Stroke& stroke) const {
    if (stroke.size() < 2)
        throw Error(ErrorCategory::Config, "stroke must have at least 2 points");
    if (stroke.size() > config_.max_stroke_len)
        throw Error(ErrorCategory::Config,
                    "stroke exceeds maximum length " +
                        std::to_string(config_.max_stroke_len));
    if (!is_normalized(stroke))
        throw Error(ErrorCategory::Config, "stroke must be normalized to the origin");
}

EncoderModel::GraphOut EncoderModel::build_graph(Tape& tape,
                                                 const diff::ParamBinder& binder,
                                                 const sketch::Stroke& stroke) const {
    check_stroke(stroke);
    const int n_points = static_cast<int>(stroke.size());

    // Per-step input features.
    std::vector<Var> inputs(n_points);
    for (int i = 0; i < n_points; ++i) {
        const Vec2& p = stroke.points[i];
        std::vector<double> f{p.x, p.y};
        if (config_.delta_features) {
            Vec2 d = i == 0 ? Vec2{0, 0} : p - stroke.points[i - 1];
            f.push_back(d.x);
            f.push_back(d.y);
        }
        inputs[i] = tape.constant(Tensor::vector(std::move(f)));
    }

    diff::BiGru::Output rnn_out = rnn_.run(tape, binder, inputs);

    // States for steps 2..N stacked to one matrix shared by all t-heads.
    const int two_h = 2 * config_.hidden;
    std::vector<Var> rows(n_points - 1);
    for (int i = 1; i < n_points; ++i)
        rows[i - 1] = tape.reshape(rnn_out.per_step[i], {1, two_h});
    Var tail_states = tape.concat(rows, 0);  // (N-1, 2h)

    Var x_const = [&] {
        std::vector<double> xs;
        xs.reserve(2 * n_points);
        for (const Vec2& p : stroke.points) {
            xs.push_back(p.x);
            xs.push_back(p.y);
        }
        return tape.constant(Tensor::matrix(n_points, 2, std::move(xs)));
    }();
    Var zero_row = tape.constant(Tensor::zeros({1, 2}));
    Var zero_t = tape.constant(Tensor::zeros({1}));
    Var ones_n = tape.constant(Tensor::full({n_points}, 1.0));

    GraphOut out;
    for (std::size_t di = 0; di < head_p_.size(); ++di) {
        const int n = config_.degree_min + static_cast<int>(di);

        // Control points from predicted successive differences, P_0 = origin.
        Var dp_flat = tape.matmul(binder(tape, head_p_[di]), rnn_out.last);  // (2n)
        Var dp = tape.reshape(dp_flat, {n, 2});
        Var poly = tape.concat({zero_row, tape.cumsum(dp, 0)}, 0);  // (n+1, 2)

        // Interpolation parameters: softmax increments over steps 2..N,
        // cumulative sum, t_1 = 0 prefixed. By construction t_N = 1.
        Var logits = tape.matmul(tail_states, binder(tape, head_t_[di]));  // (N-1)
        Var increments = tape.softmax(logits);
        Var t_hat = tape.concat({zero_t, tape.cumsum(increments)}, 0);  // (N)

        // Bernstein design matrix of t_hat, built from running products.
        std::vector<Var> t_pow(n + 1), s_pow(n + 1);
        t_pow[0] = ones_n;
        s_pow[0] = ones_n;
        Var one_minus = tape.add_scalar(tape.neg(t_hat), 1.0);
        for (int k = 1; k <= n; ++k) {
            t_pow[k] = tape.mul(t_pow[k - 1], t_hat);
            s_pow[k] = tape.mul(s_pow[k - 1], one_minus);
        }
        std::vector<Var> cols(n + 1);
        for (int i = 0; i <= n; ++i)
            cols[i] = tape.reshape(
                tape.scale(tape.mul(t_pow[i], s_pow[n - i]), bezier::binomial(n, i)),
                {n_points, 1});
        Var basis = tape.concat(cols, 1);  // (N, n+1)

        Var curve = tape.matmul(basis, poly);  // (N, 2)
        Var recon = tape.sum(tape.squared_difference(curve, x_const));
        Var smooth = tape.sum(tape.mul(dp_flat, dp_flat));

        out.recon_losses.push_back(recon);
        out.smooth_losses.push_back(smooth);
        out.polygons.push_back(poly);
        out.params.push_back(t_hat);

        Var term = tape.add(recon, tape.scale(smooth, config_.beta));
        out.total = di == 0 ? term : tape.add(out.total, term);
    }
    return out;
}

EncoderModel::GraphOut EncoderModel::build_training_graph(Tape& tape,
                                                          const sketch::Stroke& stroke) {
    return build_graph(tape, diff::train_binder(store_), stroke);
}

FitResult EncoderModel::encode_stroke(const sketch::Stroke& stroke) const {
    Tape tape;
    GraphOut graph = build_graph(tape, diff::frozen_binder(store_), stroke);

    FitResult result;
    result.stroke_len = stroke.size();
    for (std::size_t di = 0; di < graph.polygons.size(); ++di) {
        const int n = config_.degree_min + static_cast<int>(di);
        DegreeFit fit;
        fit.degree = n;

        const Tensor& pv = tape.value(graph.polygons[di]);
        Polyline pts(n + 1);
        for (int i = 0; i <= n; ++i) pts[i] = {pv.at(i, 0), pv.at(i, 1)};
        fit.poly = bezier::ControlPolygon(n, std::move(pts));

        std::vector<double> ts = tape.value(graph.params[di]).data;
        for (double& t : ts) t = std::min(t, 1.0);
        ts.back() = 1.0;  // cumulative softmax sums to 1 up to rounding
        fit.params = bezier::ParamVector(std::move(ts));

        fit.loss = tape.value(graph.recon_losses[di]).data[0];
        result.fits.push_back(std::move(fit));
    }
    result.selected_degree = select_degree(result, config_.tolerance);
    return result;
}

sketch::EncodedSketch EncoderModel::embed_sketch(const sketch::StrokeSequence& sequence,
                                                 EmbedMode mode) const {
    if (!trained_)
        throw Error(ErrorCategory::Model, "encoder has not been trained");
    sketch::EncodedSketch out;
    out.category = sequence.category;
    for (const sketch::Stroke& raw : sequence.strokes) {
        std::vector<sketch::Stroke> pieces =
            raw.size() > config_.max_stroke_len
                ? sketch::split_stroke(raw, config_.max_stroke_len,
                                       sketch::kDefaultBendThreshold)
                : std::vector<sketch::Stroke>{raw};
        for (const sketch::Stroke& piece : pieces) {
            sketch::Stroke norm =
                is_normalized(piece) ? piece : sketch::normalize_stroke(piece);
            FitResult fit = encode_stroke(norm);
            int degree =
                mode == EmbedMode::FixedDegree ? config_.degree_max : fit.selected_degree;
            const DegreeFit& chosen = fit.at_degree(degree);
            sketch::EncodedStroke enc;
            enc.poly = chosen.poly;
            enc.offset = norm.offset;
            enc.loss = chosen.loss / static_cast<double>(norm.size());
            out.strokes.push_back(std::move(enc));
        }
    }
    return out;
}

double EncoderModel::evaluate(const std::vector<sketch::Stroke>& strokes) const {
    if (strokes.empty()) throw Error(ErrorCategory::Config, "empty evaluation set");
    double acc = 0.0;
    for (const sketch::Stroke& s : strokes) {
        FitResult fit = encode_stroke(s);
        acc += total_loss(fit, s, config_.beta);
    }
    return acc / static_cast<double>(strokes.size());
}

void EncoderModel::save(const std::string& path) const {
    nlohmann::json tag;
    tag["kind"] = "encoder";
    tag["config"] = nlohmann::json::parse(config_.to_json());
    tag["trained"] = trained_;
    store_.save_checkpoint(path, config_.hash(), tag.dump());
}

EncoderModel EncoderModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::Io, "cannot read checkpoint " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Io, std::string("bad checkpoint: ") + e.what());
    }
    nlohmann::json tag = nlohmann::json::parse(doc.value("tag", "{}"));
    if (tag.value("kind", "") != "encoder")
        throw Error(ErrorCategory::Model, "checkpoint is not an encoder model");
    EncoderConfig config = config_from_json(tag.at("config"));

    EncoderModel model(config, 0);
    model.store_ = diff::ParamStore();
    model.store_.load_checkpoint(path, config.hash());
    model.attach_params(0);  // rebind slots by name; shapes verified
    model.trained_ = tag.value("trained", false);
    return model;
}

TrainHistory train_encoder(EncoderModel& model,
                           const std::vector<sketch::Stroke>& strokes,
                           const TrainOptions& options) {
    if (strokes.empty())
        throw Error(ErrorCategory::Config, "training requires a nonempty dataset");
    for (const sketch::Stroke& s : strokes) {
        if (!is_normalized(s))
            throw Error(ErrorCategory::Config, "training strokes must be normalized");
        if (s.size() > model.config().max_stroke_len)
            throw Error(ErrorCategory::Config,
                        "training stroke longer than the configured maximum; "
                        "split strokes during ingestion");
    }
    const EncoderConfig& config = model.config();
    const int workers = std::max(1, options.workers);
    Rng rng(options.seed);
    std::vector<std::size_t> order(strokes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainHistory history;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(config.batch_size));
            std::vector<double> losses(end - start, 0.0);

            if (workers == 1) {
                for (std::size_t k = start; k < end; ++k) {
                    Tape tape;
                    auto graph =
                        model.build_training_graph(tape, strokes[order[k]]);
                    losses[k - start] = tape.value(graph.total).data[0];
                    tape.backward(graph.total, model.store());
                }
            } else {
                // Each worker accumulates into its own store copy; the main
                // thread reduces them in fixed worker order.
                std::vector<diff::ParamStore> local(workers, model.store());
                for (auto& s : local) s.zero_grad();
                std::vector<std::thread> pool;
                for (int w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        for (std::size_t k = start + w; k < end;
                             k += static_cast<std::size_t>(workers)) {
                            Tape tape;
                            auto graph = model.build_graph(
                                tape, diff::train_binder(local[w]), strokes[order[k]]);
                            losses[k - start] = tape.value(graph.total).data[0];
                            tape.backward(graph.total, local[w]);
                        }
                    });
                }
                for (auto& th : pool) th.join();
                for (int w = 0; w < workers; ++w)
                    for (std::size_t slot = 0; slot < model.store().size(); ++slot) {
                        Tensor& g = model.store().grad(static_cast<int>(slot));
                        const Tensor& lg = local[w].grad(static_cast<int>(slot));
                        for (std::size_t i = 0; i < g.data.size(); ++i)
                            g.data[i] += lg.data[i];
                    }
            }

            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            if (!std::isfinite(batch_loss))
                throw Error(ErrorCategory::Numeric,
                            "non-finite training loss at epoch " +
                                std::to_string(epoch));
            epoch_loss += batch_loss;

            model.store().clip_grad_norm(config.grad_clip *
                                         static_cast<double>(end - start));
            if (config.use_sgd)
                model.store().sgd_step(config.sgd_lr /
                                       static_cast<double>(end - start));
            else {
                diff::AdamConfig adam = config.adam;
                // Gradients are summed over the batch; scale once here.
                for (std::size_t slot = 0; slot < model.store().size(); ++slot) {
                    Tensor& g = model.store().grad(static_cast<int>(slot));
                    for (double& v : g.data) v /= static_cast<double>(end - start);
                }
                model.store().adam_step(adam);
            }
        }
        double mean_loss = epoch_loss / static_cast<double>(strokes.size());
        history.epoch_loss.push_back(mean_loss);
        model.mark_trained();
        if (options.on_epoch) options.on_epoch(epoch, mean_loss);
        if (!options.checkpoint_dir.empty())
            model.save(options.checkpoint_dir + "/encoder-epoch-" +
                       std::to_string(epoch) + ".json");
    }
    return history;
}

}  // namespace vecsketch::encoder
