#include "ovg/train.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "ovg/errors.hpp"
#include "ovg/rng.hpp"

namespace ovg {

AdamW::AdamW(nn::ParamStore& store, double lr, double weight_decay, double beta1, double beta2, double eps)
    : store_(&store), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
    for (const auto& [name, p] : store.entries()) {
        m_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    }
}

void AdamW::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    auto& entries = store_->entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        ad::Var p = entries[i].second;
        const ad::Matrix g = p.grad();
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
        ad::Matrix& w = p.mutable_value();
        w *= 1.0 - lr_ * wd_;
        w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

double clip_grad_norm(nn::ParamStore& store, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, p] : store.entries()) sq += p.grad().squaredNorm();
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / (norm + 1e-12);
        for (const auto& [name, p] : store.entries()) p.node()->grad *= s;
    }
    return norm;
}

std::vector<StepLog> train(Grounder& model, const std::vector<TrainingSample>& samples, const StepCallback& on_step) {
    const ModelConfig& cfg = model.config();
    if (samples.empty()) throw InputError("training needs at least one sample");
    if (cfg.batch_size < 1 || cfg.train_steps < 0) throw ConfigError("batch_size must be >= 1, train_steps >= 0");
    AdamW opt(model.params(), cfg.learning_rate, cfg.weight_decay);
    Rng order_rng = make_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<int> order(samples.size());
    std::size_t cursor = order.size();

    std::vector<StepLog> logs;
    logs.reserve(static_cast<std::size_t>(cfg.train_steps));
    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(samples.size()));
    for (int step = 0; step < cfg.train_steps; ++step) {
        model.params().zero_grad();
        StepLog log;
        log.step = step;
        for (int b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), 0);
                std::shuffle(order.begin(), order.end(), order_rng);
                cursor = 0;
            }
            const TrainingSample& s = samples[static_cast<std::size_t>(order[cursor++])];
            const ForwardResult r = model.forward_pixels(s.pixels, s.expression, s.width, s.height);
            const LossTerms terms = grounding_loss(r, bbox_to_norm(s.target, s.width, s.height), cfg);
            ad::backward(ad::scale(terms.total, 1.0 / batch));
            log.loss += terms.total.item() / batch;
            log.giou += terms.giou / batch;
            log.l1 += terms.l1 / batch;
            log.cts += terms.cts / batch;
        }
        log.grad_norm = clip_grad_norm(model.params(), cfg.max_grad_norm);
        opt.step();
        if (on_step) on_step(log);
        logs.push_back(log);
    }
    model.params().zero_grad();
    return logs;
}

Vocabulary build_vocabulary(const std::vector<TrainingSample>& samples) {
    std::vector<std::string> corpus;
    corpus.reserve(samples.size());
    for (const auto& s : samples) corpus.push_back(s.expression);
    return Vocabulary(corpus);
}

std::string RunRecord::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json c;
    for (const auto& [k, v] : config.to_map()) c[k] = v;
    j["config"] = c;
    j["seed"] = seed;
    nlohmann::ordered_json steps_json = nlohmann::ordered_json::array();
    for (const auto& s : steps)
        steps_json.push_back(
            {{"step", s.step}, {"loss", s.loss}, {"giou", s.giou}, {"l1", s.l1}, {"cts", s.cts}, {"grad_norm", s.grad_norm}});
    j["steps"] = std::move(steps_json);
    j["final_report"] = nlohmann::ordered_json::parse(final_report.to_json());
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j.dump(2) + "\n";
}

RunRecord RunRecord::from_json(const std::string& text) {
    RunRecord r;
    try {
        const auto j = nlohmann::json::parse(text);
        std::map<std::string, std::string> kv;
        for (const auto& [k, v] : j.at("config").items()) kv[k] = v.get<std::string>();
        r.config.apply(kv);
        r.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("steps"))
            r.steps.push_back({s.at("step").get<int>(), s.at("loss").get<double>(), s.at("giou").get<double>(),
                               s.at("l1").get<double>(), s.at("cts").get<double>(), s.at("grad_norm").get<double>()});
        r.final_report = EvalReport::from_json(j.at("final_report").dump());
        r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed run record: ") + e.what());
    }
    return r;
}

}  // namespace ovg
