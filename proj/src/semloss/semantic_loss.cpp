#include "d2c/semloss/semantic_loss.hpp"

#include <cmath>

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"
#include "d2c/numcore/tensor_io.hpp"

namespace d2c::sem {
namespace {

void require_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("semantic loss weight must be a finite non-negative number");
    }
}

} // namespace

TextQueue::TextQueue(Tensor entries, double tau) : entries_(std::move(entries)), tau_(tau) {
    if (entries_.rank() != 2) throw ShapeError("text queue must be a k×D matrix");
    if (entries_.rows() < 2) throw ShapeError("text queue needs at least two entries");
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ParameterError("queue temperature must be positive");
    for (std::size_t r = 0; r < entries_.rows(); ++r) {
        double n2 = 0.0;
        for (std::size_t c = 0; c < entries_.cols(); ++c) n2 += entries_.at(r, c) * entries_.at(r, c);
        if (!(std::sqrt(n2) > 1e-12)) {
            throw DegenerateInputError("text queue entry " + std::to_string(r) + " has zero norm");
        }
    }
}

TextQueue TextQueue::load(const std::filesystem::path& path, double tau) {
    return TextQueue(load_tensor(path), tau);
}

void TextQueue::save(const std::filesystem::path& path) const { save_tensor(path, entries_); }

TextQueue build_queue(const std::vector<enc::TokenSequence>& captions, const Var& embedding,
                      const enc::Mlp& mlp, double tau) {
    NoGradGuard guard;
    if (captions.empty()) throw ShapeError("text queue needs captions");
    const std::size_t d = embedding.value().cols();
    Tensor entries({captions.size(), d});
    for (std::size_t i = 0; i < captions.size(); ++i) {
        Var pooled = pool_semantic(enc::encode_text(captions[i], embedding, mlp).matrix);
        for (std::size_t c = 0; c < d; ++c) entries.at(i, c) = pooled.value()[c];
    }
    return TextQueue(std::move(entries), tau);
}

Var pool_semantic(const Var& features) {
    if (features.value().rank() != 2 || features.value().rows() == 0) {
        throw ShapeError("semantic pooling needs at least one row");
    }
    return ops::mean_rows(features);
}

SemanticDistribution semantic_distribution(const Var& anchor, const TextQueue& queue) {
    if (anchor.value().size() != queue.width()) {
        throw ShapeError("anchor width " + std::to_string(anchor.value().size()) +
                         " does not match queue width " + std::to_string(queue.width()));
    }
    std::vector<Var> sims;
    sims.reserve(queue.size());
    for (std::size_t i = 0; i < queue.size(); ++i) {
        sims.push_back(ops::cosine_sim(anchor, Var::constant(queue.entries().row(i))));
    }
    return {ops::softmax_temp(ops::stack(sims), queue.tau())};
}

Var semantic_loss(const SemanticDistribution& pv, const SemanticDistribution& pt) {
    if (pv.size() != pt.size()) {
        throw ShapeError("semantic distributions have different lengths");
    }
    return ops::kl_div(pv.probs, pt.probs);
}

double total_loss(double l_sem, double l_nll, double lambda) {
    require_lambda(lambda);
    return lambda * l_sem + l_nll;
}

Var total_loss(const Var& l_sem, const Var& l_nll, double lambda) {
    require_lambda(lambda);
    return ops::add(ops::scale(l_sem, lambda), l_nll);
}

} // namespace d2c::sem
