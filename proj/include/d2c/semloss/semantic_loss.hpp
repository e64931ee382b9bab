#pragma once

#include <filesystem>
#include <vector>

#include "d2c/encoders/text_encoder.hpp"

namespace d2c::sem {

constexpr double kDefaultTau = 0.07;
constexpr std::size_t kDefaultQueueSize = 30;

// k pooled text vectors (k×D) and the softmax temperature.
class TextQueue {
public:
    TextQueue(Tensor entries, double tau);

    std::size_t size() const { return entries_.rows(); }
    std::size_t width() const { return entries_.cols(); }
    double tau() const noexcept { return tau_; }
    const Tensor& entries() const noexcept { return entries_; }

    static TextQueue load(const std::filesystem::path& path, double tau);
    void save(const std::filesystem::path& path) const;

private:
    Tensor entries_;
    double tau_;
};

// Encodes every caption, mean-pools it and stacks the results. Queue entries
// are treated as constants by the loss.
TextQueue build_queue(const std::vector<enc::TokenSequence>& captions, const Var& embedding,
                      const enc::Mlp& mlp, double tau);

struct SemanticDistribution {
    Var probs;

    std::size_t size() const { return probs.value().size(); }
};

// Arithmetic mean over the rows of a rows×D matrix.
Var pool_semantic(const Var& features);

// softmax_i(cos(anchor, t_i) / tau) over the queue entries.
SemanticDistribution semantic_distribution(const Var& anchor, const TextQueue& queue);

// D_KL(pv || pt); gradients flow into both distributions.
Var semantic_loss(const SemanticDistribution& pv, const SemanticDistribution& pt);

// lambda · l_sem + l_nll.
double total_loss(double l_sem, double l_nll, double lambda);
Var total_loss(const Var& l_sem, const Var& l_nll, double lambda);

} // namespace d2c::sem
