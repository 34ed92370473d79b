#include "tmc/mnl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "tmc/errors.hpp"

namespace tmc {

namespace {

template <std::size_t N>
int vocab_index(const std::array<std::string_view, N>& vocab, const std::string& value) {
    for (std::size_t i = 0; i < N; ++i) {
        if (vocab[i] == value) return static_cast<int>(i);
    }
    throw DataError("encode: value outside schema vocabulary: " + value);
}

constexpr int kNumNumeric = 3;
constexpr int kOneHotDim =
    static_cast<int>(kAgeBands.size() + kGenders.size() + kEducationLevels.size() +
                     kIncomeBands.size() + kTripPurposes.size());

}  // namespace

FeatureEncoder FeatureEncoder::fit(const Dataset& train) {
    if (train.records.empty()) throw DataError("encoder fit: empty dataset");
    FeatureEncoder enc;
    auto stats = [&](auto field) {
        double mean = 0.0;
        for (const auto& r : train.records) mean += field(r);
        mean /= static_cast<double>(train.records.size());
        double var = 0.0;
        for (const auto& r : train.records) {
            double d = field(r) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train.records.size());
        double sd = std::sqrt(var);
        return std::pair<double, double>(mean, sd > 0.0 ? sd : 1.0);
    };
    std::tie(enc.means_[0], enc.sds_[0]) = stats([](const TripRecord& r) { return r.trip_distance_miles; });
    std::tie(enc.means_[1], enc.sds_[1]) = stats([](const TripRecord& r) { return r.household_vehicles; });
    std::tie(enc.means_[2], enc.sds_[2]) = stats([](const TripRecord& r) { return r.start_time_hours; });
    return enc;
}

int FeatureEncoder::dim() const { return kNumNumeric + kOneHotDim; }

std::vector<double> FeatureEncoder::encode(const TripRecord& r) const {
    std::vector<double> x(static_cast<std::size_t>(dim()), 0.0);
    x[0] = (r.trip_distance_miles - means_[0]) / sds_[0];
    x[1] = (r.household_vehicles - means_[1]) / sds_[1];
    x[2] = (r.start_time_hours - means_[2]) / sds_[2];
    int offset = kNumNumeric;
    x[static_cast<std::size_t>(offset + vocab_index(kAgeBands, r.age_band))] = 1.0;
    offset += static_cast<int>(kAgeBands.size());
    x[static_cast<std::size_t>(offset + vocab_index(kGenders, r.gender))] = 1.0;
    offset += static_cast<int>(kGenders.size());
    x[static_cast<std::size_t>(offset + vocab_index(kEducationLevels, r.education))] = 1.0;
    offset += static_cast<int>(kEducationLevels.size());
    x[static_cast<std::size_t>(offset + vocab_index(kIncomeBands, r.income_band))] = 1.0;
    offset += static_cast<int>(kIncomeBands.size());
    x[static_cast<std::size_t>(offset + vocab_index(kTripPurposes, r.trip_purpose))] = 1.0;
    return x;
}

std::array<double, kNumModes> softmax(const std::array<double, kNumModes>& logits) {
    double max_logit = *std::max_element(logits.begin(), logits.end());
    std::array<double, kNumModes> probs{};
    double total = 0.0;
    for (int c = 0; c < kNumModes; ++c) {
        probs[c] = std::exp(logits[c] - max_logit);
        total += probs[c];
    }
    for (double& p : probs) p /= total;
    return probs;
}

MnlModel::MnlModel(FeatureEncoder encoder, MnlConfig config)
    : encoder_(std::move(encoder)), config_(config) {
    weights_.assign(static_cast<std::size_t>(kNumModes * encoder_.dim()), 0.0);
    bias_.assign(kNumModes, 0.0);
}

namespace {

std::array<double, kNumModes> logits_for(const std::vector<double>& weights,
                                         const std::vector<double>& bias,
                                         const std::vector<double>& x) {
    std::array<double, kNumModes> logits{};
    const std::size_t dim = x.size();
    for (int c = 0; c < kNumModes; ++c) {
        double z = bias[static_cast<std::size_t>(c)];
        const double* row = weights.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t j = 0; j < dim; ++j) z += row[j] * x[j];
        logits[c] = z;
    }
    return logits;
}

}  // namespace

double MnlModel::loss_at(const std::vector<double>& weights, const std::vector<double>& bias,
                         const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels) const {
    const auto n = static_cast<double>(features.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        auto probs = softmax(logits_for(weights, bias, features[i]));
        loss += -std::log(std::max(probs[labels[i]], 1e-300));
    }
    loss /= n;
    double reg = 0.0;
    for (double w : weights) reg += w * w;
    return loss + 0.5 * config_.l2_strength * reg;
}

void MnlModel::gradient_at(const std::vector<double>& weights, const std::vector<double>& bias,
                           const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, std::vector<double>& grad_weights,
                           std::vector<double>& grad_bias) const {
    const std::size_t dim = features.empty() ? 0 : features[0].size();
    grad_weights.assign(weights.size(), 0.0);
    grad_bias.assign(bias.size(), 0.0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        auto probs = softmax(logits_for(weights, bias, features[i]));
        for (int c = 0; c < kNumModes; ++c) {
            double delta = probs[c] - (labels[i] == c ? 1.0 : 0.0);
            grad_bias[static_cast<std::size_t>(c)] += delta;
            double* row = grad_weights.data() + static_cast<std::size_t>(c) * dim;
            const double* x = features[i].data();
            for (std::size_t j = 0; j < dim; ++j) row[j] += delta * x[j];
        }
    }
    const auto n = static_cast<double>(features.size());
    for (double& g : grad_weights) g /= n;
    for (double& g : grad_bias) g /= n;
    for (std::size_t j = 0; j < weights.size(); ++j)
        grad_weights[j] += config_.l2_strength * weights[j];
}

MnlFitInfo MnlModel::fit(const Dataset& train) {
    if (train.records.empty()) throw DataError("mnl fit: empty dataset");
    std::array<int, kNumModes> class_counts{};
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    features.reserve(train.records.size());
    labels.reserve(train.records.size());
    for (const auto& r : train.records) {
        if (!r.mode) throw DataError("mnl fit: unlabeled record " + std::to_string(r.record_id));
        features.push_back(encoder_.encode(r));
        labels.push_back(mode_index(*r.mode));
        ++class_counts[mode_index(*r.mode)];
    }
    for (int c = 0; c < kNumModes; ++c) {
        if (class_counts[c] == 0)
            std::cerr << "warning: mnl fit: no training records with mode "
                      << to_string(kModeOrder[c]) << "\n";
    }

    weights_.assign(static_cast<std::size_t>(kNumModes * encoder_.dim()), 0.0);
    bias_.assign(kNumModes, 0.0);

    MnlFitInfo info;
    std::vector<double> grad_weights, grad_bias;
    for (int epoch = 0; epoch < config_.max_epochs; ++epoch) {
        gradient_at(weights_, bias_, features, labels, grad_weights, grad_bias);
        double norm_sq = 0.0;
        for (double g : grad_weights) norm_sq += g * g;
        for (double g : grad_bias) norm_sq += g * g;
        info.final_gradient_norm = std::sqrt(norm_sq);
        info.epochs = epoch + 1;
        if (info.final_gradient_norm <= config_.tolerance) {
            info.converged = true;
            break;
        }
        for (std::size_t j = 0; j < weights_.size(); ++j)
            weights_[j] -= config_.learning_rate * grad_weights[j];
        for (std::size_t c = 0; c < bias_.size(); ++c)
            bias_[c] -= config_.learning_rate * grad_bias[c];

        if (epoch % 100 == 0 || epoch + 1 == config_.max_epochs) {
            double loss = loss_at(weights_, bias_, features, labels);
            if (!std::isfinite(loss))
                throw DataError("mnl fit: non-finite loss (learning rate too high?)");
            info.loss_history.push_back(loss);
        }
    }
    info.final_loss = loss_at(weights_, bias_, features, labels);
    return info;
}

std::array<double, kNumModes> MnlModel::predict_proba(const TripRecord& record) const {
    return softmax(logits_for(weights_, bias_, encoder_.encode(record)));
}

TripMode MnlModel::predict(const TripRecord& record) const {
    auto probs = predict_proba(record);
    int best = 0;
    for (int c = 1; c < kNumModes; ++c) {
        if (probs[c] > probs[best]) best = c;  // strict: ties keep canonical order
    }
    return kModeOrder[static_cast<std::size_t>(best)];
}

void MnlModel::set_parameters(std::vector<double> weights, std::vector<double> bias) {
    if (weights.size() != static_cast<std::size_t>(kNumModes * encoder_.dim()) ||
        bias.size() != kNumModes)
        throw DataError("set_parameters: wrong parameter shape");
    weights_ = std::move(weights);
    bias_ = std::move(bias);
}

double MnlModel::accuracy(const Dataset& labeled) const {
    if (labeled.records.empty()) throw DataError("accuracy: empty dataset");
    std::size_t correct = 0;
    for (const auto& r : labeled.records) {
        if (!r.mode) throw DataError("accuracy: unlabeled record");
        if (predict(r) == *r.mode) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labeled.records.size());
}

void MnlModel::save_json(const std::string& path) const {
    nlohmann::json j;
    j["weights"] = weights_;
    j["bias"] = bias_;
    j["numeric_means"] = encoder_.means();
    j["numeric_sds"] = encoder_.sds();
    j["config"] = {{"learning_rate", config_.learning_rate},
                   {"l2_strength", config_.l2_strength},
                   {"max_epochs", config_.max_epochs},
                   {"tolerance", config_.tolerance}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

MnlModel MnlModel::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    FeatureEncoder enc;
    auto means = j.at("numeric_means").get<std::array<double, 3>>();
    auto sds = j.at("numeric_sds").get<std::array<double, 3>>();
    enc.means_ = means;
    enc.sds_ = sds;
    MnlConfig cfg;
    cfg.learning_rate = j.at("config").at("learning_rate").get<double>();
    cfg.l2_strength = j.at("config").at("l2_strength").get<double>();
    cfg.max_epochs = j.at("config").at("max_epochs").get<int>();
    cfg.tolerance = j.at("config").at("tolerance").get<double>();
    MnlModel model(enc, cfg);
    model.set_parameters(j.at("weights").get<std::vector<double>>(),
                         j.at("bias").get<std::vector<double>>());
    return model;
}

}  // namespace tmc
