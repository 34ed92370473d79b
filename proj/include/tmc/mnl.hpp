#pragma once

#include <array>
#include <string>
#include <vector>

#include "tmc/trip_data.hpp"

namespace tmc {

// One-hot encodes the categorical fields over the closed schema
// vocabularies and standardizes the numeric fields with constants computed
// from the training split only, so encode() is total over schema-valid
// records and the output dimension is fixed.
class FeatureEncoder {
public:
    FeatureEncoder() = default;

    static FeatureEncoder fit(const Dataset& train);

    std::vector<double> encode(const TripRecord& record) const;
    int dim() const;

    const std::array<double, 3>& means() const { return means_; }
    const std::array<double, 3>& sds() const { return sds_; }

private:
    friend class MnlModel;
    // distance, vehicles, start_time
    std::array<double, 3> means_{0.0, 0.0, 0.0};
    std::array<double, 3> sds_{1.0, 1.0, 1.0};
};

struct MnlConfig {
    double learning_rate = 0.1;
    double l2_strength = 1e-4;
    int max_epochs = 5000;
    double tolerance = 1e-6;  // stop when the gradient norm drops below
};

struct MnlFitInfo {
    int epochs = 0;
    double final_loss = 0.0;
    double final_gradient_norm = 0.0;
    bool converged = false;
    std::vector<double> loss_history;
};

// Multinomial logit trained by full-batch gradient descent on the
// L2-regularized cross-entropy, deterministic from the zeros init.
class MnlModel {
public:
    MnlModel() = default;
    MnlModel(FeatureEncoder encoder, MnlConfig config);

    MnlFitInfo fit(const Dataset& train);

    std::array<double, kNumModes> predict_proba(const TripRecord& record) const;
    TripMode predict(const TripRecord& record) const;  // argmax, canonical tie-break

    double accuracy(const Dataset& labeled) const;

    // Loss and gradient at explicit parameters; the gradient-check oracle
    // runs finite differences through this same entry point.
    double loss_at(const std::vector<double>& weights, const std::vector<double>& bias,
                   const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels) const;
    void gradient_at(const std::vector<double>& weights, const std::vector<double>& bias,
                     const std::vector<std::vector<double>>& features,
                     const std::vector<int>& labels, std::vector<double>& grad_weights,
                     std::vector<double>& grad_bias) const;

    const FeatureEncoder& encoder() const { return encoder_; }
    const MnlConfig& config() const { return config_; }
    const std::vector<double>& weights() const { return weights_; }  // kNumModes x dim, row-major
    const std::vector<double>& bias() const { return bias_; }

    // Replaces the parameters wholesale (model loading, hand-built fixtures).
    void set_parameters(std::vector<double> weights, std::vector<double> bias);

    void save_json(const std::string& path) const;
    static MnlModel load_json(const std::string& path);

private:
    FeatureEncoder encoder_;
    MnlConfig config_;
    std::vector<double> weights_;  // kNumModes x dim
    std::vector<double> bias_;     // kNumModes
};

std::array<double, kNumModes> softmax(const std::array<double, kNumModes>& logits);

}  // namespace tmc
