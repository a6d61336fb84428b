#pragma once

#include <optional>

#include "elastinet/util.hpp"

namespace elastinet {

// Inversion targets. Values are physical units; training rescales internally.
struct MaterialParams {
    double lambda = 1.0;
    double mu = 0.5;
    std::optional<double> sigma_y;  // plasticity only
    bool lambda_trainable = false;
    bool mu_trainable = false;
    bool sigma_y_trainable = false;

    void validate() const {
        if (!mu_trainable && mu <= 0.0) raise("material: mu must be positive");
        if (!mu_trainable && !lambda_trainable && lambda + 2.0 * mu / 3.0 <= 0.0)
            raise("material: bulk modulus lambda + 2mu/3 must be positive");
        if (sigma_y_trainable && !sigma_y) raise("material: sigma_y trainable but unset");
    }
};

}  // namespace elastinet
