#pragma once

#include <stdexcept>

#include "bdlp/kernel.hpp"
#include "bdlp/space.hpp"

namespace bdlp {

/// Full parameter set of the birth-and-death model: intrinsic mortality m,
/// fecundity kappa_plus with dispersal kernel a_plus, competition strength
/// kappa_minus with competition kernel a_minus, on a periodic domain.
struct ModelParams {
    double m = 1.0;            // 1/time
    double kappa_plus = 0.0;   // 1/time
    double kappa_minus = 0.0;  // volume/time
    Kernel a_plus;
    Kernel a_minus;
    SpaceSpec space;

    void validate() const {
        if (m < 0.0 || kappa_plus < 0.0 || kappa_minus < 0.0)
            throw std::invalid_argument("ModelParams: rates must be nonnegative");
        space.validate();
        if (a_plus.d != space.d || a_minus.d != space.d)
            throw std::invalid_argument("ModelParams: kernel dimension does not match space");
    }
};

}  // namespace bdlp
