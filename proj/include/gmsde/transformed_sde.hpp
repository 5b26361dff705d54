#pragma once

#include "gmsde/sde.hpp"
#include "gmsde/transform.hpp"
#include "gmsde/types.hpp"

#include <memory>
#include <utility>

namespace gmsde {

/// Coefficients of the SDE solved by Z = G(X):
///   mu~_k(z)  = G_k'(x) mu(x) + 1/2 tr(sigma(x)^T G_k''(x) sigma(x)),
///   sigma~(z) = G'(x) sigma(x),                with x = G^{-1}(z).
/// Outside the c-tube both coincide with the original coefficients.
class TransformedSde {
public:
    struct Coefficients {
        Vector drift;
        Matrix diffusion;
    };

    explicit TransformedSde(std::shared_ptr<const Transform> transform) : transform_(std::move(transform)) {
        if (!transform_) throw Error(ErrorCode::invalid_argument, "transformed SDE needs a transform");
    }

    const Transform& transform() const noexcept { return *transform_; }
    const SdeProblem& problem() const noexcept { return transform_->problem(); }

    /// Both coefficients at z, sharing one inversion.
    Coefficients coefficients(const Vector& z) const {
        const SdeProblem& p = problem();
        const Vector x = transform_->inverse(z);
        const Vector mu = p.drift(x);
        const Matrix sigma = p.diffusion(x);
        const auto e = transform_->expansion(x, true);
        if (e.identity) return {mu, sigma};
        Coefficients out{e.jacobian * mu, e.jacobian * sigma};
        for (int k = 0; k < p.dim; ++k)
            out.drift(k) += 0.5 * (sigma.transpose() * e.hessians[k] * sigma).trace();
        return out;
    }

    Vector drift(const Vector& z) const { return coefficients(z).drift; }
    Matrix diffusion(const Vector& z) const { return coefficients(z).diffusion; }

private:
    std::shared_ptr<const Transform> transform_;
};

} // namespace gmsde
