#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>

namespace bvfilter {

/// A field f(t, x): R^m -> R^k evaluated column-wise on batches of points.
///
/// Used for the drift b and the observation function h. Batches are m x N
/// (grid nodes or particles); the result is k x N.
class VectorField {
public:
    virtual ~VectorField() = default;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual Eigen::MatrixXd evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const = 0;
    virtual bool time_homogeneous() const { return true; }
    virtual std::string name() const = 0;

    Eigen::VectorXd at(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const { return evaluate(t, x); }
};

/// f ≡ 0.
class ZeroField final : public VectorField {
public:
    ZeroField(std::size_t input_dim, std::size_t output_dim) : in_(input_dim), out_(output_dim) {}
    std::size_t input_dim() const override { return in_; }
    std::size_t output_dim() const override { return out_; }
    Eigen::MatrixXd evaluate(double, const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out_), x.cols());
    }
    std::string name() const override { return "zero"; }

private:
    std::size_t in_, out_;
};

/// f(x) = M x + c.
class AffineField final : public VectorField {
public:
    AffineField(Eigen::MatrixXd matrix, Eigen::VectorXd offset);
    std::size_t input_dim() const override { return static_cast<std::size_t>(matrix_.cols()); }
    std::size_t output_dim() const override { return static_cast<std::size_t>(matrix_.rows()); }
    Eigen::MatrixXd evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const override;
    std::string name() const override { return "linear"; }

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const Eigen::VectorXd& offset() const { return offset_; }

private:
    Eigen::MatrixXd matrix_;
    Eigen::VectorXd offset_;
};

/// f_i(x) = clamp(-coef x_i^3, -clip, clip), componentwise.
class ClippedCubicField final : public VectorField {
public:
    ClippedCubicField(std::size_t dim, double coefficient, double clip);
    std::size_t input_dim() const override { return dim_; }
    std::size_t output_dim() const override { return dim_; }
    Eigen::MatrixXd evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const override;
    std::string name() const override { return "cubic_clipped"; }

private:
    std::size_t dim_;
    double coefficient_, clip_;
};

/// f_i(x) = amplitude tanh(scale x_i), componentwise.
class TanhField final : public VectorField {
public:
    TanhField(std::size_t dim, double scale, double amplitude);
    std::size_t input_dim() const override { return dim_; }
    std::size_t output_dim() const override { return dim_; }
    Eigen::MatrixXd evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const override;
    std::string name() const override { return "tanh"; }

private:
    std::size_t dim_;
    double scale_, amplitude_;
};

/// Pointwise callable, for fields without a preset.
class FunctionField final : public VectorField {
public:
    using Fn = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
    FunctionField(std::size_t input_dim, std::size_t output_dim, Fn fn, bool time_homogeneous = false)
        : in_(input_dim), out_(output_dim), fn_(std::move(fn)), homogeneous_(time_homogeneous) {}
    std::size_t input_dim() const override { return in_; }
    std::size_t output_dim() const override { return out_; }
    Eigen::MatrixXd evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const override;
    bool time_homogeneous() const override { return homogeneous_; }
    std::string name() const override { return "function"; }

private:
    std::size_t in_, out_;
    Fn fn_;
    bool homogeneous_;
};

/// Diffusion matrix σ(t, x) in R^{m x d}.
class DiffusionField {
public:
    virtual ~DiffusionField() = default;
    virtual std::size_t state_dim() const = 0;
    virtual std::size_t noise_dim() const = 0;
    virtual Eigen::MatrixXd sigma(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
    virtual bool is_constant() const { return false; }
    virtual bool time_homogeneous() const { return is_constant(); }
    virtual std::string name() const = 0;

    /// Columns σ(t, x_j) dW_j.
    virtual Eigen::MatrixXd apply(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  const Eigen::Ref<const Eigen::MatrixXd>& dw) const;
    /// a = ½ σσ* at each column of x, packed as (a_00, a_01, a_11) for m = 2 or (a_00) for m = 1.
    Eigen::MatrixXd half_covariance(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

class ConstantDiffusion final : public DiffusionField {
public:
    explicit ConstantDiffusion(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {}
    std::size_t state_dim() const override { return static_cast<std::size_t>(sigma_.rows()); }
    std::size_t noise_dim() const override { return static_cast<std::size_t>(sigma_.cols()); }
    Eigen::MatrixXd sigma(double, const Eigen::Ref<const Eigen::VectorXd>&) const override { return sigma_; }
    bool is_constant() const override { return true; }
    std::string name() const override { return "constant"; }
    Eigen::MatrixXd apply(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                          const Eigen::Ref<const Eigen::MatrixXd>& dw) const override;

    const Eigen::MatrixXd& matrix() const { return sigma_; }

private:
    Eigen::MatrixXd sigma_;
};

class FunctionDiffusion final : public DiffusionField {
public:
    using Fn = std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)>;
    FunctionDiffusion(std::size_t state_dim, std::size_t noise_dim, Fn fn, bool time_homogeneous = false)
        : m_(state_dim), d_(noise_dim), fn_(std::move(fn)), homogeneous_(time_homogeneous) {}
    std::size_t state_dim() const override { return m_; }
    std::size_t noise_dim() const override { return d_; }
    Eigen::MatrixXd sigma(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const override {
        return fn_(t, Eigen::VectorXd(x));
    }
    bool time_homogeneous() const override { return homogeneous_; }
    std::string name() const override { return "function"; }

private:
    std::size_t m_, d_;
    Fn fn_;
    bool homogeneous_;
};

/// Observation noise matrix γ(t) in R^{n x n}.
class NoiseMatrix {
public:
    virtual ~NoiseMatrix() = default;
    virtual std::size_t dim() const = 0;
    virtual Eigen::MatrixXd at(double t) const = 0;
    virtual bool is_constant() const { return false; }
    virtual std::string name() const = 0;
};

class ConstantNoise final : public NoiseMatrix {
public:
    explicit ConstantNoise(Eigen::MatrixXd gamma) : gamma_(std::move(gamma)) {}
    std::size_t dim() const override { return static_cast<std::size_t>(gamma_.rows()); }
    Eigen::MatrixXd at(double) const override { return gamma_; }
    bool is_constant() const override { return true; }
    std::string name() const override { return "constant"; }

private:
    Eigen::MatrixXd gamma_;
};

class FunctionNoise final : public NoiseMatrix {
public:
    using Fn = std::function<Eigen::MatrixXd(double)>;
    FunctionNoise(std::size_t dim, Fn fn) : n_(dim), fn_(std::move(fn)) {}
    std::size_t dim() const override { return n_; }
    Eigen::MatrixXd at(double t) const override { return fn_(t); }
    std::string name() const override { return "function"; }

private:
    std::size_t n_;
    Fn fn_;
};

/// Number of packed entries of a symmetric m x m matrix.
constexpr std::size_t packed_size(std::size_t m) { return m * (m + 1) / 2; }

}  // namespace bvfilter
