#include "bvfilter/coefficients.hpp"

#include "bvfilter/error.hpp"

namespace bvfilter {

AffineField::AffineField(Eigen::MatrixXd matrix, Eigen::VectorXd offset)
    : matrix_(std::move(matrix)), offset_(std::move(offset)) {
    if (offset_.size() != matrix_.rows()) throw ScenarioError("affine field: offset size does not match matrix rows");
}

Eigen::MatrixXd AffineField::evaluate(double, const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    return matrix_.lazyProduct(x).colwise() + offset_;
}

ClippedCubicField::ClippedCubicField(std::size_t dim, double coefficient, double clip)
    : dim_(dim), coefficient_(coefficient), clip_(clip) {
    if (!(clip > 0.0)) throw ScenarioError("cubic_clipped: clip must be positive");
}

Eigen::MatrixXd ClippedCubicField::evaluate(double, const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    return (-coefficient_ * x.array().cube()).cwiseMax(-clip_).cwiseMin(clip_).matrix();
}

TanhField::TanhField(std::size_t dim, double scale, double amplitude)
    : dim_(dim), scale_(scale), amplitude_(amplitude) {}

Eigen::MatrixXd TanhField::evaluate(double, const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    return (amplitude_ * (scale_ * x.array()).tanh()).matrix();
}

Eigen::MatrixXd FunctionField::evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(out_), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::VectorXd v = fn_(t, x.col(j));
        if (v.size() != out.rows()) throw ScenarioError("function field returned wrong dimension");
        out.col(j) = v;
    }
    return out;
}

Eigen::MatrixXd DiffusionField::apply(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                      const Eigen::Ref<const Eigen::MatrixXd>& dw) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(state_dim()), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = sigma(t, x.col(j)) * dw.col(j);
    return out;
}

Eigen::MatrixXd DiffusionField::half_covariance(double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    const auto m = static_cast<Eigen::Index>(state_dim());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(packed_size(state_dim())), x.cols());
    auto pack = [m](const Eigen::MatrixXd& a, Eigen::Ref<Eigen::VectorXd> col) {
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i; j < m; ++j) col[r++] = a(i, j);
    };
    if (is_constant()) {
        const Eigen::MatrixXd s = sigma(t, x.col(0));
        Eigen::VectorXd packed(out.rows());
        pack(0.5 * s * s.transpose(), packed);
        out.colwise() = packed;
        return out;
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Eigen::MatrixXd s = sigma(t, x.col(j));
        pack(0.5 * s * s.transpose(), out.col(j));
    }
    return out;
}

Eigen::MatrixXd ConstantDiffusion::apply(double, const Eigen::Ref<const Eigen::MatrixXd>&,
                                         const Eigen::Ref<const Eigen::MatrixXd>& dw) const {
    return sigma_.lazyProduct(dw);
}

}  // namespace bvfilter
