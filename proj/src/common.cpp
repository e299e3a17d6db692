#include "opf/common.hpp"

namespace opf {

double spectral_radius(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

}  // namespace opf
