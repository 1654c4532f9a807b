#include "isocausal/causal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace isocausal {

const char* to_string(DPClass c) {
    switch (c) {
        case DPClass::Future: return "Future";
        case DPClass::Past: return "Past";
        default: return "NotCausal";
    }
}

const char* to_string(Segre s) {
    switch (s) {
        case Segre::Diagonalizable: return "Diagonalizable";
        case Segre::NullEigenvector: return "NullEigenvector";
        default: return "None";
    }
}

Mat endomorphism(const SymMatrix& g, const SymMatrix& T) {
    if (g.dim() != T.dim()) throw InputError("g and T have different dimensions");
    Eigen::FullPivLU<Mat> lu(g.mat());
    if (!lu.isInvertible()) throw DomainError("metric is singular");
    return lu.solve(T.mat());
}

namespace {

// Euclidean-orthonormal basis of the common kernel of the rows of C.
Mat kernel_basis(const Mat& C, int n) {
    Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullV);
    return svd.matrixV().rightCols(n - C.rows());
}

// Eigen-structure of T-hat, independent of the sign used for Future/Past.
struct Structure {
    Segre segre = Segre::None;
    bool complex = false;
    bool higher_block = false;  // null eigenvector sitting in a block of size >= 3
    double max_imag = 0.0;
    double residual = 0.0;
    double scale = 1.0;
    std::vector<double> eig;
    Vec v;             // unit timelike eigenvector (g(v,v) = 1), or future null k
    double lambda0 = 0.0;
    double lambda = 0.0;
    Vec spatial;       // eigenvalues on the spacelike complement
    Mat spatial_vecs;  // columns g-normalized to g(w,w) = -1
};

Structure analyse(const SymMatrix& g, const SymMatrix& T, const Vec& orientation) {
    const int n = g.dim();
    if (T.dim() != n || orientation.size() != n) throw InputError("dimension mismatch");
    if (!signature(g).lorentzian()) throw DomainError("metric is not Lorentzian");
    if (!(g.form(orientation) > 0.0)) throw DomainError("orientation vector is not timelike");

    Structure st;
    Mat A = endomorphism(g, T);
    st.scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    const double gscale = g.mat().cwiseAbs().maxCoeff();

    Eigen::EigenSolver<Mat> es(A, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    std::vector<double> re;
    for (int i = 0; i < n; ++i) {
        std::complex<double> z = es.eigenvalues()(i);
        st.max_imag = std::max(st.max_imag, std::fabs(z.imag()));
        re.push_back(z.real());
    }
    std::sort(re.begin(), re.end());
    st.eig = re;
    if (st.max_imag > 1e-7 * st.scale) {
        st.complex = true;
        return st;
    }

    // Clusters of numerically equal eigenvalues.
    std::vector<double> centers;
    for (std::size_t i = 0; i < re.size();) {
        std::size_t j = i + 1;
        while (j < re.size() && re[j] - re[j - 1] <= 1e-6 * st.scale) ++j;
        double c = 0.0;
        for (std::size_t k = i; k < j; ++k) c += re[k];
        centers.push_back(c / static_cast<double>(j - i));
        i = j;
    }

    // Look for a timelike (or failing that, null) eigenvector.
    double best_g = -std::numeric_limits<double>::infinity();
    Vec best_vec;
    double best_mu = 0.0;
    for (double mu : centers) {
        Mat B = A - mu * Mat::Identity(n, n);
        Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeFullV);
        const Vec& sv = svd.singularValues();
        int r = 0;
        for (int i = n - 1; i >= 0 && sv(i) <= 1e-6 * st.scale; --i) ++r;
        if (r == 0) r = 1;  // the cluster is an eigenvalue, keep the closest direction
        Mat E = svd.matrixV().rightCols(r);
        Eigen::SelfAdjointEigenSolver<Mat> rs(E.transpose() * g.mat() * E);
        int top = r - 1;
        double gmax = rs.eigenvalues()(top);
        if (gmax > best_g) {
            best_g = gmax;
            best_vec = E * rs.eigenvectors().col(top);
            best_mu = mu;
        }
    }

    const double gtol = 1e-7 * gscale;
    if (best_g > gtol) {
        st.segre = Segre::Diagonalizable;
        Vec v = best_vec / std::sqrt(g.form(best_vec));
        if (g.form(v, orientation) < 0.0) v = -v;
        st.v = v;
        st.lambda0 = T.form(v);
        Mat W = kernel_basis((g.mat() * v).transpose(), n);
        Mat gW = -(W.transpose() * g.mat() * W);
        Mat tW = -(W.transpose() * T.mat() * W);
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ge(tW, gW);
        if (ge.info() != Eigen::Success) throw NumericalError("complement eigenproblem failed");
        st.spatial = ge.eigenvalues();
        // eigenvectors are gW-orthonormal, i.e. g(w,w) = -1 after mapping back
        st.spatial_vecs = W * ge.eigenvectors();
        return st;
    }
    if (best_g < -gtol * 10.0 && best_g < -1e-6) {
        throw NumericalError("no causal eigenvector found for a real spectrum");
    }

    // Null eigenvector k with eigenvalue mu.
    st.segre = Segre::NullEigenvector;
    const double oo = g.form(orientation);
    Vec uhat = orientation / std::sqrt(oo);
    Vec k = best_vec;
    double ku = g.form(k, uhat);
    if (std::fabs(ku) < 1e-300) throw NumericalError("null eigenvector orthogonal to the orientation");
    k /= ku;  // future, with g(k, uhat) = 1
    double mu = best_mu;
    Vec l = uhat - 0.5 * k;

    Mat C(2, n);
    C.row(0) = (g.mat() * k).transpose();
    C.row(1) = (g.mat() * l).transpose();
    Vec w = Vec::Zero(n);
    if (n > 2) {
        Mat W = kernel_basis(C, n);
        Mat gS = W.transpose() * g.mat() * W;
        Mat tS = W.transpose() * T.mat() * W;
        Vec bs = W.transpose() * (T.mat() * l);
        Mat Msys = tS - mu * gS;
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(Msys);
        cod.setThreshold(1e-10);
        Vec wc = cod.solve(-bs);
        st.residual = (Msys * wc + bs).norm();
        if (st.residual > 1e-6 * st.scale * (1.0 + bs.norm())) st.higher_block = true;
        w = W * wc;
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ge(-tS, -gS);
        if (ge.info() != Eigen::Success) throw NumericalError("complement eigenproblem failed");
        st.spatial = ge.eigenvalues();
        st.spatial_vecs = W * ge.eigenvectors();
    } else {
        st.spatial = Vec(0);
        st.spatial_vecs = Mat(n, 0);
    }
    Vec lp = l + w - 0.5 * g.form(w) * k;
    st.v = k;
    st.lambda0 = mu;
    st.lambda = T.form(lp);
    return st;
}

double snap(double m, double scale) {
    return std::fabs(m) <= 64.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : m;
}

// Slack of the Future conditions for sign s (s = -1 tests Past).
double slack(const Structure& st, double s, bool weak) {
    double m = std::numeric_limits<double>::infinity();
    if (st.segre == Segre::Diagonalizable) {
        if (weak) m = s * st.lambda0;
        for (int i = 0; i < st.spatial.size(); ++i)
            m = std::min(m, weak ? s * (st.lambda0 - st.spatial(i)) : s * st.lambda0 - std::fabs(st.spatial(i)));
        if (st.spatial.size() == 0) m = s * st.lambda0;
    } else {
        m = std::min(s * st.lambda, s * st.lambda0);
        for (int i = 0; i < st.spatial.size(); ++i)
            m = std::min(m, weak ? s * (st.lambda0 - st.spatial(i)) : s * st.lambda0 - std::fabs(st.spatial(i)));
        if (st.higher_block) m = std::min(m, -st.residual);
    }
    return snap(m, st.scale);
}

std::vector<Vec> canonical_from(const Structure& st, const SymMatrix& g, double s, double tol, bool& all) {
    all = false;
    std::vector<Vec> out;
    if (st.segre == Segre::NullEigenvector) {
        out.push_back(st.v.normalized());
        return out;
    }
    std::vector<int> idx;
    for (int i = 0; i < st.spatial.size(); ++i)
        if (std::fabs(st.spatial(i) - st.lambda0) <= std::max(tol, 1e-9 * st.scale)) idx.push_back(i);
    if (idx.empty()) return out;
    all = static_cast<int>(idx.size()) == st.spatial.size();
    for (int i : idx)
        for (double sg : {1.0, -1.0}) {
            Vec k = st.v + sg * st.spatial_vecs.col(i);
            if (g.form(k, st.v) < 0.0) k = -k;
            out.push_back(k.normalized());
        }
    (void)s;
    return out;
}

DPReport classify(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, double tol, bool weak) {
    Structure st = analyse(g, T, orientation);
    DPReport r;
    r.eigenvalues = st.eig;
    if (st.complex) {
        r.complex_spectrum = true;
        r.margin = -st.max_imag;
        r.classification = DPClass::NotCausal;
        r.segre = Segre::None;
    } else {
        r.segre = st.segre;
        r.lambda0 = st.lambda0;
        r.lambda = st.lambda;
        r.spatial.assign(st.spatial.data(), st.spatial.data() + st.spatial.size());
        double fut = slack(st, 1.0, weak);
        double past = slack(st, -1.0, weak);
        if (fut >= -tol) {
            r.classification = DPClass::Future;
            r.margin = fut;
            r.canonical_null = canonical_from(st, g, 1.0, tol, r.all_null_canonical);
        } else if (past >= -tol) {
            r.classification = DPClass::Past;
            r.margin = past;
        } else {
            r.classification = DPClass::NotCausal;
            r.margin = std::max(fut, past);
        }
        if (st.higher_block && r.classification != DPClass::NotCausal) {
            r.classification = DPClass::NotCausal;
            r.margin = -st.residual;
        }
    }
    r.boundary = std::fabs(r.margin) < kBoundaryBand;
    if (r.classification == DPClass::NotCausal) {
        OracleResult o = null_oracle(g, T, orientation, 256, 1);
        r.witness = o.k1;
        if ((o.k1 - o.k2).norm() > 1e-12) r.witness2 = o.k2;
    }
    return r;
}

}  // namespace

DPReport classify_dp(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, double tol) {
    return classify(g, T, orientation, tol, false);
}

DPReport classify_weak(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, double tol) {
    return classify(g, T, orientation, tol, true);
}

OracleResult null_oracle(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, int samples,
                         std::uint64_t seed) {
    const int n = g.dim();
    std::vector<Vec> ks = sample_null_cone(g, orientation, std::max(samples, 1), seed);
    const int m = static_cast<int>(ks.size());
    Mat K(n, m);
    for (int i = 0; i < m; ++i) K.col(i) = ks[i];
    Mat W = T.mat() * K;
    double dmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) dmin = std::min(dmin, K.col(i).dot(W.col(i)));

    OracleResult best;
    best.min_value = std::numeric_limits<double>::infinity();
    int bi = 0, bj = 0;
    const int block = 256;
    for (int i0 = 0; i0 < m; i0 += block) {
        int ni = std::min(block, m - i0);
        for (int j0 = i0; j0 < m; j0 += block) {
            int nj = std::min(block, m - j0);
            Mat P = K.middleCols(i0, ni).transpose() * W.middleCols(j0, nj);
            Eigen::Index r, c;
            double v = P.minCoeff(&r, &c);
            if (v < best.min_value) {
                best.min_value = v;
                bi = i0 + static_cast<int>(r);
                bj = j0 + static_cast<int>(c);
            }
        }
    }
    best.diagonal_min = dmin;
    best.k1 = ks[bi];
    best.k2 = ks[bj];
    if (n == 2) return best;

    // Local polish of the best pair over the sphere of null directions.
    Mat F = orthonormal_frame(g, orientation);
    auto to_params = [&](const Vec& k) {
        Vec c = F.colPivHouseholderQr().solve(k);
        return Vec(c.tail(n - 1) / c(0));
    };
    auto from_params = [&](const Vec& s) {
        Vec k = F.col(0) + F.rightCols(n - 1) * s.normalized();
        return Vec(k.normalized());
    };
    Vec s1 = to_params(best.k1), s2 = to_params(best.k2);
    double val = T.form(from_params(s1), from_params(s2));
    double step = 0.05;
    while (step > 1e-11) {
        bool moved = false;
        for (int which = 0; which < 2; ++which)
            for (int a = 0; a < n - 1; ++a)
                for (double d : {step, -step}) {
                    Vec t1 = s1, t2 = s2;
                    (which == 0 ? t1 : t2)(a) += d;
                    double v = T.form(from_params(t1), from_params(t2));
                    if (v < val) {
                        val = v;
                        s1 = t1;
                        s2 = t2;
                        moved = true;
                    }
                }
        if (!moved) step *= 0.5;
    }
    if (val < best.min_value) {
        best.min_value = val;
        best.k1 = from_params(s1);
        best.k2 = from_params(s2);
    }
    return best;
}

CanonicalNull canonical_null_directions(const SymMatrix& g, const SymMatrix& T, const Vec& orientation,
                                        double tol) {
    DPReport r = classify_dp(g, T, orientation, tol);
    if (r.classification != DPClass::Future) throw DomainError("canonical null directions need a Future tensor");
    return {r.canonical_null, r.all_null_canonical};
}

StabilityConstant stability_constant(const SymMatrix& g, const SymMatrix& Omega, const SymMatrix& T,
                                     const Vec& orientation, int samples, std::uint64_t seed) {
    const int n = g.dim();
    Mat F = orthonormal_frame(g, orientation);
    Vec u = F.col(0);
    std::vector<Vec> dirs;
    if (n == 2) {
        dirs.push_back(F.col(1));
        dirs.push_back(-F.col(1));
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        for (int i = 0; i < std::max(samples, 1); ++i) {
            Vec s(n - 1);
            for (int a = 0; a < n - 1; ++a) s(a) = normal(rng);
            dirs.push_back(F.rightCols(n - 1) * s.normalized());
        }
    }
    StabilityConstant out;
    out.L1 = out.L2 = std::numeric_limits<double>::infinity();
    for (const Vec& e : dirs)
        for (int k = 0; k <= 100; ++k) {
            Vec x = u + (k / 100.0) * e;
            out.L1 = std::min(out.L1, Omega.form(x));
            out.L2 = std::min(out.L2, T.form(x));
        }
    if (out.L2 >= 0.0) {
        out.A0 = 0.0;
        out.verified = classify_dp(g, T, orientation).classification == DPClass::Future;
        return out;
    }
    if (!(out.L1 > 1e-12)) throw DomainError("Omega has canonical null directions, no stability constant exists");
    out.A0 = 2.0 * std::fabs(out.L2) / out.L1;
    out.verified = classify_dp(g, out.A0 * Omega + T, orientation).classification == DPClass::Future;
    return out;
}

}  // namespace isocausal
