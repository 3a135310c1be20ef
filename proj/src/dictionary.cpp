#include "koop/dictionary.hpp"

#include <cmath>
#include <limits>

namespace koop {

Normalization Normalization::fit(const Eigen::MatrixXd& states) {
    if (states.rows() != 3 || states.cols() == 0) {
        throw ConfigError("normalization expects a 3 x M state matrix with M >= 1");
    }
    Normalization n;
    n.mean = states.rowwise().mean();
    const Eigen::MatrixXd centered = states.colwise() - n.mean;
    n.scale = (centered.array().square().rowwise().mean()).sqrt();
    for (int i = 0; i < 3; ++i) {
        if (!(n.scale[i] > 0.0)) n.scale[i] = 1.0;  // constant channel: leave unscaled
    }
    return n;
}

// ---------------------------------------------------------------------------
// Polynomial
// ---------------------------------------------------------------------------

int polynomial_dim(int m) {
    if (m < 0) throw ConfigError("polynomial degree must be >= 0");
    int n = 0;
    for (int d = 1; d <= m; ++d) n += (d + 1) * (d + 2) / 2;
    return n;
}

PolynomialDictionary::PolynomialDictionary(int degree) : degree_(degree) {
    if (degree < 1) throw ConfigError("polynomial dictionary requires degree >= 1");
    // graded lexicographic: by total degree, then lexicographic in (a, b, c)
    for (int d = 1; d <= degree; ++d) {
        for (int a = d; a >= 0; --a) {
            for (int b = d - a; b >= 0; --b) {
                exponents_.push_back({a, b, d - a - b});
            }
        }
    }
}

Eigen::VectorXd PolynomialDictionary::lift(const Eigen::Vector3d& x) const {
    Eigen::VectorXd z(exponents_.size());
    // powers up to the max degree, computed once per coordinate
    std::vector<std::array<double, 3>> pow_table(degree_ + 1);
    pow_table[0] = {1.0, 1.0, 1.0};
    for (int d = 1; d <= degree_; ++d) {
        for (int i = 0; i < 3; ++i) pow_table[d][i] = pow_table[d - 1][i] * x[i];
    }
    for (std::size_t j = 0; j < exponents_.size(); ++j) {
        const auto& e = exponents_[j];
        z[j] = pow_table[e[0]][0] * pow_table[e[1]][1] * pow_table[e[2]][2];
    }
    return z;
}

Eigen::VectorXd lift_polynomial(const Eigen::Vector3d& x, int degree) {
    return PolynomialDictionary(degree).lift(x);
}

// ---------------------------------------------------------------------------
// RBF kernels
// ---------------------------------------------------------------------------

std::string rbf_kind_name(RbfKind kind) {
    switch (kind) {
        case RbfKind::kThinPlateSpline: return "thin_plate_spline";
        case RbfKind::kGaussian: return "gaussian";
        case RbfKind::kInverseQuadratic: return "inverse_quadratic";
    }
    throw ConfigError("unknown RBF kind");
}

RbfKind rbf_kind_from_name(const std::string& name) {
    if (name == "thin_plate_spline") return RbfKind::kThinPlateSpline;
    if (name == "gaussian") return RbfKind::kGaussian;
    if (name == "inverse_quadratic") return RbfKind::kInverseQuadratic;
    throw ConfigError("unknown RBF kind '" + name + "'");
}

double rbf_eval(RbfKind kind, const Eigen::Vector3d& x, const Eigen::Vector3d& center,
                double eps) {
    const double r2 = (x - center).squaredNorm();
    switch (kind) {
        case RbfKind::kThinPlateSpline:
            // r^2 log r, continuous limit 0 at r = 0
            return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
        case RbfKind::kGaussian:
            return std::exp(-eps * eps * r2);
        case RbfKind::kInverseQuadratic:
            return 1.0 / (1.0 + eps * eps * r2);
    }
    throw ConfigError("unknown RBF kind");
}

// ---------------------------------------------------------------------------
// K-means
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd nearest_center_sq_dist(const Eigen::MatrixXd& points,
                                       const Eigen::MatrixXd& centers, int n_centers,
                                       std::vector<int>* assignment) {
    const Eigen::Index m = points.cols();
    Eigen::VectorXd best(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double d_best = std::numeric_limits<double>::infinity();
        int c_best = 0;
        for (int c = 0; c < n_centers; ++c) {
            const double d = (points.col(j) - centers.col(c)).squaredNorm();
            if (d < d_best) {
                d_best = d;
                c_best = c;
            }
        }
        best[j] = d_best;
        if (assignment) (*assignment)[j] = c_best;
    }
    return best;
}

}  // namespace

double kmeans_objective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers) {
    return nearest_center_sq_dist(points, centers, static_cast<int>(centers.cols()), nullptr).sum();
}

Eigen::MatrixXd kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iter,
                       double tol) {
    const Eigen::Index m = points.cols();
    if (k < 1) throw ConfigError("kmeans requires k >= 1");
    if (k > m) throw ConfigError("kmeans requires k <= number of points");
    if (!points.allFinite()) throw NumericError("kmeans input contains non-finite points");

    RngStream rng(seed);
    Eigen::MatrixXd centers(points.rows(), k);

    // k-means++ seeding with a hand-rolled weighted draw (deterministic)
    centers.col(0) = points.col(rng.bounded(m));
    Eigen::VectorXd min_d = nearest_center_sq_dist(points, centers, 1, nullptr);
    for (int c = 1; c < k; ++c) {
        const double total = min_d.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Eigen::Index j = 0; j < m; ++j) {
                target -= min_d[j];
                if (target <= 0.0) {
                    pick = j;
                    break;
                }
                pick = j;
            }
        } else {
            pick = rng.bounded(m);
        }
        centers.col(c) = points.col(pick);
        for (Eigen::Index j = 0; j < m; ++j) {
            min_d[j] = std::min(min_d[j], (points.col(j) - centers.col(c)).squaredNorm());
        }
    }

    std::vector<int> assignment(m, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        nearest_center_sq_dist(points, centers, k, &assignment);

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
        std::vector<int> counts(k, 0);
        for (Eigen::Index j = 0; j < m; ++j) {
            sums.col(assignment[j]) += points.col(j);
            ++counts[assignment[j]];
        }

        Eigen::MatrixXd next = centers;
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                next.col(c) = sums.col(c) / counts[c];
            } else {
                // re-seed an empty cluster to the point farthest from its center
                Eigen::Index far = 0;
                double far_d = -1.0;
                for (Eigen::Index j = 0; j < m; ++j) {
                    const double d = (points.col(j) - centers.col(assignment[j])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = j;
                    }
                }
                next.col(c) = points.col(far);
            }
        }

        const double shift = (next - centers).colwise().norm().maxCoeff();
        centers = next;
        if (shift < tol) break;
    }
    return centers;
}

// ---------------------------------------------------------------------------
// RBF dictionary
// ---------------------------------------------------------------------------

RbfDictionary::RbfDictionary(RbfKind kind, Eigen::MatrixXd centers, double eps, Normalization norm)
    : rbf_kind_(kind), centers_(std::move(centers)), eps_(eps), norm_(std::move(norm)) {
    if (centers_.rows() != 3) throw ConfigError("RBF centers must be 3 x (N-3)");
    if (!centers_.allFinite()) throw NumericError("RBF centers must be finite");
    if ((kind == RbfKind::kGaussian || kind == RbfKind::kInverseQuadratic) && !(eps_ > 0.0)) {
        throw ConfigError("RBF shape parameter eps must be positive");
    }
}

Eigen::VectorXd RbfDictionary::lift(const Eigen::Vector3d& x) const {
    Eigen::VectorXd z(lifted_dim());
    z.head<3>() = x;
    const Eigen::Vector3d xn = norm_.apply(x);
    for (Eigen::Index c = 0; c < centers_.cols(); ++c) {
        z[3 + c] = rbf_eval(rbf_kind_, xn, centers_.col(c), eps_);
    }
    return z;
}

std::shared_ptr<RbfDictionary> build_rbf_dictionary(const SnapshotDataset& dataset, int n_lift,
                                                    RbfKind kind, double eps, std::uint64_t seed) {
    if (n_lift < 4) throw ConfigError("RBF dictionary requires N >= 4");
    const int k = n_lift - 3;
    if (k > dataset.columns()) {
        throw ConfigError("RBF dictionary: N - 3 exceeds the number of data columns");
    }
    const Normalization norm = Normalization::fit(dataset.X);
    Eigen::MatrixXd pts(3, dataset.X.cols());
    for (Eigen::Index j = 0; j < dataset.X.cols(); ++j) pts.col(j) = norm.apply(dataset.X.col(j));
    Eigen::MatrixXd centers = kmeans(pts, k, seed);
    return std::make_shared<RbfDictionary>(kind, std::move(centers), eps, norm);
}

}  // namespace koop
