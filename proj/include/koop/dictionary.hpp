#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>
#include <vector>

#include "koop/datagen.hpp"
#include "koop/util.hpp"

namespace koop {

/// Per-channel affine scaling (zero mean, unit variance on training data)
/// applied before RBF distances and MLP inputs. Raw states keep the
/// pass-through coordinates.
struct Normalization {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d scale = Eigen::Vector3d::Ones();  // standard deviations

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
        return (x - mean).cwiseQuotient(scale);
    }
    static Normalization fit(const Eigen::MatrixXd& states);  // states: 3 x M
};

// ---------------------------------------------------------------------------
// Lifting interface
// ---------------------------------------------------------------------------

/// A lifting map R^3 -> R^N whose first 3 coordinates are the raw states.
class Dictionary {
public:
    virtual ~Dictionary() = default;

    virtual int lifted_dim() const = 0;
    virtual Eigen::VectorXd lift(const Eigen::Vector3d& x) const = 0;
    virtual std::string kind() const = 0;

    /// Columnwise lift; defined as the per-column loop so batch and scalar
    /// evaluation agree exactly.
    Eigen::MatrixXd lift_batch(const Eigen::MatrixXd& states) const {
        Eigen::MatrixXd z(lifted_dim(), states.cols());
        for (Eigen::Index k = 0; k < states.cols(); ++k) z.col(k) = lift(states.col(k));
        return z;
    }
};

using DictionaryPtr = std::shared_ptr<const Dictionary>;

// ---------------------------------------------------------------------------
// Polynomial dictionary
// ---------------------------------------------------------------------------

/// Lifted dimension of the full monomial library up to total degree m,
/// N(m) = N(m-1) + (m+1)(m+2)/2 with N(0) = 0.
int polynomial_dim(int m);

/// All monomials x1^a x2^b x3^c with 1 <= a+b+c <= m in graded lexicographic
/// order; the three degree-1 monomials come first so the state is passed
/// through.
class PolynomialDictionary final : public Dictionary {
public:
    explicit PolynomialDictionary(int degree);

    int lifted_dim() const override { return static_cast<int>(exponents_.size()); }
    Eigen::VectorXd lift(const Eigen::Vector3d& x) const override;
    std::string kind() const override { return "polynomial"; }

    int degree() const { return degree_; }
    const std::vector<std::array<int, 3>>& exponents() const { return exponents_; }

private:
    int degree_;
    std::vector<std::array<int, 3>> exponents_;
};

Eigen::VectorXd lift_polynomial(const Eigen::Vector3d& x, int degree);

// ---------------------------------------------------------------------------
// RBF dictionary
// ---------------------------------------------------------------------------

enum class RbfKind { kThinPlateSpline, kGaussian, kInverseQuadratic };

std::string rbf_kind_name(RbfKind kind);
RbfKind rbf_kind_from_name(const std::string& name);

/// Kernel value at distance r = |x - x_c|: thin plate spline r^2 log r (0 at
/// r = 0), gaussian exp(-eps^2 r^2), inverse quadratic 1/(1 + eps^2 r^2).
double rbf_eval(RbfKind kind, const Eigen::Vector3d& x, const Eigen::Vector3d& center, double eps);

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded to
/// the point farthest from its assigned center. points: 3 x M.
Eigen::MatrixXd kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                       int max_iter = 100, double tol = 1e-6);

/// Within-cluster sum of squares for the given centers (used by tests).
double kmeans_objective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers);

class RbfDictionary final : public Dictionary {
public:
    RbfDictionary(RbfKind kind, Eigen::MatrixXd centers, double eps, Normalization norm);

    int lifted_dim() const override { return 3 + static_cast<int>(centers_.cols()); }
    Eigen::VectorXd lift(const Eigen::Vector3d& x) const override;
    std::string kind() const override { return "rbf_" + rbf_kind_name(rbf_kind_); }

    RbfKind rbf_kind() const { return rbf_kind_; }
    double eps() const { return eps_; }
    const Eigen::MatrixXd& centers() const { return centers_; }  // normalized space, 3 x (N-3)
    const Normalization& normalization() const { return norm_; }

private:
    RbfKind rbf_kind_;
    Eigen::MatrixXd centers_;
    double eps_;
    Normalization norm_;
};

/// K-means with k = N-3 clusters on the normalized training states of X.
std::shared_ptr<RbfDictionary> build_rbf_dictionary(const SnapshotDataset& dataset, int n_lift,
                                                    RbfKind kind, double eps, std::uint64_t seed);

}  // namespace koop
