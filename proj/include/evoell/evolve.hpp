#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evoell/lattice.hpp"
#include "evoell/rng.hpp"
#include "evoell/symcore.hpp"

namespace evoell {

// T = 16 n^-2 log n, the time horizon the volume analysis is run at.
double paper_time_horizon(int n);

// a0 = (1 - 1/n)^-2.
double paper_a0(int n);

struct EvolveConfig {
    enum class A0Policy { Paper, Auto, Fixed };

    double dt_max = 0.0;  // 0 resolves to paper_time_horizon(n) / 2000
    double dt_min = 0.0;  // 0 resolves to dt_max * 1e-6
    double eps_contact = 1e-9;
    double eta = 0.5;  // watch-list inflation margin
    int renorm_period = 50;
    double alpha = 0.0;    // drift exponent; 0 = plain projected increment
    double max_time = 0.0;  // 0 resolves to paper_time_horizon(n)
    A0Policy a0_policy = A0Policy::Paper;
    double a0_value = 0.0;       // used with A0Policy::Fixed
    double auto_margin = 0.01;   // A0Policy::Auto: a0 = (1+margin)/lambda1^2
    std::int64_t watch_cap = 1'000'000;

    // Copy with the zero-valued defaults filled in for dimension n.
    EvolveConfig resolved(int n) const;
};

// Lattice points currently pinned to the boundary, one representative
// per antipodal pair {x, -x}; insertion order preserved.
class ContactSet {
public:
    bool contains(const Eigen::VectorXi& coords) const;
    void add(LatticePoint p);  // canonicalizes the sign
    const std::vector<LatticePoint>& representatives() const { return reps_; }
    int size() const { return static_cast<int>(reps_.size()); }
    bool empty() const { return reps_.empty(); }

    static Eigen::VectorXi canonical(Eigen::VectorXi coords);

private:
    std::vector<LatticePoint> reps_;
    std::set<std::vector<int>> keys_;
};

// Orthogonal projection onto F_A = {B : B x . x = 0 for all contacts x},
// held as an orthonormal frame for the complement span{x (x) x} in the
// isometric coefficient coordinates.
class ConstraintProjector {
public:
    ConstraintProjector(int n, Eigen::MatrixXd frame);

    static ConstraintProjector identity(int n);

    int rank() const { return static_cast<int>(frame_.cols()); }
    int dim_f() const { return ambient_dim_ - rank(); }

    SymMatrix apply(const SymMatrix& x) const;

    // Dense matrix of the projector in iso coordinates (for oracles/tests).
    Eigen::MatrixXd matrix() const;

private:
    int n_;
    int ambient_dim_;
    Eigen::MatrixXd frame_;  // ambient_dim x rank, orthonormal columns
};

// Modified Gram-Schmidt over {x (x) x : x contact} in the trace inner
// product; rank-deficient contact sets are legal.
ConstraintProjector build_projector(const ContactSet& contacts, int n);

struct ProcessState {
    LatticeBasis lattice;
    EvolveConfig cfg;  // resolved snapshot
    double a0 = 0.0;
    double t = 0.0;
    SymMatrix a;
    ContactSet contacts;
    ConstraintProjector projector;
    std::vector<LatticePoint> watch;  // antipodal representatives, quad < 1 + eta
    SymMatrix a_watch_baseline;
    double min_eig_baseline = 0.0;
    RngStream rng;
};

ProcessState init_state(const LatticeBasis& lattice, const EvolveConfig& cfg,
                        RngStream rng);

enum class StepOutcome { Advanced, Hit, Frozen };

// One accepted step of the discretized constrained motion; dt_cap limits
// the attempted step size (used to land exactly on the time horizon).
StepOutcome step(ProcessState& state,
                 double dt_cap = std::numeric_limits<double>::infinity());

// Minimal-Frobenius-norm correction restoring quad_form(A, x) = 1 on all
// contacts; throws if the needed correction exceeds 10 * eps * |contacts|.
void renormalize_contacts(ProcessState& state);

struct TrajectoryRecord {
    double t = 0.0;
    double logdet = 0.0;
    int contacts = 0;  // counting both antipodes
    int dim_f = 0;
    double opdev = 0.0;  // ||A - a0 Id||_op
    std::string event;   // advanced | hit | frozen | timeout
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;
    std::optional<ProcessState> final_state;
    bool frozen = false;
    int n = 0;
    double a0 = 0.0;
};

Trajectory run(const LatticeBasis& lattice, const EvolveConfig& cfg, RngStream rng);

}  // namespace evoell
