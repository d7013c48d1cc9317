#pragma once
// Sparse kernels for the implicit flow solver: CSR storage with a fixed
// pattern, ILU(0) smoothing with a precomputed elimination schedule, banded
// LU with partial pivoting for the coarsest-grid direct solve, and a
// preconditioned BiCGStab. Everything is single-threaded and allocation-free
// in the hot paths so results are bitwise reproducible.

#include <cstddef>
#include <span>
#include <vector>

namespace henry::lin {

struct Csr {
  int n = 0;
  std::vector<int> ptr;   // size n+1
  std::vector<int> col;   // sorted within each row
  std::vector<double> val;
  std::vector<int> diag;  // slot of the diagonal entry per row

  // Build a fixed pattern from per-row sorted column lists.
  void build(int n_rows, const std::vector<std::vector<int>>& cols);
  void zero_values() { std::fill(val.begin(), val.end(), 0.0); }

  int slot(int row, int column) const;  // -1 if not in pattern
  void add(int row, int column, double v);
  void set_row_identity(int row);

  void matvec(std::span<const double> x, std::span<double> y) const;
  // r = b - A x
  void residual(std::span<const double> b, std::span<const double> x,
                std::span<double> r) const;
};

// ILU(0): incomplete factorization on the unmodified CSR pattern. The
// elimination schedule (which slots update which) depends only on the pattern
// and is precomputed once; factor() then re-runs it on fresh values.
class Ilu0 {
 public:
  void build_schedule(const Csr& a);
  void factor(const Csr& a);
  // z = (L U)^{-1} r
  void solve(std::span<const double> r, std::span<double> z) const;

 private:
  struct Op {
    int target;  // slot receiving the update, or the slot to divide
    int left;    // divided lower slot (-1 marks a divide op; left = diag slot)
    int right;   // upper slot of the pivot row
  };
  const Csr* a_ = nullptr;
  std::vector<Op> ops_;
  std::vector<double> lu_;
};

// Banded LU with partial pivoting (LAPACK band layout). Used as the direct
// solver on the coarsest grid, where the interleaved 5-point pattern has a
// fixed small bandwidth.
class BandLu {
 public:
  void factor(const Csr& a);
  void solve(std::span<double> b) const;  // in place

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  std::vector<double> ab_;
  std::vector<int> piv_;
};

struct Preconditioner {
  virtual void apply(std::span<const double> r, std::span<double> z) = 0;
  virtual ~Preconditioner() = default;
};

struct IdentityPrecond final : Preconditioner {
  void apply(std::span<const double> r, std::span<double> z) override {
    std::copy(r.begin(), r.end(), z.begin());
  }
};

struct SolveStats {
  bool converged = false;
  int iters = 0;
  double rel_residual = 0.0;
};

// Right-preconditioned BiCGStab, zero initial guess, convergence on
// ||b - A x|| <= rel_tol * ||b||. Scratch buffers live in the solver object.
class Bicgstab {
 public:
  SolveStats solve(const Csr& a, std::span<const double> b,
                   std::span<double> x, Preconditioner& m, double rel_tol,
                   int max_iter);

 private:
  std::vector<double> r_, rhat_, p_, v_, s_, t_, y_, z_;
};

}  // namespace henry::lin
