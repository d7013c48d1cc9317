#include "henry/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace henry::lin {

void Csr::build(int n_rows, const std::vector<std::vector<int>>& cols) {
  n = n_rows;
  ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) ptr[i + 1] = ptr[i] + static_cast<int>(cols[i].size());
  col.resize(ptr[n]);
  val.assign(ptr[n], 0.0);
  diag.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    int k = ptr[i];
    for (int c : cols[i]) {
      col[k] = c;
      if (c == i) diag[i] = k;
      ++k;
    }
    if (diag[i] < 0) throw std::invalid_argument("Csr::build: missing diagonal");
  }
}

int Csr::slot(int row, int column) const {
  const int lo = ptr[row], hi = ptr[row + 1];
  for (int k = lo; k < hi; ++k)
    if (col[k] == column) return k;
  return -1;
}

void Csr::add(int row, int column, double v) {
  const int k = slot(row, column);
  if (k < 0) throw std::logic_error("Csr::add: entry outside pattern");
  val[k] += v;
}

void Csr::set_row_identity(int row) {
  for (int k = ptr[row]; k < ptr[row + 1]; ++k) val[k] = 0.0;
  val[diag[row]] = 1.0;
}

void Csr::matvec(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

void Csr::residual(std::span<const double> b, std::span<const double> x,
                   std::span<double> r) const {
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) s -= val[k] * x[col[k]];
    r[i] = s;
  }
}

void Ilu0::build_schedule(const Csr& a) {
  a_ = &a;
  ops_.clear();
  // IKJ elimination restricted to the pattern: for each row i and each lower
  // slot (i,k), divide by the pivot then update the row-i slots hit by the
  // upper part of row k.
  for (int i = 0; i < a.n; ++i) {
    for (int ks = a.ptr[i]; ks < a.ptr[i + 1]; ++ks) {
      const int k = a.col[ks];
      if (k >= i) break;
      ops_.push_back({ks, -1, a.diag[k]});
      for (int js = a.diag[k] + 1; js < a.ptr[k + 1]; ++js) {
        const int t = a.slot(i, a.col[js]);
        if (t >= 0) ops_.push_back({t, ks, js});
      }
    }
  }
  lu_.resize(a.val.size());
}

void Ilu0::factor(const Csr& a) {
  if (a_ != &a || lu_.size() != a.val.size())
    throw std::logic_error("Ilu0::factor: schedule built for another matrix");
  std::copy(a.val.begin(), a.val.end(), lu_.begin());
  for (const Op& op : ops_) {
    if (op.left < 0) {
      double piv = lu_[op.right];
      if (std::abs(piv) < 1e-300) piv = piv < 0 ? -1e-30 : 1e-30;
      lu_[op.target] /= piv;
    } else {
      lu_[op.target] -= lu_[op.left] * lu_[op.right];
    }
  }
}

void Ilu0::solve(std::span<const double> r, std::span<double> z) const {
  const Csr& a = *a_;
  // forward: L has unit diagonal
  for (int i = 0; i < a.n; ++i) {
    double s = r[i];
    for (int k = a.ptr[i]; k < a.diag[i]; ++k) s -= lu_[k] * z[a.col[k]];
    z[i] = s;
  }
  // backward
  for (int i = a.n - 1; i >= 0; --i) {
    double s = z[i];
    for (int k = a.diag[i] + 1; k < a.ptr[i + 1]; ++k) s -= lu_[k] * z[a.col[k]];
    z[i] = s / lu_[a.diag[i]];
  }
}

void BandLu::factor(const Csr& a) {
  n_ = a.n;
  int kl = 0, ku = 0;
  for (int i = 0; i < a.n; ++i)
    for (int k = a.ptr[i]; k < a.ptr[i + 1]; ++k) {
      kl = std::max(kl, i - a.col[k]);
      ku = std::max(ku, a.col[k] - i);
    }
  kl_ = kl;
  ku_ = ku;
  ldab_ = 2 * kl_ + ku_ + 1;
  ab_.assign(static_cast<size_t>(ldab_) * n_, 0.0);
  piv_.assign(n_, 0);
  // LAPACK band layout: entry (i,j) sits at ab[kl+ku+i-j, j].
  auto at = [&](int i, int j) -> double& {
    return ab_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)];
  };
  for (int i = 0; i < a.n; ++i)
    for (int k = a.ptr[i]; k < a.ptr[i + 1]; ++k) at(i, a.col[k]) = a.val[k];

  for (int j = 0; j < n_; ++j) {
    const int iend = std::min(j + kl_, n_ - 1);
    int p = j;
    double pmax = std::abs(at(j, j));
    for (int i = j + 1; i <= iend; ++i)
      if (std::abs(at(i, j)) > pmax) {
        pmax = std::abs(at(i, j));
        p = i;
      }
    piv_[j] = p;
    if (pmax == 0.0) throw std::runtime_error("BandLu: singular matrix");
    if (p != j) {
      const int jend = std::min(j + kl_ + ku_, n_ - 1);
      for (int c = j; c <= jend; ++c) std::swap(at(j, c), at(p, c));
    }
    const double pivot = at(j, j);
    for (int i = j + 1; i <= iend; ++i) {
      const double m = at(i, j) / pivot;
      at(i, j) = m;
      const int jend = std::min(j + kl_ + ku_, n_ - 1);
      for (int c = j + 1; c <= jend; ++c) at(i, c) -= m * at(j, c);
    }
  }
}

void BandLu::solve(std::span<double> b) const {
  auto at = [&](int i, int j) -> double {
    return ab_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)];
  };
  for (int j = 0; j < n_; ++j) {
    if (piv_[j] != j) std::swap(b[j], b[piv_[j]]);
    const int iend = std::min(j + kl_, n_ - 1);
    for (int i = j + 1; i <= iend; ++i) b[i] -= at(i, j) * b[j];
  }
  for (int j = n_ - 1; j >= 0; --j) {
    const int jend = std::min(j + kl_ + ku_, n_ - 1);
    double s = b[j];
    for (int c = j + 1; c <= jend; ++c) s -= at(j, c) * b[c];
    b[j] = s / at(j, j);
  }
}

SolveStats Bicgstab::solve(const Csr& a, std::span<const double> b,
                           std::span<double> x, Preconditioner& m,
                           double rel_tol, int max_iter) {
  const int n = a.n;
  for (auto* v : {&r_, &rhat_, &p_, &v_, &s_, &t_, &y_, &z_}) v->assign(n, 0.0);
  std::fill(x.begin(), x.end(), 0.0);

  double bnorm = 0.0;
  for (int i = 0; i < n; ++i) bnorm += b[i] * b[i];
  bnorm = std::sqrt(bnorm);
  SolveStats st;
  if (bnorm == 0.0) {
    st.converged = true;
    return st;
  }

  std::copy(b.begin(), b.end(), r_.begin());  // x0 = 0
  std::copy(r_.begin(), r_.end(), rhat_.begin());
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  double rnorm = bnorm;

  for (int it = 1; it <= max_iter; ++it) {
    double rho1 = 0.0;
    for (int i = 0; i < n; ++i) rho1 += rhat_[i] * r_[i];
    if (std::abs(rho1) < 1e-300) {  // restart on breakdown
      std::copy(r_.begin(), r_.end(), rhat_.begin());
      rho1 = rnorm * rnorm;
      std::fill(p_.begin(), p_.end(), 0.0);
      omega = alpha = 1.0;
      rho = rho1;
      const double beta0 = 0.0;
      (void)beta0;
    }
    const double beta = (rho1 / rho) * (alpha / omega);
    rho = rho1;
    for (int i = 0; i < n; ++i) p_[i] = r_[i] + beta * (p_[i] - omega * v_[i]);
    m.apply(p_, y_);
    a.matvec(y_, v_);
    double rhv = 0.0;
    for (int i = 0; i < n; ++i) rhv += rhat_[i] * v_[i];
    if (std::abs(rhv) < 1e-300) {
      st.iters = it;
      st.rel_residual = rnorm / bnorm;
      return st;  // unrecoverable breakdown
    }
    alpha = rho / rhv;
    for (int i = 0; i < n; ++i) s_[i] = r_[i] - alpha * v_[i];
    double snorm = 0.0;
    for (int i = 0; i < n; ++i) snorm += s_[i] * s_[i];
    snorm = std::sqrt(snorm);
    if (snorm <= rel_tol * bnorm) {
      for (int i = 0; i < n; ++i) x[i] += alpha * y_[i];
      st.converged = true;
      st.iters = it;
      st.rel_residual = snorm / bnorm;
      return st;
    }
    m.apply(s_, z_);
    a.matvec(z_, t_);
    double ts = 0.0, tt = 0.0;
    for (int i = 0; i < n; ++i) {
      ts += t_[i] * s_[i];
      tt += t_[i] * t_[i];
    }
    if (tt == 0.0) {
      st.iters = it;
      st.rel_residual = snorm / bnorm;
      return st;
    }
    omega = ts / tt;
    for (int i = 0; i < n; ++i) x[i] += alpha * y_[i] + omega * z_[i];
    for (int i = 0; i < n; ++i) r_[i] = s_[i] - omega * t_[i];
    rnorm = 0.0;
    for (int i = 0; i < n; ++i) rnorm += r_[i] * r_[i];
    rnorm = std::sqrt(rnorm);
    st.iters = it;
    if (rnorm <= rel_tol * bnorm) {
      st.converged = true;
      st.rel_residual = rnorm / bnorm;
      return st;
    }
    if (std::abs(omega) < 1e-300) return st;
  }
  st.rel_residual = rnorm / bnorm;
  return st;
}

}  // namespace henry::lin
