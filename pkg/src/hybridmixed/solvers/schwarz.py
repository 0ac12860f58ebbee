"""Overlapping Schwarz preconditioners on index blocks of an assembled
symmetric matrix, optionally combined with a coarse correction."""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


def _block_inverse(Aii, rtol=1e-10):
    """Dense inverse of a local block; a rank-revealing pseudo-inverse when
    the block is singular."""
    w, V = np.linalg.eigh(Aii)
    cut = rtol * max(abs(w).max(), 1e-300)
    if w.min() > cut:
        return (V / w) @ V.T, False
    keep = w > cut
    return (V[:, keep] / w[keep]) @ V[:, keep].T, True


class SchwarzSmoother:
    """Block (subspace) correction for an SPD/SPSD sparse matrix ``A``.

    ``mode='additive'`` gives ``sum_i R_i^T A_i^{-1} R_i``;
    ``mode='sym-multiplicative'`` is a forward block Gauss-Seidel sweep
    followed by a backward one (ascending, then descending block order).
    """

    def __init__(self, A, blocks, mode="sym-multiplicative"):
        if mode not in ("additive", "sym-multiplicative"):
            raise ValueError(f"unknown Schwarz mode {mode!r}")
        self.A = sp.csr_matrix(A)
        self.n = self.A.shape[0]
        self.mode = mode
        self.blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
        covered = np.zeros(self.n, dtype=bool)
        for b in self.blocks:
            covered[b] = True
        if not covered.all():
            raise ValueError("Schwarz blocks do not cover every DOF")
        Acsc = self.A.tocsc()
        self.inv = []
        self.nbr = []
        self.cols = []
        n_singular = 0
        for b in self.blocks:
            Ab = Acsc[:, b]
            Aii = Ab[b, :].toarray()
            inv, singular = _block_inverse(Aii)
            n_singular += singular
            self.inv.append(inv)
            if mode != "additive":
                rows = np.unique(Ab.indices)
                self.nbr.append(rows)
                self.cols.append(Ab[rows, :].toarray())
        if n_singular:
            log.info(
                "%d singular Schwarz blocks handled by pseudo-inverse "
                "(blocks interior to a singular-vertex kernel)", n_singular
            )

    def additive(self, r):
        x = np.zeros(self.n)
        for b, inv in zip(self.blocks, self.inv):
            x[b] += inv @ r[b]
        return x

    def sweep(self, x, res, order):
        """In-place block Gauss-Seidel sweep on ``x`` keeping ``res = r - A x``."""
        for i in order:
            b = self.blocks[i]
            d = self.inv[i] @ res[b]
            x[b] += d
            res[self.nbr[i]] -= self.cols[i] @ d

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.mode == "additive":
            return self.additive(r)
        x = np.zeros(self.n)
        res = r.copy()
        nb = len(self.blocks)
        self.sweep(x, res, range(nb))
        self.sweep(x, res, range(nb - 1, -1, -1))
        return x


class TwoLevelSchwarz:
    """Fine-level Schwarz blocks plus a coarse correction
    ``P B_H P^T`` where ``P`` maps coarse coefficients to fine ones and
    ``coarse_solve`` applies ``B_H`` (exact inverse or a multigrid cycle).

    Additive: ``P B_H P^T r + sum_i R_i^T A_i^{-1} R_i r``.
    Symmetrized multiplicative: forward block sweep, coarse correction,
    backward block sweep.
    """

    def __init__(self, smoother, P, coarse_solve, mode=None):
        self.smoother = smoother
        self.P = sp.csr_matrix(P)
        self.PT = self.P.T.tocsr()
        self.coarse_solve = coarse_solve
        self.mode = mode or smoother.mode
        if self.mode not in ("additive", "sym-multiplicative"):
            raise ValueError(f"unknown Schwarz mode {self.mode!r}")
        if self.mode != "additive" and smoother.mode == "additive":
            raise ValueError("multiplicative two-level needs a multiplicative smoother")

    def coarse(self, r):
        return self.P @ self.coarse_solve(self.PT @ r)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.mode == "additive":
            return self.coarse(r) + self.smoother.additive(r)
        sm = self.smoother
        nb = len(sm.blocks)
        x = np.zeros(sm.n)
        res = r.copy()
        sm.sweep(x, res, range(nb))
        c = self.coarse(res)
        x += c
        res -= sm.A @ c
        sm.sweep(x, res, range(nb - 1, -1, -1))
        return x
