"""Primal-dual interior-point method for small dense SDPs.

Solves the real standard form produced by
:meth:`~epreserve.sdp.model.ConicProgram.compile`:

    primal:  minimise c^T x     s.t.  G x + s = h,  A x = b,  s PSD
    dual:    maximise -h^T z - b^T y   s.t.  G^T z + A^T y + c = 0,  z PSD

The iteration follows the central path of the homogeneous self-dual
embedding with Nesterov-Todd scaling and Mehrotra predictor-corrector
steps, so infeasible starting points are fine and infeasible or unbounded
programs yield certificates.  After every step the iterate is projected
onto the affine constraints.  A projected point that lies in the cones
certifies a bound on the optimal value; the best bounds found so far are
recorded, so the reported gap is a certified, non-increasing quantity.  Per PSD block the scaling
matrix ``r`` satisfies ``r^T z r = r^{-1} s r^{-T} = diag(lambda)``.  Each
Newton step reduces to a dense positive definite system in ``x`` (plus a
Schur complement for the equality constraints).

All linear algebra is dense and the iteration order is fixed, so repeated
solves of the same program give bit-identical results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .model import CompiledProgram

STEP_FRACTION = 0.99
OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"


@dataclass
class IterationRecord:
    """Progress of one iteration.

    ``primal_objective`` and ``dual_objective`` belong to the current
    (possibly infeasible) iterate.  ``primal_bound`` and ``dual_bound`` are
    the best objective values of feasible points seen so far (the iterate
    projected onto the affine constraints, kept when it lies in the cones),
    or ``+inf``/``-inf`` while none is known.  When the primal feasible set
    has no interior the primal bound can stay infinite.  ``gap`` is their difference, so
    weak duality reads ``dual_bound <= primal_bound``.
    """

    iteration: int
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    step: float
    primal_bound: float = np.inf
    dual_bound: float = -np.inf


@dataclass
class SolverResult:
    status: str
    x: np.ndarray
    s: list[np.ndarray]
    z: list[np.ndarray]
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    history: list[IterationRecord] = field(default_factory=list)
    solve_time: float = 0.0


class _Blocks:
    """Vectorised helpers over the PSD blocks of a compiled program."""

    def __init__(self, prog: CompiledProgram):
        self.G = [bl.G for bl in prog.blocks]
        self.Gflat = [bl.G.reshape(bl.G.shape[0], -1) for bl in prog.blocks]
        self.h = [bl.h for bl in prog.blocks]
        self.sizes = [bl.size for bl in prog.blocks]
        self.degree = sum(self.sizes)
        self.packers = [_Packer(bl.size, bl.size == 2 * bl.complex_dim) for bl in prog.blocks]

    def Gx(self, x):
        return [np.tensordot(x, g, axes=1) for g in self.G]

    def GT(self, zs):
        return sum(gf @ z.reshape(-1) for gf, z in zip(self.Gflat, zs))


def _dot(a, b) -> float:
    return float(sum(np.vdot(x, y) for x, y in zip(a, b)))


def _norm(blocks) -> float:
    return float(np.sqrt(sum(np.sum(x * x) for x in blocks)))


def _sym(m):
    return 0.5 * (m + m.T)


def _cholesky(m):
    """Lower Cholesky factor, with an eigenvalue-clipped fallback."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        w = np.clip(w, 1e-300, None)
        _, r = np.linalg.qr((v * np.sqrt(w)).conj().T)
        l = r.conj().T
        d = np.diag(l)
        return l * (np.abs(d) / np.where(d == 0, 1.0, d))[None, :]


def _embed(m):
    re, im = np.real(m), np.imag(m)
    return np.block([[re, -im], [im, re]])


def _nt_scaling(s, z, embedded: bool = False):
    """Return ``(r, rinv, lam)`` for one block.

    For an embedded Hermitian block the scaling is computed in complex
    arithmetic and embedded again, so ``r`` and ``rinv`` keep the block
    structure exactly.
    """
    if embedded:
        m = s.shape[0] // 2
        s = s[:m, :m] + 1j * s[m:, :m]
        z = z[:m, :m] + 1j * z[m:, :m]
    ls = _cholesky(s)
    lz = _cholesky(z)
    u, lam, vh = np.linalg.svd(lz.conj().T @ ls)
    lam = np.clip(lam, 1e-300, None)
    r = ls @ vh.conj().T / np.sqrt(lam)
    rinv = (u / np.sqrt(lam)).conj().T @ lz.conj().T
    if embedded:
        return _embed(r), _embed(rinv), np.concatenate([lam, lam])
    return r, rinv, lam


def _max_step(lam, d):
    """Largest ``alpha`` with ``diag(lam) + alpha d`` PSD (inf if unbounded)."""
    isq = 1.0 / np.sqrt(lam)
    m = _sym(d * isq[:, None] * isq[None, :])
    mu = np.linalg.eigvalsh(m)[0]
    return np.inf if mu >= 0 else -1.0 / mu


class _Packer:
    """Isometric coordinates of the symmetric matrices of one block.

    A real symmetric block uses its upper triangle with off-diagonal
    entries scaled by ``sqrt(2)``.  A block holding the embedding
    ``[[A, -B], [B, A]]`` of a Hermitian ``A + iB`` needs only the
    coordinates of ``A`` and ``B``, a quarter of the entries.  In both
    cases ``pack(S) . pack(T)`` equals ``tr(S T)``.
    """

    def __init__(self, size: int, embedded: bool):
        self.size = size
        self.embedded = embedded
        m = size // 2 if embedded else size
        self.m = m
        self.iu = np.triu_indices(m, 1)
        self.dim = m * m if embedded else m * (m + 1) // 2

    def pack(self, s: np.ndarray) -> np.ndarray:
        """Pack one matrix (``s`` of shape ``(size, size)``) or a stack of them."""
        m, (i, j) = self.m, self.iu
        r2 = np.sqrt(2.0)
        if not self.embedded:
            diag = np.diagonal(s, axis1=-2, axis2=-1)
            return np.concatenate([diag, r2 * s[..., i, j]], axis=-1)
        a = s[..., :m, :m]
        b = s[..., m:, :m]
        diag = np.diagonal(a, axis1=-2, axis2=-1)
        return r2 * np.concatenate([diag, r2 * a[..., i, j], r2 * b[..., i, j]], axis=-1)

    def unpack(self, v: np.ndarray) -> np.ndarray:
        m, (i, j) = self.m, self.iu
        k = len(i)
        r2 = np.sqrt(2.0)
        if not self.embedded:
            out = np.zeros((m, m))
            out[i, j] = out[j, i] = v[m:] / r2
            out[np.diag_indices(m)] = v[:m]
            return out
        a = np.zeros((m, m))
        b = np.zeros((m, m))
        a[np.diag_indices(m)] = v[:m] / r2
        a[i, j] = a[j, i] = v[m:m + k] / 2.0
        b[i, j] = v[m + k:] / 2.0
        b[j, i] = -b[i, j]
        return np.block([[a, -b], [b, a]])


class _EqualityElimination:
    """Particular solutions and null space of the equality constraints."""

    def __init__(self, A: np.ndarray):
        n = A.shape[1]
        if A.shape[0] == 0:
            self.N = np.eye(n)
            self.pinv = np.zeros((n, 0))
            self.pinv_t = np.zeros((0, n))
            return
        u, sv, vt = np.linalg.svd(A)
        rank = int(np.sum(sv > 1e-12 * sv[0]))
        ur, sr, vr = u[:, :rank], sv[:rank], vt[:rank].T
        self.N = vt[rank:].T
        self.pinv = vr / sr @ ur.T  # A^+
        self.pinv_t = ur / sr @ vr.T  # (A^T)^+


class _Kkt:
    """Factorised Newton system for a fixed scaling.

    Solves, for the scaled variable ``dzs = W dz``,

        A^T dy + Gs^T dzs = bx,   A dx = by,   Gs dx - dzs = v,

    where ``Gs`` stacks ``rinv G_j rinv^T`` and ``v = W^{-T} bz``.  With
    ``Gs N = Q R`` (``N`` spans the null space of ``A``) the solution is

        R w = R^{-T} N^T bx + Q^T v',   dzs = Q R^{-T} N^T bx - (I - Q Q^T) v',

    with ``v' = v - Gs dx_p`` for a particular solution ``A dx_p = by``.
    The dual equation then holds to working precision regardless of the
    conditioning of ``R``.

    The scaled matrices keep the structure of their block, so ``Gs`` and
    ``dzs`` are stored in packed coordinates (see :class:`_Packer`).
    """

    def __init__(self, blocks: _Blocks, elim: _EqualityElimination, rinvs: list[np.ndarray]):
        self.elim = elim
        self.packers = blocks.packers
        self.rinvs = rinvs
        cols = []
        for g, pk, ri in zip(blocks.G, self.packers, rinvs):
            cols.append(pk.pack(ri @ g @ ri.T))
        self.gs = np.concatenate(cols, axis=1).T
        self.q, self.r = np.linalg.qr(self.gs @ elim.N)
        diag = np.abs(np.diag(self.r))
        self.ok = bool(diag.size == 0 or diag.min() > 1e-14 * diag.max())

    def _rt_solve(self, v):
        if self.ok:
            return sla.solve_triangular(self.r, v, trans="T")
        return sla.lstsq(self.r.T, v, lapack_driver="gelsd")[0]

    def _r_solve(self, v):
        if self.ok:
            return sla.solve_triangular(self.r, v)
        return sla.lstsq(self.r, v, lapack_driver="gelsd")[0]

    def scale(self, mats):
        """``W^{-T}`` applied blockwise, in packed coordinates."""
        return np.concatenate([pk.pack(ri @ m @ ri.T) for pk, ri, m in zip(self.packers, self.rinvs, mats)])

    def unflatten(self, vec):
        out, k = [], 0
        for pk in self.packers:
            out.append(pk.unpack(vec[k:k + pk.dim]))
            k += pk.dim
        return out

    def solve(self, bx, by, bz):
        """Return ``(dx, dy, dzs)`` with ``dzs`` the scaled dual step per block."""
        e = self.elim
        dx_p = e.pinv @ by
        v = self.scale(bz) - self.gs @ dx_p
        t = self._rt_solve(e.N.T @ bx)
        w = self._r_solve(t + self.q.T @ v)
        dx = dx_p + e.N @ w
        qtv = self.q.T @ v
        dzs = self.q @ t - (v - self.q @ qtv)
        dy = e.pinv_t @ (bx - self.gs.T @ dzs)
        return dx, dy, [_sym(m) for m in self.unflatten(dzs)]


def _initial_point(prog: CompiledProgram, blocks: _Blocks):
    """Least-squares start shifted into the interior of the cones.

    ``x`` minimises ``||G x - h||`` subject to ``A x = b`` and ``z`` is the
    least-norm solution of ``G^T z + A^T y + c = 0``.
    """
    eyes = [np.eye(m) for m in blocks.sizes]
    kkt = _Kkt(blocks, _EqualityElimination(prog.A), eyes)
    zeros_x = np.zeros(prog.n)
    x, _, _ = kkt.solve(zeros_x, prog.b, blocks.h)
    s = [h - gx for h, gx in zip(blocks.h, blocks.Gx(x))]
    _, y, z = kkt.solve(-prog.c, np.zeros(prog.A.shape[0]), [np.zeros_like(h) for h in blocks.h])

    def shift(vs):
        worst = max((-np.linalg.eigvalsh(v)[0] for v in vs), default=-1.0)
        if worst < 0:
            return [v.copy() for v in vs]
        return [v + (1.0 + worst) * np.eye(len(v)) for v in vs]

    return x, shift(s), shift(z), y


def _max_pair_step(lams, dss, dzs) -> float:
    a = np.inf
    for l, d1, d2 in zip(lams, dss, dzs):
        a = min(a, _max_step(l, d1), _max_step(l, d2))
    return a


class _Projector:
    """Maps an iterate to the nearest point satisfying the affine constraints.

    The primal part is corrected with ``A^+`` and the dual part with the
    least-squares solution of ``G^T dz + A^T dy = r``.
    """

    def __init__(self, prog: CompiledProgram, blocks: _Blocks, elim: _EqualityElimination):
        self.prog = prog
        self.blocks = blocks
        self.elim = elim
        self.kkt = _Kkt(blocks, elim, [np.eye(m) for m in blocks.sizes])

    def primal(self, x):
        x = x + self.elim.pinv @ (self.prog.b - self.prog.A @ x)
        s = [_sym(h - g) for h, g in zip(self.blocks.h, self.blocks.Gx(x))]
        return x, s

    def dual(self, y, z):
        r = -(self.prog.A.T @ y + self.blocks.GT(z) + self.prog.c)
        if self.prog.n == 0:
            return y, z
        zeros = [np.zeros_like(h) for h in self.blocks.h]
        _, dy, dz = self.kkt.solve(r, np.zeros(self.prog.A.shape[0]), zeros)
        return y + dy, [_sym(zi + d) for zi, d in zip(z, dz)]


def _min_eig(ms) -> float:
    return min((float(np.linalg.eigvalsh(m)[0]) for m in ms), default=0.0)


def solve_compiled(prog: CompiledProgram, gap_tol: float = 1e-7, feas_tol: float = 1e-8,
                   max_iter: int = 200) -> SolverResult:
    """Run the interior-point method on a compiled program.

    The iteration works on the homogeneous self-dual embedding

        A^T y + G^T z + c tau = 0,   A x = b tau,   G x + s = h tau,
        kappa = -c^T x - b^T y - h^T z,

    so that infeasible and unbounded programs produce certificates instead
    of diverging.  Reported points are divided by ``tau``.
    """
    t0 = time.perf_counter()
    blocks = _Blocks(prog)
    A, b, c = prog.A, prog.b, prog.c
    x, s, z, y = _initial_point(prog, blocks)
    elim = _EqualityElimination(A)
    proj = _Projector(prog, blocks, elim)
    tau, kappa = 1.0, 1.0
    history: list[IterationRecord] = []
    deg = blocks.degree + 1
    status = MAX_ITERATIONS
    step = 0.0
    cnorm = max(1.0, float(np.linalg.norm(c)))
    pbound, dbound = np.inf, -np.inf

    for it in range(max_iter + 1):
        gx = blocks.Gx(x)
        gtz = blocks.GT(z)
        hz = _dot(blocks.h, z)
        by_ = float(b @ y)
        cx = float(c @ x)
        rx = A.T @ y + gtz + c * tau
        ry = b * tau - A @ x
        rz = [g + si - h * tau for g, si, h in zip(gx, s, blocks.h)]
        rt = kappa + cx + by_ + hz

        pres = max(_norm(rz), float(np.linalg.norm(ry)) if len(ry) else 0.0) / tau
        dres = float(np.linalg.norm(rx)) / tau
        pcost = cx / tau + prog.c0
        dcost = -(hz + by_) / tau + prog.c0

        # certified bounds from the projected iterate
        xp, sp = proj.primal(x / tau)
        if _min_eig(sp) >= 0.0:
            pbound = min(pbound, float(c @ xp) + prog.c0)
        yp, zp = proj.dual(y / tau, [v / tau for v in z])
        if _min_eig(zp) >= 0.0:
            dbound = max(dbound, -(_dot(blocks.h, zp) + float(b @ yp)) + prog.c0)
        gap = pbound - dbound
        comp = _dot(s, z) / tau**2
        history.append(IterationRecord(it, pcost, dcost, gap, pres, dres, step, pbound, dbound))

        scale = max(1.0, abs(pcost))
        if (pres <= feas_tol and dres <= feas_tol * cnorm
                and comp <= gap_tol * scale and abs(pcost - dcost) <= gap_tol * scale):
            status = OPTIMAL
            break
        if hz + by_ < 0:
            if float(np.linalg.norm(A.T @ y + gtz)) <= feas_tol * -(hz + by_):
                status = INFEASIBLE
                break
        if cx < 0:
            res = max(_norm([g + si for g, si in zip(gx, s)]), float(np.linalg.norm(A @ x)))
            if res <= feas_tol * -cx:
                status = UNBOUNDED
                break
        if it == max_iter:
            break

        scal = [_nt_scaling(si, zi, pk.embedded) for si, zi, pk in zip(s, z, blocks.packers)]
        rs = [sc[0] for sc in scal]
        rinvs = [sc[1] for sc in scal]
        lams = [sc[2] for sc in scal]
        kkt = _Kkt(blocks, elim, rinvs)
        mu = (_dot(s, z) + tau * kappa) / deg

        def kkt_solve(bx, by, bz):
            # A^T dy + G^T dz = bx,  A dx = by,  G dx - W^T W dz = bz
            dx, dy, dzs = kkt.solve(bx, by, bz)
            return dx, dy, dzs, blocks.Gx(dx)

        # the direction along (c, b, h) does not depend on the right-hand side
        dx2, dy2, dzs2, gdx2 = kkt_solve(-c, b, list(blocks.h))
        dz2 = [ri.T @ v @ ri for ri, v in zip(rinvs, dzs2)]
        denom2 = float(c @ dx2) + float(b @ dy2) + _dot(blocks.h, dz2)

        def newton(eta, bs, bk):
            us = [2.0 * v / (l[:, None] + l[None, :]) for v, l in zip(bs, lams)]
            wtu = [r @ u @ r.T for r, u in zip(rs, us)]
            dx1, dy1, dzs1, gdx1 = kkt_solve(-eta * rx, eta * ry, [-eta * v - w for v, w in zip(rz, wtu)])
            dz1 = [ri.T @ v @ ri for ri, v in zip(rinvs, dzs1)]
            num = (-eta * rt - bk / tau - float(c @ dx1) - float(b @ dy1) - _dot(blocks.h, dz1))
            dtau = num / (denom2 - kappa / tau)
            dx = dx1 + dtau * dx2
            dy = dy1 + dtau * dy2
            dzs = [v1 + dtau * v2 for v1, v2 in zip(dzs1, dzs2)]
            dz = [_sym(ri.T @ v @ ri) for ri, v in zip(rinvs, dzs)]
            dkappa = (bk - kappa * dtau) / tau
            # primal direction from the linearised equation G dx + ds = h dtau - eta rz
            ds = [_sym(h * dtau - eta * v - (g1 + dtau * g2))
                  for h, v, g1, g2 in zip(blocks.h, rz, gdx1, gdx2)]
            dss = [_sym(ri @ d @ ri.T) for ri, d in zip(rinvs, ds)]
            return dx, dy, ds, dz, dss, dzs, dtau, dkappa

        def max_alpha(dss, dzs, dtau, dkappa):
            a = _max_pair_step(lams, dss, dzs)
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        aff = newton(1.0, [-np.diag(l * l) for l in lams], -tau * kappa)
        _, _, ds_a, dz_a, dss_a, dzs_a, dt_a, dk_a = aff
        a_aff = min(1.0, max_alpha(dss_a, dzs_a, dt_a, dk_a))
        mu_aff = (_dot([si + a_aff * d for si, d in zip(s, ds_a)], [zi + a_aff * d for zi, d in zip(z, dz_a)])
                  + (tau + a_aff * dt_a) * (kappa + a_aff * dk_a)) / deg
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
        bs = []
        for l, d1, d2 in zip(lams, dss_a, dzs_a):
            cross = 0.5 * (d1 @ d2 + d2 @ d1)
            bs.append(-np.diag(l * l) - cross + sigma * mu * np.eye(len(l)))
        bk = -tau * kappa - dt_a * dk_a + sigma * mu
        dx, dy, ds, dz, dss, dzs, dtau, dkappa = newton(1.0 - sigma, bs, bk)
        step = min(1.0, STEP_FRACTION * max_alpha(dss, dzs, dtau, dkappa))
        if not np.isfinite(step) or step < 1e-14:
            break
        x = x + step * dx
        y = y + step * dy
        s = [_sym(si + step * d) for si, d in zip(s, ds)]
        z = [_sym(zi + step * d) for zi, d in zip(z, dz)]
        tau = tau + step * dtau
        kappa = kappa + step * dkappa

    last = history[-1]
    if status == OPTIMAL:
        x, y = x / tau, y / tau
        s = [v / tau for v in s]
        z = [v / tau for v in z]
    return SolverResult(
        status=status,
        x=x,
        s=s,
        z=z,
        y=y,
        primal_objective=last.primal_objective,
        dual_objective=last.dual_objective,
        gap=max(comp, abs(last.primal_objective - last.dual_objective)),
        primal_residual=last.primal_residual,
        dual_residual=last.dual_residual,
        iterations=last.iteration,
        history=history,
        solve_time=time.perf_counter() - t0,
    )
