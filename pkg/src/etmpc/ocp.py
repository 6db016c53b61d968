"""Bolza optimal control problems and their transcription to finite NLPs.

``transcribe`` turns a :class:`BolzaOCP` on a mesh into a dense
:class:`TranscribedNLP`: decision variables are state values at mesh nodes
plus inputs at the scheme's input nodes, equality constraints are the
collocation conditions (and optional boundary equalities), and inequality
constraints are variable bounds. State boxes are enforced at mesh points;
per-point tightened boxes may replace the base box without changing the
problem structure. The measured initial state is pinned through variable
bounds, matching the receding-horizon parameterization.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .collocation import Scheme, PiecewiseTrajectory, trajectory_from_nodes
from .errors import DimensionError, InfeasibleTighteningError
from .mesh import Mesh
from .models import DynamicsModel


class StageCost:
    """Integrand L(x, u, t) with optional analytic derivatives."""

    def value(self, x, u, t):  # pragma: no cover - interface
        raise NotImplementedError

    def grad(self, x, u, t):
        hx = 1e-6
        n, m = len(x), len(u)
        gx = np.zeros(n)
        gu = np.zeros(m)
        for i in range(n):
            e = np.zeros(n); e[i] = hx * (1 + abs(x[i]))
            gx[i] = (self.value(x + e, u, t) - self.value(x - e, u, t)) / (2 * e[i])
        for j in range(m):
            e = np.zeros(m); e[j] = hx * (1 + abs(u[j]))
            gu[j] = (self.value(x, u + e, t) - self.value(x, u - e, t)) / (2 * e[j])
        return gx, gu

    def hess(self, x, u, t):
        """(Hxx, Huu) blocks; cross terms are ignored by the solver polish."""
        return np.zeros((len(x), len(x))), np.zeros((len(u), len(u)))

    def value_batch(self, X, U, ts):
        """Stage cost at stacked samples; default loops over ``value``."""
        return np.array([self.value(x, u, t) for x, u, t in zip(X, U, ts)])

    def grad_batch(self, X, U, ts):
        """(Lx, Lu) at stacked samples; default loops over ``grad``."""
        pairs = [self.grad(x, u, t) for x, u, t in zip(X, U, ts)]
        return (np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs]))


class QuadraticInputCost(StageCost):
    """L = sum_j u_j^2, the energy objective of the arm benchmark."""

    def value(self, x, u, t):
        return float(np.dot(u, u))

    def grad(self, x, u, t):
        return np.zeros(len(x)), 2.0 * np.asarray(u, dtype=float)

    def hess(self, x, u, t):
        return np.zeros((len(x), len(x))), 2.0 * np.eye(len(u))

    def value_batch(self, X, U, ts):
        return np.einsum("ij,ij->i", U, U)

    def grad_batch(self, X, U, ts):
        return np.zeros_like(X), 2.0 * np.asarray(U, dtype=float)


class CallableStageCost(StageCost):
    def __init__(self, fn: Callable):
        self._fn = fn

    def value(self, x, u, t):
        return float(self._fn(x, u, t))


class TerminalEquality:
    """Boundary constraint x(tf) = target."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    def value(self, x0, xf):
        return xf - self.target

    def jac(self, x0, xf):
        n = self.target.size
        return np.zeros((n, n)), np.eye(n)


class TerminalPenalty:
    """Boundary cost w * |x(tf) - target|^2 with analytic derivatives.

    The soft counterpart of :class:`TerminalEquality`; receding-horizon
    regulation tasks use it to steer the state toward the target without the
    near-singular NLPs a hard terminal equality produces on fine meshes.
    """

    def __init__(self, target, weight: float = 100.0):
        self.target = np.asarray(target, dtype=float)
        self.weight = float(weight)

    def __call__(self, x0, xf):
        d = xf - self.target
        return self.weight * float(d @ d)

    def grad(self, x0, xf):
        n = self.target.size
        return np.zeros(n), 2.0 * self.weight * (xf - self.target)

    def hess_terminal(self) -> np.ndarray:
        return 2.0 * self.weight * np.eye(self.target.size)


@dataclass(frozen=True)
class BolzaOCP:
    """Continuous-time Bolza problem data."""

    model: DynamicsModel
    t0: float
    tf: float
    stage_cost: Optional[StageCost] = None
    boundary_cost: Optional[Callable] = None          # Phi(x0, xf) -> float
    state_lower: np.ndarray = field(default=None)
    state_upper: np.ndarray = field(default=None)
    input_lower: np.ndarray = field(default=None)
    input_upper: np.ndarray = field(default=None)
    boundary_constraints: Optional[object] = None     # value/jac protocol
    initial_state: np.ndarray = field(default=None)

    def __post_init__(self):
        n, m = self.model.state_dim, self.model.input_dim
        if not self.tf > self.t0:
            raise ValueError(f"need tf > t0, got [{self.t0}, {self.tf}]")

        def box(val, size, default):
            if val is None:
                return np.full(size, default)
            arr = np.asarray(val, dtype=float)
            if arr.shape != (size,):
                raise DimensionError(f"box bound has shape {arr.shape}, expected ({size},)")
            return arr

        object.__setattr__(self, "state_lower", box(self.state_lower, n, -np.inf))
        object.__setattr__(self, "state_upper", box(self.state_upper, n, np.inf))
        object.__setattr__(self, "input_lower", box(self.input_lower, m, -np.inf))
        object.__setattr__(self, "input_upper", box(self.input_upper, m, np.inf))
        if np.any(self.state_lower > self.state_upper) or np.any(self.input_lower > self.input_upper):
            raise ValueError("empty constraint box")
        if self.initial_state is not None:
            x0 = np.asarray(self.initial_state, dtype=float)
            if x0.shape != (n,):
                raise DimensionError(f"initial state has shape {x0.shape}, expected ({n},)")
            object.__setattr__(self, "initial_state", x0)

    @property
    def horizon(self) -> float:
        return self.tf - self.t0

    def with_initial(self, x0, t0=None, tf=None) -> "BolzaOCP":
        """Receding-horizon re-parameterization by a new measurement/window."""
        kwargs = {"initial_state": np.asarray(x0, dtype=float)}
        if t0 is not None:
            kwargs["t0"] = t0
        if tf is not None:
            kwargs["tf"] = tf
        return replace(self, **kwargs)


class TranscribedNLP:
    """Dense finite-dimensional image of a Bolza OCP on a mesh."""

    def __init__(self, ocp: BolzaOCP, mesh: Mesh, scheme: Scheme,
                 tightened_bounds=None):
        if mesh.t0 < ocp.t0 - 1e-9 or mesh.tf > ocp.tf + 1e-9:
            raise ValueError("mesh extends outside the OCP horizon")
        self.ocp = ocp
        self.mesh = mesh
        self.scheme = scheme
        self.model = ocp.model
        K, n, m = mesh.n_segments, ocp.model.state_dim, ocp.model.input_dim
        self.K, self.n, self.m = K, n, m

        self.n_state_vars = (K + 1) * n
        if scheme is Scheme.FE:
            self.n_input_nodes = K
        elif scheme is Scheme.TRAPEZOIDAL:
            self.n_input_nodes = K + 1
        else:
            self.n_input_nodes = 2 * K + 1  # nodes then midpoints
        self.n_vars = self.n_state_vars + self.n_input_nodes * m

        q = 0
        if ocp.boundary_constraints is not None:
            x_probe = np.zeros(n)
            q = np.atleast_1d(ocp.boundary_constraints.value(x_probe, x_probe)).size
        self.n_boundary = q
        self.n_eq = K * n + q

        self._build_bounds(tightened_bounds)
        self._cache_z = None
        self._cache = None

    # -- variable layout -----------------------------------------------------

    def state_slice(self, k: int) -> slice:
        return slice(k * self.n, (k + 1) * self.n)

    def input_index(self, j: int) -> slice:
        base = self.n_state_vars
        return slice(base + j * self.m, base + (j + 1) * self.m)

    def split(self, z: np.ndarray):
        X = z[:self.n_state_vars].reshape(self.K + 1, self.n)
        U = z[self.n_state_vars:].reshape(self.n_input_nodes, self.m) if self.m else \
            np.zeros((self.n_input_nodes, 0))
        return X, U

    def _node_inputs(self, U):
        """(node inputs, mid inputs-or-None) in trajectory layout."""
        if self.scheme is Scheme.HS:
            return U[:self.K + 1], U[self.K + 1:]
        return U, None

    def _build_bounds(self, tightened_bounds):
        K, n, m = self.K, self.n, self.m
        lb = np.empty(self.n_vars)
        ub = np.empty(self.n_vars)
        for k in range(K + 1):
            if tightened_bounds is not None and k < len(tightened_bounds) and k < K:
                box = tightened_bounds[k]
                lo, hi = np.asarray(box.lower, dtype=float), np.asarray(box.upper, dtype=float)
                if np.any(lo > hi):
                    raise InfeasibleTighteningError(
                        f"tightened state box empty at mesh point {k}", point_index=k)
            else:
                lo, hi = self.ocp.state_lower, self.ocp.state_upper
            lb[self.state_slice(k)] = lo
            ub[self.state_slice(k)] = hi
        if m:
            lb[self.n_state_vars:] = np.tile(self.ocp.input_lower, self.n_input_nodes)
            ub[self.n_state_vars:] = np.tile(self.ocp.input_upper, self.n_input_nodes)
        # The measurement parameterization pins the first node regardless of
        # the (possibly tightened) box there.
        if self.ocp.initial_state is not None:
            lb[self.state_slice(0)] = self.ocp.initial_state
            ub[self.state_slice(0)] = self.ocp.initial_state
        self.lower, self.upper = lb, ub

    # -- node data cache -----------------------------------------------------

    def _node_data(self, z):
        if self._cache_z is not None and np.array_equal(z, self._cache_z):
            return self._cache
        X, U = self.split(z)
        nodeU, midU = self._node_inputs(U)
        ts = self.mesh.points
        if self.scheme is Scheme.FE:
            f_nodes = self.model.rates_batch(ts[:-1], X[:-1], nodeU)
        else:
            f_nodes = self.model.rates_batch(ts, X, nodeU)
        data = {"X": X, "nodeU": nodeU, "midU": midU, "f_nodes": f_nodes}
        if self.scheme is Scheme.HS:
            h = self.mesh.lengths[:, None]
            Xm = 0.5 * (X[:-1] + X[1:]) + h / 8.0 * (f_nodes[:-1] - f_nodes[1:])
            tm = 0.5 * (ts[:-1] + ts[1:])
            data["Xm"] = Xm
            data["f_mid"] = self.model.rates_batch(tm, Xm, midU)
            data["tm"] = tm
        self._cache_z = z.copy()
        self._cache = data
        return data

    # -- constraints, objective and derivatives -------------------------------

    def constraints(self, z: np.ndarray) -> np.ndarray:
        d = self._node_data(z)
        X, f = d["X"], d["f_nodes"]
        h = self.mesh.lengths[:, None]
        if self.scheme is Scheme.FE:
            r = X[1:] - X[:-1] - h * f
        elif self.scheme is Scheme.TRAPEZOIDAL:
            r = X[1:] - X[:-1] - 0.5 * h * (f[:-1] + f[1:])
        else:
            r = X[1:] - X[:-1] - h / 6.0 * (f[:-1] + 4.0 * d["f_mid"] + f[1:])
        out = [r.ravel()]
        if self.ocp.boundary_constraints is not None:
            out.append(np.atleast_1d(
                self.ocp.boundary_constraints.value(X[0], X[-1])).astype(float))
        return np.concatenate(out)

    def _node_jacobians(self, d):
        if "A_nodes" not in d:
            ts = self.mesh.points
            X, nodeU = d["X"], d["nodeU"]
            count = self.K if self.scheme is Scheme.FE else self.K + 1
            us = nodeU[:count] if self.m else np.zeros((count, 0))
            A, B = self.model.jacobians_batch(ts[:count], X[:count], us)
            d["A_nodes"], d["B_nodes"] = A, B
        return d["A_nodes"], d["B_nodes"]

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        d = self._node_data(z)
        if "J" in d:
            return d["J"]
        K, n, m = self.K, self.n, self.m
        J = np.zeros((self.n_eq, self.n_vars))
        h = self.mesh.lengths
        A, B = self._node_jacobians(d)
        eye = np.eye(n)
        if self.scheme is Scheme.HS:
            Am, Bm = self.model.jacobians_batch(
                d["tm"], d["Xm"], d["midU"] if m else np.zeros((K, 0)))
            d["A_mid"], d["B_mid"] = Am, Bm
        for k in range(K):
            rows = slice(k * n, (k + 1) * n)
            xs0, xs1 = self.state_slice(k), self.state_slice(k + 1)
            if self.scheme is Scheme.FE:
                J[rows, xs0] = -eye - h[k] * A[k]
                J[rows, xs1] = eye
                if m:
                    J[rows, self.input_index(k)] = -h[k] * B[k]
            elif self.scheme is Scheme.TRAPEZOIDAL:
                J[rows, xs0] = -eye - 0.5 * h[k] * A[k]
                J[rows, xs1] = eye - 0.5 * h[k] * A[k + 1]
                if m:
                    J[rows, self.input_index(k)] = -0.5 * h[k] * B[k]
                    J[rows, self.input_index(k + 1)] = -0.5 * h[k] * B[k + 1]
            else:
                Am, Bm = d["A_mid"][k], d["B_mid"][k]
                dxm_dx0 = 0.5 * eye + h[k] / 8.0 * A[k]
                dxm_dx1 = 0.5 * eye - h[k] / 8.0 * A[k + 1]
                J[rows, xs0] = -eye - h[k] / 6.0 * (A[k] + 4.0 * Am @ dxm_dx0)
                J[rows, xs1] = eye - h[k] / 6.0 * (A[k + 1] + 4.0 * Am @ dxm_dx1)
                if m:
                    J[rows, self.input_index(k)] = (-h[k] / 6.0 * B[k]
                                                    - h[k] ** 2 / 12.0 * Am @ B[k])
                    J[rows, self.input_index(k + 1)] = (-h[k] / 6.0 * B[k + 1]
                                                        + h[k] ** 2 / 12.0 * Am @ B[k + 1])
                    J[rows, self.input_index(K + 1 + k)] = -2.0 * h[k] / 3.0 * Bm
        if self.ocp.boundary_constraints is not None:
            rows = slice(K * n, self.n_eq)
            j0, jf = self.ocp.boundary_constraints.jac(d["X"][0], d["X"][-1])
            J[rows, self.state_slice(0)] = j0
            J[rows, self.state_slice(K)] = jf
        d["J"] = J
        return J

    def objective(self, z: np.ndarray) -> float:
        d = self._node_data(z)
        X, nodeU = d["X"], d["nodeU"]
        total = 0.0
        sc = self.ocp.stage_cost
        ts = self.mesh.points
        h = self.mesh.lengths
        if sc is not None:
            if self.scheme is Scheme.FE:
                L = sc.value_batch(X[:-1], nodeU, ts[:-1])
                total += float(h @ L)
            elif self.scheme is Scheme.TRAPEZOIDAL:
                L = sc.value_batch(X, nodeU, ts)
                total += float(0.5 * h @ (L[:-1] + L[1:]))
            else:
                L = sc.value_batch(X, nodeU, ts)
                Lm = sc.value_batch(d["Xm"], d["midU"], d["tm"])
                total += float(h / 6.0 @ (L[:-1] + 4.0 * Lm + L[1:]))
        if self.ocp.boundary_cost is not None:
            total += float(self.ocp.boundary_cost(X[0], X[-1]))
        return float(total)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        d = self._node_data(z)
        X, nodeU = d["X"], d["nodeU"]
        g = np.zeros(self.n_vars)
        sc = self.ocp.stage_cost
        ts = self.mesh.points
        h = self.mesh.lengths
        K, n, m = self.K, self.n, self.m
        if sc is not None:
            if self.scheme is Scheme.FE:
                gx, gu = sc.grad_batch(X[:-1], nodeU, ts[:-1])
                g[:self.n_state_vars - self.n] += (h[:, None] * gx).ravel()
                if m:
                    g[self.n_state_vars:] += (h[:, None] * gu).ravel()
            elif self.scheme is Scheme.TRAPEZOIDAL:
                gx, gu = sc.grad_batch(X, nodeU, ts)
                wk = np.zeros(K + 1)
                wk[:-1] += 0.5 * h
                wk[1:] += 0.5 * h
                g[:self.n_state_vars] += (wk[:, None] * gx).ravel()
                if m:
                    g[self.n_state_vars:] += (wk[:, None] * gu).ravel()
            else:
                A, B = self._node_jacobians(d)
                eye = np.eye(n)
                for k in range(K + 1):
                    gx, gu = sc.grad(X[k], nodeU[k], ts[k])
                    wk = (h[k - 1] if k > 0 else 0.0) / 6.0 + (h[k] if k < K else 0.0) / 6.0
                    g[self.state_slice(k)] += wk * gx
                    if m:
                        g[self.input_index(k)] += wk * gu
                for k in range(K):
                    gxm, gum = sc.grad(d["Xm"][k], d["midU"][k], d["tm"][k])
                    w = 4.0 * h[k] / 6.0
                    g[self.state_slice(k)] += w * (0.5 * eye + h[k] / 8.0 * A[k]).T @ gxm
                    g[self.state_slice(k + 1)] += w * (0.5 * eye - h[k] / 8.0 * A[k + 1]).T @ gxm
                    if m:
                        g[self.input_index(k)] += w * (h[k] / 8.0 * B[k]).T @ gxm
                        g[self.input_index(k + 1)] += -w * (h[k] / 8.0 * B[k + 1]).T @ gxm
                        g[self.input_index(K + 1 + k)] += w * gum
        if self.ocp.boundary_cost is not None:
            bc = self.ocp.boundary_cost
            if hasattr(bc, "grad"):
                g0, gf = bc.grad(X[0], X[-1])
            else:
                g0, gf = _fd_boundary_grad(bc, X[0], X[-1])
            g[self.state_slice(0)] += g0
            g[self.state_slice(K)] += gf
        return g

    def objective_hessian(self, z: np.ndarray) -> np.ndarray:
        """Block approximation of the objective Hessian.

        Exact for separable stage costs on FE/trapezoidal transcriptions;
        Hermite-Simpson midpoint chain terms are approximated by their
        leading halves. Used only to precondition the solver's KKT polish.
        """
        d = self._node_data(z)
        X, nodeU = d["X"], d["nodeU"]
        H = np.zeros((self.n_vars, self.n_vars))
        bc = self.ocp.boundary_cost
        if bc is not None and hasattr(bc, "hess_terminal"):
            sK = self.state_slice(self.K)
            H[sK, sK] += bc.hess_terminal()
        sc = self.ocp.stage_cost
        if sc is None:
            return H
        ts = self.mesh.points
        h = self.mesh.lengths
        K, m = self.K, self.m

        def add(k_node, w):
            hxx, huu = sc.hess(X[k_node], nodeU[k_node] if m else np.zeros(0), ts[k_node])
            s = self.state_slice(k_node)
            H[s, s] += w * hxx
            if m:
                iu = self.input_index(k_node)
                H[iu, iu] += w * huu

        if self.scheme is Scheme.FE:
            for k in range(K):
                add(k, h[k])
        elif self.scheme is Scheme.TRAPEZOIDAL:
            for k in range(K + 1):
                add(k, 0.5 * (h[k - 1] if k > 0 else 0.0) + 0.5 * (h[k] if k < K else 0.0))
        else:
            for k in range(K + 1):
                add(k, (h[k - 1] if k > 0 else 0.0) / 6.0 + (h[k] if k < K else 0.0) / 6.0)
            for k in range(K):
                hxx, huu = sc.hess(d["Xm"][k], d["midU"][k] if m else np.zeros(0), d["tm"][k])
                w = 4.0 * h[k] / 6.0
                for s in (self.state_slice(k), self.state_slice(k + 1)):
                    H[s, s] += 0.25 * w * hxx
                if m:
                    iu = self.input_index(K + 1 + k)
                    H[iu, iu] += w * huu
        return H

    def lagrangian_hessian(self, z: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Objective Hessian plus dynamics curvature contracted with multipliers.

        The collocation constraints are separable per node for FE and
        trapezoidal schemes, so the curvature of lambda' c is assembled
        exactly from finite differences of the analytic Jacobians; the
        Hermite-Simpson midpoint chain terms are dropped (its use here is on
        problems with linear or near-linear dynamics). Boundary-constraint
        curvature is ignored (the built-in terminal equality is linear).
        """
        H = self.objective_hessian(z).copy()
        K, n, m = self.K, self.n, self.m
        if not self.n_eq:
            return H
        d = self._node_data(z)
        X, nodeU = d["X"], d["nodeU"]
        lam_dyn = lam[:K * n].reshape(K, n)
        h = self.mesh.lengths
        # Weight on f(x_j, u_j) inside L = f_obj - lam' c: the collocation
        # rows carry -h f terms, so the contracted weight is +h lam.
        V = np.zeros((K + 1, n))
        if self.scheme is Scheme.FE:
            V[:-1] = h[:, None] * lam_dyn
        elif self.scheme is Scheme.TRAPEZOIDAL:
            V[:-1] += 0.5 * h[:, None] * lam_dyn
            V[1:] += 0.5 * h[:, None] * lam_dyn
        else:
            V[:-1] += (h[:, None] / 6.0) * lam_dyn
            V[1:] += (h[:, None] / 6.0) * lam_dyn
        if not np.any(V):
            return H
        count = K if self.scheme is Scheme.FE else K + 1
        ts = self.mesh.points[:count]
        xs = X[:count]
        us = nodeU[:count] if m else np.zeros((count, 0))
        V = V[:count]

        def weighted_grad(xs_p, us_p):
            """Rows of [Jx' v, Ju' v] for every node; (count, n + m)."""
            A, B = self.model.jacobians_batch(ts, xs_p, us_p)
            gx = np.einsum("kij,ki->kj", A, V)
            gu = np.einsum("kij,ki->kj", B, V) if m else np.zeros((count, 0))
            return np.concatenate([gx, gu], axis=1)

        step = 1e-6
        nm = n + m
        curv = np.zeros((count, nm, nm))
        for l in range(nm):
            xs_p, us_p = xs.copy(), us.copy()
            xs_m, us_m = xs.copy(), us.copy()
            if l < n:
                hstep = step * (1.0 + np.abs(xs[:, l]))
                xs_p[:, l] += hstep
                xs_m[:, l] -= hstep
            else:
                hstep = step * (1.0 + np.abs(us[:, l - n]))
                us_p[:, l - n] += hstep
                us_m[:, l - n] -= hstep
            curv[:, l, :] = (weighted_grad(xs_p, us_p) - weighted_grad(xs_m, us_m)) \
                / (2.0 * hstep[:, None])
        curv = 0.5 * (curv + np.transpose(curv, (0, 2, 1)))
        for j in range(count):
            sx = self.state_slice(j)
            H[sx, sx] += curv[j, :n, :n]
            if m:
                iu = self.input_index(j)
                H[iu, iu] += curv[j, n:, n:]
                H[sx, iu] += curv[j, :n, n:]
                H[iu, sx] += curv[j, n:, :n]
        return H

    # -- initial guesses and reconstruction -----------------------------------

    def initial_guess(self, warm: Optional[PiecewiseTrajectory] = None) -> np.ndarray:
        z = np.zeros(self.n_vars)
        ts = self.mesh.points
        if warm is not None:
            lo = max(warm.mesh.t0, self.mesh.t0)
            hi = min(warm.mesh.tf, self.mesh.tf)
            tq = np.clip(ts, lo, hi)
            X = warm.eval_state(tq)
            z[:self.n_state_vars] = X.ravel()
            if self.m:
                if self.scheme is Scheme.FE:
                    uq = np.clip(ts[:-1], lo, hi)
                elif self.scheme is Scheme.TRAPEZOIDAL:
                    uq = tq
                else:
                    uq = np.concatenate([tq, np.clip(0.5 * (ts[:-1] + ts[1:]), lo, hi)])
                z[self.n_state_vars:] = warm.eval_input(uq).ravel()
        else:
            x0 = self.ocp.initial_state
            if x0 is None:
                x0 = np.zeros(self.n)
            target = x0
            bc = self.ocp.boundary_constraints
            if isinstance(bc, TerminalEquality):
                target = bc.target
            frac = (ts - ts[0]) / (ts[-1] - ts[0])
            X = x0[None, :] + frac[:, None] * (target - x0)[None, :]
            z[:self.n_state_vars] = X.ravel()
        return np.clip(z, self.lower, self.upper)

    def trajectory(self, z: np.ndarray) -> PiecewiseTrajectory:
        X, U = self.split(z)
        nodeU, midU = self._node_inputs(U)
        return trajectory_from_nodes(self.mesh, self.scheme, self.model,
                                     X, nodeU, midU)


def _fd_boundary_grad(phi, x0, xf, rel=1e-6):
    n = x0.size
    g0, gf = np.zeros(n), np.zeros(n)
    for i in range(n):
        h = rel * (1 + abs(x0[i]))
        e = np.zeros(n); e[i] = h
        g0[i] = (phi(x0 + e, xf) - phi(x0 - e, xf)) / (2 * h)
        h = rel * (1 + abs(xf[i]))
        e = np.zeros(n); e[i] = h
        gf[i] = (phi(x0, xf + e) - phi(x0, xf - e)) / (2 * h)
    return g0, gf


def transcribe(ocp: BolzaOCP, mesh: Mesh, scheme: Scheme,
               tightened_bounds=None) -> TranscribedNLP:
    """Transcribe the OCP on the given mesh; see module docstring."""
    return TranscribedNLP(ocp, mesh, scheme, tightened_bounds=tightened_bounds)
