"""Dense linear programming by a bounded-variable primal simplex.

Solves  min c.x  subject to  A x (<=|=) b,  lower <= x <= upper,  where bounds
may be infinite.  Two phases: phase 1 drives the artificial variables that
cover the initial constraint residuals to zero (a positive optimum certifies
infeasibility); phase 2 optimises the caller's objective from the feasible
basis.  The basis inverse is kept explicitly and maintained with product-form
rank-1 updates, with periodic refactorisation.  Pricing is Dantzig's
most-negative reduced cost, falling back to Bland's least-index rule after a
run of degenerate pivots so the method cannot cycle.

At a phase-2 optimum the reduced cost of a variable sitting at one of its
bounds is the derivative of the optimal value with respect to that bound,
which callers use for parametric sensitivity analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3

_DEGENERATE_STREAK_LIMIT = 30
_REFACTOR_EVERY = 64


@dataclass
class LpResult:
    status: str                     # optimal | infeasible | unbounded | numerical_failure
    objective: float | None = None
    x: np.ndarray | None = None
    iterations: int = 0
    var_status: np.ndarray | None = None   # BASIC/AT_LOWER/AT_UPPER/FREE per variable
    reduced_costs: np.ndarray | None = None
    phase1_objective: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Mutable simplex state over the artificial-extended problem."""

    def __init__(self, c, A, b, lo, hi):
        m, n = A.shape
        self.m, self.n = m, n
        # Start every nonbasic variable at its bound nearest zero (or 0 if free),
        # then cover the residual of each row with one artificial variable.
        x = np.zeros(n)
        status = np.full(n, FREE, dtype=np.int8)
        for j in range(n):
            if np.isfinite(lo[j]):
                x[j], status[j] = lo[j], AT_LOWER
            elif np.isfinite(hi[j]):
                x[j], status[j] = hi[j], AT_UPPER
        resid = b - A @ x
        signs = np.where(resid >= 0.0, 1.0, -1.0)
        art_cols = np.zeros((m, m))
        art_cols[np.arange(m), np.arange(m)] = signs

        self.A = np.hstack([A, art_cols])
        self.b = b
        self.lo = np.concatenate([lo, np.zeros(m)])
        self.hi = np.concatenate([hi, np.full(m, np.inf)])
        self.x = np.concatenate([x, np.abs(resid)])
        self.status = np.concatenate([status, np.full(m, BASIC, dtype=np.int8)])
        self.basis = np.arange(n, n + m)
        diag = signs.copy()

        def seat(i: int, j: int, val: float) -> None:
            self.basis[i] = j
            self.status[j] = BASIC
            self.x[j] = val
            self.x[n + i] = 0.0
            self.status[n + i] = AT_LOWER
            diag[i] = A[i, j]

        if m and n:
            # Seed the basis with structural singleton columns (slacks and the
            # like) wherever their implied value fits their bounds; rows
            # covered this way start phase 1 with a zero artificial.
            nnz = np.count_nonzero(A, axis=0)
            for j in np.flatnonzero(nnz == 1):
                if status[j] == FREE and x[j] != 0.0:
                    continue
                i = int(np.argmax(np.abs(A[:, j])))
                if self.basis[i] != n + i:
                    continue
                coef = A[i, j]
                if abs(coef) < 1e-12:
                    continue
                val = resid[i] / coef + x[j]
                if lo[j] - 1e-12 <= val <= hi[j] + 1e-12:
                    seat(i, int(j), min(max(val, lo[j]), hi[j]))

        self.B_inv = np.diag(1.0 / diag)
        self.c_phase1 = np.concatenate([np.zeros(n), np.ones(m)])
        self.c_user = np.concatenate([c, np.zeros(m)])
        self.iterations = 0
        self.pivots_since_refactor = 0

    # -- maintenance ------------------------------------------------------

    def refactor(self) -> bool:
        B = self.A[:, self.basis]
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        x_n = self.x.copy()
        x_n[self.basis] = 0.0
        self.x[self.basis] = self.B_inv @ (self.b - self.A @ x_n)
        self.pivots_since_refactor = 0
        return True

    def _eta_update(self, w, row):
        piv = w[row]
        self.B_inv[row] /= piv
        others = np.arange(self.m) != row
        self.B_inv[others] -= np.outer(w[others], self.B_inv[row])

    # -- one simplex phase ------------------------------------------------

    def run(self, c, max_iter) -> str:
        """Pivot until optimal for cost vector c; returns a status string."""
        bland = False
        degen_streak = 0
        while True:
            if self.iterations >= max_iter:
                return "numerical_failure"
            self.iterations += 1
            if self.pivots_since_refactor >= _REFACTOR_EVERY:
                if not self.refactor():
                    return "numerical_failure"

            y = c[self.basis] @ self.B_inv
            d = c - y @ self.A
            movable = self.hi - self.lo > PIVOT_TOL
            can_up = ((self.status == AT_LOWER) | (self.status == FREE)) & movable & (d < -OPT_TOL)
            can_dn = ((self.status == AT_UPPER) | (self.status == FREE)) & movable & (d > OPT_TOL)
            eligible = can_up | can_dn
            if not eligible.any():
                return "optimal"
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                scores = np.where(eligible, np.abs(d), -1.0)
                q = int(np.argmax(scores))
            t = 1.0 if can_up[q] else -1.0

            w = self.B_inv @ self.A[:, q]
            # Basic values move by -t*w*step as the entering variable moves t*step.
            tw = t * w
            steps = np.full(self.m, np.inf)
            pos = tw > PIVOT_TOL
            neg = tw < -PIVOT_TOL
            if pos.any():
                bp = self.basis[pos]
                steps[pos] = np.maximum(self.x[bp] - self.lo[bp], 0.0) / tw[pos]
            if neg.any():
                bn = self.basis[neg]
                steps[neg] = np.maximum(self.hi[bn] - self.x[bn], 0.0) / (-tw[neg])
            min_step = steps.min() if self.m else np.inf
            # Distance the entering variable can travel before hitting its far
            # bound (FREE variables may sit strictly between their bounds).
            span = self.hi[q] - self.x[q] if t > 0 else self.x[q] - self.lo[q]
            leave_row, leave_at = -1, AT_LOWER
            if np.isfinite(span) and span <= min_step + PIVOT_TOL:
                step = span          # the entering variable flips to its other bound
            elif not np.isfinite(min_step):
                return "unbounded"
            else:
                if bland:
                    near = np.flatnonzero(steps <= min_step + PIVOT_TOL)
                    leave_row = int(near[np.argmin(self.basis[near])])
                else:
                    leave_row = int(np.argmin(steps))
                step = steps[leave_row]
                leave_at = AT_LOWER if tw[leave_row] > 0 else AT_UPPER

            if step <= PIVOT_TOL:
                degen_streak += 1
                if degen_streak > _DEGENERATE_STREAK_LIMIT:
                    bland = True
            else:
                degen_streak = 0

            self.x[q] += t * step
            self.x[self.basis] -= t * step * w
            if leave_row < 0:
                # Pure bound flip, basis unchanged; land exactly on the bound.
                self.x[q] = self.hi[q] if t > 0 else self.lo[q]
                self.status[q] = AT_UPPER if t > 0 else AT_LOWER
                continue
            leaver = self.basis[leave_row]
            self.status[leaver] = leave_at
            self.x[leaver] = self.lo[leaver] if leave_at == AT_LOWER else self.hi[leaver]
            self.status[q] = BASIC
            self.basis[leave_row] = q
            self._eta_update(w, leave_row)
            self.pivots_since_refactor += 1

    def run_dual(self, c, max_iter) -> str:
        """Drive out-of-bounds basic variables to their bounds, dual-style.

        From a basis whose reduced costs for ``c`` are (near) sign-correct,
        each pivot picks the most violated basic variable and the entering
        column by the smallest dual ratio, so primal feasibility is restored
        in roughly as many pivots as there are violations.  Returns
        "feasible" on success; callers should finish with :meth:`run`, which
        certifies optimality regardless of any dual-sign drift here.
        """
        bland = False
        streak = 0
        flipped = np.zeros(self.n + self.m, dtype=bool)
        while True:
            if self.iterations >= max_iter:
                return "numerical_failure"
            self.iterations += 1
            if self.pivots_since_refactor >= _REFACTOR_EVERY:
                if not self.refactor():
                    return "numerical_failure"

            xB = self.x[self.basis]
            below = self.lo[self.basis] - xB
            above = xB - self.hi[self.basis]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.m else 0
            if self.m == 0 or viol[r] <= FEAS_TOL:
                return "feasible"
            to_lower = below[r] >= above[r]
            s = 1.0 if to_lower else -1.0     # required sign of the movement of x_B[r]

            alpha = self.B_inv[r] @ self.A
            y = c[self.basis] @ self.B_inv
            d = c - y @ self.A
            movable = self.hi - self.lo > PIVOT_TOL
            sa = s * alpha
            cand = ~flipped & (
                ((self.status == AT_LOWER) & movable & (sa < -PIVOT_TOL))
                | ((self.status == AT_UPPER) & movable & (sa > PIVOT_TOL))
                | ((self.status == FREE) & (np.abs(alpha) > PIVOT_TOL)))
            if not cand.any():
                return "infeasible"           # dual unbounded: no feasible point
            ratio = np.full(alpha.shape, np.inf)
            ratio[cand] = np.abs(d[cand]) / np.abs(alpha[cand])
            best = ratio.min()
            if bland:
                q = int(np.flatnonzero(cand & (ratio <= best + OPT_TOL))[0])
            else:
                q = int(np.argmin(ratio))
            if best <= OPT_TOL:
                streak += 1
                if streak > _DEGENERATE_STREAK_LIMIT:
                    bland = True
            else:
                streak = 0

            w = self.B_inv @ self.A[:, q]
            if abs(w[r]) < PIVOT_TOL:
                if not self.refactor():
                    return "numerical_failure"
                w = self.B_inv @ self.A[:, q]
                if abs(w[r]) < PIVOT_TOL:
                    return "numerical_failure"
            delta_q = -s * viol[r] / w[r]     # entering movement fixing row r exactly
            t = 1.0 if delta_q > 0 else -1.0
            if self.status[q] == FREE:
                avail = self.hi[q] - self.x[q] if t > 0 else self.x[q] - self.lo[q]
            else:
                avail = self.hi[q] - self.lo[q]
            if abs(delta_q) > avail + PIVOT_TOL:
                # Entering hits its own far bound first: flip it (at most once
                # per pass, so flips cannot oscillate) and keep shrinking the
                # violation of row r with another column.
                self.x[self.basis] -= t * avail * w
                self.x[q] = self.hi[q] if t > 0 else self.lo[q]
                self.status[q] = AT_UPPER if t > 0 else AT_LOWER
                flipped[q] = True
                continue

            self.x[q] += delta_q
            self.x[self.basis] -= delta_q * w
            leaver = self.basis[r]
            self.status[leaver] = AT_LOWER if to_lower else AT_UPPER
            self.x[leaver] = self.lo[leaver] if to_lower else self.hi[leaver]
            self.status[q] = BASIC
            self.basis[r] = q
            self._eta_update(w, r)
            self.pivots_since_refactor += 1

    def reduced_costs(self, c) -> np.ndarray:
        y = c[self.basis] @ self.B_inv
        d = c - y @ self.A
        d[self.basis] = 0.0
        return d


def solve(c, A, b, lower, upper, phase1_only: bool = False,
          max_iter: int | None = None) -> LpResult:
    """Minimise c.x subject to A x = b and lower <= x <= upper.

    With ``phase1_only`` the solver stops after the feasibility phase and
    reports the residual artificial mass as the objective (0 means feasible);
    ``reduced_costs`` then refer to the phase-1 objective, otherwise to ``c``.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if A.ndim != 2 or A.shape != (b.shape[0], c.shape[0]):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}")
    if (lo > hi + 1e-12).any():
        return LpResult(status="infeasible", phase1_objective=np.inf)
    m, n = A.shape
    if max_iter is None:
        max_iter = 500 + 60 * (m + n)
    tab = _Tableau(c, A, b, lo, hi)
    return _two_phase(tab, c, phase1_only, max_iter)


def _two_phase(tab: "_Tableau", c: np.ndarray, phase1_only: bool,
               max_iter: int) -> LpResult:
    n = tab.n
    status = tab.run(tab.c_phase1, max_iter)
    if status == "unbounded":            # phase 1 is bounded below by zero
        status = "numerical_failure"
    if status != "optimal":
        return LpResult(status=status, iterations=tab.iterations)
    phase1_obj = float(tab.c_phase1 @ tab.x)

    if phase1_only:
        d = tab.reduced_costs(tab.c_phase1)
        return LpResult(
            status="optimal",
            objective=phase1_obj,
            x=tab.x[:n].copy(),
            iterations=tab.iterations,
            var_status=tab.status[:n].copy(),
            reduced_costs=d[:n].copy(),
            phase1_objective=phase1_obj,
        )

    if phase1_obj > FEAS_TOL * (1.0 + float(np.abs(tab.b).max(initial=0.0))):
        return LpResult(status="infeasible", iterations=tab.iterations,
                        phase1_objective=phase1_obj)

    # Freeze artificials at zero so phase 2 cannot reintroduce infeasibility.
    tab.hi[n:] = 0.0
    tab.x[n:] = np.where(tab.status[n:] == BASIC, tab.x[n:], 0.0)
    status = tab.run(tab.c_user, max_iter)
    if status != "optimal":
        return LpResult(status=status, iterations=tab.iterations,
                        phase1_objective=phase1_obj)
    d = tab.reduced_costs(tab.c_user)
    return LpResult(
        status="optimal",
        objective=float(c @ tab.x[:n]),
        x=tab.x[:n].copy(),
        iterations=tab.iterations,
        var_status=tab.status[:n].copy(),
        reduced_costs=d[:n].copy(),
        phase1_objective=phase1_obj,
    )


class WarmStartLp:
    """Re-solve ``min c.x  s.t.  A x = b`` as the variable bounds change.

    Between calls only the bounds move, so the final basis of one solve is a
    dual-feasible start for the next: nonbasic variables snap to their new
    bounds, which leaves the reduced costs untouched, and a short dual-simplex
    pass chases the few basic variables that fell outside their range before a
    primal pass certifies optimality.  Any failure along the warm path falls
    back to a cold two-phase solve, so results never depend on the warm
    machinery.
    """

    def __init__(self, c, A, b):
        self.c = np.asarray(c, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.ndim != 2 or self.A.shape != (self.b.shape[0], self.c.shape[0]):
            raise ValueError(
                f"shape mismatch: A {self.A.shape}, b {self.b.shape}, c {self.c.shape}")
        self._tab: _Tableau | None = None

    def _finish_dual(self, tab: _Tableau, cap: int, base_iter: int) -> LpResult | None:
        n = tab.n
        dual_cap = min(cap, tab.iterations + 3 * tab.m + 100)
        status = tab.run_dual(tab.c_user, dual_cap)
        if status == "feasible":
            status = tab.run(tab.c_user, cap)
        if status != "optimal":
            return None                   # let the caller solve cold instead
        self._tab = tab
        d = tab.reduced_costs(tab.c_user)
        return LpResult(
            status="optimal",
            objective=float(self.c @ tab.x[:n]),
            x=tab.x[:n].copy(),
            iterations=tab.iterations - base_iter,
            var_status=tab.status[:n].copy(),
            reduced_costs=d[:n].copy(),
            phase1_objective=0.0,
        )

    def _snap_bounds(self, lo: np.ndarray, hi: np.ndarray) -> int:
        tab = self._tab
        n = tab.n
        tab.lo[:n] = lo
        tab.hi[:n] = hi
        st = tab.status[:n]
        x = tab.x[:n]
        x[st == AT_LOWER] = lo[st == AT_LOWER]
        x[st == AT_UPPER] = hi[st == AT_UPPER]
        free = st == FREE
        if free.any():
            x[free] = np.clip(x[free], lo[free], hi[free])

        # Send every nonbasic variable whose reduced cost favours its other
        # bound there in one sweep (bounds that widened from zero width leave
        # many with arbitrary cost signs).  The basis does not change, so this
        # is merely a bulk version of the flip pivots the primal pass would
        # make one at a time; the dual pass then repairs the few rows knocked
        # out of range.  The number of flips measures how far the old basis is
        # from the new optimum, so it is returned as a warm-start quality hint.
        d = tab.reduced_costs(tab.c_user)
        movable = tab.hi - tab.lo > PIVOT_TOL
        finite = np.isfinite(tab.lo) & np.isfinite(tab.hi)
        to_up = (tab.status == AT_LOWER) & movable & finite & (d < -OPT_TOL)
        to_dn = (tab.status == AT_UPPER) & movable & finite & (d > OPT_TOL)
        tab.x[to_up] = tab.hi[to_up]
        tab.status[to_up] = AT_UPPER
        tab.x[to_dn] = tab.lo[to_dn]
        tab.status[to_dn] = AT_LOWER

        x_n = tab.x.copy()
        x_n[tab.basis] = 0.0
        tab.x[tab.basis] = tab.B_inv @ (tab.b - tab.A @ x_n)
        return int(np.count_nonzero(to_up) + np.count_nonzero(to_dn))

    def solve(self, lower, upper, max_iter: int | None = None) -> LpResult:
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if (lo > hi + 1e-12).any():
            return LpResult(status="infeasible", phase1_objective=np.inf)
        m, n = self.A.shape
        if max_iter is None:
            max_iter = 500 + 60 * (m + n)

        if self._tab is not None:
            tab = self._tab
            flips = self._snap_bounds(lo, hi)
            if flips <= tab.m:
                res = self._finish_dual(tab, tab.iterations + max_iter, tab.iterations)
                if res is not None:
                    return res
            self._tab = None              # basis too far gone; solve cold

        tab = _Tableau(self.c, self.A, self.b, lo, hi)
        res = _two_phase(tab, self.c, False, max_iter)
        self._tab = tab if res.status == "optimal" else None
        return res


def solve_inequalities(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                       lower=None, upper=None, phase1_only: bool = False) -> LpResult:
    """Convenience wrapper: A_ub x <= b_ub rows get one slack variable each.

    Returns a result whose ``x``/``var_status``/``reduced_costs`` cover only
    the structural variables.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    blocks, rhs = [], []
    n_ub = 0
    if A_ub is not None and len(A_ub):
        A_ub = np.asarray(A_ub, dtype=float)
        n_ub = A_ub.shape[0]
        blocks.append(A_ub)
        rhs.append(np.asarray(b_ub, dtype=float))
    if A_eq is not None and len(A_eq):
        blocks.append(np.asarray(A_eq, dtype=float))
        rhs.append(np.asarray(b_eq, dtype=float))
    if not blocks:
        blocks = [np.zeros((0, n))]
        rhs = [np.zeros(0)]
    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    m = A.shape[0]

    slack = np.zeros((m, n_ub))
    slack[np.arange(n_ub), np.arange(n_ub)] = 1.0
    A_full = np.hstack([A, slack])
    c_full = np.concatenate([c, np.zeros(n_ub)])
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    lo_full = np.concatenate([lo, np.zeros(n_ub)])
    hi_full = np.concatenate([hi, np.full(n_ub, np.inf)])

    res = solve(c_full, A_full, b, lo_full, hi_full, phase1_only=phase1_only)
    if res.x is not None:
        res.x = res.x[:n]
        res.var_status = res.var_status[:n]
        res.reduced_costs = res.reduced_costs[:n]
    return res
