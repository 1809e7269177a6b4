"""
Alternating optimization of the multiview discriminative sparse coding objective.

    F(D, W, α) = 1/(2l)   Σ_{v≤V+1} ‖X_L^v − D^v W_L‖²          (label view X_L^{V+1} = Y)
               + 1/(2(N−l)) Σ_{v≤V} ‖X_U^v − D^v W_U‖²
               + γ1 (‖W_L‖_{1,∞} + ‖W_U‖_{1,∞})
               + γ2 Σ_v ‖D^vᵀ‖_{1,∞}
               + γ3 tr(W (Σ_v α_v^r H_v) Wᵀ)

subject to ‖d_j^v‖ ≤ 1 and α on the simplex. Blocks are updated in the order
codes → dictionaries → view weights; every block update is checked to not
increase F.

With ``supervised=False`` the label view drops out of the reconstruction and
of the dictionary sparsity, which leaves plain multiview sparse coding.

**Feature: mhdsc-solver**
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from pipeline.dataset import MultiviewDataset
from pipeline.errors import ConvergenceError, DivergenceError, InvariantError, ValidationError
from pipeline.graph import GraphConfig, RegularizerMatrix, build_view_regularizers, weighted_sum
from pipeline.prox import l1inf_norm, project_unit_columns, prox_l1inf_rows
from utils.defaults import LAPLACIAN_WEIGHTINGS, REGULARIZER_KINDS

logger = logging.getLogger(__name__)

LIPSCHITZ_FLOOR = 1e-12
ENERGY_FLOOR = 1e-12
DESCENT_SLACK = 1e-8
POWER_TOL = 1e-8
POWER_MAX_ITERS = 10000
NORM_TOL = 1e-10
SIMPLEX_TOL = 1e-10

TRACE_COLUMNS = ("iteration", "recon_labelled", "recon_unlabelled", "sparsity_W", "sparsity_D", "manifold", "total")


@dataclass
class Hyperparams:
    gamma1: float = 0.01
    gamma2: float = 0.001
    gamma3: float = 0.01
    r: float = 5.0
    n_atoms: int = 20
    inner_max_iters: int = 500
    outer_max_iters: int = 100
    inner_tol: float = 1e-6
    outer_tol: float = 1e-5
    regularizer: str = "hessian"
    neighbors: int = 10
    tangent_dim: int = 2
    ridge: float = 1e-6
    laplacian_weighting: str = "binary"
    heat_sigma: float = 1.0
    include_label_view: bool = True
    trace_normalize: bool = True
    supervised: bool = True
    workers: int = 1

    def validate(self) -> "Hyperparams":
        for name in ("gamma1", "gamma2", "gamma3"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not self.r > 1:
            raise ValidationError(f"exponent r must be > 1, got {self.r}")
        if self.n_atoms < 1:
            raise ValidationError(f"atom count must be >= 1, got {self.n_atoms}")
        if self.inner_max_iters < 0 or self.outer_max_iters < 0:
            raise ValidationError("iteration caps must be nonnegative")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValidationError("tolerances must be positive")
        if self.regularizer not in REGULARIZER_KINDS:
            raise ValidationError(f"unknown regularizer '{self.regularizer}', choose from {REGULARIZER_KINDS}")
        if self.laplacian_weighting not in LAPLACIAN_WEIGHTINGS:
            raise ValidationError(f"unknown weighting '{self.laplacian_weighting}'")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if self.regularizer == "hessian":
            self.graph_config().hessian_config().validate()
        return self

    def graph_config(self) -> GraphConfig:
        return GraphConfig(kind=self.regularizer, neighbors=self.neighbors, tangent_dim=self.tangent_dim,
                           ridge=self.ridge, laplacian_weighting=self.laplacian_weighting,
                           heat_sigma=self.heat_sigma,
                           include_label_view=self.include_label_view and self.supervised,
                           trace_normalize=self.trace_normalize, workers=self.workers)

    @classmethod
    def from_config(cls, cfg: dict) -> "Hyperparams":
        return cls(
            gamma1=cfg["solver_gamma1"], gamma2=cfg["solver_gamma2"], gamma3=cfg["solver_gamma3"],
            r=cfg["solver_r"], n_atoms=cfg["solver_atoms"],
            inner_max_iters=cfg["solver_inner_max_iters"], outer_max_iters=cfg["solver_outer_max_iters"],
            inner_tol=cfg["solver_inner_tol"], outer_tol=cfg["solver_outer_tol"],
            regularizer=cfg["solver_regularizer"], neighbors=cfg["graph_neighbors"],
            tangent_dim=cfg["graph_tangent_dim"], ridge=cfg["graph_ridge"],
            laplacian_weighting=cfg["graph_laplacian_weighting"], heat_sigma=cfg["graph_heat_sigma"],
            include_label_view=cfg["solver_include_label_view"],
            trace_normalize=cfg["solver_trace_normalize"], supervised=cfg["solver_supervised"],
            workers=cfg["graph_workers"],
        )


@dataclass
class ModelState:
    """
    dictionaries: V feature-view dictionaries (P_v × N_d) followed by the label-view dictionary (P_c × N_d)
    codes: N_d × N, labelled block first
    alpha: view weights, one per regularizer (V+1, or V without the label view)
    """
    dictionaries: List[np.ndarray]
    codes: np.ndarray
    alpha: np.ndarray
    labelled_count: int
    hyperparams: Optional[Hyperparams] = None

    @property
    def n_views(self) -> int:
        return len(self.dictionaries) - 1

    @property
    def n_atoms(self) -> int:
        return self.codes.shape[0]

    @property
    def feature_dictionaries(self) -> List[np.ndarray]:
        return self.dictionaries[:-1]

    @property
    def label_dictionary(self) -> np.ndarray:
        return self.dictionaries[-1]

    @property
    def W_L(self) -> np.ndarray:
        return self.codes[:, :self.labelled_count]

    @property
    def W_U(self) -> np.ndarray:
        return self.codes[:, self.labelled_count:]

    def check_invariants(self) -> "ModelState":
        for v, d in enumerate(self.dictionaries):
            norms = np.linalg.norm(d, axis=0)
            if norms.size and norms.max() > 1.0 + NORM_TOL:
                raise InvariantError(f"dictionary {v} has a column of norm {norms.max():.6g} > 1")
        alpha = np.asarray(self.alpha)
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > SIMPLEX_TOL:
            raise InvariantError(f"view weights off the simplex: {alpha.tolist()}")
        return self


@dataclass(frozen=True)
class ObjectiveBreakdown:
    recon_labelled: float
    recon_unlabelled: float
    sparsity_W: float
    sparsity_D: float
    manifold: float

    @property
    def total(self) -> float:
        return self.recon_labelled + self.recon_unlabelled + self.sparsity_W + self.sparsity_D + self.manifold

    @property
    def reconstruction(self) -> float:
        return self.recon_labelled + self.recon_unlabelled

    def as_row(self) -> Tuple[float, ...]:
        return (self.recon_labelled, self.recon_unlabelled, self.sparsity_W, self.sparsity_D,
                self.manifold, self.total)


@dataclass
class MomentumState:
    tau: float
    iterate: np.ndarray
    aggregate: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValidationError(f"momentum weight tau must lie in (0, 1], got {self.tau}")


@dataclass
class DescentResult:
    values: np.ndarray
    history: List[float]
    iterations: int
    converged: bool


@dataclass
class FitResult:
    state: ModelState
    trace: List[ObjectiveBreakdown] = field(default_factory=list)
    regularizers: List[RegularizerMatrix] = field(default_factory=list)


def _power_iteration(M: np.ndarray, v: np.ndarray) -> float:
    v = v / np.linalg.norm(v)
    est = float(np.linalg.norm(M @ v))
    if est == 0.0:
        return 0.0
    for _ in range(POWER_MAX_ITERS):
        x = M.T @ (M @ v)
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            return 0.0
        v = x / nx
        new = float(np.linalg.norm(M @ v))
        if abs(new - est) <= POWER_TOL * new:
            return new
        est = new
    raise ConvergenceError(f"power iteration did not converge in {POWER_MAX_ITERS} iterations",
                           last_estimate=est)


def spectral_norm(M: np.ndarray) -> float:
    """
    Largest singular value by power iteration on MᵀM.

    Runs from the normalized all-ones vector and from a fixed-seed Gaussian
    vector and keeps the larger estimate. The ones vector alone stalls when it
    is an eigenvector of MᵀM for a smaller singular value.

    Raises:
        ConvergenceError: relative change still above 1e-8 after 10000 iterations
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        raise ValidationError("spectral norm of an empty matrix")
    n = M.shape[1]
    starts = [np.full(n, 1.0 / np.sqrt(n)), np.random.default_rng(0).standard_normal(n)]
    return max(_power_iteration(M, v) for v in starts)


def fista_tau_next(tau: float) -> float:
    """Positive root of τ'^{-2} − τ'^{-1} = τ^{-2}."""
    if not 0.0 < tau <= 1.0:
        raise ValidationError(f"tau must lie in (0, 1], got {tau}")
    t = 1.0 / tau
    return 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * t * t))


def accelerated_prox_descent(x0: np.ndarray,
                             gradient: Callable[[np.ndarray], np.ndarray],
                             prox: Callable[[np.ndarray, float], np.ndarray],
                             value: Callable[[np.ndarray], float],
                             lipschitz,
                             max_iters: int,
                             tol: float,
                             label: str = "") -> DescentResult:
    """
    Accelerated proximal gradient with a monotone safeguard on the aggregate.

    Each step: Z = τW + (1−τ)W̃, U = W − ∇f(Z)/(τL), W ← prox(U, τ),
    W̃ ← τW + (1−τ)W̃ if that does not increase the objective.

    Args:
        lipschitz: scalar or array broadcastable against ``x0`` (per-block constants)
        prox: called as ``prox(U, tau)``; it owns the penalty weights
        tol: stop once an accepted step changes the objective by less than ``tol`` relatively
    """
    state = MomentumState(tau=1.0, iterate=np.array(x0, dtype=float), aggregate=np.array(x0, dtype=float))
    best = value(state.aggregate)
    history = [best]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        tau = state.tau
        z = tau * state.iterate + (1.0 - tau) * state.aggregate
        u = state.iterate - gradient(z) / (tau * lipschitz)
        state.iterate = prox(u, tau)
        if not np.all(np.isfinite(state.iterate)):
            raise DivergenceError(f"{label} iterate became non-finite at step {it}")
        candidate = tau * state.iterate + (1.0 - tau) * state.aggregate
        cand_value = value(candidate)
        if not np.isfinite(cand_value):
            raise DivergenceError(f"{label} objective became non-finite at step {it}")
        if cand_value <= best:
            rel = (best - cand_value) / max(abs(best), 1e-12)
            state.aggregate = candidate
            best = cand_value
            history.append(best)
            if rel < tol:
                converged = True
                break
        state.tau = fista_tau_next(tau)
    if max_iters and not converged:
        logger.warning(f"{label} update stopped at the iteration cap ({max_iters})")
    logger.debug(f"{label} update: {it} iterations, objective {best:.10g}")
    return DescentResult(values=state.aggregate, history=history, iterations=it, converged=converged)


def _check_layout(state: ModelState, data: MultiviewDataset) -> None:
    if state.n_views != data.n_views:
        raise ValidationError(f"dimension mismatch: model has {state.n_views} views, data has {data.n_views}")
    if state.codes.shape[1] != data.total_count or state.labelled_count != data.labelled_count:
        raise ValidationError(
            f"dimension mismatch: codes {state.codes.shape} vs N={data.total_count}, l={data.labelled_count}")
    for v, (d, p) in enumerate(zip(state.dictionaries, data.dims + [data.n_classes])):
        if d.shape != (p, state.n_atoms):
            raise ValidationError(f"dimension mismatch: dictionary {v} is {d.shape}, expected ({p}, {state.n_atoms})")


def manifold_matrix(regs: Sequence[RegularizerMatrix], alpha: np.ndarray, r: float) -> Optional[RegularizerMatrix]:
    """Σ α_v^r H_v, the matrix the manifold term and the code update both use."""
    if not regs:
        return None
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size != len(regs):
        raise ValidationError(f"need one view weight per regularizer: {alpha.size} vs {len(regs)}")
    return weighted_sum(regs, alpha ** r)


def objective(state: ModelState, data: MultiviewDataset, regs: Sequence[RegularizerMatrix],
              hp: Hyperparams) -> ObjectiveBreakdown:
    _check_layout(state, data)
    l, n = data.labelled_count, data.total_count
    W_L, W_U = state.W_L, state.W_U

    recon_l = sum(float(np.sum((data.X_L(v) - d @ W_L) ** 2)) for v, d in enumerate(state.feature_dictionaries))
    if hp.supervised:
        recon_l += float(np.sum((data.Y - state.label_dictionary @ W_L) ** 2))
    recon_l /= 2.0 * l

    recon_u = 0.0
    if n > l:
        recon_u = sum(float(np.sum((data.X_U(v) - d @ W_U) ** 2)) for v, d in enumerate(state.feature_dictionaries))
        recon_u /= 2.0 * (n - l)

    sparsity_w = hp.gamma1 * (l1inf_norm(W_L) + (l1inf_norm(W_U) if n > l else 0.0))
    learned = state.dictionaries if hp.supervised else state.feature_dictionaries
    sparsity_d = hp.gamma2 * sum(l1inf_norm(d.T) for d in learned)

    manifold = 0.0
    H = manifold_matrix(regs, state.alpha, hp.r)
    if H is not None and hp.gamma3 > 0:
        manifold = hp.gamma3 * H.energy(state.codes)
    return ObjectiveBreakdown(recon_labelled=recon_l, recon_unlabelled=recon_u, sparsity_W=sparsity_w,
                              sparsity_D=sparsity_d, manifold=manifold)


def feature_reconstruction(state: ModelState, data: MultiviewDataset) -> float:
    """Reconstruction part of the objective restricted to the V feature views."""
    _check_layout(state, data)
    l, n = data.labelled_count, data.total_count
    out = sum(float(np.sum((data.X_L(v) - d @ state.W_L) ** 2))
              for v, d in enumerate(state.feature_dictionaries)) / (2.0 * l)
    if n > l:
        out += sum(float(np.sum((data.X_U(v) - d @ state.W_U) ** 2))
                   for v, d in enumerate(state.feature_dictionaries)) / (2.0 * (n - l))
    return out


@dataclass
class CodeProblem:
    """Code subproblem with dictionaries and view weights fixed."""
    D: np.ndarray
    D1: np.ndarray
    Z_L: np.ndarray
    X_U: np.ndarray
    H: Optional[np.ndarray]
    gamma1: float
    gamma3: float
    labelled_count: int

    @classmethod
    def from_state(cls, state: ModelState, data: MultiviewDataset, H: Optional[RegularizerMatrix],
                   hp: Hyperparams) -> "CodeProblem":
        _check_layout(state, data)
        if H is not None and H.n != data.total_count:
            raise ValidationError(f"dimension mismatch: regularizer is {H.n}×{H.n}, N={data.total_count}")
        D1 = np.vstack(state.feature_dictionaries)
        labelled = [data.X_L(v) for v in range(data.n_views)]
        return cls(
            D=np.vstack([D1, state.label_dictionary]) if hp.supervised else D1,
            D1=D1,
            Z_L=np.vstack(labelled + [data.Y] if hp.supervised else labelled),
            X_U=np.vstack([data.X_U(v) for v in range(data.n_views)]),
            H=None if H is None else H.values,
            gamma1=hp.gamma1,
            gamma3=hp.gamma3 if H is not None else 0.0,
            labelled_count=data.labelled_count,
        )

    @property
    def n(self) -> int:
        return self.labelled_count + self.X_U.shape[1]

    def smooth(self, W: np.ndarray) -> float:
        l, n = self.labelled_count, self.n
        out = float(np.sum((self.D @ W[:, :l] - self.Z_L) ** 2)) / (2.0 * l)
        if n > l:
            out += float(np.sum((self.D1 @ W[:, l:] - self.X_U) ** 2)) / (2.0 * (n - l))
        if self.H is not None and self.gamma3 > 0:
            out += self.gamma3 * float(np.sum((W @ self.H) * W))
        return out

    def penalty(self, W: np.ndarray) -> float:
        l = self.labelled_count
        return self.gamma1 * (l1inf_norm(W[:, :l]) + (l1inf_norm(W[:, l:]) if self.n > l else 0.0))

    def value(self, W: np.ndarray) -> float:
        return self.smooth(W) + self.penalty(W)


def smooth_code_gradient(problem: CodeProblem, W: np.ndarray) -> np.ndarray:
    l, n = problem.labelled_count, problem.n
    grad = np.empty_like(W, dtype=float)
    grad[:, :l] = problem.D.T @ (problem.D @ W[:, :l] - problem.Z_L) / l
    if n > l:
        grad[:, l:] = problem.D1.T @ (problem.D1 @ W[:, l:] - problem.X_U) / (n - l)
    if problem.H is not None and problem.gamma3 > 0:
        grad += 2.0 * problem.gamma3 * (W @ problem.H)
    return grad


def code_lipschitz_constants(problem: CodeProblem) -> Tuple[float, float, float]:
    """(L1, L2, L3): labelled reconstruction, unlabelled reconstruction, manifold."""
    l, n = problem.labelled_count, problem.n
    L1 = spectral_norm(problem.D) ** 2 / l
    L2 = spectral_norm(problem.D1) ** 2 / (n - l) if n > l else 0.0
    L3 = 0.0
    if problem.H is not None and problem.gamma3 > 0:
        L3 = 2.0 * problem.gamma3 * spectral_norm(problem.H)
    return L1, L2, L3


def update_codes(state: ModelState, data: MultiviewDataset, H: Optional[RegularizerMatrix], hp: Hyperparams,
                 history: Optional[List[float]] = None) -> np.ndarray:
    """
    Code block update, warm-started from ``state.codes``

    Args:
        H: Σ α_v^r H_v, or None when the manifold term is off
        history: receives the accepted subproblem objective values

    Returns:
        the aggregate iterate W̃
    """
    problem = CodeProblem.from_state(state, data, H, hp)
    l, n = problem.labelled_count, problem.n
    L1, L2, L3 = code_lipschitz_constants(problem)
    L_lab = max(L1 + L3, LIPSCHITZ_FLOOR)
    L_unl = max(L2 + L3, LIPSCHITZ_FLOOR)
    logger.debug(f"code Lipschitz constants L1={L1:.6g} L2={L2:.6g} L3={L3:.6g}")
    scale = np.where(np.arange(n) < l, L_lab, L_unl)[None, :]

    def prox(U: np.ndarray, tau: float) -> np.ndarray:
        out = np.empty_like(U)
        out[:, :l] = prox_l1inf_rows(U[:, :l], hp.gamma1 / (tau * L_lab))
        if n > l:
            out[:, l:] = prox_l1inf_rows(U[:, l:], hp.gamma1 / (tau * L_unl))
        return out

    result = accelerated_prox_descent(state.codes, lambda W: smooth_code_gradient(problem, W), prox,
                                      problem.value, scale, hp.inner_max_iters, hp.inner_tol, label="codes")
    if history is not None:
        history.extend(result.history)
    return result.values


def _dictionary_view_update(B0: np.ndarray, blocks: List[Tuple[np.ndarray, np.ndarray, float]], hp: Hyperparams,
                            label: str, history: Optional[List[float]]) -> np.ndarray:
    """
    One view of the dictionary subproblem on B = Dᵀ (N_d × P).

    blocks: (W_block, X_block, weight) triples contributing weight/2·‖X − BᵀW‖²
    """
    grams = [(w * (W @ W.T), w * (W @ X.T)) for W, X, w in blocks]
    L = max(sum(spectral_norm(W) ** 2 * w for W, _, w in blocks), LIPSCHITZ_FLOOR)

    def gradient(B: np.ndarray) -> np.ndarray:
        return sum(G @ B - C for G, C in grams)

    def value(B: np.ndarray) -> float:
        smooth = sum(0.5 * w * float(np.sum((X - B.T @ W) ** 2)) for W, X, w in blocks)
        return smooth + hp.gamma2 * l1inf_norm(B)

    def prox(U: np.ndarray, tau: float) -> np.ndarray:
        # ℓ1,∞ prox then projection onto the unit ball: their composition is the exact constrained prox
        return project_unit_columns(prox_l1inf_rows(U, hp.gamma2 / (tau * L)).T).T

    B_start = project_unit_columns(B0.T).T
    result = accelerated_prox_descent(B_start, gradient, prox, value, L, hp.inner_max_iters, hp.inner_tol,
                                      label=label)
    if history is not None:
        history.extend(result.history)
    return result.values


def update_dictionary(state: ModelState, data: MultiviewDataset, hp: Hyperparams,
                      history: Optional[List[float]] = None) -> List[np.ndarray]:
    """
    Dictionary block update, one independent problem per view

    Feature views see both code blocks, the label view only the labelled one.
    Unsupervised models keep the label dictionary untouched.
    """
    _check_layout(state, data)
    l, n = data.labelled_count, data.total_count
    W_L, W_U = state.W_L, state.W_U
    out = []
    for v, d in enumerate(state.feature_dictionaries):
        blocks = [(W_L, data.X_L(v), 1.0 / l)]
        if n > l:
            blocks.append((W_U, data.X_U(v), 1.0 / (n - l)))
        out.append(_dictionary_view_update(d.T, blocks, hp, f"dictionary[{v}]", history).T)
    if not hp.supervised:
        out.append(state.label_dictionary)
        return out
    label_blocks = [(W_L, data.Y, 1.0 / l)]
    out.append(_dictionary_view_update(state.label_dictionary.T, label_blocks, hp, "dictionary[label]", history).T)
    return out


def update_alpha(W: np.ndarray, regs: Sequence[RegularizerMatrix], r: float) -> np.ndarray:
    """
    Closed-form view weights α_v ∝ (1/e_v)^{1/(r−1)} with e_v = tr(W H_v Wᵀ).

    Evaluated in the log domain so extreme r stays finite.
    """
    if not r > 1:
        raise ValidationError(f"exponent r must be > 1, got {r}")
    if not regs:
        raise ValidationError("view weights need at least one regularizer")
    energies = np.array([max(reg.energy(W), ENERGY_FLOOR) for reg in regs])
    return softmax(-np.log(energies) / (r - 1.0))


def _init_dictionary(rng: np.random.Generator, X: np.ndarray, n_atoms: int) -> np.ndarray:
    n = X.shape[1]
    cols = rng.choice(n, n_atoms, replace=n_atoms > n)
    D = np.array(X[:, cols], dtype=float)
    norms = np.linalg.norm(D, axis=0)
    return D / np.where(norms > 0, norms, 1.0)[None, :]


def init_state(data: MultiviewDataset, hp: Hyperparams, n_weights: int, seed: int) -> ModelState:
    """D from random normalized data columns, W = 0, uniform α."""
    rng = np.random.default_rng(seed)
    dictionaries = [_init_dictionary(rng, data.X(v), hp.n_atoms) for v in range(data.n_views)]
    dictionaries.append(_init_dictionary(rng, data.Y, hp.n_atoms))
    return ModelState(dictionaries=dictionaries, codes=np.zeros((hp.n_atoms, data.total_count)),
                      alpha=np.full(n_weights, 1.0 / n_weights), labelled_count=data.labelled_count,
                      hyperparams=hp)


def _check_descent(prev: ObjectiveBreakdown, cur: ObjectiveBreakdown, block: str, it: int) -> None:
    if cur.total > prev.total + DESCENT_SLACK * max(abs(prev.total), 1e-12):
        raise InvariantError(
            f"objective increased after the {block} update at outer iteration {it}: "
            f"{prev.total:.12g} -> {cur.total:.12g}")


def fit(data: MultiviewDataset, hp: Hyperparams, seed: int = 0,
        regs: Optional[List[RegularizerMatrix]] = None) -> FitResult:
    """
    Alternating optimization codes → dictionaries → view weights until the relative
    change of the objective drops below ``outer_tol``

    Args:
        regs: prebuilt regularizers; built from ``hp`` when None

    Returns:
        FitResult whose first trace row is the objective at initialization

    Raises:
        InvariantError: a block update increased the objective
    """
    hp.validate()
    if regs is None:
        regs = build_view_regularizers(data, hp.graph_config()) if hp.regularizer != "none" else []
    manifold_on = bool(regs) and hp.gamma3 > 0
    n_weights = len(regs) if regs else data.n_views + 1

    state = init_state(data, hp, n_weights, seed)
    current = objective(state, data, regs, hp)
    trace = [current]
    logger.info(f"开始训练: V={data.n_views}, N={data.total_count}, l={data.labelled_count}, "
                f"N_d={hp.n_atoms}, regularizer={hp.regularizer}, objective={current.total:.8g}")

    for it in range(1, hp.outer_max_iters + 1):
        start = current
        H = manifold_matrix(regs, state.alpha, hp.r) if manifold_on else None
        state = replace(state, codes=update_codes(state, data, H, hp))
        after = objective(state, data, regs, hp)
        _check_descent(current, after, "code", it)
        current = after

        state = replace(state, dictionaries=update_dictionary(state, data, hp))
        after = objective(state, data, regs, hp)
        _check_descent(current, after, "dictionary", it)
        current = after

        if manifold_on:
            state = replace(state, alpha=update_alpha(state.codes, regs, hp.r))
            after = objective(state, data, regs, hp)
            _check_descent(current, after, "view weight", it)
            current = after
            logger.debug(f"view weights: {np.round(state.alpha, 6).tolist()}")

        state.check_invariants()
        trace.append(current)
        rel = (start.total - current.total) / max(abs(start.total), 1e-12)
        logger.info(f"第 {it} 轮: objective={current.total:.10g}, 相对变化={rel:.3e}")
        if rel < hp.outer_tol:
            break

    logger.info(f"训练结束: {len(trace) - 1} 轮, objective={current.total:.10g}")
    return FitResult(state=state, trace=trace, regularizers=list(regs))
