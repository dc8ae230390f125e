"""Control plans that convert ``rho`` into ``sigma``.

A plan is a list of instantaneous unitaries and hold segments. During a
steered hold the eigenbasis of the state is pinned to the given basis, so the
spectrum flows under the classical generator ``Q`` of that basis; an
unsteered hold is plain free evolution (used to let dephasing act).

Three routes are provided:

* optimal Lindbladians (``M (+) D`` form): one two-level mixing per
  T-transform of the majorization decomposition;
* dephasing Lindbladians: a Schur-Horn rotation followed by dephasing, with
  permute-and-dephase rounds when some dephasing block has rank > 1;
* depolarizing noise: reachable targets lie on the segment between the
  spectrum and the uniform vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (
    MajorizationViolated,
    NoMixingPair,
    NotDephasing,
    NoSynthesisRoute,
    NotOptimal,
    SOutOfRange,
    ValidationError,
    ZeroLindbladian,
)
from .lindblad import (
    DensityMatrix,
    Lindbladian,
    as_density,
    classify_dephasing,
    dagger,
    is_depolarizing,
    propagate,
    relaxation_time,
)
from .majorization import (
    PermutationMap,
    ProbVector,
    TTransform,
    apply_chain,
    decompose_into_ttransforms,
    majorizes,
    normalize_half_interval,
)
from .optimality import OptimalityVerdict, is_optimal
from .spectrum import hold_duration, q_matrix

S_CAP_EPSILON = 1e-8
DEPHASE_TOL = 1e-8
UNITARY_TOL = 1e-10
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    err = np.abs(dagger(u) @ u - np.eye(u.shape[0])).max()
    if err > tol:
        raise ValidationError(f"matrix is not unitary (error {err:.2e})")
    return u


@dataclass(frozen=True, eq=False)
class InstantUnitary:
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _check_unitary(self.u))

    @property
    def d(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True, eq=False)
class HoldBasis:
    basis: np.ndarray
    duration: float
    annotation: TTransform | None = None
    steered: bool = True

    def __post_init__(self):
        object.__setattr__(self, "basis", _check_unitary(self.basis))
        if not self.duration >= 0:
            raise ValidationError(f"hold duration must be >= 0, got {self.duration}")

    @property
    def d(self) -> int:
        return self.basis.shape[0]


ControlStep = Union[InstantUnitary, HoldBasis]


@dataclass(frozen=True, eq=False)
class ConversionPlan:
    steps: tuple
    target_spectrum: ProbVector
    s_cap: float = S_CAP_EPSILON
    dephase_tol: float = DEPHASE_TOL
    route: str = ""
    # spectrum bookkeeping: sorted spectrum -> initial_permutation -> spectrum_chain
    spectrum_chain: tuple = ()
    initial_permutation: PermutationMap | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        d = self.target_spectrum.d
        for step in self.steps:
            if step.d != d:
                raise ValidationError(f"step of dimension {step.d} in a {d}-dimensional plan")

    @property
    def d(self) -> int:
        return self.target_spectrum.d

    @property
    def holds(self) -> list[HoldBasis]:
        return [s for s in self.steps if isinstance(s, HoldBasis)]

    @property
    def unitaries(self) -> list[InstantUnitary]:
        return [s for s in self.steps if isinstance(s, InstantUnitary)]

    def total_duration(self) -> float:
        return float(sum(h.duration for h in self.holds))

    def predicted_spectrum(self, spectrum) -> np.ndarray:
        """Sorted spectrum after the recorded permutation and T-transforms."""
        v = np.sort(np.asarray(spectrum, dtype=float))[::-1]
        if self.initial_permutation is not None:
            v = self.initial_permutation.apply(v)
        return np.sort(apply_chain(self.spectrum_chain, v))[::-1]

    def to_dict(self) -> dict:
        from .io import matrix_to_json

        steps = []
        for step in self.steps:
            if isinstance(step, InstantUnitary):
                steps.append({"type": "unitary", "U": matrix_to_json(step.u)})
            else:
                entry = {
                    "type": "hold",
                    "basis": matrix_to_json(step.basis),
                    "t": float(step.duration),
                    "steered": bool(step.steered),
                }
                if step.annotation is not None:
                    entry["ttransform"] = step.annotation.to_dict()
                steps.append(entry)
        return {
            "steps": steps,
            "target_spectrum": self.target_spectrum.tolist(),
            "route": self.route,
            "mode_hints": {"s_cap": self.s_cap, "dephase_tol": self.dephase_tol},
            "spectrum_chain": [t.to_dict() for t in self.spectrum_chain],
            "initial_permutation": (
                list(self.initial_permutation.image) if self.initial_permutation is not None else None
            ),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConversionPlan":
        from .io import matrix_from_json

        try:
            steps = []
            for entry in data["steps"]:
                kind = entry["type"]
                if kind == "unitary":
                    steps.append(InstantUnitary(matrix_from_json(entry["U"])))
                elif kind == "hold":
                    ann = entry.get("ttransform")
                    steps.append(
                        HoldBasis(
                            matrix_from_json(entry["basis"]),
                            float(entry["t"]),
                            TTransform.from_dict(ann) if ann else None,
                            bool(entry.get("steered", True)),
                        )
                    )
                else:
                    raise ValidationError(f"unknown step type {kind!r}")
            hints = data.get("mode_hints", {})
            perm = data.get("initial_permutation")
            return cls(
                tuple(steps),
                ProbVector(data["target_spectrum"]),
                s_cap=float(hints.get("s_cap", S_CAP_EPSILON)),
                dephase_tol=float(hints.get("dephase_tol", DEPHASE_TOL)),
                route=data.get("route", ""),
                spectrum_chain=tuple(TTransform.from_dict(t) for t in data.get("spectrum_chain", [])),
                initial_permutation=PermutationMap(tuple(perm)) if perm is not None else None,
                provenance=dict(data.get("provenance", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed plan: {exc}") from exc


def merge_unitaries(steps: Sequence[ControlStep]) -> list[ControlStep]:
    """Fuse runs of consecutive instantaneous unitaries into one."""
    out: list[ControlStep] = []
    for step in steps:
        if isinstance(step, InstantUnitary) and out and isinstance(out[-1], InstantUnitary):
            out[-1] = InstantUnitary(step.u @ out[-1].u)
        else:
            out.append(step)
    return out


def _sorted_eig(state: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    w, v = state.eigh_sorted()
    w = np.clip(w, 0.0, None)
    return w / w.sum(), v


def _routing(d: int, src: tuple[int, int], dst: tuple[int, int]) -> PermutationMap:
    """Permutation putting level ``src[0]`` at ``dst[0]`` and ``src[1]`` at ``dst[1]``,
    keeping every other level in place where possible."""
    image = [None] * d
    image[dst[0]], image[dst[1]] = src
    free_src = [k for k in range(d) if k not in src]
    free_pos = [k for k in range(d) if k not in dst]
    leftovers = [k for k in free_src if k not in free_pos]
    for pos in free_pos:
        if pos in free_src:
            image[pos] = pos
        else:
            image[pos] = leftovers.pop(0)
    return PermutationMap(tuple(image))


def embed_two_level(u2: np.ndarray, d: int, pair: tuple[int, int]) -> np.ndarray:
    u = np.eye(d, dtype=complex)
    i, j = pair
    u[np.ix_([i, j], [i, j])] = u2
    return u


@dataclass(frozen=True, eq=False)
class MixingFrame:
    """Where and how fast a two-level mixing runs.

    ``hold_basis`` is the eigenbasis to pin; within it the eigenvalue
    generator is ``gamma * [[-1, 1], [1, -1]]`` on ``pair`` and zero elsewhere.
    """

    frame: np.ndarray
    hold_basis: np.ndarray
    pair: tuple
    gamma: float
    case: str


def mixing_frame(
    lind: Lindbladian, frame: np.ndarray, block_pair: tuple[int, int], tol: float = 1e-9
) -> MixingFrame:
    """Choose the hold basis realizing T-transforms for operators of the form
    ``M (+) D`` in ``frame`` with the block on ``block_pair``.

    Case (i): some ``M`` is off-diagonal; hold in ``frame`` itself with rate
    ``sum |M_12|^2``. Case (ii): everything is diagonal; rotate one level
    pair by a Hadamard and hold there, rate ``sum |L_ii - L_jj|^2 / 4``,
    taking the pair with the largest rate.
    """
    d = lind.d
    frame = np.asarray(frame, dtype=complex)
    rotated = [dagger(frame) @ op @ frame for op in lind.ops]
    scale = max([1.0] + [float(np.abs(r).max()) ** 2 for r in rotated])
    a, b = block_pair
    gamma = float(sum(abs(r[a, b]) ** 2 for r in rotated))
    if gamma > tol * scale:
        hold, pair, case = frame, (a, b), "i"
    else:
        best, pair = 0.0, None
        for i in range(d):
            for j in range(i + 1, d):
                g = 0.25 * sum(abs(r[i, i] - r[j, j]) ** 2 for r in rotated)
                if g > best + 1e-15:
                    best, pair = g, (i, j)
        if pair is None or best <= tol * scale:
            raise NoMixingPair("no level pair has a positive mixing rate")
        gamma = best
        hold, case = frame @ embed_two_level(HADAMARD, d, pair), "ii"

    q = q_matrix(lind.ops, hold).entries
    expected = np.zeros((d, d))
    i, j = pair
    expected[np.ix_([i, j], [i, j])] = gamma * np.array([[-1.0, 1.0], [1.0, -1.0]])
    if np.abs(q - expected).max() > 1e-6 * max(1.0, gamma):
        raise NotOptimal("operators are not of the M (+) D form in the given basis")
    return MixingFrame(frame, hold, pair, gamma, case)


def synthesize_ttransform_step(
    lind: Lindbladian,
    bprime: np.ndarray,
    block_pair: tuple[int, int],
    target_pair: tuple[int, int],
    s: float,
    frame: MixingFrame | None = None,
) -> list[ControlStep]:
    """Steps realizing ``T_{target_pair}(s)`` on the populations of ``bprime``.

    Route the target levels onto the mixing pair, hold, route back.
    """
    if not (0.0 <= s < 0.5):
        raise SOutOfRange(f"s={s} must lie in [0, 1/2)")
    if target_pair[0] == target_pair[1]:
        raise ValidationError("target pair needs two distinct levels")
    frame = mixing_frame(lind, bprime, block_pair) if frame is None else frame
    d = lind.d
    route = _routing(d, tuple(target_pair), frame.pair).matrix()
    bprime = frame.frame
    hold = frame.hold_basis
    t = hold_duration(frame.gamma, s)
    return [
        InstantUnitary(hold @ route @ dagger(bprime)),
        HoldBasis(hold, t, TTransform(int(target_pair[0]), int(target_pair[1]), float(s))),
        InstantUnitary(bprime @ route.T @ dagger(hold)),
    ]


def _provenance(lind: Lindbladian, s_cap: float, **extra) -> dict:
    from .io import lindbladian_hash

    out = {"lindbladian_hash": lindbladian_hash(lind), "s_cap": float(s_cap)}
    out["tolerances"] = {"majorization": 1e-10, "unitary": UNITARY_TOL, **extra}
    return out


def synthesize_conversion(
    lind: Lindbladian,
    rho,
    sigma,
    s_cap_epsilon: float = S_CAP_EPSILON,
    verdict: OptimalityVerdict | None = None,
    trials: int = 16,
    seed: int = 0,
    maj_tol: float = 1e-10,
) -> ConversionPlan:
    """Plan for an optimal Lindbladian: one two-level mixing per T-transform.

    Each T-transform weight is capped at ``1/2 - s_cap_epsilon``, since the
    exact value 1/2 needs an infinitely long hold.
    """
    if not (0 < s_cap_epsilon < 0.5):
        raise ValueError("s_cap_epsilon must lie in (0, 1/2)")
    rho, sigma = as_density(rho), as_density(sigma)
    d = lind.d
    if rho.d != d or sigma.d != d:
        raise ValidationError("state and Lindbladian dimensions differ")
    verdict = is_optimal(lind, trials=trials, seed=seed) if verdict is None else verdict
    if verdict.status != "optimal":
        raise NotOptimal(f"Lindbladian is {verdict.status}: {verdict.reason}")
    lam, v_rho = _sorted_eig(rho)
    mu, v_sigma = _sorted_eig(sigma)
    if not majorizes(lam, mu, maj_tol):
        raise MajorizationViolated("spectrum of rho does not majorize that of sigma")

    chain = decompose_into_ttransforms(lam, mu, maj_tol)
    chain, perm = normalize_half_interval(chain, d)
    bprime = np.asarray(verdict.basis, dtype=complex)
    steps: list[ControlStep] = [InstantUnitary(bprime @ perm.matrix() @ dagger(v_rho))]
    recorded = []
    if chain:
        frame = mixing_frame(lind, bprime, verdict.pair)
        for t in chain:
            s = min(t.s, 0.5 - s_cap_epsilon)
            steps += synthesize_ttransform_step(lind, bprime, verdict.pair, (t.i, t.j), s, frame)
            recorded.append(TTransform(t.i, t.j, s))
    steps.append(InstantUnitary(v_sigma @ dagger(bprime)))
    return ConversionPlan(
        tuple(merge_unitaries(steps)),
        ProbVector(mu),
        s_cap=s_cap_epsilon,
        route="optimal",
        spectrum_chain=tuple(recorded),
        initial_permutation=perm,
        provenance=_provenance(lind, s_cap_epsilon),
    )


def _givens_angle(a: float, b: float, r: float, x: float) -> float:
    """Angle with ``cos^2 a + sin^2 b - 2 sin cos r = x`` (``x`` between ``a`` and ``b``)."""
    half = 0.5 * (a - b)
    radius = np.hypot(half, r)
    if radius == 0.0:
        return 0.0
    psi = np.arctan2(r, half)
    return 0.5 * (np.arccos(np.clip((x - 0.5 * (a + b)) / radius, -1.0, 1.0)) - psi)


def schur_horn_unitary(rho, target_diag, tol: float = 1e-10) -> np.ndarray:
    """Unitary ``U`` with ``diag(U rho U^dag) = target_diag``.

    The T-transforms between the sorted spectrum and the sorted target are
    applied one at a time to the diagonal by real plane rotations; the angle
    accounts for the off-diagonal entry already present in that plane, so
    each rotation lands both diagonal entries exactly.
    """
    rho = as_density(rho)
    target = np.asarray(target_diag, dtype=float)
    if target.shape != (rho.d,):
        raise ValidationError("target diagonal has the wrong length")
    lam, v = _sorted_eig(rho)
    if not majorizes(lam, target, tol):
        raise MajorizationViolated("spectrum does not majorize the target diagonal")
    order = np.argsort(-target, kind="stable")
    t_sorted = target[order]
    chain = decompose_into_ttransforms(lam, t_sorted / t_sorted.sum(), tol)
    a = np.diag(lam).astype(float)
    w = np.eye(rho.d)
    for t in chain:
        k, l = t.i, t.j
        x = (1.0 - t.s) * a[k, k] + t.s * a[l, l]
        theta = _givens_angle(a[k, k], a[l, l], a[k, l], x)
        g = np.eye(rho.d)
        c, sn = np.cos(theta), np.sin(theta)
        g[k, k] = g[l, l] = c
        g[k, l], g[l, k] = -sn, sn
        a = g @ a @ g.T
        w = g @ w
    perm = PermutationMap(tuple(order)).matrix()
    return perm.T @ w @ dagger(v)


def _coherent_pairs(y: np.ndarray, tol: float) -> list[tuple[int, int]]:
    d = y.shape[0]
    return [(k, l) for k in range(d) for l in range(k + 1, d) if abs(y[k, l]) >= tol]


def _separating_permutation(labels: np.ndarray, pairs: list[tuple[int, int]]) -> PermutationMap:
    """Permutation (acting as ``(P v)[k] = v[image[k]]``) that sends as many
    coherent pairs as possible into different blocks.

    Tries every cyclic shift first, then every transposition.
    """
    d = len(labels)
    candidates = []
    for c in range(1, d):
        candidates.append(tuple((k + c) % d for k in range(d)))
    for i in range(d):
        for j in range(i + 1, d):
            image = list(range(d))
            image[i], image[j] = j, i
            candidates.append(tuple(image))
    best, best_kills = None, 0
    for image in candidates:
        pos = np.argsort(image)  # where each level ends up
        kills = sum(labels[pos[k]] != labels[pos[l]] for k, l in pairs)
        if kills > best_kills:
            best, best_kills = image, kills
    if best is None:
        raise NotDephasing("no permutation separates the remaining coherences")
    return PermutationMap(best)


def synthesize_dephasing_conversion(
    lind: Lindbladian,
    rho,
    sigma,
    dephase_tol: float = DEPHASE_TOL,
    eps: float = 1e-8,
    max_rounds: int | None = None,
    maj_tol: float = 1e-10,
) -> ConversionPlan:
    """Plan for a dephasing Lindbladian.

    Rotate so that the diagonal in the dephasing basis equals the target
    spectrum (Schur-Horn), let the dissipation erase the coherences between
    blocks, then, while coherences survive inside blocks, permute levels so
    those coherences straddle blocks and dephase again.
    """
    rho, sigma = as_density(rho), as_density(sigma)
    d = lind.d
    structure = classify_dephasing(lind)
    if structure is None:
        raise NotDephasing("operators are not a commuting normal family")
    lam, _ = _sorted_eig(rho)
    mu, v_sigma = _sorted_eig(sigma)
    if not majorizes(lam, mu, maj_tol):
        raise MajorizationViolated("spectrum of rho does not majorize that of sigma")
    basis = structure.basis
    labels = structure.block_of()
    chain = tuple(decompose_into_ttransforms(lam, mu, maj_tol))
    common = dict(
        s_cap=0.0,
        dephase_tol=dephase_tol,
        route="dephasing",
        spectrum_chain=chain,
        initial_permutation=PermutationMap.identity(d),
    )

    def finish(state_mat: np.ndarray) -> InstantUnitary:
        diag = np.real(np.diag(dagger(basis) @ state_mat @ basis))
        sort = PermutationMap(tuple(np.argsort(-diag, kind="stable"))).matrix()
        return InstantUnitary(v_sigma @ sort @ dagger(basis))

    y0 = dagger(basis) @ rho.mat @ basis
    off0 = np.abs(y0 - np.diag(np.diag(y0))).max() if d > 1 else 0.0
    if off0 < dephase_tol and np.allclose(np.sort(np.real(np.diag(y0)))[::-1], mu, atol=1e-10):
        return ConversionPlan((finish(rho.mat),), ProbVector(mu), provenance=_provenance(lind, 0.0), **common)

    if len(structure.blocks) < 2:
        raise NotDephasing("a single dephasing block cannot change the spectrum")

    t_hold = relaxation_time(lind, eps)
    u1 = basis @ schur_horn_unitary(rho, mu, maj_tol)
    steps: list[ControlStep] = [InstantUnitary(u1), HoldBasis(basis, t_hold, steered=False)]
    state = propagate(lind, DensityMatrix(u1 @ rho.mat @ dagger(u1)), t_hold)
    max_rounds = d * d if max_rounds is None else max_rounds
    for _ in range(max_rounds):
        pairs = _coherent_pairs(dagger(basis) @ state.mat @ basis, dephase_tol)
        if not pairs:
            break
        perm = _separating_permutation(labels, pairs)
        u = basis @ perm.matrix() @ dagger(basis)
        steps += [InstantUnitary(u), HoldBasis(basis, t_hold, steered=False)]
        state = propagate(lind, DensityMatrix(u @ state.mat @ dagger(u)), t_hold)
    else:
        if _coherent_pairs(dagger(basis) @ state.mat @ basis, dephase_tol):
            raise NotDephasing(f"coherences survive after {max_rounds} rounds")
    steps.append(finish(state.mat))
    return ConversionPlan(
        tuple(merge_unitaries(steps)),
        ProbVector(mu),
        provenance=_provenance(lind, 0.0, dephase=dephase_tol, relaxation_eps=eps),
        **common,
    )


def depolarizing_reachable(rho, sigma, tol: float = 1e-8) -> float | None:
    """Weight ``s`` in ``[0, 1]`` with ``spec(sigma) = s spec(rho) + (1 - s)/d``, or ``None``."""
    rho, sigma = as_density(rho), as_density(sigma)
    if rho.d != sigma.d:
        raise ValidationError("dimensions differ")
    d = rho.d
    lam, _ = _sorted_eig(rho)
    mu, _ = _sorted_eig(sigma)
    dev = lam - 1.0 / d
    k = int(np.argmax(np.abs(dev)))
    if abs(dev[k]) <= tol:
        return 1.0 if np.abs(mu - 1.0 / d).max() <= tol else None
    s = (mu[k] - 1.0 / d) / dev[k]
    if s < -tol or s > 1 + tol:
        return None
    s = float(np.clip(s, 0.0, 1.0))
    if np.abs(s * lam + (1 - s) / d - mu).max() > tol:
        return None
    return s


def synthesize_depolarizing_conversion(
    lind: Lindbladian, rho, sigma, s_cap_epsilon: float = S_CAP_EPSILON
) -> ConversionPlan:
    """Rotate into the target eigenbasis and let depolarizing noise run.

    A target at ``s = 0`` (the maximally mixed state) is approached to within
    ``s_cap_epsilon``.
    """
    if not is_depolarizing(lind):
        raise NoSynthesisRoute("Lindbladian is not the unit-rate depolarizing generator")
    rho, sigma = as_density(rho), as_density(sigma)
    s = depolarizing_reachable(rho, sigma)
    if s is None:
        raise NoSynthesisRoute("target spectrum is not on the depolarizing mixing line")
    _, v_rho = _sorted_eig(rho)
    mu, v_sigma = _sorted_eig(sigma)
    t = float(-np.log(max(s, s_cap_epsilon)))
    steps = [InstantUnitary(v_sigma @ dagger(v_rho))]
    if t > 0:
        steps.append(HoldBasis(v_sigma, t, steered=False))
    return ConversionPlan(
        tuple(steps), ProbVector(mu), s_cap=s_cap_epsilon, route="depolarizing",
        provenance=_provenance(lind, s_cap_epsilon),
    )


def synthesize_any(
    lind: Lindbladian,
    rho,
    sigma,
    s_cap_epsilon: float = S_CAP_EPSILON,
    dephase_tol: float = DEPHASE_TOL,
    trials: int = 16,
    seed: int = 0,
    maj_tol: float = 1e-10,
) -> ConversionPlan:
    """Try the dephasing route, then the general optimal one, then depolarizing.

    Raises ``MajorizationViolated`` when the target is not majorized and
    ``NoSynthesisRoute`` when no construction applies.
    """
    rho, sigma = as_density(rho), as_density(sigma)
    if rho.d != lind.d or sigma.d != lind.d:
        raise ValidationError("state and Lindbladian dimensions differ")
    if not majorizes(rho.spectrum(), sigma.spectrum(), maj_tol):
        raise MajorizationViolated("spectrum of rho does not majorize that of sigma")
    try:
        structure = classify_dephasing(lind)
    except ZeroLindbladian:
        structure = None
    if structure is not None:
        try:
            return synthesize_dephasing_conversion(lind, rho, sigma, dephase_tol=dephase_tol, maj_tol=maj_tol)
        except NotDephasing:
            pass
    verdict = is_optimal(lind, trials=trials, seed=seed)
    if verdict.status == "optimal":
        return synthesize_conversion(lind, rho, sigma, s_cap_epsilon, verdict=verdict, maj_tol=maj_tol)
    if is_depolarizing(lind):
        return synthesize_depolarizing_conversion(lind, rho, sigma, s_cap_epsilon)
    raise NoSynthesisRoute(f"Lindbladian is not dephasing, optimal or depolarizing ({verdict.reason})")
