"""Exponential-interaction target densities on the cube [-1,1]^d.

A target density has the form ``p0(x) = exp(sum_J f_J(x_J) - logZ)`` where
the sum runs over a clique set (index subsets J of size <= dstar) and each
component f_J is a finite tensor-product cosine series.  The cosine family is
chosen because every derivative of the basis has a closed-form sup bound, so
Holder-smoothness certificates and density bounds come out of interval
arithmetic on the coefficients instead of being asserted.

Coordinates are 0-based throughout (including the YAML spec files).

Basis convention: for a multi-index k the basis function on [-1,1]^r is
``phi_k(u) = prod_j cos(k_j * pi * (u_j + 1) / 2)``.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import DomainError, FormatError, NumericError, UnsupportedError
from .quadrature import gauss_legendre

_HALF_PI = 0.5 * np.pi


# ---------------------------------------------------------------------------
# Clique structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CliqueSet:
    """Ambient dimension, interaction order and the clique list."""

    d: int
    dstar: int
    cliques: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.d < 1 or not (1 <= self.dstar <= self.d):
            raise DomainError(f"need 1 <= dstar <= d, got d={self.d}, dstar={self.dstar}")
        norm = tuple(tuple(sorted(set(j))) for j in self.cliques)
        object.__setattr__(self, "cliques", norm)
        seen = set()
        for j in norm:
            if len(j) == 0 or len(j) > self.dstar:
                raise DomainError(f"clique {j} violates 1 <= |J| <= dstar={self.dstar}")
            if any(not (0 <= i < self.d) for i in j):
                raise DomainError(f"clique {j} has indices outside 0..{self.d - 1}")
            if j in seen:
                raise DomainError(f"duplicate clique {j}")
            seen.add(j)


def cliques_from_graph(d: int, edges, dstar: int) -> CliqueSet:
    """All size-dstar vertex subsets that are complete in the given graph."""
    eset = {tuple(sorted(e)) for e in edges}
    cliques = []
    for sub in itertools.combinations(range(d), dstar):
        if all(tuple(sorted(p)) in eset for p in itertools.combinations(sub, 2)):
            cliques.append(sub)
    if not cliques:
        raise DomainError("dependency graph has no cliques of the requested size")
    return CliqueSet(d=d, dstar=dstar, cliques=tuple(cliques))


# ---------------------------------------------------------------------------
# Smooth components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothComponent:
    """Finite tensor-product cosine series with a smoothness certificate.

    ``freqs`` is an integer array (K, arity) of multi-indices, ``coefs`` the
    matching coefficients; ``linear`` optionally adds a term ``l . u`` (used
    for exactly-linear test targets).  ``holder_beta``/``holder_C`` state the
    certified smoothness class; construction validates the certificate.
    """

    arity: int
    freqs: np.ndarray
    coefs: np.ndarray
    holder_beta: float
    holder_C: float
    linear: np.ndarray | None = None

    def __post_init__(self):
        freqs = np.atleast_2d(np.asarray(self.freqs, dtype=np.int64))
        coefs = np.atleast_1d(np.asarray(self.coefs, dtype=float))
        if freqs.shape != (coefs.size, self.arity):
            raise DomainError(
                f"freqs shape {freqs.shape} does not match {coefs.size} "
                f"coefficients of arity {self.arity}"
            )
        if self.holder_beta <= 0 or self.holder_C <= 0:
            raise DomainError("holder_beta and holder_C must be positive")
        lin = np.zeros(self.arity) if self.linear is None else np.asarray(self.linear, dtype=float)
        if lin.shape != (self.arity,):
            raise DomainError("linear term must have one coefficient per argument")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "coefs", coefs)
        object.__setattr__(self, "linear", lin)
        cert = self.certified_holder_constant()
        if cert > self.holder_C * (1.0 + 1e-12):
            raise DomainError(
                f"certified smoothness constant {cert:.6g} exceeds the "
                f"declared holder_C={self.holder_C:.6g}"
            )

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Evaluate on points of shape (N, arity) or (arity,)."""
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        pts = np.atleast_2d(u)
        args = _HALF_PI * (pts + 1.0)
        prod = np.ones((pts.shape[0], self.coefs.size))
        for j in range(self.arity):
            prod *= np.cos(np.outer(args[:, j], self.freqs[:, j]))
        out = prod @ self.coefs + pts @ self.linear
        return float(out[0]) if single else out

    def sup_bound(self) -> float:
        """Certified bound on sup |f| over the cube."""
        return float(np.abs(self.coefs).sum() + np.abs(self.linear).sum())

    def partial_sup_bounds(self, alpha: tuple[int, ...]) -> float:
        """Certified sup bound on the partial derivative d^alpha f (cube)."""
        scale = np.prod((_HALF_PI * self.freqs) ** np.asarray(alpha), axis=1)
        bound = float(np.abs(self.coefs * scale).sum())
        order = sum(alpha)
        if order == 0:
            bound += float(np.abs(self.linear).sum())
        elif order == 1:
            j = alpha.index(1)
            bound += abs(float(self.linear[j]))
        return bound

    def gradient_sup_norm(self, alpha: tuple[int, ...] | None = None) -> float:
        """Certified sup of ||grad d^alpha f||_2."""
        alpha = alpha or (0,) * self.arity
        comps = []
        for j in range(self.arity):
            bumped = tuple(a + (1 if i == j else 0) for i, a in enumerate(alpha))
            comps.append(self.partial_sup_bounds(bumped))
        return float(np.linalg.norm(comps))

    def certified_holder_constant(self) -> float:
        """Smallest C for which the (holder_beta, C) certificate is provable.

        For beta = q + s the order-q partials are Holder-s with constant
        L_a if s = 1 and (2 M_a)^(1-s) L_a^s otherwise, where M_a and L_a are
        interval bounds on the partial and its gradient.
        """
        q = math.ceil(self.holder_beta) - 1
        s = self.holder_beta - q
        worst = 0.0
        for alpha in _multi_indices(self.arity, q):
            l_a = self.gradient_sup_norm(alpha)
            if s >= 1.0:
                c_a = l_a
            else:
                m_a = self.partial_sup_bounds(alpha)
                c_a = (2.0 * m_a) ** (1.0 - s) * l_a**s
            worst = max(worst, c_a)
        return worst


def _multi_indices(r: int, q: int):
    if q == 0:
        yield (0,) * r
        return
    for combo in itertools.combinations_with_replacement(range(r), q):
        alpha = [0] * r
        for i in combo:
            alpha[i] += 1
        yield tuple(alpha)


def zero_component(arity: int) -> SmoothComponent:
    """The f == 0 component (uniform factor)."""
    return SmoothComponent(
        arity=arity,
        freqs=np.zeros((1, arity), dtype=np.int64),
        coefs=np.zeros(1),
        holder_beta=1.0,
        holder_C=1e-12,
    )


def make_component(
    arity: int,
    beta: float,
    C: float,
    seed: int,
    max_freq: int = 3,
) -> SmoothComponent:
    """Random component with coefficient decay k^-(beta + arity/2 + 1),
    rescaled so the certified Holder constant equals C exactly."""
    rng = np.random.default_rng(seed)
    freqs = np.array(
        [k for k in itertools.product(range(max_freq + 1), repeat=arity) if any(k)],
        dtype=np.int64,
    )
    mags = np.maximum(np.linalg.norm(freqs, axis=1), 1.0) ** (-(beta + arity / 2 + 1))
    coefs = rng.choice([-1.0, 1.0], size=freqs.shape[0]) * rng.uniform(0.5, 1.0, freqs.shape[0]) * mags
    probe = SmoothComponent(arity, freqs, coefs, beta, 1e300)
    scale = C / probe.certified_holder_constant()
    return SmoothComponent(arity, freqs, coefs * scale, beta, C)


# ---------------------------------------------------------------------------
# The density object
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-6
    start_nodes: int = 8
    max_nodes: int = 64
    mc_points: int = 1_000_000
    mc_seed: int = 0


@dataclass(frozen=True)
class InteractionDensity:
    """Normalized exponential-interaction density on [-1,1]^d."""

    cliques: CliqueSet
    components: tuple[SmoothComponent, ...]
    logZ: float
    quad_tol: float
    c1: float
    mc_stderr: float | None = None

    @property
    def d(self) -> int:
        return self.cliques.d

    @property
    def bounds(self) -> tuple[float, float]:
        return 1.0 / self.c1, self.c1

    def interaction_sum(self, x: np.ndarray) -> np.ndarray:
        """sum_J f_J(x_J) on points (N, d), without the cube-domain check."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for j, f in zip(self.cliques.cliques, self.components):
            out += f(x[:, list(j)])
        return out

    def sup_sum(self) -> float:
        return sum(f.sup_bound() for f in self.components)


def log_density(density: InteractionDensity, x) -> float | np.ndarray:
    """log p0(x) = sum_J f_J(x_J) - logZ; x must lie in the cube."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != density.d:
        raise DomainError(f"expected dimension {density.d}, got {pts.shape[1]}")
    if np.any(np.abs(pts) > 1.0):
        raise DomainError("point outside the support cube [-1,1]^d")
    out = density.interaction_sum(pts) - density.logZ
    return float(out[0]) if single else out


def _merge_duplicates(cliques, components):
    merged: dict[tuple[int, ...], list[SmoothComponent]] = {}
    order: list[tuple[int, ...]] = []
    for j, f in zip(cliques, components):
        key = tuple(sorted(set(j)))
        if key not in merged:
            merged[key] = []
            order.append(key)
        merged[key].append(f)
    out_c, out_f = [], []
    for key in order:
        parts = merged[key]
        if len(parts) == 1:
            out_c.append(key)
            out_f.append(parts[0])
            continue
        freqs = np.concatenate([p.freqs for p in parts])
        coefs = np.concatenate([p.coefs for p in parts])
        beta = min(p.holder_beta for p in parts)
        out_c.append(key)
        out_f.append(
            SmoothComponent(len(key), freqs, coefs, beta, sum(p.holder_C for p in parts))
        )
    return out_c, out_f


def _tensor_log_partition(d, cliques, components, n_nodes) -> float:
    """log int_cube exp(sum f_J) with n_nodes GL points per axis."""
    x, w = gauss_legendre(-1.0, 1.0, n_nodes)
    g = np.zeros((n_nodes,) * d)
    for j, f in zip(cliques, components):
        pts = np.stack(
            [m.reshape(-1) for m in np.meshgrid(*([x] * len(j)), indexing="ij")],
            axis=-1,
        )
        vals = f(pts).reshape((n_nodes,) * len(j))
        shape = [n_nodes if ax in j else 1 for ax in range(d)]
        expanded = np.ones(shape)
        idx = [slice(None) if ax in j else 0 for ax in range(d)]
        expanded[tuple(idx)] = vals
        g = g + expanded
    shift = g.max()
    weight = w
    for _ in range(d - 1):
        weight = np.multiply.outer(weight, w)
    return float(shift + np.log(np.sum(np.exp(g - shift) * weight)))


def normalize(
    cliques: CliqueSet | tuple,
    components,
    quad_spec: QuadSpec = QuadSpec(),
) -> InteractionDensity:
    """Compute logZ and certified bounds for the given clique/component pairs.

    Duplicate cliques are merged by summing their series.  Tensor quadrature
    with nested refinement is used for d <= 4; Monte Carlo with a reported
    standard error beyond that.

    Raises
    ------
    NumericError
        If the refinement does not converge to ``quad_spec.rel_tol``.
    """
    if isinstance(cliques, CliqueSet):
        base = cliques
        raw_cliques = list(base.cliques)
    else:
        raise DomainError("pass a CliqueSet")
    raw_components = list(components)
    if len(raw_cliques) != len(raw_components):
        raise DomainError("one component per clique required")
    for j, f in zip(raw_cliques, raw_components):
        if f.arity != len(set(j)):
            raise DomainError(f"component arity {f.arity} does not match clique {j}")
    merged_c, merged_f = _merge_duplicates(raw_cliques, raw_components)
    clique_set = CliqueSet(d=base.d, dstar=base.dstar, cliques=tuple(merged_c))

    mc_stderr = None
    if base.d <= 4:
        n = quad_spec.start_nodes
        prev = _tensor_log_partition(base.d, merged_c, merged_f, n)
        converged = False
        while n < quad_spec.max_nodes:
            n *= 2
            cur = _tensor_log_partition(base.d, merged_c, merged_f, n)
            err = abs(cur - prev)
            if err <= quad_spec.rel_tol * max(abs(cur), 1.0):
                converged = True
                break
            prev = cur
        if not converged:
            raise NumericError(
                f"partition-function quadrature did not converge "
                f"(last change {err:.3g} at {n} nodes/axis)"
            )
        logZ, tol = cur, err
    else:
        rng = np.random.default_rng(quad_spec.mc_seed)
        total, total_sq, m = 0.0, 0.0, 0
        chunk = 262_144
        tmp = InteractionDensity(clique_set, tuple(merged_f), 0.0, 0.0, np.inf)
        while m < quad_spec.mc_points:
            k = min(chunk, quad_spec.mc_points - m)
            pts = rng.uniform(-1.0, 1.0, size=(k, base.d))
            vals = np.exp(tmp.interaction_sum(pts)) * 2.0**base.d
            total += vals.sum()
            total_sq += (vals**2).sum()
            m += k
        mean = total / m
        var = max(total_sq / m - mean**2, 0.0)
        mc_stderr = math.sqrt(var / m)
        logZ, tol = math.log(mean), mc_stderr / mean

    sup_sum = sum(f.sup_bound() for f in merged_f)
    c1 = math.exp(sup_sum + abs(logZ))
    return InteractionDensity(
        cliques=clique_set,
        components=tuple(merged_f),
        logZ=logZ,
        quad_tol=tol,
        c1=c1,
        mc_stderr=mc_stderr,
    )


def sample(
    density: InteractionDensity,
    n: int,
    rng_seed: int,
    streams: int = 1,
) -> np.ndarray:
    """Exact rejection sampling with the certificate-based uniform envelope.

    Acceptance test: u < exp(sum_J f_J(x) - sum_J sup|f_J|), which never
    exceeds one.  With ``streams > 1`` the draw is split over independent
    child seed streams and concatenated in stream order, so the output is the
    same whether streams run serially or in parallel.
    """
    if n < 1:
        raise DomainError("need n >= 1")
    counts = [n // streams + (1 if i < n % streams else 0) for i in range(streams)]
    children = np.random.SeedSequence(rng_seed).spawn(streams)
    sup_sum = density.sup_sum()
    acc_cert = max(math.exp(density.logZ - sup_sum) / 2.0**density.d, 1e-6)
    out = []
    for count, child in zip(counts, children):
        rng = np.random.default_rng(child)
        got = []
        remaining = count
        while remaining > 0:
            batch = min(int(math.ceil(remaining / acc_cert)) + 16, 1 << 20)
            x = rng.uniform(-1.0, 1.0, size=(batch, density.d))
            u = rng.random(batch)
            keep = u < np.exp(density.interaction_sum(x) - sup_sum)
            acc = x[keep][:remaining]
            got.append(acc)
            remaining -= acc.shape[0]
        out.append(np.concatenate(got, axis=0))
    return np.concatenate(out, axis=0)


def marginal_1d(density: InteractionDensity, coordinate: int, grid) -> np.ndarray:
    """Marginal density of one coordinate on the given grid (d <= 4)."""
    d = density.d
    if d > 4:
        raise UnsupportedError("tensor marginal supported only for d <= 4")
    if not (0 <= coordinate < d):
        raise DomainError(f"coordinate {coordinate} outside 0..{d - 1}")
    grid = np.asarray(grid, dtype=float)
    others = [ax for ax in range(d) if ax != coordinate]

    def values(n_nodes: int) -> np.ndarray:
        if not others:
            g = density.interaction_sum(grid[:, None])
            return np.exp(g - density.logZ)
        x, w = gauss_legendre(-1.0, 1.0, n_nodes)
        mesh = np.meshgrid(*([x] * len(others)), indexing="ij")
        rest = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        weight = w
        for _ in range(len(others) - 1):
            weight = np.multiply.outer(weight, w)
        weight = weight.reshape(-1)
        pts = np.empty((rest.shape[0], d))
        out = np.empty(grid.size)
        for i, v in enumerate(grid):
            pts[:, coordinate] = v
            pts[:, others] = rest
            g = density.interaction_sum(pts)
            out[i] = np.dot(np.exp(g - density.logZ), weight)
        return out

    prev = values(8)
    for n_nodes in (16, 32, 64):
        cur = values(n_nodes)
        change = np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-12))
        if change <= 1e-6:
            return cur
        prev = cur
    raise NumericError("marginal quadrature did not converge")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_FORMAT = "scorelab-density-v1"


def density_hash(density: InteractionDensity) -> str:
    h = hashlib.sha256()
    h.update(f"{density.cliques.d}|{density.cliques.dstar}".encode())
    for j, f in zip(density.cliques.cliques, density.components):
        h.update(repr(j).encode())
        h.update(np.ascontiguousarray(f.freqs).tobytes())
        h.update(np.ascontiguousarray(f.coefs).tobytes())
        h.update(np.ascontiguousarray(f.linear).tobytes())
    return h.hexdigest()[:16]


def save_density(density: InteractionDensity, path) -> None:
    doc = {
        "format": _FORMAT,
        "d": density.cliques.d,
        "dstar": density.cliques.dstar,
        "cliques": [
            {
                "indices": list(j),
                "holder_beta": float(f.holder_beta),
                "holder_C": float(f.holder_C),
                "coefficients": [
                    {"k": [int(v) for v in k], "c": float(c)}
                    for k, c in zip(f.freqs, f.coefs)
                ],
                **(
                    {"linear": [float(v) for v in f.linear]}
                    if np.any(f.linear)
                    else {}
                ),
            }
            for j, f in zip(density.cliques.cliques, density.components)
        ],
        "logZ": float(density.logZ),
        "quad_tol": float(density.quad_tol),
        "c1": float(density.c1),
        "hash": density_hash(density),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_density(path, quad_spec: QuadSpec = QuadSpec()) -> InteractionDensity:
    """Load a density spec; normalizes if logZ is absent.

    Cliques may carry explicit ``coefficients`` or a ``generator`` block
    ``{seed, max_freq}`` expanded through :func:`make_component` with the
    clique's declared beta and C.
    """
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise FormatError(f"not a {_FORMAT} file: {path}")
    cliques, components = [], []
    for entry in doc["cliques"]:
        idx = tuple(int(i) for i in entry["indices"])
        beta = float(entry.get("holder_beta", 1.0))
        c = float(entry.get("holder_C", 1.0))
        if "coefficients" in entry:
            freqs = np.array([row["k"] for row in entry["coefficients"]], dtype=np.int64)
            coefs = np.array([row["c"] for row in entry["coefficients"]], dtype=float)
            lin = np.asarray(entry["linear"], dtype=float) if "linear" in entry else None
            comp = SmoothComponent(len(idx), freqs, coefs, beta, c, linear=lin)
        elif "generator" in entry:
            gen = entry["generator"]
            comp = make_component(
                len(idx), beta, c, int(gen["seed"]), int(gen.get("max_freq", 3))
            )
        else:
            raise FormatError(f"clique {idx} has neither coefficients nor generator")
        cliques.append(idx)
        components.append(comp)
    cs = CliqueSet(d=int(doc["d"]), dstar=int(doc["dstar"]), cliques=tuple(cliques))
    dens = normalize(cs, components, quad_spec)
    if "logZ" in doc and abs(dens.logZ - float(doc["logZ"])) > 1e-4:
        raise FormatError(
            f"stored logZ {doc['logZ']} disagrees with recomputed {dens.logZ}"
        )
    return dens


def save_samples(path, x: np.ndarray, seed: int, dens_hash: str) -> None:
    """CSV matrix with a provenance header (d, n, seed, density hash)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    buf = io.StringIO()
    buf.write("# scorelab-samples v1\n")
    buf.write(f"# d={x.shape[1]} n={x.shape[0]} seed={seed} density={dens_hash}\n")
    np.savetxt(buf, x, delimiter=",", fmt="%.17g")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_samples(path) -> tuple[np.ndarray, dict]:
    with open(path) as fh:
        lines = fh.readlines()
    if not lines or not lines[0].startswith("# scorelab-samples"):
        raise FormatError(f"not a scorelab sample file: {path}")
    meta = {}
    for tok in lines[1].lstrip("# ").split():
        key, val = tok.split("=")
        meta[key] = val
    x = np.loadtxt(io.StringIO("".join(lines[2:])), delimiter=",", ndmin=2)
    if x.shape != (int(meta["n"]), int(meta["d"])):
        raise FormatError("sample matrix shape disagrees with its header")
    return x, meta
