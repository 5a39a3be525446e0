"""Batch driver: resolve a flat config, run the requested pipeline, emit CSV.

Subcommands

* ``simulate``     one trajectory of any model; per-snapshot summary rows
* ``metric``       one distance between two particle files
* ``chaos-curve``  observable error against a limit oracle across N
* ``omega-n``      sampling error of empirical measures against their law
* ``check``        built-in invariant suite (exit 0 on pass)

Every output embeds the fully resolved config, the code version, the rate
conventions in force and the per-stream draw accounting, and is
byte-identical for a fixed (config, seed) regardless of ``--workers``
(replica tasks own disjoint streams; aggregation is order-preserving).

Stream-id allocation: simulate uses 1 (initial data) and 2 (dynamics);
chaos-curve tasks carry base id 1_000_000 (k+1) + r for replica r of the
k-th N (oracle replicas 900_000_000 + r) and split each base b into 2b
(initial data) and 2b + 1 (dynamics); omega-n uses 10_000 (k+1) plus 0
(reference), 1 (projection directions), 2 + r (replicas); check uses ids
below 1000.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import __version__
from ._parallel import ordered_map
from .config import dump_particles, load_particles, parse_config, write_csv
from .core import (
    EmpiricalMeasure,
    ParticleState,
    RngStream,
    gaussian_sample_state,
    quantile_init_1d,
)
from .elastic import AngularKernel, simulate_kac
from .harness import DegenerateFit, rate_fit, symmetrization_gap
from .limits import OracleEstimate
from .mckean import (
    DriftDiffusionSpec,
    VlasovSpec,
    gradient_catalog,
    interaction_catalog,
    simulate_mkv,
    simulate_vlasov,
)
from .metrics import (
    empirical_sampling_error,
    h_neg_sobolev_norm,
    toscani_norm,
    tv_histogram,
    w1_exact_1d,
    w2_exact_matching,
    w2_sliced,
)
from .observables import ObservableProduct, observable_catalog
from .thermostat import RestitutionParams, simulate_thermostat, temperature

RATE_CONVENTIONS = {
    "rate_convention_elastic": "unordered-pairs:(N-1)/2",
    "rate_convention_thermostat_ordered": "ordered-pairs:N-1",
    "rate_convention_thermostat_halved": "unordered-pairs:(N-1)/2",
}

_MODELS = ("kac_elastic", "inelastic_thermostat", "mckean_vlasov", "vlasov")

# set by the parent right before a pool is spawned (fork shares it)
_TASK_CTX: dict = {}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class _Cfg(dict):
    """Config dict that records the defaults it hands out.

    The CSV header echoes the union of the explicit keys and everything
    resolved from defaults, so rerunning the echoed block needs no
    implicit knowledge.
    """

    def __init__(self, base: dict) -> None:
        super().__init__(base)
        self.used: dict = {}


def _get(cfg: dict, key: str, default=None, required: bool = False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(key, "required but missing")
    if isinstance(cfg, _Cfg) and default is not None:
        cfg.used[key] = default
    return default


def _as_list(v) -> list:
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def _as_floats(v) -> np.ndarray:
    return np.asarray([float(x) for x in _as_list(v)], dtype=np.float64)


# --------------------------------------------------------------------------
# builders


def _build_kernel(cfg: dict, dim: int) -> AngularKernel:
    name = _get(cfg, "kernel", "isotropic")
    if name == "isotropic":
        return AngularKernel.isotropic(dim)
    if name == "two_point":
        if dim != 1:
            raise ConfigError("kernel", "two_point kernels are one-dimensional")
        w = _as_floats(_get(cfg, "kernel_weights", [0.5, 0.5]))
        return AngularKernel.two_point(float(w[0]), float(w[1]))
    raise ConfigError("kernel", f"unknown kernel '{name}'")


def _build_observable(cfg: dict) -> ObservableProduct:
    name = _get(cfg, "observable", required=True)
    params = {}
    if "observable_center" in cfg:
        params["center"] = _as_floats(cfg["observable_center"])
    for key, tgt in (
        ("observable_width", "width"),
        ("observable_scale", "scale"),
        ("observable_axis", "axis"),
    ):
        if key in cfg:
            params[tgt] = cfg[key]
    return ObservableProduct((observable_catalog(str(name), **params),))


def _state_dim(cfg: dict) -> int:
    d = int(_get(cfg, "dimension", required=True))
    if _get(cfg, "model", required=True) == "vlasov":
        return 2 * d
    return d


def _initial_state(cfg: dict, n: int, stream: RngStream) -> ParticleState:
    kind = _get(cfg, "initial", "gaussian")
    m = _state_dim(cfg)
    if kind == "gaussian":
        mean = _as_floats(_get(cfg, "initial_mean", [0.0]))
        var = _as_floats(_get(cfg, "initial_variance", [1.0]))
        if len(mean) == 1:
            mean = np.full(m, mean[0])
        if len(var) == 1:
            var = np.full(m, var[0])
        if len(mean) != m or len(var) != m:
            raise ConfigError("initial_mean", f"need scalars or length-{m} lists")
        return gaussian_sample_state(mean, var, n, stream)
    if kind == "quantile":
        law = _get(cfg, "quantile_law", "uniform")
        if law == "uniform":
            lo = float(_get(cfg, "quantile_lo", -1.0))
            hi = float(_get(cfg, "quantile_hi", 1.0))
            inv = lambda u: lo + (hi - lo) * u
        elif law == "gaussian":
            mu = float(_get(cfg, "quantile_mean", 0.0))
            sd = math.sqrt(float(_get(cfg, "quantile_variance", 1.0)))
            inv = lambda u: mu + sd * ndtri(u)
        else:
            raise ConfigError("quantile_law", f"unknown law '{law}'")
        base = quantile_init_1d(inv, n)
        if _get(cfg, "model") == "vlasov":
            coords = np.zeros((n, m))
            coords[:, 0] = base.coords[:, 0]  # positions; velocities start at rest
            return ParticleState(coords)
        if m != 1:
            raise ConfigError("initial", "quantile initialization is one-dimensional")
        return base
    if kind == "file":
        coords = load_particles(_get(cfg, "initial_file", required=True))
        if coords.shape[1] != m:
            raise ConfigError("initial_file", f"particles must have {m} coordinates")
        if len(coords) < n:
            raise ConfigError("initial_file", f"needs {n} particles, found {len(coords)}")
        return ParticleState(coords[:n])
    raise ConfigError("initial", f"unknown initial law '{kind}'")


def _build_mkv_spec(cfg: dict, dim: int) -> DriftDiffusionSpec:
    lam = float(_get(cfg, "drift_lambda", 0.0))
    sigma = float(_get(cfg, "sigma", 0.0))
    name = str(_get(cfg, "interaction", "zero"))
    params = {}
    for key, tgt in (
        ("interaction_kappa", "kappa"),
        ("interaction_amp", "amp"),
        ("interaction_width", "width"),
        ("interaction_eps", "eps"),
    ):
        if key in cfg:
            params[tgt] = float(cfg[key])
    return DriftDiffusionSpec(
        dim=dim,
        linear_drift=-lam * np.eye(dim),
        diffusion_matrix=sigma * np.eye(dim),
        interaction=interaction_catalog(name, dim, **params),
        n_minus_one_prefactor=bool(_get(cfg, "n_minus_one_prefactor", False)),
    )


def _build_vlasov_spec(cfg: dict, dim: int) -> VlasovSpec:
    name = str(_get(cfg, "potential_gradient", "zero"))
    params = {}
    if "gradient_amp" in cfg:
        params["amp"] = float(cfg["gradient_amp"])
    if "gradient_kappa" in cfg:
        params["kappa"] = float(cfg["gradient_kappa"])
    return VlasovSpec(space_dim=dim, potential_gradient=gradient_catalog(name, **params))


def _simulate_states(cfg: dict, n: int, seed: int, sid_init: int, sid_dyn: int):
    """Dispatch one trajectory; returns (times, states, draw_items)."""
    model = _get(cfg, "model", required=True)
    if model not in _MODELS:
        raise ConfigError("model", f"must be one of {_MODELS}")
    times = _as_floats(_get(cfg, "snapshot_times", required=True))
    t_end = float(_get(cfg, "t_end", times[-1] if len(times) else 0.0))
    init_stream = RngStream(seed, sid_init)
    init = _initial_state(cfg, n, init_stream)
    dim = int(_get(cfg, "dimension", required=True))
    dyn_stream = RngStream(seed, sid_dyn)
    if model == "kac_elastic":
        kern = _build_kernel(cfg, dim)
        states = simulate_kac(init, kern, t_end, times, dyn_stream)
    elif model == "inelastic_thermostat":
        kern = _build_kernel(cfg, dim)
        params = RestitutionParams(
            alpha=float(_get(cfg, "alpha", required=True)),
            nu=float(_get(cfg, "nu", 1.0)),
            dim=dim,
        )
        states = simulate_thermostat(
            init, kern, params, t_end, times, dyn_stream,
            ordered_pair_rate=bool(_get(cfg, "ordered_pair_rate", True)),
        )
    elif model == "mckean_vlasov":
        spec = _build_mkv_spec(cfg, dim)
        dt = float(_get(cfg, "dt", 1e-3))
        states = simulate_mkv(init, spec, t_end, dt, times, dyn_stream)
    else:  # vlasov
        spec = _build_vlasov_spec(cfg, dim)
        dt = float(_get(cfg, "dt", 1e-3))
        states = simulate_vlasov(init, spec, t_end, dt, times)
    draws = [(sid_init, init_stream.draw_counter), (sid_dyn, dyn_stream.draw_counter)]
    return times, states, draws


# --------------------------------------------------------------------------
# shared header assembly


def _accounting_items(draws: list[tuple[int, int]]) -> list[tuple[str, object]]:
    draws = sorted(draws)
    total = sum(c for _, c in draws)
    blob = ";".join(f"{sid}:{c}" for sid, c in draws)
    items: list[tuple[str, object]] = [
        ("rng_streams", len(draws)),
        ("rng_draws_total", total),
    ]
    if len(draws) <= 64:
        items.append(("rng_draws", blob))
    else:
        digest = hashlib.sha256(blob.encode()).hexdigest()[:16]
        items.append(("rng_draws_sha256", digest))
    return items


def _header(cfg: dict, seed: int, extra: list[tuple[str, object]]) -> list[tuple[str, object]]:
    items: list[tuple[str, object]] = [("meanfield_csv", 1), ("code_version", __version__)]
    items += [(k, v) for k, v in sorted(RATE_CONVENTIONS.items())]
    resolved = dict(cfg)
    if isinstance(cfg, _Cfg):
        resolved.update(cfg.used)
    resolved["master_seed"] = seed
    items += [(k, resolved[k]) for k in sorted(resolved)]
    items += extra
    return items


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: dict, seed: int, workers: int, out: str | None) -> str:
    cfg = _Cfg(cfg)
    n = int(_get(cfg, "n", required=True))
    times, states, draws = _simulate_states(cfg, n, seed, sid_init=1, sid_dyn=2)
    m = states[0].dim if states else 0
    columns = ["time", "temperature"] + [f"mom_{k}" for k in range(m)]
    rows = []
    for s in states:
        mom = s.coords.mean(axis=0)
        rows.append([s.time, temperature(s)] + [float(x) for x in mom])
    if bool(_get(cfg, "dump_particles", False)) and out:
        dump_particles(str(out) + ".particles.txt", states[-1].coords)
    header = _header(cfg, seed, _accounting_items(draws))
    return write_csv(out, header, columns, rows)


_METRIC_NAMES = ("w1", "w2_exact", "w2_sliced", "toscani", "h_sobolev", "tv")


def cmd_metric(cfg: dict, seed: int, workers: int, out: str | None) -> str:
    cfg = _Cfg(cfg)
    name = _get(cfg, "metric", required=True)
    if name not in _METRIC_NAMES:
        raise ConfigError("metric", f"must be one of {_METRIC_NAMES}")
    a = EmpiricalMeasure(load_particles(_get(cfg, "input_a", required=True)))
    b = EmpiricalMeasure(load_particles(_get(cfg, "input_b", required=True)))
    draws: list[tuple[int, int]] = []
    extra: list[tuple[str, object]] = []
    se = 0.0
    if name == "w1":
        value = w1_exact_1d(a, b)
        extra.append(("estimator_used", "exact-1d-quantile-coupling"))
    elif name == "w2_exact":
        res = w2_exact_matching(a, b)
        value = math.sqrt(res.cost)
        extra.append(("estimator_used", "exact-assignment"))
    elif name == "w2_sliced":
        stream = RngStream(seed, 1)
        value, se = w2_sliced(a, b, int(_get(cfg, "n_projections", 64)), stream)
        draws.append((1, stream.draw_counter))
        extra.append(("estimator_used", "sliced-monte-carlo"))
    elif name in ("toscani", "h_sobolev"):
        xi_max = float(_get(cfg, "xi_max", 40.0))
        n_nodes = int(_get(cfg, "xi_nodes", 4096))
        xi = np.linspace(-xi_max, xi_max, n_nodes)
        s_order = float(_get(cfg, "s", 3.0 if name == "toscani" else 1.0))
        if name == "toscani":
            value, arg = toscani_norm(a, b, s_order, xi)
            extra += [("estimator_used", "grid-sup"), ("argmax_xi", arg)]
        else:
            value = h_neg_sobolev_norm(a, b, s_order, xi)
            extra.append(("estimator_used", "grid-trapezoid"))
    else:
        edges = _as_floats(_get(cfg, "bin_edges", required=True))
        value = tv_histogram(a, b, edges)
        extra.append(("estimator_used", "binned-tv-lower-bound"))
    header = _header(cfg, seed, extra + _accounting_items(draws))
    return write_csv(out, header, ["metric", "value", "std_error"], [[name, value, se]])


def _curve_task(task) -> tuple[np.ndarray, int, int]:
    """One replica of one N: returns (per-time values, stream_id, draws)."""
    from .harness import u_statistic
    from .observables import marginal_observable

    cfg = _TASK_CTX["cfg"]
    seed = _TASK_CTX["seed"]
    obs = _TASK_CTX["obs"]
    estimator = _TASK_CTX["estimator"]
    n, sid = task
    # even/odd split keeps the two per-task streams disjoint for every task
    _, states, draws = _simulate_states(cfg, n, seed, sid_init=2 * sid, sid_dyn=2 * sid + 1)
    if estimator == "marginal":
        vals = np.array([marginal_observable(s, obs) for s in states])
    else:
        vals = np.array([u_statistic(s.coords, obs) for s in states])
    return vals, sid, sum(c for _, c in draws)


def cmd_chaos_curve(cfg: dict, seed: int, workers: int, out: str | None) -> str:
    cfg = _Cfg(cfg)
    model = _get(cfg, "model", required=True)
    times = _as_floats(_get(cfg, "snapshot_times", required=True))
    n_values = [int(x) for x in _as_list(_get(cfg, "n_list", required=True))]
    obs = _build_observable(cfg)
    estimator = str(_get(cfg, "estimator", "empirical-mean"))
    n_ref = int(_get(cfg, "n_ref", required=True))
    if n_ref < 16 * max(n_values):
        raise ConfigError("n_ref", "must be at least 16x the largest N")
    deterministic = model == "vlasov"
    replicas = 1 if deterministic else int(_get(cfg, "replicas", 64))
    replicas_ref = 1 if deterministic else int(_get(cfg, "replicas_ref", 32))

    global _TASK_CTX
    _TASK_CTX = {"cfg": cfg, "seed": seed, "obs": obs, "estimator": estimator}
    try:
        # oracle replicas first (fixed stream block), then the measured runs;
        # the first task runs in-process so the defaults it resolves land in
        # the parent's header whatever the worker count
        oracle_tasks = [(n_ref, 900_000_000 + r) for r in range(replicas_ref)]
        oracle_out = [_curve_task(oracle_tasks[0])]
        oracle_out += ordered_map(_curve_task, oracle_tasks[1:], workers)
        o_vals = np.stack([v for v, _, _ in oracle_out])
        oracle = OracleEstimate(
            times=times,
            mean=o_vals.mean(axis=0),
            standard_error=(
                o_vals.std(axis=0, ddof=1) / math.sqrt(replicas_ref)
                if replicas_ref > 1 else np.zeros(len(times))
            ),
            per_replica=o_vals,
        )
        draws = [(sid, d) for _, sid, d in oracle_out]

        errors = np.empty(len(n_values))
        std_errors = np.empty(len(n_values))
        boot_rng = RngStream(seed, 977)
        for k, n in enumerate(n_values):
            tasks = [(n, 1_000_000 * (k + 1) + r) for r in range(replicas)]
            results = ordered_map(_curve_task, tasks, workers)
            vals = np.stack([v for v, _, _ in results])
            draws += [(sid, d) for _, sid, d in results]
            gaps = np.abs(vals.mean(axis=0) - oracle.mean)
            errors[k] = float(gaps.max())
            if replicas > 1:
                bs = np.empty(200)
                for bi in range(200):
                    pick = np.asarray(boot_rng.integers(0, replicas, size=replicas))
                    mean_b = vals[pick].mean(axis=0)
                    if replicas_ref > 1:
                        opick = np.asarray(
                            boot_rng.integers(0, replicas_ref, size=replicas_ref)
                        )
                        om = o_vals[opick].mean(axis=0)
                    else:
                        om = oracle.mean
                    bs[bi] = float(np.abs(mean_b - om).max())
                std_errors[k] = float(bs.std(ddof=1))
            else:
                std_errors[k] = 0.0
    finally:
        _TASK_CTX = {}

    footers: list[tuple[str, object]] = [("oracle_se_max", float(np.max(oracle.standard_error)))]
    try:
        slope, intercept, ci = rate_fit(np.asarray(n_values, float), errors, std_errors)
        footers += [
            ("fitted_slope", slope),
            ("fit_intercept", intercept),
            ("slope_ci_lo", ci[0]),
            ("slope_ci_hi", ci[1]),
        ]
    except (DegenerateFit, ValueError) as exc:
        footers.append(("fit_refused", str(exc)))
    extra = [("estimator_used", estimator), ("observable_tag", obs.tag)]
    header = _header(cfg, seed, extra + _accounting_items(draws))
    rows = [[n, errors[k], std_errors[k]] for k, n in enumerate(n_values)]
    return write_csv(out, header, ["N", "error", "std_error"], rows, footers)


def cmd_omega_n(cfg: dict, seed: int, workers: int, out: str | None) -> str:
    cfg = _Cfg(cfg)
    dim = int(_get(cfg, "dimension", required=True))
    n_values = [int(x) for x in _as_list(_get(cfg, "n_list", required=True))]
    replicas = int(_get(cfg, "replicas", 200))
    factor = int(_get(cfg, "reference_factor", 64))
    estimator = str(_get(cfg, "estimator", "auto"))
    n_proj = int(_get(cfg, "n_projections", 64))
    law = str(_get(cfg, "law", "gaussian"))
    if law != "gaussian":
        raise ConfigError("law", "only the gaussian law is built in")
    mean = _as_floats(_get(cfg, "law_mean", [0.0]))
    var = _as_floats(_get(cfg, "law_variance", [1.0]))
    if len(mean) == 1:
        mean = np.full(dim, mean[0])
    if len(var) == 1:
        var = np.full(dim, var[0])

    def sampler(n, stream):
        return gaussian_sample_state(mean, var, n, stream).coords

    rows = []
    errors = []
    ses = []
    draws: list[tuple[int, int]] = []
    est_used = None
    for k, n in enumerate(n_values):
        streams: dict[int, RngStream] = {}

        def factory(sid: int, _k=k) -> RngStream:
            s = RngStream(seed, 10_000 * (_k + 1) + sid)
            streams[10_000 * (_k + 1) + sid] = s
            return s

        res = empirical_sampling_error(
            sampler, n, replicas, factor * n, factory,
            estimator=estimator, n_projections=n_proj,
        )
        est_used = res.estimator
        rows.append([n, res.mean, res.standard_error])
        errors.append(res.mean)
        ses.append(res.standard_error)
        draws += [(sid, s.draw_counter) for sid, s in streams.items()]

    footers: list[tuple[str, object]] = []
    try:
        slope, intercept, ci = rate_fit(
            np.asarray(n_values, float), np.asarray(errors), np.asarray(ses)
        )
        footers += [
            ("fitted_slope", slope),
            ("fit_intercept", intercept),
            ("slope_ci_lo", ci[0]),
            ("slope_ci_hi", ci[1]),
        ]
    except (DegenerateFit, ValueError) as exc:
        footers.append(("fit_refused", str(exc)))
    extra = [("estimator_used", est_used)]
    header = _header(cfg, seed, extra + _accounting_items(draws))
    return write_csv(out, header, ["N", "omega_mean", "omega_se"], rows, footers)


def cmd_check(cfg: dict, seed: int, workers: int, out: str | None) -> str:
    lines = []
    ok = True

    def report(name: str, passed: bool, detail: str) -> None:
        nonlocal ok
        ok = ok and passed
        tag = "PASS" if passed else "FAIL"
        lines.append(f"[{tag}] {name}: {detail}")

    # conservation of the elastic gas
    init = gaussian_sample_state(np.zeros(3), np.ones(3), 200, RngStream(seed, 1))
    p0 = init.coords.sum(axis=0)
    e0 = float(np.sum(init.coords**2))
    out_states = simulate_kac(init, AngularKernel.isotropic(3), 1.0, [0.5, 1.0],
                              RngStream(seed, 2))
    drift = max(
        max(abs(np.sum(s.coords**2) - e0) / e0 for s in out_states),
        max(
            float(np.linalg.norm(s.coords.sum(axis=0) - p0)) / math.sqrt(e0)
            for s in out_states
        ),
    )
    report("elastic-conservation", drift <= 1e-8, f"max relative drift {drift:.2e}")

    # symmetrization bound on random instances
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = 0
    factors = [
        observable_catalog("gauss_bump", center=[0.0], width=1.0),
        observable_catalog("tanh_coord", axis=0),
        observable_catalog("tanh_square", axis=0),
    ]
    for _ in range(200):
        ell = int(rng.integers(1, 4))
        n = int(rng.choice([4, 6, 8]))
        if n < 2 * ell:
            continue
        state = ParticleState(rng.normal(size=(n, 1)) * 2.0)
        obs = ObservableProduct(tuple(rng.permutation(factors)[:ell]))
        gap, bound = symmetrization_gap(state, obs)
        worst = max(worst, gap - bound)
        violations += int(gap > bound + 1e-15)
    report("symmetrization-bound", violations == 0,
           f"0 violations, worst margin {worst:.2e}" if violations == 0
           else f"{violations} violations")

    # metric axioms
    bad = 0
    for _ in range(50):
        pts = [EmpiricalMeasure(rng.normal(size=(8, 1))) for _ in range(3)]
        d_ab = w1_exact_1d(pts[0], pts[1])
        d_ba = w1_exact_1d(pts[1], pts[0])
        d_ac = w1_exact_1d(pts[0], pts[2])
        d_cb = w1_exact_1d(pts[2], pts[1])
        w2ab = math.sqrt(w2_exact_matching(pts[0], pts[1]).cost)
        bad += int(d_ab != d_ba)
        bad += int(d_ab > d_ac + d_cb + 1e-10)
        bad += int(d_ab > w2ab + 1e-12)
    report("metric-axioms", bad == 0, f"{bad} violations over 50 random triples")

    # spectral invariants survive a short evolution
    from .limits import gaussian_spectrum, make_xi_grid, spectral_evolve

    try:
        g = gaussian_spectrum(make_xi_grid(8.0, 256), 1.0)
        final = spectral_evolve(g, 0.8, True, 0.2, dt=5e-3)
        final.check_invariants(atol=1e-8)
        report("spectral-invariants", True, "F(0)=1, Hermitian, |F|<=1 after 40 steps")
    except Exception as exc:  # pragma: no cover
        report("spectral-invariants", False, str(exc))

    # pointwise inelastic contraction
    from .thermostat import collide_inelastic

    stream = RngStream(seed, 3)
    worst_ratio = 0.0
    for _ in range(500):
        vi = np.atleast_1d(stream.normal(size=3))
        vj = np.atleast_1d(stream.normal(size=3))
        alpha = 0.05 + 0.9 * float(stream.uniform())
        u = vi - vj
        uhat = u / np.linalg.norm(u)
        from .elastic import sample_sigma

        sig = sample_sigma(AngularKernel.isotropic(3), uhat, stream)
        wi, wj = collide_inelastic(vi, vj, sig, alpha)
        worst_ratio = max(worst_ratio, np.linalg.norm(wi - wj) / np.linalg.norm(u))
    report("inelastic-contraction", worst_ratio <= 1.0 + 1e-12,
           f"max |u*|/|u| = {worst_ratio:.12f}")

    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text)
    if not ok:
        raise SystemExit(1)
    return text


# --------------------------------------------------------------------------


_COMMANDS = {
    "simulate": cmd_simulate,
    "metric": cmd_metric,
    "chaos-curve": cmd_chaos_curve,
    "omega-n": cmd_omega_n,
    "check": cmd_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meanfield",
        description="simulate interacting-particle models and measure their mean-field errors",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", type=str, default=None, help="flat config file")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=str, default=None, help="output CSV path")
    args = parser.parse_args(argv)

    cfg: dict = {}
    if args.config is not None:
        cfg = parse_config(args.config)
    elif args.subcommand != "check":
        parser.error("--config is required for this subcommand")
    seed = args.seed if args.seed is not None else int(cfg.get("master_seed", 0))
    out = args.out if args.out is not None else cfg.get("out")
    try:
        _COMMANDS[args.subcommand](cfg, seed, max(1, args.workers), out)
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
