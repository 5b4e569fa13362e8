"""Scenario catalog and runners: config grids in, report records out.

Each scenario owns its lattices and eigensystems, so scenarios can run in
parallel workers; results are merged deterministically by name.  Parameter
combinations that violate a precondition (ramp support, nonzero field) are
skipped with an explicit record rather than silently dropped.
"""

from dataclasses import dataclass, field

import numpy as np

from .lattice import build_lattice, LatticeSpec, ramp_field, StateSpaceError
from .operators import build_hamiltonian
from .spectra import diagonalize, ground_sector
from .thermal import gibbs_state, structure_quantities, \
    zero_temperature_structure
from . import verifier as V


@dataclass
class ScenarioResult:
    name: str
    anchor: str
    reports: list = field(default_factory=list)
    scaling: list = field(default_factory=list)
    structure_rows: list = field(default_factory=list)
    skips: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    error: str = None

    def n_failed(self):
        bad = 0
        for rep in self.reports:
            ok = rep.all_passed() if hasattr(rep, "all_passed") else rep.passed
            bad += 0 if ok else 1
        for rep in self.scaling:
            if rep.passed is False:
                bad += 1
        if self.error:
            bad += 1
        return bad


def _feasible_ramp(R, L):
    return 2 * R <= L - 1


def _skip(result, reason, **params):
    result.skips.append({"params": params, "reason": reason})


def _lattice(cfg, L, res=None, **skip_params):
    """Build the configured lattice or record a cap skip and return None."""
    try:
        return build_lattice(LatticeSpec(d=cfg.d, L=L, S=cfg.S),
                             max_state_bits=cfg.state_bits_cap)
    except StateSpaceError as exc:
        if res is not None:
            _skip(res, f"state-space cap: {exc}", L=L, **skip_params)
        return None


def _rtol(cfg, name, default):
    return cfg.tolerance_overrides.get(name, default)


def run_variational_magnetization(cfg, rng):
    res = ScenarioResult("variational-magnetization",
                         "ground-energy-variational-bound")
    rtol = _rtol(cfg, "variational-magnetization", V.DEFAULT_RTOL)
    curve = []
    for L in cfg.L_list:
        lat = _lattice(cfg, L, res)
        if lat is None:
            continue
        H0 = build_hamiltonian(lat, 0.0)
        es0 = diagonalize(H0, lattice=lat, dense_cap=cfg.dense_cap)
        gs0 = ground_sector(es0)
        trials = [("zero-field-ground-density", gs0.projector() / gs0.q)]
        dim = es0.dim
        for k in range(cfg.n_random_trials):
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            trials.append((f"haar-{k}", v / np.linalg.norm(v)))
        for B in cfg.B_list:
            if B == 0.0:
                _skip(res, "bound needs B != 0", L=L, B=B)
                continue
            rep = V.check_variational_magnetization(
                lat, B, trials, rtol=rtol, dense_cap=cfg.dense_cap)
            res.reports.append(rep)
            curve.append({"L": L, "B": B, "m": rep.intermediates["m_B"]})
    res.extras["magnetization"] = curve
    return res


def run_kls(cfg, rng):
    res = ScenarioResult("kls", "kls-commutator-bound")
    rtol = _rtol(cfg, "kls", V.DEFAULT_RTOL)
    for L in cfg.L_list:
        for R in cfg.R_list:
            if not _feasible_ramp(R, L):
                _skip(res, "ramp support 2R exceeds L-1", L=L, R=R)
                continue
            lat = _lattice(cfg, L, res, R=R)
            if lat is None:
                continue
            for B in cfg.B_list:
                for eps in cfg.epsilon_list:
                    res.reports.append(V.check_kls(
                        lat, B, R, eps, rtol=rtol, dense_cap=cfg.dense_cap))
    return res


def run_susceptibility(cfg, rng):
    res = ScenarioResult("susceptibility",
                         "boundary-field-susceptibility-bound")
    rtol = _rtol(cfg, "susceptibility", V.DEFAULT_RTOL)
    for L in cfg.L_list:
        for R in cfg.R_list:
            if not _feasible_ramp(R, L):
                _skip(res, "ramp support 2R exceeds L-1", L=L, R=R)
                continue
            lat = _lattice(cfg, L, res, R=R)
            if lat is None:
                continue
            ramp = ramp_field(lat, R)
            rand = rng.standard_normal(lat.n_sites)
            for B in cfg.B_list:
                for tag, f in (("ramp", ramp), ("random", rand)):
                    rep = V.check_susceptibility_bound(
                        lat, B, f, rtol=rtol, dense_cap=cfg.dense_cap)
                    rep.params["field"] = tag
                    res.reports.append(rep)
    return res


def run_rp_energy(cfg, rng):
    res = ScenarioResult("rp-energy", "reflection-positivity-energy-bound")
    rtol = _rtol(cfg, "rp-energy", V.DEFAULT_RTOL)
    for L in cfg.L_list:
        lat = _lattice(cfg, L, res)
        if lat is None:
            continue
        samples = [rng.standard_normal(lat.n_sites)
                   for _ in range(cfg.n_field_samples)]
        for R in cfg.R_list:
            if _feasible_ramp(R, L):
                ramp = ramp_field(lat, R)
                samples.append(ramp.values * lat.signs)  # sign-flipped ramp
        for B in cfg.B_list:
            res.reports.append(V.check_rp_energy(
                lat, B, samples, rtol=rtol, dense_cap=cfg.dense_cap))
    return res


def run_commutator_identity(cfg, rng):
    res = ScenarioResult("commutator-identity",
                         "boundary-field-probe-commutator")
    b_ref = next((b for b in cfg.B_list if b != 0.0), 0.2)
    for L in cfg.L_list:
        for R in cfg.R_list:
            if not _feasible_ramp(R, L):
                _skip(res, "ramp support 2R exceeds L-1", L=L, R=R)
                continue
            lat = _lattice(cfg, L, res, R=R)
            if lat is None:
                continue
            res.reports.append(V.check_commutator_identity(
                lat, R, B=b_ref, dense_cap=cfg.dense_cap,
                corruption=cfg.corrupt_hamiltonian))
    return res


def run_double_commutator_scaling(cfg, rng):
    res = ScenarioResult("double-commutator-scaling",
                         "ramp-double-commutator-scaling")
    r_values = cfg.scaling_R_list
    lats = V.scaling_lattices(cfg.d, cfg.S, r_values)
    scaling, subs = V.check_double_commutator_scaling(lats, r_values)
    res.scaling.append(scaling)
    res.reports.extend(subs)
    return res


def run_trial_state(cfg, rng):
    res = ScenarioResult("trial-state", "filtered-trial-state-chain")
    rtol = _rtol(cfg, "trial-state", V.IDENTITY_RTOL)
    for L in cfg.L_list:
        for R in cfg.R_list:
            if not _feasible_ramp(R, L):
                _skip(res, "ramp support 2R exceeds L-1", L=L, R=R)
                continue
            lat = _lattice(cfg, L, res, R=R)
            if lat is None:
                continue
            for B in cfg.B_list:
                if B == 0.0:
                    _skip(res, "degenerate denominator narrative needs B != 0",
                          L=L, R=R, B=B)
                    continue
                for eps in cfg.epsilon_list:
                    if eps <= 0.0:
                        _skip(res, "trial filter needs epsilon > 0",
                              L=L, R=R, B=B, epsilon=eps)
                        continue
                    res.reports.append(V.check_trial_state(
                        lat, B, R, eps, rtol=rtol, dense_cap=cfg.dense_cap))
    return res


def run_spectral_windows(cfg, rng):
    res = ScenarioResult("spectral-windows", "spectral-window-cap")
    rtol = _rtol(cfg, "spectral-windows", V.DEFAULT_RTOL)
    weights_sweep = []
    for L in cfg.L_list:
        for R in cfg.R_list:
            if not _feasible_ramp(R, L):
                _skip(res, "ramp support 2R exceeds L-1", L=L, R=R)
                continue
            lat = _lattice(cfg, L, res, R=R)
            if lat is None:
                continue
            b_values = [b for b in cfg.B_list if b != 0.0] or [0.2]
            # freeze the window at the largest field so the sweep can watch
            # tower states drop into the low window as B shrinks
            ref = V.check_spectral_windows(
                lat, max(b_values), R, rtol=rtol, dense_cap=cfg.dense_cap)
            bounds = (ref.params["b1"], ref.params["b2"])
            for B in sorted(b_values, reverse=True):
                rep = V.check_spectral_windows(
                    lat, B, R, absolute_bounds=bounds, rtol=rtol,
                    dense_cap=cfg.dense_cap)
                res.reports.append(rep)
                weights_sweep.append({"L": L, "R": R, "B": B,
                                      **rep.intermediates["weights"]})
    res.extras["window_weights"] = weights_sweep
    return res


def run_transverse_decay(cfg, rng):
    res = ScenarioResult("transverse-decay", "transverse-decay-bounds")
    rtol = _rtol(cfg, "transverse-decay", V.IDENTITY_RTOL)
    for L in cfg.L_list:
        for R in cfg.R_list:
            if not _feasible_ramp(R, L):
                _skip(res, "ramp support 2R exceeds L-1", L=L, R=R)
                continue
            lat = _lattice(cfg, L, res, R=R)
            if lat is None:
                continue
            for B in cfg.B_list:
                sysd = V.System(lat, B, dense_cap=cfg.dense_cap)
                if cfg.zero_temperature:
                    res.reports.append(V.check_transverse_decay(
                        lat, B, R, rtol=rtol, dense_cap=cfg.dense_cap))
                    res.structure_rows.extend(zero_temperature_structure(
                        sysd.es, sysd.gs, lat, B))
                for beta in cfg.beta_list:
                    res.reports.append(V.check_transverse_decay(
                        lat, B, R, beta=beta, rtol=rtol,
                        dense_cap=cfg.dense_cap))
                    state = gibbs_state(sysd.es, beta, B)
                    res.structure_rows.extend(
                        structure_quantities(state, lat))
    return res


CATALOG = {
    "variational-magnetization": {
        "anchor": "ground-energy-variational-bound",
        "runner": run_variational_magnetization,
        "schema": "L in L_list, B in B_list (B != 0); trials = zero-field "
                  "ground density + n_random_trials Haar vectors",
    },
    "kls": {
        "anchor": "kls-commutator-bound",
        "runner": run_kls,
        "schema": "L x B x R (2R <= L-1) x epsilon in epsilon_list",
    },
    "susceptibility": {
        "anchor": "boundary-field-susceptibility-bound",
        "runner": run_susceptibility,
        "schema": "L x B x R (2R <= L-1); ramp and one random site field",
    },
    "rp-energy": {
        "anchor": "reflection-positivity-energy-bound",
        "runner": run_rp_energy,
        "schema": "L x B; n_field_samples gaussian bond-site fields plus the "
                  "sign-flipped ramp",
    },
    "commutator-identity": {
        "anchor": "boundary-field-probe-commutator",
        "runner": run_commutator_identity,
        "schema": "L x R (2R <= L-1); measures the proportionality constant",
    },
    "double-commutator-scaling": {
        "anchor": "ramp-double-commutator-scaling",
        "runner": run_double_commutator_scaling,
        "schema": "geometry-only lattices over scaling_R_list",
    },
    "trial-state": {
        "anchor": "filtered-trial-state-chain",
        "runner": run_trial_state,
        "schema": "L x B (B != 0) x R (2R <= L-1) x epsilon (> 0)",
    },
    "spectral-windows": {
        "anchor": "spectral-window-cap",
        "runner": run_spectral_windows,
        "schema": "L x R (2R <= L-1); window frozen at the largest field, "
                  "then swept over B_list",
    },
    "transverse-decay": {
        "anchor": "transverse-decay-bounds",
        "runner": run_transverse_decay,
        "schema": "L x B x R (2R <= L-1); ground-sector chain plus one "
                  "thermal bound per beta; emits structure rows",
    },
}


def scenario_names():
    return list(CATALOG)


def run_scenario(name, cfg, seed_offset=0):
    """Run one scenario with its own deterministic RNG stream."""
    import zlib
    entry = CATALOG[name]
    rng = np.random.default_rng(
        (cfg.seed + seed_offset) ^ zlib.crc32(name.encode()))
    try:
        return entry["runner"](cfg, rng)
    except Exception as exc:  # recorded as a failure, not a crash
        res = ScenarioResult(name, entry["anchor"])
        res.error = f"{type(exc).__name__}: {exc}"
        return res
