"""Randomized invariant and oracle suites behind the selftest subcommand.

Each check runs a batch of seeded random cases against a module
invariant or an independent oracle and raises AssertionError on the
first violation. `run()` prints one PASS/FAIL line per check and
returns a process exit code.
"""

from __future__ import annotations

import math
import time
import traceback

import numpy as np

from . import oracles
from .bicm import (BerConfig, ConvCode, build_interleaver, compound_candidates,
                   conv_encode, demap_soft, make_constellation, map_symbols,
                   run_receiver, simulate_ber, siso_decode)
from .channel import ChannelParams, make_pilots, sample_estimate_marginal
from .metrics import MetricEvaluator, metric_ratio_sweep
from .numerics import (Seed, _zmcscg, empirical_quantile, gamma0, gamma_neg_int,
                       sample_zmcscg, svd)
from .rates import (eio_capacity, expected_rate_curves, lemma_expectation,
                    mutual_info, outage_rate, rate_constants, rate_improved,
                    rate_mismatched)

CHECKS = []


def _register(name):
    def deco(fn):
        CHECKS.append((name, fn))
        return fn
    return deco


def _scaled(n: int, quick: bool) -> int:
    return max(10, n // 10) if quick else n


# ----------------------------------------------------------------- numerics

@_register("numerics: incomplete gamma recurrence")
def check_gamma_recurrence(quick=False):
    rng = np.random.default_rng(101)
    for _ in range(_scaled(150, quick)):
        n = int(rng.integers(1, 8))
        t = float(10.0 ** rng.uniform(-1.3, 1.7))
        lhs = gamma_neg_int(n, t)
        rhs = (-1.0 / n) * (gamma_neg_int(n - 1, t) - t ** (-n) * math.exp(-t))
        assert abs(lhs - rhs) <= 1e-9 * max(abs(rhs), 1e-300), (n, t, lhs, rhs)
    assert gamma_neg_int(0, 1.0) == gamma0(1.0)


@_register("numerics: svd preserves Frobenius norm and reconstructs")
def check_svd(quick=False):
    rng = np.random.default_rng(102)
    for _ in range(_scaled(150, quick)):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        a = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
        u, s, v = svd(a)
        fro = np.linalg.norm(a)
        assert abs(np.linalg.norm(s) - fro) <= 1e-10 * max(fro, 1.0)
        k = min(m, n)
        recon = u[:, :k] @ np.diag(s) @ v[:, :k].conj().T
        assert np.linalg.norm(recon - a) <= 1e-10 * max(fro, 1.0)
        assert np.all(np.diff(s) <= 1e-12)


@_register("numerics: empirical quantile monotone in gamma")
def check_quantile_monotone(quick=False):
    rng = np.random.default_rng(103)
    for _ in range(_scaled(150, quick)):
        x = rng.normal(size=int(rng.integers(1, 400)))
        gammas = np.sort(rng.uniform(0, 0.999, size=8))
        vals = [empirical_quantile(x, g) for g in gammas]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
        assert empirical_quantile(x, 0.0) == x.min()


@_register("numerics: distinct seed paths give uncorrelated streams")
def check_stream_independence(quick=False):
    n = 10_000 if quick else 100_000
    for case in range(_scaled(100, quick)):
        s = Seed(7_000 + case)
        a = sample_zmcscg(1, n, 1.0, s.child(0)).ravel()
        b = sample_zmcscg(1, n, 1.0, s.child(1)).ravel()
        rho = np.vdot(a - a.mean(), b - b.mean()) / (n * a.std() * b.std())
        assert abs(rho) < 0.01, (case, rho)
        again = sample_zmcscg(1, n, 1.0, s.child(0)).ravel()
        assert np.array_equal(a, again)


# ------------------------------------------------------------------ channel

@_register("channel: posterior/marginal factorization matches the joint law")
def check_joint_consistency(quick=False):
    n = 20_000 if quick else 100_000
    rng = np.random.default_rng(104)
    for case in range(_scaled(100, quick)):
        var_h = float(rng.uniform(0.5, 2.0))
        noise = float(rng.uniform(0.2, 2.0))
        n_p = int(rng.integers(2, 5))
        params = ChannelParams(2, 2, var_h, noise, 1.0, 1.0, n_p)
        seed = Seed(9_000 + case)
        # forward: H then H_hat = H + E
        g = seed.child(0).generator()
        h_f = _zmcscg(g, (n, 2, 2), var_h)
        hat_f = h_f + _zmcscg(g, (n, 2, 2), params.err_var)
        # reverse: H_hat from the marginal, then H | H_hat
        g2 = seed.child(1).generator()
        hat_r = _zmcscg(g2, (n, 2, 2), var_h + params.err_var)
        h_r = params.shrinkage * hat_r + _zmcscg(
            g2, (n, 2, 2), params.shrinkage * params.err_var)

        def second_moment(a, b):
            return np.einsum("nij,nij->", a, b.conj()).real / (n * 4)
        for a_f, b_f, a_r, b_r in (
                (h_f, h_f, h_r, h_r),
                (h_f, hat_f, h_r, hat_r),
                (hat_f, hat_f, hat_r, hat_r)):
            m_f = second_moment(a_f, b_f)
            m_r = second_moment(a_r, b_r)
            assert abs(m_f - m_r) <= 0.02 * max(abs(m_f), abs(m_r)), (case, m_f, m_r)


@_register("channel: ML estimation error uncorrelated with the channel")
def check_error_uncorrelated(quick=False):
    n = 20_000 if quick else 100_000
    rng = np.random.default_rng(105)
    for case in range(_scaled(100, quick)):
        noise = float(rng.uniform(0.2, 2.0))
        n_p = int(rng.integers(2, 5))
        params = ChannelParams(2, 2, 1.0, noise, 1.0, 1.0, n_p)
        pilots = make_pilots(params)
        g = Seed(11_000 + case).generator()
        h = _zmcscg(g, (n, 2, 2), 1.0)
        z = _zmcscg(g, (n, 2, n_p), noise)
        h_hat = (h @ pilots + z) @ pilots.conj().T / (n_p * params.pilot_power)
        err = (h_hat - h).ravel()
        hf = h.ravel()
        rho = np.vdot(hf - hf.mean(), err - err.mean()) / (
            hf.size * hf.std() * err.std())
        assert abs(rho) < 0.01, (case, rho)


@_register("channel: pilot matrices exactly orthogonal at required power")
def check_pilots(quick=False):
    rng = np.random.default_rng(106)
    for _ in range(_scaled(120, quick)):
        m_t = int(rng.integers(1, 6))
        n_p = int(rng.integers(m_t, m_t + 6))
        p_t = float(rng.uniform(0.25, 4.0))
        params = ChannelParams(m_t, 2, 1.0, 1.0, 1.0, p_t, n_p)
        x = make_pilots(params)
        gram = x @ x.conj().T
        target = n_p * p_t * np.eye(m_t)
        assert np.max(np.abs(gram - target)) < 1e-12 * n_p * p_t
        assert abs(np.trace(gram).real / (n_p * m_t) - p_t) < 1e-12


# ------------------------------------------------------------------ metrics

@_register("metrics: improved score is the exact composite log density")
def check_score_density_identity(quick=False):
    rng = np.random.default_rng(107)
    for case in range(_scaled(150, quick)):
        params = ChannelParams(2, 2, 1.0, float(rng.uniform(0.3, 2.0)), 1.0, 1.0,
                               int(rng.integers(2, 6)))
        est = sample_estimate_marginal(params, Seed(12_000 + case))
        ev = MetricEvaluator.for_estimate("improved", est, params.noise_var)
        x = _zmcscg(rng, (2,), params.data_power)
        y = _zmcscg(rng, (2,), 2.0)
        mean = est.shrinkage * (est.h_hat @ x)
        var = params.noise_var + est.shrinkage * est.err_var * float(np.vdot(x, x).real)
        direct = (2 * math.log(math.pi * var)
                  + float(np.vdot(y - mean, y - mean).real) / var)
        assert abs(ev.neg_log_density(x, y) - direct) <= 1e-12 * max(abs(direct), 1.0)
        assert abs(ev.score(x, y) + 2 * math.log(math.pi) - direct) <= 1e-10


@_register("metrics: scores are affine in the squared distance")
def check_score_affine(quick=False):
    rng = np.random.default_rng(108)
    for case in range(_scaled(150, quick)):
        params = ChannelParams(2, 2, 1.0, float(rng.uniform(0.3, 2.0)), 1.0, 1.0, 2)
        est = sample_estimate_marginal(params, Seed(13_000 + case))
        for kind in ("mismatched", "improved"):
            ev = MetricEvaluator.for_estimate(kind, est, params.noise_var)
            x = _zmcscg(rng, (2,), 1.0)
            mean, var = ((ev.h_hat @ x, params.noise_var) if kind == "mismatched"
                         else (est.shrinkage * ev.h_hat @ x,
                               params.noise_var + est.shrinkage * est.err_var
                               * float(np.vdot(x, x).real)))
            offset = ev.score(x, mean)
            for _ in range(3):
                y = mean + _zmcscg(rng, (2,), 1.0)
                quad = float(np.vdot(y - mean, y - mean).real)
                assert abs(ev.score(x, y) - (offset + quad / var)) <= 1e-10


@_register("metrics: positive scaling leaves demapper decisions unchanged")
def check_metric_scaling(quick=False):
    rng = np.random.default_rng(109)
    const = make_constellation("gray")
    symbols, bits = compound_candidates(const, 2)
    for _ in range(_scaled(150, quick)):
        scores = rng.uniform(0, 30, size=symbols.shape[0])
        c = float(rng.uniform(0.1, 10.0))
        best = scores.argmin()
        best_scaled = (c * scores).argmin()
        assert best == best_scaled
        assert np.array_equal(bits[best], bits[best_scaled])


@_register("metrics: improved/mismatched ratio deviation shrinks with training")
def check_metric_ratio_trend(quick=False):
    params = ChannelParams(2, 2, 1.0, 1.0, 1.0, 1.0, 2)
    pts = metric_ratio_sweep([2, 8, 32, 128], params,
                             _scaled(400, quick), Seed(140))
    devs = [p.max_abs_dev for p in pts]
    assert all(a > b for a, b in zip(devs, devs[1:])), devs


# --------------------------------------------------------------------- bicm

@_register("bicm: convolutional encoder is linear and matches the impulse")
def check_encoder(quick=False):
    rng = np.random.default_rng(110)
    imp = conv_encode(np.array([1], dtype=np.uint8))
    assert imp.tolist() == [1, 1, 0, 1, 1, 1]
    for _ in range(_scaled(150, quick)):
        n = int(rng.integers(1, 200))
        a = rng.integers(0, 2, n).astype(np.uint8)
        b = rng.integers(0, 2, n).astype(np.uint8)
        assert np.array_equal(conv_encode(a) ^ conv_encode(b), conv_encode(a ^ b))
    assert not conv_encode(np.zeros(40, dtype=np.uint8)).any()


@_register("bicm: interleaver round-trips and is seed-deterministic")
def check_interleaver(quick=False):
    rng = np.random.default_rng(111)
    for case in range(_scaled(150, quick)):
        size = int(rng.integers(2, 2000))
        il = build_interleaver(size, Seed(15_000 + case))
        again = build_interleaver(size, Seed(15_000 + case))
        assert np.array_equal(il.perm, again.perm)
        x = rng.normal(size=size)
        assert np.array_equal(il.deinterleave(il.interleave(x)), x)


@_register("bicm: demapper equals brute-force Bayes on desk instances")
def check_demap_exact(quick=False):
    rng = np.random.default_rng(112)
    cases = [(make_constellation("gray"), 1), (make_constellation("gray"), 2),
             (make_constellation("set_partition"), 2),
             (make_constellation("gray", order=4), 2)]
    for i in range(_scaled(120, quick)):
        const, n_tx = cases[i % len(cases)]
        nb = const.bits_per_symbol * n_tx
        params = ChannelParams(n_tx, 2, 1.0, float(rng.uniform(0.3, 1.5)), 1.0, 1.0,
                               n_tx + 1)
        est = sample_estimate_marginal(params, Seed(16_000 + i))
        kind = ("mismatched", "improved")[i % 2]
        ev = MetricEvaluator.for_estimate(kind, est, params.noise_var)
        y = _zmcscg(rng, (2,), 3.0)
        priors = rng.uniform(0.05, 0.95, size=(nb, 2))
        priors /= priors.sum(axis=1, keepdims=True)
        got = demap_soft(y, ev, priors, const, n_tx)
        want = oracles.brute_force_demap(y, ev, priors, const, n_tx)
        assert np.max(np.abs(got - want)) < 1e-12, (i, kind)
        assert np.max(np.abs(got.sum(axis=1) - 1.0)) < 1e-12


@_register("bicm: BCJR equals enumeration and recombines to the full APP")
def check_bcjr_exact(quick=False):
    rng = np.random.default_rng(113)
    code = ConvCode()
    n_info = 8
    for _ in range(_scaled(100, quick)):
        n_coded = 2 * (n_info + code.memory)
        probs = rng.uniform(0.02, 0.98, size=(n_coded, 2))
        probs /= probs.sum(axis=1, keepdims=True)
        ext, info_app = siso_decode(probs, code)
        ref_info, ref_coded = oracles.enumerate_map_bits(probs, n_info, code)
        assert np.max(np.abs(info_app[:, 1] - ref_info)) < 1e-9
        recomb = ext * probs
        recomb /= recomb.sum(axis=1, keepdims=True)
        assert np.max(np.abs(recomb[:, 1] - ref_coded)) < 1e-9


@_register("bicm: noiseless identity channel decodes every frame exactly")
def check_end_to_end_clean(quick=False):
    code = ConvCode()
    const = make_constellation("gray")
    n_sym, n_tx = 10, 2
    n_coded = n_sym * n_tx * const.bits_per_symbol
    n_info = n_coded // 2 - code.memory
    for case in range(_scaled(100, quick)):
        seed = Seed(17_000 + case)
        bits = seed.child(0).generator().integers(0, 2, n_info, dtype=np.uint8)
        il = build_interleaver(n_coded, seed.child(1))
        x = map_symbols(il.interleave(conv_encode(bits, code)), const, n_tx)
        h = np.broadcast_to(np.eye(n_tx, dtype=complex), (n_sym, n_tx, n_tx))
        out = run_receiver(x, h, "mismatched", 1e-9, const, il, 2,
                           code=code, info_bits=bits)
        assert out.ber is not None and out.ber[-1] == 0.0, case


@_register("bicm: iterative loop stays normalized and finite at low SNR")
def check_loop_finite(quick=False):
    cfg = BerConfig(n_tx=2, n_rx=2, n_pilots=2, labeling="set_partition",
                    snr_db=(2.0,), metrics=("improved",),
                    frames=_scaled(100, quick), iterations=4,
                    frame_symbols=10, seed=18_000)
    pts = simulate_ber(cfg)
    assert all(math.isfinite(p.ber) and 0.0 <= p.ber <= 1.0 for p in pts)


# -------------------------------------------------------------------- rates

@_register("rates: closed-form expectation matches Monte Carlo (3 sigma)")
def check_lemma_mc(quick=False):
    rng = np.random.default_rng(114)
    draws = 50_000 if quick else 200_000
    for case in range(30):
        m_t = (1, 2, 4)[case % 3]
        a = rng.normal(size=(m_t, m_t)) + 1j * rng.normal(size=(m_t, m_t))
        k1 = float(rng.uniform(0.2, 3.0))
        k2 = float(rng.uniform(0.2, 3.0))
        p = float(rng.uniform(0.3, 3.0))
        closed = lemma_expectation(a, k1, k2, p)
        mc, se = oracles.mc_lemma_estimate(a, k1, k2, p, draws, Seed(19_000 + case))
        assert abs(closed - mc) <= max(3 * se, 0.01 * abs(closed)), (case, closed, mc, se)


@_register("rates: invariant to simultaneous unitary rotations")
def check_rate_rotation_invariance(quick=False):
    rng = np.random.default_rng(115)
    params = ChannelParams(2, 2, 1.0, 0.5, 1.0, 1.0, 2)
    consts = rate_constants(params)
    for case in range(_scaled(120, quick)):
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h_hat = h + 0.5 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        q1, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        q2, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        r0 = rate_improved(h, h_hat, params, consts)
        r1 = rate_improved(q1 @ h @ q2.conj().T, q1 @ h_hat @ q2.conj().T,
                           params, consts)
        m0 = rate_mismatched(h, h_hat, params)
        m1 = rate_mismatched(q1 @ h @ q2.conj().T, q1 @ h_hat @ q2.conj().T, params)
        assert abs(r0 - r1) < 1e-9 * max(1.0, r0), case
        assert abs(m0 - m1) < 1e-9 * max(1.0, m0), case


@_register("rates: vanishing estimation error recovers perfect-CSI rates")
def check_rate_consistency_limit(quick=False):
    rng = np.random.default_rng(116)
    for case in range(10):
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        errs = []
        for err_var in (1e-4, 1e-6, 1e-8):
            n_pilots = max(int(round(1.0 / err_var)), 2)  # err_var = noise/(N*P_T)
            params = ChannelParams(2, 2, 1.0, 1.0, 1.0, 1.0, n_pilots)
            mi = mutual_info(h, params)
            r = rate_improved(h, h, params)
            errs.append(abs(r - mi) / mi)
        assert errs[-1] < 0.01, (case, errs)
        assert errs[0] > errs[-1], (case, errs)


@_register("rates: outage quantiles ordered and monotone in gamma")
def check_outage_orderings(quick=False):
    params = ChannelParams(2, 2, 1.0, 0.2, 1.0, 1.0, 2)
    for case in range(_scaled(100, quick)):
        seed = Seed(20_000 + case)
        est = sample_estimate_marginal(params, seed.child(0))
        qs = [outage_rate("improved", est, g, params, 1000, seed.child(1))
              for g in (0.0, 0.05, 0.5)]
        assert qs[0] <= qs[1] <= qs[2], (case, qs)
        cs = [eio_capacity(est, g, params, 1000, seed.child(1))
              for g in (0.0, 0.05, 0.5)]
        assert cs[0] <= cs[1] <= cs[2], (case, cs)


@_register("rates: expected outage rates ordered across decoders")
def check_expected_ordering(quick=False):
    params = ChannelParams(2, 2, 1.0, 0.2, 1.0, 1.0, 2)
    curves = expected_rate_curves(params, 0.03, 100 if quick else 200, 1000,
                                  Seed(21_000))
    (ml, ml_se) = curves["mismatched"]
    (imp, imp_se) = curves["improved"]
    (cap, cap_se) = curves["eio_capacity"]
    assert ml <= imp + 2 * (ml_se + imp_se), curves
    assert imp <= cap + 2 * (imp_se + cap_se), curves


def run(quick: bool = False) -> int:
    failures = 0
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            fn(quick=quick)
        except Exception:
            failures += 1
            print(f"[FAIL] {name}")
            traceback.print_exc()
        else:
            print(f"[PASS] {name}  ({time.perf_counter() - t0:.1f}s)")
    if failures:
        print(f"{failures}/{len(CHECKS)} checks failed")
        return 1
    print(f"all {len(CHECKS)} checks passed")
    return 0
