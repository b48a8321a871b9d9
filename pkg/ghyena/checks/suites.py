"""Invariant suites run by ``ghyena check``.

Every suite returns a ``CheckReport``; a result fails when its observed value is not
below (or, for lower bounds, not above) its tolerance. Failures are logged at WARNING
with the invariant name and the tolerance.
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ghyena.autodiff.gradcheck import finite_diff_check
from ghyena.autodiff.params import ParamStore
from ghyena.autodiff.tensor import Tape, Tensor, default_dtype
from ghyena.bench.harness import fit_exponent
from ghyena.core.errors import NumericalError
from ghyena.longconv.fft import dft_naive, fft
from ghyena.longconv.ops import (
    LEVI_CIVITA,
    GeometricConvParams,
    LeviCivitaPlan,
    circular_conv,
    geometric_long_conv,
    scalar_long_conv,
    vector_long_conv,
)
from ghyena.longconv.oracles import (
    circular_conv_naive,
    dot_product_attention_naive,
    geometric_long_conv_naive,
    scalar_long_conv_naive,
    vector_long_conv_naive,
)
from ghyena.nn.attention import (
    GTransformerBlock,
    cross_product_vector_attention,
    dot_product_vector_attention,
)
from ghyena.nn.block import HyenaBlock
from ghyena.nn.geometry import GeometricSequence, transform
from ghyena.nn.model import GHyenaModel, parameter_count
from ghyena.nn.projection import EGNNProjection, compute_global_tokens, egnn_projection
from ghyena.nn.siren import SirenNet, siren_weights
from ghyena.recall.data import STREAMS, generate_dataset
from ghyena.recall.train import batch_sequence, evaluate, mean_predictor_mse, mse_loss, train
from ghyena.schemas.config import ABLATION_ROWS, BlockConfig, CheckConfig, ModelConfig, TrainConfig
from ghyena.schemas.records import CheckReport, CheckResult

logger = logging.getLogger(__name__)

EQUIVARIANCE_TOL = 1e-8
ORACLE_TOL = 1e-10
GRADCHECK_TOL = 1e-4
STABLE_MAX_EXPONENT = 1.1
UNSTABLE_MIN_EXPONENT = 2.5


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def _record(report: CheckReport, invariant: str, value: float, tolerance: float,
            detail: str = "", lower_bound: bool = False) -> CheckResult:
    passed = bool(value >= tolerance) if lower_bound else bool(value < tolerance)
    result = CheckResult(invariant=invariant, passed=passed, value=value, tolerance=tolerance, detail=detail)
    report.results.append(result)
    if not passed:
        logger.warning("%s failed: observed %.3e, tolerance %.1e %s", invariant, value, tolerance, detail)
    return result


def _small_block_config(**overrides: object) -> BlockConfig:
    base = {"num_global_tokens": 4, "siren_hidden": 8}
    base.update(overrides)
    return BlockConfig(**base)


# -- equivariance ---------------------------------------------------------------

def _group_elements(count: int, rng: np.random.Generator) -> List[Tuple[np.ndarray, np.ndarray]]:
    rotations = Rotation.random(count, random_state=rng).as_matrix().reshape(count, 3, 3)
    return [(r, rng.normal(size=3)) for r in rotations]


def _seq(rng: np.random.Generator, n: int, d: int) -> GeometricSequence:
    return GeometricSequence(f=rng.normal(size=(n, d)), x=rng.normal(size=(n, 3)))


def check_equivariance(cfg: CheckConfig) -> CheckReport:
    """SO(3) for the convolutions and attentions, SE(3) for projections, blocks and the model."""
    report = CheckReport(suite="equivariance")
    rng = np.random.default_rng(cfg.seed)
    n, d = 12, 8
    group = _group_elements(cfg.rotations, rng)

    q, k, v = (rng.normal(size=(n, 3)) for _ in range(3))
    a1, a2 = rng.normal(size=(n, 1)), rng.normal(size=(n, 1))
    conv_params = GeometricConvParams.from_values(rng.normal(size=5), rng.normal(size=d))
    base_vec = vector_long_conv(q, k).data
    base_alpha, base_r = (t.data for t in geometric_long_conv(a1, q, a2, k, conv_params))
    base_dot = dot_product_vector_attention(q, k, v).data
    base_cross = cross_product_vector_attention(q, k, v).data

    errs: Dict[str, float] = {}

    def track(name: str, value: float) -> None:
        errs[name] = max(errs.get(name, 0.0), value)

    for r, _ in group:
        track("vector_long_conv commutes with rotations", rel_err(vector_long_conv(q @ r.T, k @ r.T).data, base_vec @ r.T))
        alpha, rot = geometric_long_conv(a1, q @ r.T, a2, k @ r.T, conv_params)
        track("geometric_long_conv scalar output is invariant", rel_err(alpha.data, base_alpha))
        track("geometric_long_conv vector output rotates", rel_err(rot.data, base_r @ r.T))
        track("dot-product vector attention rotates", rel_err(dot_product_vector_attention(q @ r.T, k @ r.T, v @ r.T).data, base_dot @ r.T))
        track("cross-product vector attention rotates", rel_err(cross_product_vector_attention(q @ r.T, k @ r.T, v @ r.T).data, base_cross @ r.T))

    store = ParamStore()
    root = store.scope("")
    seq = _seq(rng, n, d)
    siren = SirenNet(root.scope("siren"), 4, rng, hidden=8)
    proj = EGNNProjection(root.scope("proj"), d, rng)
    omega = siren_weights(n, siren)

    def project(s: GeometricSequence) -> GeometricSequence:
        return egnn_projection(s, compute_global_tokens(s, omega), proj)

    block_config = _small_block_config()
    hyena = HyenaBlock(root.scope("hyena"), d, block_config, rng)
    gtrans = GTransformerBlock(root.scope("gtrans"), d, block_config, rng, attention="cross")
    model = GHyenaModel(ModelConfig(input_dim=d, hidden_dim=d, depth=2, block_config=block_config), seed=cfg.seed)

    layers: Sequence[Tuple[str, Callable[[GeometricSequence], GeometricSequence]]] = [
        ("egnn_projection", project), ("hyena block", hyena), ("gtransformer block", gtrans),
    ]
    base_out = {name: fn(seq) for name, fn in layers}
    base_model = model(seq).data
    for r, t in group:
        moved = transform(seq, r, t)
        for name, fn in layers:
            out = fn(moved)
            track(f"{name} features are SE(3) invariant", rel_err(out.f.data, base_out[name].f.data))
            track(f"{name} vectors are SE(3) equivariant", rel_err(out.x.data, base_out[name].x.data @ r.T + t))
        track("model readout is SE(3) equivariant", rel_err(model(moved).data, base_model @ r.T + t))

    for name, value in errs.items():
        _record(report, name, value, EQUIVARIANCE_TOL, f"max over {len(group)} group elements")
    return report


# -- oracles --------------------------------------------------------------------

def check_oracle(cfg: CheckConfig, plan: Optional[LeviCivitaPlan] = None) -> CheckReport:
    """FFT paths against the O(N^2) oracles for every configured length."""
    if plan is None:
        plan = LEVI_CIVITA if cfg.flip_plan_row is None else LEVI_CIVITA.flipped(cfg.flip_plan_row)
    report = CheckReport(suite="oracle")
    rng = np.random.default_rng(cfg.seed)
    errs: Dict[str, float] = {}
    for n in cfg.oracle_lengths:
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        a, b = rng.normal(size=n), rng.normal(size=n)
        qs, ks = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
        q, k, v = (rng.normal(size=(n, 3)) for _ in range(3))
        a1, a2 = rng.normal(size=(n, 1)), rng.normal(size=(n, 1))
        lambdas = rng.normal(size=5)
        params = GeometricConvParams.from_values(lambdas, np.ones(1))
        alpha, r3 = geometric_long_conv(a1, q, a2, k, params, plan=plan)
        alpha_ref, r3_ref = geometric_long_conv_naive(a1, q, a2, k, lambdas)
        found = {
            "fft matches the direct DFT": rel_err(fft(x), dft_naive(x)),
            "circular_conv matches the direct sum": rel_err(circular_conv(a, b), circular_conv_naive(a, b)),
            "scalar_long_conv matches its oracle": rel_err(scalar_long_conv(qs, ks).data, scalar_long_conv_naive(qs, ks)),
            "vector_long_conv matches its oracle": rel_err(vector_long_conv(q, k, plan=plan).data, vector_long_conv_naive(q, k)),
            "geometric_long_conv matches its oracle": max(rel_err(alpha.data, alpha_ref), rel_err(r3.data, r3_ref)),
            "dot-product vector attention matches its oracle": rel_err(dot_product_vector_attention(q, k, v).data,
                                                                       dot_product_attention_naive(q, k, v)),
        }
        for name, value in found.items():
            errs[name] = max(errs.get(name, 0.0), value)
    for name, value in errs.items():
        _record(report, name, value, ORACLE_TOL, f"N in {cfg.oracle_lengths}")
    return report


# -- gradients ------------------------------------------------------------------

GRADCHECK_EPS = 1e-5
# gradients below this are compared on an absolute scale (GRADCHECK_TOL * floor)
GRADCHECK_FLOOR = 1e-4


def check_gradients(cfg: CheckConfig) -> CheckReport:
    """Central differences against the tape for a 2-block model.

    The objective is the per-token MSE of both output streams against fixed random
    targets, so every parameter, including the SIREN and global-token weights, has a
    gradient well above finite-difference round-off.
    """
    report = CheckReport(suite="gradcheck")
    with default_dtype("float64"):
        block_config = _small_block_config()
        model = GHyenaModel(ModelConfig(hidden_dim=cfg.gradcheck_hidden, depth=2, readout="per_token",
                                        block_config=block_config), seed=cfg.seed)
        batch = generate_dataset(2, 3, cfg.gradcheck_len, cfg.seed, STREAMS["test"], threads=1)
        seq = batch_sequence(batch)
        rng = np.random.default_rng(cfg.seed)
        f_target = rng.normal(size=seq.f.shape[:-1] + (cfg.gradcheck_hidden,))
        x_target = rng.normal(size=seq.x.shape)

        def objective(_: ParamStore) -> Tensor:
            out = model(seq)
            return mse_loss(out.f, f_target) + mse_loss(out.x, x_target)

        with Tape() as tape:
            loss = objective(model.params)
            tape.backward(loss)
        _record(report, "backward visits every node once", abs(tape.visits - len(tape)), 0.5,
                f"{len(tape)} nodes, {tape.visits} visits")

        worst = finite_diff_check(objective, model.params, eps=GRADCHECK_EPS, max_entries=cfg.gradcheck_max_entries,
                                  seed=cfg.seed, floor=GRADCHECK_FLOOR)
    _record(report, "tape gradients match central differences", worst, GRADCHECK_TOL,
            f"{parameter_count(model)} parameters, N={cfg.gradcheck_len}")
    return report


# -- stability ------------------------------------------------------------------

def growth_exponent(config: BlockConfig, scales: Sequence[float], seed: int = 0, n: int = 32, d: int = 8) -> float:
    """Log-log slope of the operator output norm against the input scale, gating disabled."""
    rng = np.random.default_rng(seed)
    block = HyenaBlock(ParamStore().scope("stability"), d, config.model_copy(update={"gating_mode": "none"}), rng)
    seq = _seq(rng, n, d)
    norms = []
    for s in scales:
        scaled = GeometricSequence(f=seq.f.data * s, x=seq.x.data * s)
        y_inv, y_eqv = block.operator(scaled)
        norms.append(float(np.sqrt(np.sum(y_inv.data ** 2) + np.sum(y_eqv.data ** 2))))
    if not np.all(np.isfinite(norms)):
        return float("inf")
    return fit_exponent(scales, norms)


def _stability_result(report: CheckReport, label: str, config: BlockConfig, cfg: CheckConfig) -> float:
    exponent = growth_exponent(config, cfg.stability_scales, seed=cfg.seed)
    if config.kv_norm:
        _record(report, f"{label}: output growth is at most linear with kv_norm", exponent, STABLE_MAX_EXPONENT)
    else:
        _record(report, f"{label}: instability detector fires without kv_norm", exponent, UNSTABLE_MIN_EXPONENT,
                "unstable" if exponent >= UNSTABLE_MIN_EXPONENT else "not flagged", lower_bound=True)
    return exponent


def check_stability(cfg: CheckConfig) -> CheckReport:
    report = CheckReport(suite="stability")
    _stability_result(report, "kv_norm on", _small_block_config(kv_norm=True), cfg)
    _stability_result(report, "kv_norm off", _small_block_config(kv_norm=False), cfg)
    return report


# -- ablation -------------------------------------------------------------------

def check_ablation(cfg: CheckConfig) -> CheckReport:
    """Train every component-toggle row briefly and report its test MSE."""
    report = CheckReport(suite="ablation")
    train_cfg = TrainConfig(
        epochs=cfg.ablation_epochs, warmup_epochs=1, train_size=cfg.ablation_train_size,
        val_size=cfg.ablation_test_size, test_size=cfg.ablation_test_size,
        seq_len=cfg.ablation_seq_len, on_the_fly=False, seed=cfg.seed,
    )
    train_set = generate_dataset(train_cfg.train_size, train_cfg.vocab_size, train_cfg.seq_len, cfg.seed, STREAMS["train"])
    test_set = generate_dataset(train_cfg.test_size, train_cfg.vocab_size, train_cfg.seq_len, cfg.seed, STREAMS["test"])
    baseline = mean_predictor_mse(test_set)

    for label, overrides in ABLATION_ROWS:
        block_config = _small_block_config(**overrides)
        model = GHyenaModel(ModelConfig(hidden_dim=cfg.ablation_hidden, depth=2, block_config=block_config), seed=cfg.seed)
        try:
            train(model, train_cfg, train_set=train_set, val_set=test_set)
            mse = evaluate(model, test_set, train_cfg.batch_size)
        except NumericalError as e:
            logger.warning("ablation row %s diverged: %s", label, e.detail)
            mse = float("nan")
        exponent = _stability_result(report, label, block_config, cfg)
        flag = "unstable" if exponent >= UNSTABLE_MIN_EXPONENT else "stable"
        detail = f"test_mse={mse:.4f} mean_predictor={baseline:.4f} growth={exponent:.2f} {flag}"
        _record(report, f"{label}: trains end to end", 0.0 if np.isfinite(mse) or not block_config.kv_norm else 1.0,
                0.5, detail)
        logger.info("ablation %-14s %s", label, detail)
    return report


SUITES: Dict[str, Callable[[CheckConfig], CheckReport]] = {
    "equivariance": check_equivariance,
    "oracle": check_oracle,
    "gradcheck": check_gradients,
    "stability": check_stability,
    "ablation": check_ablation,
}


def run_suite(cfg: CheckConfig) -> CheckReport:
    """Runs in 64-bit regardless of the configured default width."""
    with default_dtype("float64"):
        report = SUITES[cfg.suite](cfg)
    logger.info("%s: %d/%d invariants hold", cfg.suite, len(report.results) - len(report.failures), len(report.results))
    return report


def format_report(report: CheckReport) -> str:
    lines = [f"suite {report.suite}: {'PASS' if report.passed else 'FAIL'}"]
    for r in report.results:
        mark = "ok  " if r.passed else "FAIL"
        lines.append(f"  {mark} {r.invariant}: {r.value:.3e} (tolerance {r.tolerance:.1e}) {r.detail}".rstrip())
    return "\n".join(lines)
