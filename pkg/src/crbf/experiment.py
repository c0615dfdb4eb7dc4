"""Experiment grid runner: configs, presets, seed-averaged convergence curves, CSV and checkpoints."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .channel import QAM16, generate_dataset, rayleigh_mimo
from .complex_linalg import make_rng
from .errors import CheckpointError, ConfigError, NumericOverflowError
from .initialization import InitConfig, NetShape, NormStats, Scheme, fit_norm_stats, initialize
from .network import Layer, Network
from .training import TrainConfig, mse_db, train_epoch

log = logging.getLogger(__name__)

P_INPUTS = 16
R_OUTPUTS = 4

TABLE_I = {
    Scheme.RANDOM: (0.5, 0.5, 0.5, 0.5),
    Scheme.CONSTELLATION: (0.5, 0.5, 0.5, 0.5),
    Scheme.KMEANS: (0.1, 0.1, 0.4, 0.2),
    Scheme.PROPOSED: (0.1, 0.1, 0.4, 0.2),
}
TABLE_II = [(0.100,) * 4, (0.050,) * 4, (0.033,) * 4, (0.025,) * 4]

DESK_EPOCHS = 500
DESK_SEEDS = 10


def default_rates(scheme: Scheme | str, depth: int) -> list[tuple[float, ...]]:
    """Single-layer rates by scheme; deeper networks use one row per layer."""
    scheme = Scheme(scheme)
    if depth == 1:
        return [TABLE_I[scheme]]
    if depth > len(TABLE_II):
        raise ConfigError(f"no tabulated learning rates for {depth} layers; set 'rates'")
    return list(TABLE_II[:depth])


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    architecture: list[int] = field(default_factory=lambda: [64])
    hidden_outputs: list[int] | None = None
    scheme: str = "proposed"
    rates: list[list[float]] | None = None
    ebn0_db: float = 26.0
    epochs: int = 1000
    seeds: int = 20
    seed: int = 0
    n_train: int = 3840
    n_val: int = 1280
    c_sigma: float = 1.0
    mu_v: float = 1.0
    random_center_variance: float = 1.0
    kmeans_max_iter: int = 300
    input_scheme: str = "stack"
    shuffle: bool = True
    workers: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.architecture, (list, tuple)) or not self.architecture:
            raise ConfigError("architecture: must be a nonempty list of neuron counts")
        if any(not isinstance(n, int) or n < 1 for n in self.architecture):
            raise ConfigError("architecture: neuron counts must be positive integers")
        self.architecture = list(self.architecture)
        try:
            self.scheme = Scheme(self.scheme).value
        except ValueError:
            raise ConfigError(f"scheme: unknown scheme {self.scheme!r}") from None
        if self.rates is not None:
            if len(self.rates) != len(self.architecture):
                raise ConfigError("rates: need one [eta_w, eta_b, eta_gamma, eta_sigma] row per layer")
            for row in self.rates:
                if len(row) != 4 or any(not isinstance(r, (int, float)) or not r > 0 or not math.isfinite(r) for r in row):
                    raise ConfigError(f"rates: each row needs four positive finite numbers, got {row}")
            self.rates = [[float(r) for r in row] for row in self.rates]
        if self.hidden_outputs is not None and len(self.hidden_outputs) != len(self.architecture) - 1:
            raise ConfigError("hidden_outputs: need one entry per hidden layer except the last")
        for name in ("epochs", "seeds", "n_train", "n_val", "workers", "kmeans_max_iter"):
            if not isinstance(getattr(self, name), int):
                raise ConfigError(f"{name}: must be an integer")
        if self.epochs < 1:
            raise ConfigError("epochs: must be >= 1")
        if self.seeds < 1:
            raise ConfigError("seeds: must be >= 1")
        if self.n_train < 1 or self.n_val < 1:
            raise ConfigError("n_train/n_val: must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if not self.c_sigma > 0:
            raise ConfigError("c_sigma: must be positive")
        if not self.mu_v > 0:
            raise ConfigError("mu_v: must be positive")
        if self.input_scheme not in ("stack", "zero-pad"):
            raise ConfigError(f"input_scheme: unknown value {self.input_scheme!r}")
        if self.scheme == Scheme.KMEANS.value and len(self.architecture) != 1:
            raise ConfigError("scheme: kmeans only supports a single hidden layer")

    @property
    def layer_rates(self) -> list[tuple[float, ...]]:
        if self.rates is not None:
            return [tuple(r) for r in self.rates]
        return default_rates(self.scheme, len(self.architecture))

    @property
    def shape(self) -> NetShape:
        return NetShape.build(P_INPUTS, self.architecture, R_OUTPUTS, self.hidden_outputs)

    def init_config(self, seed: int = 0) -> InitConfig:
        return InitConfig(
            scheme=self.scheme,
            c_sigma=self.c_sigma,
            mu_v=self.mu_v,
            random_center_variance=self.random_center_variance,
            kmeans_max_iter=self.kmeans_max_iter,
            seed=seed,
        )

    def desk_scale(self) -> "ExperimentConfig":
        return dataclasses.replace(self, epochs=DESK_EPOCHS, seeds=DESK_SEEDS)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Hash of every field that affects results (not workers or out_dir)."""
        d = self.to_dict()
        d.pop("workers")
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path) -> ExperimentConfig:
    """Load a YAML experiment config; missing keys take the published defaults."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def builtin_presets() -> list[ExperimentConfig]:
    """Single-layer presets per scheme and the three deep architectures."""
    presets = []
    for scheme in Scheme:
        presets.append(
            ExperimentConfig(
                name=f"fig1-{scheme.value}",
                architecture=[64],
                scheme=scheme.value,
                rates=[list(TABLE_I[scheme])],
            )
        )
    deep = {2: [48, 16], 3: [24, 24, 16], 4: [16, 16, 16, 16]}
    for depth, arch in deep.items():
        rates = [list(r) for r in TABLE_II[:depth]]
        presets.append(ExperimentConfig(name=f"fig2-{depth}layer", architecture=arch, rates=rates))
        for scheme in (Scheme.RANDOM, Scheme.CONSTELLATION):
            presets.append(
                ExperimentConfig(
                    name=f"fig2-{depth}layer-{scheme.value}", architecture=arch, scheme=scheme.value, rates=rates
                )
            )
    return presets


def get_preset(name: str) -> ExperimentConfig:
    for p in builtin_presets():
        if p.name == name:
            return p
    known = ", ".join(p.name for p in builtin_presets())
    raise ConfigError(f"unknown preset {name!r}; available: {known}")


# --------------------------------------------------------------------------
# running


@dataclass
class SeedRun:
    seed_index: int
    train_mse: np.ndarray  # (epochs,), NaN after divergence
    val_mse: np.ndarray
    diverged: bool = False
    message: str = ""
    network: Network | None = None


@dataclass
class ConvergenceRecord:
    name: str
    epochs: int
    seed_indices: list[int]
    train_mse: np.ndarray  # (seeds, epochs), linear
    val_mse: np.ndarray
    diverged: list[bool]

    def _mean(self, arr: np.ndarray) -> np.ndarray:
        ok = [i for i, d in enumerate(self.diverged) if not d]
        if not ok:
            return np.full(self.epochs, np.nan)
        return arr[ok].mean(axis=0)

    @property
    def mean_train_mse(self) -> np.ndarray:
        return self._mean(self.train_mse)

    @property
    def mean_val_mse(self) -> np.ndarray:
        return self._mean(self.val_mse)

    @property
    def mean_train_db(self) -> np.ndarray:
        return _to_db(self.mean_train_mse)

    @property
    def mean_val_db(self) -> np.ndarray:
        return _to_db(self.mean_val_mse)

    @property
    def all_diverged(self) -> bool:
        return all(self.diverged)


def _to_db(arr) -> np.ndarray:
    return np.array([np.nan if np.isnan(m) else mse_db(m) for m in np.asarray(arr, dtype=float)])


def prepare_data(cfg: ExperimentConfig, seed_index: int):
    """Channel, dataset and normalization for one seed; identical across schemes."""
    rng = make_rng(cfg.seed, seed_index, 0)
    channel = rayleigh_mimo(4, 4, rng, seed=seed_index)
    ds = generate_dataset(cfg.n_train + cfg.n_val, cfg.ebn0_db, channel, rng,
                          input_scheme=cfg.input_scheme, seed=seed_index)
    train, val = ds.split(cfg.n_train)
    shape = cfg.shape
    L = shape.depth
    icfg = cfg.init_config()
    x_stats = fit_norm_stats(train.inputs, shape.P, icfg.c_sigma, icfg.mu(0, L))
    d_stats = fit_norm_stats(train.targets, shape.R, icfg.c_sigma, icfg.mu(L - 1, L))
    train_set = (x_stats.normalize(train.inputs), d_stats.normalize(train.targets))
    val_set = (x_stats.normalize(val.inputs), d_stats.normalize(val.targets))
    return train_set, val_set, x_stats, d_stats


def run_seed(cfg: ExperimentConfig, seed_index: int, keep_network: bool = False) -> SeedRun:
    train_set, val_set, x_stats, d_stats = prepare_data(cfg, seed_index)
    net = initialize(cfg.shape, cfg.init_config(seed_index), make_rng(cfg.seed, seed_index, 1),
                     x_bar=train_set[0], alphabet=QAM16)
    net.input_norm, net.output_norm = x_stats, d_stats
    tcfg = TrainConfig(cfg.layer_rates, epochs=cfg.epochs, seed=cfg.seed, shuffle=cfg.shuffle)
    shuffle_rng = make_rng(cfg.seed, seed_index, 2)

    train = np.full(cfg.epochs, np.nan)
    val = np.full(cfg.epochs, np.nan)
    run = SeedRun(seed_index, train, val)
    for epoch in range(cfg.epochs):
        try:
            m = train_epoch(net, train_set, val_set, tcfg, shuffle_rng, epoch=epoch)
        except NumericOverflowError as exc:
            run.diverged, run.message = True, str(exc)
            break
        if not (np.isfinite(m.train_mse) and np.isfinite(m.val_mse)):
            run.diverged, run.message = True, f"epoch {epoch}: non-finite MSE"
            break
        train[epoch], val[epoch] = m.train_mse, m.val_mse
    if run.diverged:
        log.warning("%s seed %d diverged: %s", cfg.name, seed_index, run.message)
    if keep_network:
        run.network = net
    return run


def _run_seed_worker(args):
    cfg, seed_index, keep = args
    return run_seed(cfg, seed_index, keep)


def run_grid(cfg: ExperimentConfig, out_dir=None, write: bool = True, save_checkpoints: bool = False) -> ConvergenceRecord:
    """Train every seed of ``cfg``, average the curves and (optionally) write the CSV.

    Seeds run on ``cfg.workers`` processes; results are merged in seed order so
    the output does not depend on the worker count.
    """
    jobs = [(cfg, k, save_checkpoints) for k in range(cfg.seeds)]
    if cfg.workers > 1 and cfg.seeds > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(_run_seed_worker, jobs))
    else:
        runs = [_run_seed_worker(j) for j in jobs]
    runs.sort(key=lambda r: r.seed_index)
    record = ConvergenceRecord(
        name=cfg.name,
        epochs=cfg.epochs,
        seed_indices=[r.seed_index for r in runs],
        train_mse=np.vstack([r.train_mse for r in runs]),
        val_mse=np.vstack([r.val_mse for r in runs]),
        diverged=[r.diverged for r in runs],
    )
    if write:
        out = Path(out_dir if out_dir is not None else cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(record, out / f"{cfg.name}.csv")
        if save_checkpoints:
            for r in runs:
                if not r.diverged:
                    save_checkpoint(r.network, out / f"{cfg.name}_seed{r.seed_index}.json", cfg.config_hash())
    return record


# --------------------------------------------------------------------------
# CSV


def _fmt(x: float) -> str:
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.12g}"


def emit_csv(record: ConvergenceRecord, path) -> None:
    """Columns: epoch, mean_train_mse_db, mean_val_mse_db, then train/val dB per seed.

    Values carry 12 significant digits; zero MSE is written as ``-inf`` and
    epochs after a divergence as ``nan``.
    """
    path = Path(path)
    header = ["epoch", "mean_train_mse_db", "mean_val_mse_db"]
    for k in record.seed_indices:
        header += [f"train_mse_db_seed{k}", f"val_mse_db_seed{k}"]
    mt, mv = record.mean_train_db, record.mean_val_db
    tr = _to_db(record.train_mse.ravel()).reshape(record.train_mse.shape)
    va = _to_db(record.val_mse.ravel()).reshape(record.val_mse.shape)
    lines = [",".join(header)]
    for e in range(record.epochs):
        row = [str(e + 1), _fmt(mt[e]), _fmt(mv[e])]
        for s in range(len(record.seed_indices)):
            row += [_fmt(tr[s, e]), _fmt(va[s, e])]
        lines.append(",".join(row))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    body = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, body


# --------------------------------------------------------------------------
# checkpoints

CHECKPOINT_FORMAT = "crbf-checkpoint"
CHECKPOINT_VERSION = 1


def _pairs(arr: np.ndarray):
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _unpairs(data) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    return a[..., 0] + 1j * a[..., 1]


def save_checkpoint(net: Network, path, config_hash: str = "") -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "P": net.P,
        "R": net.R,
        "neurons": net.neurons,
        "outputs": net.outputs,
        "layers": [
            {"W": _pairs(l.W), "b": _pairs(l.b), "gamma": _pairs(l.gamma), "sigma": l.sigma.tolist()}
            for l in net.layers
        ],
        "input_norm": net.input_norm.to_dict() if net.input_norm is not None else None,
        "output_norm": net.output_norm.to_dict() if net.output_norm is not None else None,
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> Network:
    """Read a checkpoint written by :func:`save_checkpoint`; raises :class:`CheckpointError`."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt or truncated checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a crbf checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    try:
        layers = [
            Layer(W=_unpairs(l["W"]), b=_unpairs(l["b"]), gamma=_unpairs(l["gamma"]), sigma=np.asarray(l["sigma"]))
            for l in doc["layers"]
        ]
        net = Network(P=doc["P"], R=doc["R"], layers=layers)
        if net.neurons != doc["neurons"] or net.outputs != doc["outputs"]:
            raise CheckpointError(f"{path}: recorded shape does not match parameters")
        if doc["input_norm"] is not None:
            net.input_norm = NormStats.from_dict(doc["input_norm"])
        if doc["output_norm"] is not None:
            net.output_norm = NormStats.from_dict(doc["output_norm"])
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None
    return net
