"""Seeded Monte-Carlo trials, sweeps over SNR and pilot settings, CSV output.

Seeding: the root seed and the pair (SNR index, trial index) identify a trial.
That trial's SeedSequence spawns four independent streams: bits, pilots,
channel and noise. Different pilot configurations at the same (SNR, trial)
therefore see the same channel, noise and data (common random numbers),
while no stream is shared between trials or SNR points.
"""
import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .bem import gce_basis, ls_fit
from .channel import ChannelConfig, NoiseSpec, apply_channel, generate_channel
from .exceptions import InvalidConfigError, ReceiverDivergedError
from .modem import ModemConfig, dd_to_time, map_bits, superimpose, unvec
from .pilots import SCHEMES, make_pilots
from .receiver import ReceiverConfig, run

log = logging.getLogger(__name__)

MODES = ("final", "convergence")


@dataclass(frozen=True)
class SimConfig:
    modem: ModemConfig = field(default_factory=ModemConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    schemes: tuple = ("sp-dd-d",)
    betas: tuple = (8,)
    rho_f: tuple = (0.1,)
    pilot_sequence: str = "qpsk"
    snr_db: tuple = (10.0,)
    n_trials: int = 300
    seed: int = 0
    mode: str = "final"
    genie: bool = False
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        for name in ("schemes", "betas", "rho_f", "snr_db"):
            value = getattr(self, name)
            value = tuple(value) if isinstance(value, (list, tuple)) else (value,)
            object.__setattr__(self, name, value)
            if not value:
                raise InvalidConfigError(f"{name} must not be empty")
        if self.n_trials < 1:
            raise InvalidConfigError("n_trials must be >= 1")
        if self.mode not in MODES:
            raise InvalidConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise InvalidConfigError(f"unknown pilot scheme {s!r}; expected {SCHEMES}")
        if self.workers < 1:
            raise InvalidConfigError("workers must be >= 1")
        if self.channel.n_taps != self.receiver.n_taps:
            raise InvalidConfigError(
                f"channel has {self.channel.n_taps} taps but the receiver models "
                f"{self.receiver.n_taps}"
            )

    def pilot_settings(self):
        """Distinct (scheme, beta, rho_f) triples; sp-dd ignores beta."""
        out = []
        for scheme in self.schemes:
            for beta in (self.betas if scheme == "sp-dd-d" else (1,)):
                for rho_f in self.rho_f:
                    item = (scheme, int(beta), float(rho_f))
                    if item not in out:
                        out.append(item)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        nested = {"modem": ModemConfig, "channel": ChannelConfig, "receiver": ReceiverConfig}
        for key, typ in nested.items():
            if key in data and isinstance(data[key], dict):
                try:
                    data[key] = typ(**data[key])
                except TypeError as exc:
                    raise InvalidConfigError(f"bad {key} section: {exc}") from exc
        return cls(**data)

    @classmethod
    def from_yaml(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})

    def to_dict(self):
        d = asdict(self)
        d["modem"] = {"M": self.modem.M, "N": self.modem.N}
        return d


@dataclass
class ResultRow:
    snr_db: float
    scheme: str
    beta: int
    rho_f: float
    iteration: int
    ber: float
    ber_stderr: float
    mse: float
    mse_stderr: float
    trials: int
    wallclock_s: float


@dataclass
class TrialResult:
    ber: np.ndarray  # per iteration
    mse: np.ndarray
    wallclock_s: float
    failed: bool = False
    error: str = ""


@dataclass
class SweepResult:
    rows: list
    failures: dict  # (snr, scheme, beta, rho_f) -> failed trial count

    @property
    def n_failed(self):
        return sum(self.failures.values())


def trial_seed(root, snr_index, trial):
    return np.random.SeedSequence(root, spawn_key=(snr_index, trial))


def run_trial(cfg, snr_db, seed, scheme=None, beta=None, rho_f=None):
    """Simulate one frame and return per-iteration BER and channel MSE.

    ``seed`` is an int or a SeedSequence. Receiver divergence is caught and
    reported through ``failed`` instead of raised.
    """
    scheme = cfg.schemes[0] if scheme is None else scheme
    beta = cfg.betas[0] if beta is None else beta
    rho_f = cfg.rho_f[0] if rho_f is None else rho_f
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_bits, s_pilot, s_chan, s_noise = ss.spawn(4)
    M, N = cfg.modem.M, cfg.modem.N

    bits = np.random.default_rng(s_bits).integers(0, 2, cfg.modem.bits_per_symbol * M * N)
    x_d = map_bits(bits, cfg.modem)
    pilots = make_pilots(scheme, M, N, beta=beta, seed=s_pilot, rho_f=rho_f,
                         n_taps=cfg.receiver.n_taps, sequence=cfg.pilot_sequence)
    x_t = dd_to_time(unvec(superimpose(x_d, pilots.x_p_dd, pilots.rho), M, N))
    channel = generate_channel(cfg.channel, M, N, seed=s_chan)
    noise = NoiseSpec.from_snr_db(snr_db)
    y = apply_channel(channel, x_t, noise, seed=s_noise)

    genie = {}
    if cfg.genie:
        basis = gce_basis(M * N, cfg.receiver.q_main, cfg.receiver.k_os)
        genie = dict(genie_coeffs=ls_fit(channel, basis).C, fixed_channel=True)
    start = time.perf_counter()
    try:
        out, _ = run(y, pilots, cfg.receiver, noise.variance, truth=channel,
                     true_bits=bits, modem=cfg.modem, **genie)
    except ReceiverDivergedError as exc:
        return TrialResult(np.array([]), np.array([]), time.perf_counter() - start, True, str(exc))
    elapsed = time.perf_counter() - start
    return TrialResult(np.asarray(out.diagnostics.ber), np.asarray(out.diagnostics.mse), elapsed)


def _stderr(a, axis=0):
    n = a.shape[axis]
    return np.std(a, axis=axis, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(a.shape[1:])


def aggregate(results, key, mode):
    """Mean and standard error over successful trials for one sweep point."""
    snr, scheme, beta, rho_f = key
    ok = [r for r in results if not r.failed]
    if not ok:
        return []
    ber = np.stack([r.ber for r in ok])
    mse = np.stack([r.mse for r in ok])
    wall = float(np.mean([r.wallclock_s for r in ok]))
    iters = range(ber.shape[1]) if mode == "convergence" else [ber.shape[1] - 1]
    b_m, b_s = ber.mean(axis=0), _stderr(ber)
    m_m, m_s = mse.mean(axis=0), _stderr(mse)
    return [
        ResultRow(float(snr), scheme, int(beta), float(rho_f), i + 1, float(b_m[i]),
                  float(b_s[i]), float(m_m[i]), float(m_s[i]), len(ok), wall)
        for i in iters
    ]


def _job(args):
    cfg, snr, seed, scheme, beta, rho_f = args
    return run_trial(cfg, snr, seed, scheme, beta, rho_f)


def sweep(cfg, progress=None):
    """Run every (SNR, pilot setting, trial) combination and aggregate.

    Trials are independent, so ``cfg.workers > 1`` farms them out to a
    process pool. Results are reassembled in canonical order before
    aggregation, which makes the output independent of completion order.
    """
    if cfg.receiver.early_stop and cfg.mode == "convergence":
        raise InvalidConfigError("convergence mode needs early_stop disabled")
    settings = cfg.pilot_settings()
    jobs, keys = [], []
    for i_snr, snr in enumerate(cfg.snr_db):
        for scheme, beta, rho_f in settings:
            for t in range(cfg.n_trials):
                jobs.append((cfg, snr, trial_seed(cfg.seed, i_snr, t), scheme, beta, rho_f))
                keys.append((snr, scheme, beta, rho_f))

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=4))
    else:
        results = []
        for n, job in enumerate(jobs):
            results.append(_job(job))
            if progress:
                progress(n + 1, len(jobs))

    grouped = {}
    for key, res in zip(keys, results):
        grouped.setdefault(key, []).append(res)
    rows, failures = [], {}
    for key, res in grouped.items():
        failed = sum(r.failed for r in res)
        failures[key] = failed
        if failed:
            log.warning("%d of %d trials diverged at %s", failed, len(res), key)
        rows.extend(aggregate(res, key, cfg.mode))
    if cfg.out:
        write_csv(rows, cfg.out)
    return SweepResult(rows, failures)


def write_csv(rows, path):
    names = [f.name for f in fields(ResultRow)]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in rows:
                writer.writerow([_fmt(getattr(row, n)) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path):
    types = {f.name: f.type for f in fields(ResultRow)}
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            ResultRow(**{k: types[k](v) for k, v in rec.items()})
            for rec in csv.DictReader(fh)
        ]


def _fmt(v):
    return repr(v) if isinstance(v, float) else v
