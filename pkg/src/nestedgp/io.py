"""Dataset files, run configuration files and trace CSVs.

Dataset CSV layout (one record per row, first cell names the record)::

    # nestedgp dataset v1
    dims,2,10,64
    d,2
    meta,"{...json...}"
    design,1,1.71,0.05          # 1-based row, then d coordinates
    value,1,1,1,0.123           # 1-based tensor index, then the value

``value`` rows appear in column-major order (mode 1 fastest).  A test-slice
file may omit the ``design`` rows.

The binary variant (``.bin``) is little-endian: magic ``NGPD``, format
version (u32), ``k`` (u32), ``k`` dims (u64), ``d`` (u32), number of design
rows (u64), meta length (u32) and UTF-8 JSON meta, design points (f64,
row-major), tensor entries (f64, column-major).
"""

import configparser
import csv
import io as _io
import json
import math
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .linalg import JitterPolicy
from .sampler import Priors, ProposalConfig, RunReport, SamplerConfig, trace_columns

__all__ = [
    "Dataset",
    "DatasetError",
    "RunConfig",
    "config_from_text",
    "config_to_text",
    "read_config",
    "read_dataset",
    "read_trace_csv",
    "write_config",
    "write_dataset",
    "write_trace_csv",
]

MAGIC = b"NGPD"
VERSION = 1


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    data: np.ndarray
    points: np.ndarray | None
    meta: dict = field(default_factory=dict)

    @property
    def dims(self):
        return self.data.shape

    @property
    def d(self):
        return None if self.points is None else self.points.shape[1]

    def require_design(self):
        if self.points is None or self.points.shape[0] == 0:
            raise DatasetError(
                "missing design-point table: no 'design' rows for header field 'dims' "
                f"(last-mode size {self.dims[-1]})"
            )
        if self.points.shape[0] != self.dims[-1]:
            raise DatasetError(
                f"header field 'dims' declares {self.dims[-1]} design points, "
                f"the 'design' table has {self.points.shape[0]} rows"
            )


def _fmt(x):
    return repr(float(x))


def write_dataset(path, data, points=None, meta=None):
    path = Path(path)
    data = np.asarray(data, dtype=float)
    pts = None if points is None else np.asarray(points, dtype=float).reshape(len(points), -1)
    meta = meta or {}
    if path.suffix == ".bin":
        _write_binary(path, data, pts, meta)
        return
    d = 0 if pts is None else pts.shape[1]
    if "d" in meta and pts is None:
        d = int(meta["d"])
    with open(path, "w", newline="") as fh:
        fh.write("# nestedgp dataset v1\n")
        w = csv.writer(fh)
        w.writerow(["dims"] + [str(m) for m in data.shape])
        w.writerow(["d", str(d)])
        w.writerow(["meta", json.dumps(meta, sort_keys=True)])
        if pts is not None:
            for i, row in enumerate(pts, start=1):
                w.writerow(["design", str(i)] + [_fmt(x) for x in row])
        flat = data.ravel(order="F")
        for pos, idx in enumerate(np.ndindex(*data.shape[::-1])):
            idx = idx[::-1]
            w.writerow(["value"] + [str(i + 1) for i in idx] + [_fmt(flat[pos])])


def _write_binary(path, data, pts, meta):
    meta_b = json.dumps(meta, sort_keys=True).encode()
    n_design = 0 if pts is None else pts.shape[0]
    d = 0 if pts is None else pts.shape[1]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, data.ndim))
        fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        fh.write(struct.pack("<IQI", d, n_design, len(meta_b)))
        fh.write(meta_b)
        if pts is not None:
            fh.write(pts.astype("<f8").tobytes(order="C"))
        fh.write(data.astype("<f8").tobytes(order="F"))


def _read_binary(path):
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise DatasetError(f"{path}: not a nestedgp binary dataset")
    off = 4
    version, k = struct.unpack_from("<II", raw, off)
    off += 8
    if version != VERSION:
        raise DatasetError(f"unsupported binary version {version}")
    dims = struct.unpack_from(f"<{k}Q", raw, off)
    off += 8 * k
    d, n_design, meta_len = struct.unpack_from("<IQI", raw, off)
    off += struct.calcsize("<IQI")
    meta = json.loads(raw[off:off + meta_len].decode())
    off += meta_len
    pts = None
    if n_design:
        pts = np.frombuffer(raw, dtype="<f8", count=n_design * d, offset=off).reshape(n_design, d).copy()
        off += 8 * n_design * d
    size = int(np.prod(dims))
    if len(raw) - off != 8 * size:
        raise DatasetError(f"header field 'dims' {dims} does not match the payload size")
    data = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(dims, order="F").copy()
    return Dataset(data.astype(float), pts, meta)


def read_dataset(path):
    path = Path(path)
    if path.suffix == ".bin":
        return _read_binary(path)
    dims = d = None
    meta = {}
    design = {}
    values = []
    with open(path, newline="") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        for row in rows:
            if not row:
                continue
            kind = row[0]
            if kind == "dims":
                dims = tuple(int(x) for x in row[1:])
            elif kind == "d":
                d = int(row[1])
            elif kind == "meta":
                meta = json.loads(row[1]) if len(row) > 1 and row[1] else {}
            elif kind == "design":
                design[int(row[1])] = [float(x) for x in row[2:]]
            elif kind == "value":
                values.append(row[1:])
            else:
                raise DatasetError(f"{path}: unknown record type {kind!r}")
    if dims is None:
        raise DatasetError(f"{path}: missing header field 'dims'")
    if d is None:
        raise DatasetError(f"{path}: missing header field 'd'")
    size = int(np.prod(dims))
    if len(values) != size:
        raise DatasetError(f"{path}: header field 'dims' {dims} implies {size} values, found {len(values)}")
    data = np.empty(dims)
    for row in values:
        idx = tuple(int(i) - 1 for i in row[:-1])
        if len(idx) != len(dims):
            raise DatasetError(f"{path}: value row {row} does not match header field 'dims'")
        data[idx] = float(row[-1])
    pts = None
    if design:
        if sorted(design) != list(range(1, len(design) + 1)):
            raise DatasetError(f"{path}: design rows must be numbered 1..n")
        pts = np.array([design[i] for i in range(1, len(design) + 1)], dtype=float)
        if pts.shape[1] != d:
            raise DatasetError(f"{path}: design rows have {pts.shape[1]} coordinates, header field 'd' says {d}")
    return Dataset(data, pts, meta)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Sampler settings plus model strategy and output location."""

    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    strategies: list = field(default_factory=lambda: ["direct", "empirical", "kernel"])
    output_dir: str = "."
    chains: int = 1


_LIST_KEYS = {
    "seeds": ["ell0", "a0", "delta0", "sigma0", "s0"],
    "proposal": ["v_ell", "v_a", "v_delta", "v_sigma", "v_s"],
    "prior": ["ell_var", "a_var", "delta_var", "sigma_var"],
}
_SECTIONS = {
    "model": ["flavour", "t0", "strategies"],
    "run": ["n_iter", "seed", "burnin_frac", "adapt", "flat_likelihood", "chains"],
    "seeds": _LIST_KEYS["seeds"],
    "proposal": _LIST_KEYS["proposal"],
    "prior": _LIST_KEYS["prior"] + ["sigma", "s_bounds"],
    "jitter": ["start", "factor", "maximum"],
    "output": ["directory"],
}


def _fmt_list(vals):
    return "" if vals is None else ",".join(_fmt(v) for v in vals)


def _parse_list(text):
    text = text.strip()
    return None if not text else [float(x) for x in text.split(",")]


def format_bounds(bounds):
    return "" if bounds is None else ",".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in bounds)


def parse_bounds(text):
    text = text.strip()
    if not text:
        return None
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ValueError(f"bounds entry {part!r} must look like lo:hi")
        out.append((float(lo), float(hi)))
    return out


def config_to_text(cfg, strategies=None, output_dir=None, chains=None):
    """Serialise a :class:`SamplerConfig` (or :class:`RunConfig`) as INI text."""
    if isinstance(cfg, RunConfig):
        strategies, output_dir, chains = cfg.strategies, cfg.output_dir, cfg.chains
        cfg = cfg.sampler
    cp = configparser.ConfigParser(interpolation=None)
    cp["model"] = {"flavour": cfg.model, "t0": str(cfg.t0)}
    if strategies is not None:
        cp["model"]["strategies"] = ",".join(strategies)
    cp["run"] = {
        "n_iter": str(cfg.n_iter),
        "seed": str(cfg.seed),
        "burnin_frac": _fmt(cfg.burnin_frac),
        "adapt": str(cfg.adapt).lower(),
        "flat_likelihood": str(cfg.flat_likelihood).lower(),
    }
    if chains is not None:
        cp["run"]["chains"] = str(chains)
    cp["seeds"] = {k: _fmt_list(getattr(cfg, k)) for k in _LIST_KEYS["seeds"]}
    cp["proposal"] = {k: _fmt_list(getattr(cfg.proposal, k)) for k in _LIST_KEYS["proposal"]}
    cp["prior"] = {k: _fmt_list(getattr(cfg.priors, k)) for k in _LIST_KEYS["prior"]}
    cp["prior"]["sigma"] = cfg.priors.sigma
    cp["prior"]["s_bounds"] = format_bounds(cfg.priors.s_bounds)
    cp["jitter"] = {k: _fmt(getattr(cfg.jitter, k)) for k in ("start", "factor", "maximum")}
    if output_dir is not None:
        cp["output"] = {"directory": output_dir}
    buf = _io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def config_from_text(text):
    """Parse INI text into a :class:`RunConfig`; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SECTIONS[section]:
                raise ValueError(f"unknown config key '{key}' in [{section}]")
    get = lambda s, k: cp[s][k] if cp.has_option(s, k) else None  # noqa: E731
    sc = SamplerConfig()
    rc = RunConfig(sampler=sc)
    if get("model", "flavour") is not None:
        sc.model = get("model", "flavour").strip()
    if get("model", "t0") is not None:
        sc.t0 = int(get("model", "t0"))
    if get("model", "strategies"):
        rc.strategies = [s.strip() for s in get("model", "strategies").split(",")]
    for key, conv in [("n_iter", int), ("seed", int), ("burnin_frac", float),
                      ("adapt", _bool), ("flat_likelihood", _bool)]:
        if get("run", key) is not None:
            setattr(sc, key, conv(get("run", key)))
    if get("run", "chains") is not None:
        rc.chains = int(get("run", "chains"))
    for key in _LIST_KEYS["seeds"]:
        if get("seeds", key) is not None:
            setattr(sc, key, _parse_list(get("seeds", key)))
    prop = ProposalConfig()
    for key in _LIST_KEYS["proposal"]:
        if get("proposal", key) is not None:
            setattr(prop, key, _parse_list(get("proposal", key)))
    pri = Priors()
    for key in _LIST_KEYS["prior"]:
        if get("prior", key) is not None:
            setattr(pri, key, _parse_list(get("prior", key)))
    if get("prior", "sigma") is not None:
        pri.sigma = get("prior", "sigma").strip()
    if get("prior", "s_bounds") is not None:
        pri.s_bounds = parse_bounds(get("prior", "s_bounds"))
    sc.proposal, sc.priors = prop, pri
    jit = {k: float(get("jitter", k)) for k in ("start", "factor", "maximum") if get("jitter", k)}
    if jit:
        sc.jitter = JitterPolicy(**jit)
    if get("output", "directory") is not None:
        rc.output_dir = get("output", "directory")
    return rc


def read_config(path):
    return config_from_text(Path(path).read_text())


def write_config(path, cfg):
    Path(path).write_text(config_to_text(cfg))


# ---------------------------------------------------------------------------
# traces


def _cell(name, x):
    if isinstance(x, float) and math.isnan(x) or (isinstance(x, np.floating) and np.isnan(x)):
        return ""
    if name == "iter" or name.startswith("accept_"):
        return str(int(x))
    return _fmt(x)


def write_trace_csv(report, path):
    cols = trace_columns(report.d)
    extra = report.chain_ids is not None
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={report.seed} config_sha256={report.config_hash} model={report.model}\n")
        w = csv.writer(fh)
        w.writerow((["chain"] if extra else []) + cols)
        data = [report.columns[c] for c in cols]
        for i in range(report.n_iter):
            row = [_cell(c, col[i]) for c, col in zip(cols, data)]
            if extra:
                row.insert(0, str(int(report.chain_ids[i])))
            w.writerow(row)


def read_trace_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        info = dict(part.split("=", 1) for part in first.lstrip("# ").split())
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    cols = {h: np.array([float(r[j]) if r[j] != "" else np.nan for r in rows])
            for j, h in enumerate(header)}
    chain_ids = cols.pop("chain", None)
    d = sum(1 for h in header if h.startswith("q_"))
    return RunReport(columns=cols, d=d, seed=int(info.get("seed", 0)),
                     config_hash=info.get("config_sha256", ""), model=info.get("model", ""),
                     chain_ids=None if chain_ids is None else chain_ids.astype(int))
