"""Separation quality metrics for class-assigned output channels.

Active channels (class present in the mixture) are scored against their
clean reference with MSE_s, SI-SNR and SDR. Mute channels (class absent)
are scored by MSE_z, the MSE against silence, and SI-SNR_z, the SI-SNR of
the mute output against each *present* reference, which exposes a silent
channel that leaked a real source.

SDR here is the plain scale-dependent signal-to-reconstruction-error ratio
``10 log10(|ref|^2 / |ref - est|^2)``. It is not BSS-Eval SDR (no
distortion-filter projection), so its values are not comparable to
published BSS-Eval numbers.

All dB values are clamped to +/-60 dB.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

DB_CLAMP = 60.0
CATEGORIES = ("A", "B", "C", "D", "BC", "BD", "CD", "BCD")
CSV_COLUMNS = ("algorithm", "category", "target_count", "channel", "reference_class", "metric", "value", "n")


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).reshape(-1)


def _clamp_db(ratio_num: float, ratio_den: float) -> float:
    if ratio_num <= 0.0:
        return -DB_CLAMP
    if ratio_den <= 0.0:
        return DB_CLAMP
    return float(np.clip(10.0 * math.log10(ratio_num / ratio_den), -DB_CLAMP, DB_CLAMP))


def _pair(est, ref) -> tuple[np.ndarray, np.ndarray]:
    est, ref = _vec(est), _vec(ref)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.size} vs {ref.size}")
    if not np.any(ref):
        raise ValueError("reference has zero energy")
    return est, ref


def si_snr(est, ref) -> float:
    """Scale-invariant SNR, ``10 log10(rho^2 / (1 - rho^2))`` with rho the cosine similarity."""
    est, ref = _pair(est, ref)
    ref_energy = ref @ ref
    proj = (est @ ref / ref_energy) * ref
    noise = est - proj
    return _clamp_db(proj @ proj, noise @ noise)


def sdr(est, ref) -> float:
    est, ref = _pair(est, ref)
    resid = ref - est
    return _clamp_db(ref @ ref, resid @ resid)


def _mse(a, b) -> float:
    d = _vec(a) - _vec(b)
    return float(np.mean(d * d))


def mse_s(targets: Sequence, preds: Sequence, active_mask: Sequence[bool]) -> float:
    """Mean over active channels of the per-channel MSE against the clean target."""
    pairs = [(t, p) for t, p, on in zip(targets, preds, active_mask) if on]
    if not pairs:
        raise ValueError("mse_s needs at least one active channel")
    return sum(_mse(t, p) for t, p in pairs) / len(pairs)


def mse_z(preds: Sequence, mute_mask: Sequence[bool]) -> float:
    """Mean over mute channels of the per-channel MSE against silence."""
    muted = [p for p, off in zip(preds, mute_mask) if off]
    if not muted:
        raise ValueError("mse_z needs at least one mute channel")
    return sum(float(np.mean(_vec(p) ** 2)) for p in muted) / len(muted)


def si_snr_z(mute_pred, active_refs: Sequence[tuple[str, object]]) -> list[tuple[str, float]]:
    if not active_refs:
        raise ValueError("si_snr_z needs at least one active reference")
    return [(cls, si_snr(mute_pred, ref)) for cls, ref in active_refs]


# ---------------------------------------------------------------------------
# Dataset-level evaluation
# ---------------------------------------------------------------------------


@dataclass
class ChannelEval:
    record_id: str
    category: str
    channel: str
    is_active: bool
    values: dict = field(default_factory=dict)  # metric -> value, for active channels
    si_snr_z: list = field(default_factory=list)  # (reference class, dB), for mute channels

    @property
    def target_count(self) -> int:
        return len(self.category)


@dataclass
class EvalReport:
    algorithm: str
    channel_classes: tuple
    evals: list[ChannelEval]
    rows: list[dict]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({**row, "value": repr(float(row["value"]))})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def cells(self, **key) -> list[dict]:
        return [r for r in self.rows if all(str(r[k]) == str(v) for k, v in key.items())]

    def value(self, **key) -> float:
        found = self.cells(**key)
        if len(found) != 1:
            raise KeyError(f"{len(found)} rows match {key}")
        return float(found[0]["value"])


def evaluate_record(record_id, category, channel_classes, targets, preds) -> list[ChannelEval]:
    """Score one record. ``targets`` maps class -> clean reference for the classes present."""
    if len(preds) != len(channel_classes):
        raise ValueError(f"{len(preds)} outputs for {len(channel_classes)} channels")
    present = set(category)
    if not present <= set(channel_classes) or set(targets) != present:
        raise ValueError(f"record {record_id}: targets {sorted(targets)} do not match category {category}")
    refs = [(c, targets[c]) for c in channel_classes if c in present]
    out = []
    for cls, pred in zip(channel_classes, preds):
        if _vec(pred).size != _vec(refs[0][1]).size:
            raise ValueError(f"record {record_id}: channel {cls} output length mismatch")
        ev = ChannelEval(record_id, category, cls, cls in present)
        if ev.is_active:
            ref = targets[cls]
            ev.values = {"mse_s": _mse(ref, pred), "si_snr_s": si_snr(pred, ref)}
            if len(present) >= 2:
                ev.values["sdr"] = sdr(pred, ref)
        else:
            ev.values = {"mse_z": float(np.mean(_vec(pred) ** 2))}
            ev.si_snr_z = si_snr_z(pred, refs)
        out.append(ev)
    return out


def _row(alg, category, count, channel, ref, metric, values):
    return {
        "algorithm": alg,
        "category": category,
        "target_count": count,
        "channel": channel,
        "reference_class": ref,
        "metric": metric,
        "value": float(np.mean(values)),
        "n": len(values),
    }


def aggregate(algorithm: str, channel_classes, evals: list[ChannelEval]) -> EvalReport:
    """Fold channel evaluations into report rows, in a deterministic order.

    Row families:

    * ``category="*"``: per target count, means over all active channels
      (MSE_s, SI-SNR_s, and SDR only for two or more targets).
    * per (category, channel) for active channels: MSE_s, SI-SNR_s, SDR.
    * per (category, mute channel): MSE_z, and SI-SNR_z per present reference.
    * ``target_count="*"``: corpus-wide mute means (MSE_z, SI-SNR_z).
    """
    by_count = defaultdict(lambda: defaultdict(list))
    by_cell = defaultdict(lambda: defaultdict(list))
    mute_all = defaultdict(list)
    for ev in evals:
        if ev.is_active:
            for metric, v in ev.values.items():
                by_count[ev.target_count][metric].append(v)
                by_cell[(ev.category, ev.channel, ev.channel)][metric].append(v)
        else:
            by_cell[(ev.category, ev.channel, "-")]["mse_z"].append(ev.values["mse_z"])
            mute_all["mse_z"].append(ev.values["mse_z"])
            for ref, v in ev.si_snr_z:
                by_cell[(ev.category, ev.channel, ref)]["si_snr_z"].append(v)
                mute_all["si_snr_z"].append(v)

    rows = []
    for count in sorted(by_count):
        for metric in ("mse_s", "si_snr_s", "sdr"):
            if by_count[count].get(metric):
                rows.append(_row(algorithm, "*", count, "*", "*", metric, by_count[count][metric]))
    cat_order = {c: i for i, c in enumerate(CATEGORIES)}
    ch_order = {c: i for i, c in enumerate(channel_classes)}

    def cell_key(key):
        cat, ch, ref = key
        return (cat_order.get(cat, len(cat_order)), cat, ch_order[ch], ref != ch, ref)

    for key in sorted(by_cell, key=cell_key):
        cat, ch, ref = key
        for metric in ("mse_s", "si_snr_s", "sdr", "mse_z", "si_snr_z"):
            if by_cell[key].get(metric):
                rows.append(_row(algorithm, cat, len(cat), ch, ref, metric, by_cell[key][metric]))
    for metric in ("mse_z", "si_snr_z"):
        if mute_all[metric]:
            rows.append(_row(algorithm, "*", "*", "*", "*", metric, mute_all[metric]))
    return EvalReport(algorithm, tuple(channel_classes), list(evals), rows)


def evaluate_dataset(
    outputs: Mapping[str, Sequence],
    records: Sequence,
    channel_classes=("A", "B", "C", "D"),
    algorithm: str = "",
) -> EvalReport:
    """Evaluate separated outputs against a manifest.

    ``outputs`` maps record id -> list of per-channel waveforms (channel
    order = ``channel_classes``). Each record needs ``id``, ``category`` and
    ``targets`` (class -> reference array, for present classes).
    """
    evals = []
    for rec in records:
        if rec.id not in outputs:
            raise ValueError(f"no separated outputs for record {rec.id}")
        targets = rec.target_arrays()
        evals += evaluate_record(rec.id, rec.category, channel_classes, targets, outputs[rec.id])
    return aggregate(algorithm, channel_classes, evals)


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Text tables
# ---------------------------------------------------------------------------


def _fmt(metric: str, v) -> str:
    if v is None:
        return "n/a"
    v = float(v)
    return f"{v:.2E}" if metric.startswith("mse") else f"{v:.2f}"


def render_tables(rows: Sequence[Mapping]) -> str:
    """Render report rows (from one or more algorithms) as three text tables:
    active-channel summary by target count, mute channels for single-target
    inputs, and mute channels for multi-target inputs."""
    rows = [dict(r) for r in rows]
    algs = list(dict.fromkeys(r["algorithm"] for r in rows))
    index = {(r["algorithm"], r["category"], str(r["target_count"]), r["channel"], r["reference_class"], r["metric"]): r["value"] for r in rows}
    out = []

    out.append("Active channels (channels with targets)")
    out.append(f"{'algorithm':<12}{'targets':>8}{'MSE_s':>12}{'SI-SNR_s':>12}{'SDR':>10}")
    for alg in algs:
        counts = sorted({str(r["target_count"]) for r in rows if r["algorithm"] == alg and r["category"] == "*" and r["target_count"] != "*"})
        for c in counts:
            vals = [index.get((alg, "*", c, "*", "*", m)) for m in ("mse_s", "si_snr_s", "sdr")]
            out.append(f"{alg:<12}{c:>8}{_fmt('mse', vals[0]):>12}{_fmt('db', vals[1]):>12}{_fmt('db', vals[2]):>10}")

    for title, single in (("Mute channels, one input target", True), ("Mute channels, multiple input targets", False)):
        out.append("")
        out.append(title)
        header = f"{'x':<6}{'o':<4}{'s':<4}" + "".join(f"{'SI-SNR_z ' + a:>16}" for a in algs) + "".join(f"{'MSE_z ' + a:>14}" for a in algs)
        out.append(header)
        keys = []
        for r in rows:
            if r["metric"] != "si_snr_z" or r["category"] == "*":
                continue
            if (len(r["category"]) == 1) != single:
                continue
            k = (r["category"], r["channel"], r["reference_class"])
            if k not in keys:
                keys.append(k)
        keys.sort(key=lambda k: (CATEGORIES.index(k[0]) if k[0] in CATEGORIES else 99, k[1], k[2]))
        last = None
        for cat, ch, ref in keys:
            line = f"{cat if cat != last else '':<6}{ch:<4}{ref:<4}"
            last = cat
            line += "".join(f"{_fmt('db', index.get((a, cat, str(len(cat)), ch, ref, 'si_snr_z'))):>16}" for a in algs)
            line += "".join(f"{_fmt('mse', index.get((a, cat, str(len(cat)), ch, '-', 'mse_z'))):>14}" for a in algs)
            out.append(line)
    return "\n".join(out) + "\n"
