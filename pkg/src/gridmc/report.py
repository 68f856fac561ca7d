"""Result records and report rendering.

One experiment produces three artifacts in its output directory:
``results.json`` (machine-readable, float-exact round trip),
``levels.csv`` (per-level breakdown) and ``report.txt`` (human-readable
tables using the value(err) notation, e.g. 1.71(13)x10^-3).
"""

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path

__all__ = [
    "compare_runs",
    "estimate_format",
    "load_record",
    "render_report",
    "write_record",
]


def estimate_format(value: float, stderr: float) -> str:
    """Concise value-with-error notation.

    The standard error keeps two significant digits, collapsed to one when
    the second is zero; the value is printed to the matching precision.
    Magnitudes outside [0.1, 1000) use a power-of-ten suffix.
    """
    if stderr < 0:
        raise ValueError("stderr must be >= 0")
    if stderr == 0:
        return f"{float(value)} (exact)"

    e = math.floor(math.log10(stderr))
    m2 = round(stderr / 10.0 ** (e - 1))  # two-significant-digit mantissa
    if m2 == 100:
        m2 = 10
        e += 1
    if m2 % 10 == 0:
        paren, k = m2 // 10, e
    else:
        paren, k = m2, e - 1

    if value == 0:
        exp = 0
    elif 0.1 <= abs(value) < 1000.0:
        exp = 0
    else:
        exp = math.floor(math.log10(abs(value)))
    if k > exp:
        exp = k  # error dominates the value scale

    decimals = exp - k
    mantissa = value / 10.0 ** exp
    body = f"{mantissa:.{decimals}f}({paren})"
    if exp:
        return f"{body}x10^{exp}"
    return body


def _measure_block(est) -> dict:
    return {
        "estimate": est.q_hat,
        "std_error": est.std_error,
        "variance": est.var_q_hat,
        "n_total": est.n_total,
        "elapsed_model": est.elapsed,
        "z": est.z,
    }


def build_record(result, config_echo: dict, label: str, versions: dict) -> dict:
    """Assemble the results record from a controller result."""
    deterministic = result.timing_mode == "counted"
    record = {
        "schema": 1,
        "label": label,
        "config": config_echo,
        "measures": {mid: _measure_block(est)
                     for mid, est in result.estimates.items()},
        "levels": result.level_rows,
        "analytic_level0": result.analytic,
        "elapsed_model": result.elapsed_model,
        "elapsed_wall": None if deterministic else result.elapsed_wall,
        "timing_mode": result.timing_mode,
        "target_measure": result.target_measure,
        "seed": result.seed,
        "workers": result.workers,
        "run_log": result.run_log,
        "versions": versions,
    }
    if not deterministic:
        record["timestamp"] = datetime.now(timezone.utc).isoformat()
    return record


def write_record(record: dict, out_dir) -> dict:
    """Write results.json, levels.csv and report.txt; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.json",
        "levels": out / "levels.csv",
        "report": out / "report.txt",
    }
    with open(paths["results"], "w") as f:
        json.dump(record, f, indent=1)
        f.write("\n")
    with open(paths["levels"], "w", newline="") as f:
        _write_levels_csv(record, f)
    with open(paths["report"], "w") as f:
        f.write(render_report(record))
    return paths


def load_record(path) -> dict:
    with open(path) as f:
        return json.load(f)


def _write_levels_csv(record: dict, f) -> None:
    measures = list(record["measures"])
    writer = csv.writer(f)
    header = ["level", "name", "n", "tau_s"]
    for mid in measures:
        header += [f"{mid}_mean_Y", f"{mid}_var_Y", f"{mid}_cov_pair"]
    writer.writerow(header)
    for row in record["levels"]:
        line = [row["level"], row["name"], row["n"], repr(row["tau"])]
        for mid in measures:
            stats = row[mid]
            line += [repr(stats["mean_Y"]),
                     repr(stats["var_Y"]) if stats["var_Y"] is not None else "",
                     repr(stats["cov_pair"]) if stats["cov_pair"] is not None else ""]
        writer.writerow(line)


def _fmt_z(z) -> str:
    return f"{z:.4g}" if z is not None else "n/a"


def render_report(record: dict) -> str:
    """Human-readable run summary."""
    buf = io.StringIO()
    w = buf.write
    w(f"experiment: {record['label']}\n")
    cfg = record["config"]
    w(f"study={cfg.get('study')} estimator={cfg.get('estimator')} "
      f"stack={cfg.get('stack')} seed={record['seed']}\n")
    w(f"timing={record['timing_mode']} model-time={record['elapsed_model']:.2f}s")
    if record.get("elapsed_wall") is not None:
        w(f" wall={record['elapsed_wall']:.2f}s")
    if record.get("timestamp"):
        w(f" at={record['timestamp']}")
    w("\n\n")

    w("measure     estimate           z [1/s]\n")
    for mid, block in record["measures"].items():
        se = block["std_error"]
        txt = (estimate_format(block["estimate"], se)
               if se is not None else f"{block['estimate']} (no variance)")
        w(f"{mid:<10s}  {txt:<18s} {_fmt_z(block['z'])}\n")

    if record["analytic_level0"]:
        w("\nanalytic level 0: ")
        w(", ".join(f"{mid}={val:.6g}"
                    for mid, val in record["analytic_level0"].items()))
        w("\n")

    if record["levels"]:
        measures = list(record["measures"])
        w("\nlevel contributions\n")
        w("level  name      n           tau        ")
        w("  ".join(f"{mid:>14s}" for mid in measures))
        w("\n")
        for row in record["levels"]:
            w(f"{row['level']:<6d} {row['name']:<8s} {row['n']:<11d} "
              f"{row['tau']:.3e} ")
            for mid in measures:
                stats = row[mid]
                if stats["var_Y"] is not None and row["n"] > 1:
                    se = math.sqrt(stats["var_Y"] / row["n"])
                    w(f"  {estimate_format(stats['mean_Y'], se):>14s}")
                else:
                    w(f"  {stats['mean_Y']:>14.6g}")
            w("\n")
    return buf.getvalue()


def compare_runs(records: list, baseline_label=None) -> str:
    """Cross-run comparison table with speedups against a baseline record.

    All records must share the same measure set; the baseline defaults to
    the first record.
    """
    if not records:
        raise ValueError("no records to compare")
    measures = list(records[0]["measures"])
    for rec in records[1:]:
        if list(rec["measures"]) != measures:
            raise ValueError(
                f"record {rec['label']!r} has measures {list(rec['measures'])}, "
                f"expected {measures}")
    baseline = records[0]
    if baseline_label is not None:
        matches = [r for r in records if r["label"] == baseline_label]
        if not matches:
            raise ValueError(f"baseline label {baseline_label!r} not found")
        baseline = matches[0]

    buf = io.StringIO()
    w = buf.write
    w(f"baseline: {baseline['label']}\n")
    header = f"{'run':<28s}"
    for mid in measures:
        header += f"{mid:>18s} {'z':>10s} {'speedup':>9s}"
    w(header + "\n")
    for rec in records:
        line = f"{rec['label']:<28s}"
        for mid in measures:
            blk = rec["measures"][mid]
            base_z = baseline["measures"][mid]["z"]
            se = blk["std_error"]
            txt = estimate_format(blk["estimate"], se) if se is not None else "n/a"
            if rec is baseline or blk["z"] is None or base_z in (None, 0.0):
                ratio = "n/a"
            else:
                ratio = f"{blk['z'] / base_z:.3g}"
            line += f"{txt:>18s} {_fmt_z(blk['z']):>10s} {ratio:>9s}"
        w(line + "\n")
    return buf.getvalue()
