"""Command-line harness: ``dftsofdm run|list|validate|export-llrs``.

``run`` writes one CSV per curve plus ``manifest.json`` into
``<out-dir>/<scenario name>/``. CSV content depends only on the scenario
and seed; the thread count only changes wall time.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis, link, modem
from . import channel as chan
from . import equalizer as eq
from ._rng import spawn
from .equalizer import SingularChannelError
from .scenario import ScenarioError, bundled_scenarios, load, read_scenario, validate
from .waveform import OfdmConfig, avg_psd, make_fdss, papr_ccdf, power_norm

log = logging.getLogger("dftsofdm")

CSV_SCHEMA_VERSION = 1
WAVEFORM_COLUMNS = ["x", "y", "scheme", "beta_db", "n_sc", "n_fft", "seed"]
LINK_COLUMNS = ["snr_db", "value", "scheme", "channel", "equalizer", "seed", "n_realizations"]
CCDF_LEVEL = 1e-3


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _run_papr(sc, seeds, threads):
    cfg = sc.ofdm

    def one(i):
        c = sc.curves[i]
        curve = papr_ccdf(c.scheme, c.beta_db, cfg, sc.n_trials, seeds[i])
        rows = [(x, y, c.scheme.value, c.beta_db, cfg.n_sc, cfg.n_fft, sc.seed)
                for x, y in zip(curve.papr_db, curve.ccdf)]
        return f"ccdf_{c.label}.csv", WAVEFORM_COLUMNS, rows, {"ccdf_1e-3_db": curve.at(CCDF_LEVEL)}

    return _map(one, range(len(sc.curves)), threads)


def _run_psd(sc, seeds, threads):
    cfg = sc.ofdm

    def one(i):
        c = sc.curves[i]
        window = make_fdss(c.beta_db, cfg.n_sc)
        eta = power_norm(c.scheme, window)
        p = avg_psd(c.scheme, window, eta, cfg, sc.freq_grid_hz)
        rows = [(f, v, c.scheme.value, c.beta_db, cfg.n_sc, cfg.n_fft, sc.seed)
                for f, v in zip(sc.freq_grid_hz, p)]
        edge = cfg.scs_hz * cfg.n_sc
        far = avg_psd(c.scheme, window, eta, cfg, [2.0 * edge])[0]
        return f"psd_{c.label}.csv", WAVEFORM_COLUMNS, rows, {"psd_at_2x_band_edge": float(far)}

    return _map(one, range(len(sc.curves)), threads)


def _setup(sc, beta_db):
    return analysis.LinkSetup(profile=chan.load_profile(sc.profile), cfg=sc.ofdm,
                              f_doppler_hz=sc.doppler_hz, beta_db=beta_db, mse_db=sc.mse_db)


def _link_jobs(sc, seeds):
    jobs = []
    for i, c in enumerate(sc.curves):
        for j, (kind, s) in enumerate(zip(sc.equalizers, spawn(seeds[i], len(sc.equalizers)))):
            jobs.append((c, kind, s))
    return jobs


def _run_ber(sc, seeds, threads):
    def one(job):
        c, kind, s = job
        setup = _setup(sc, c.beta_db)
        points = link.ber_curve(c.scheme, setup, sc.snr_grid_db, kind, sc.n_trials, s,
                                min_errors=sc.min_errors, max_blocks=64 * sc.n_trials)
        tag = f"{c.label}_{kind.value.lower()}"
        common = (c.scheme.value, sc.profile, kind.value, sc.seed)
        sim = [(p.snr_db, p.ber) + common + (p.n_blocks,) for p in points]
        theory = [(p.snr_db, p.ber_theory) + common + (p.n_blocks,) for p in points]
        summary = {
            "points": [{"snr_db": p.snr_db, "ber": p.ber, "ber_theory": p.ber_theory,
                        "stderr": p.stderr, "stderr_paired": p.stderr_paired,
                        "n_errors": p.n_errors, "n_bits": p.n_bits,
                        "zf_resampled": p.n_rejected} for p in points],
            "zf_resampled": sum(p.n_rejected for p in points),
        }
        for name, theo in (("snr_at_1e-3_db", False), ("snr_at_1e-3_theory_db", True)):
            try:
                summary[name] = link.snr_at_ber(points, 1e-3, theory=theo)
            except ValueError:
                summary[name] = None
        return [(f"ber_{tag}_sim.csv", LINK_COLUMNS, sim, summary),
                (f"ber_{tag}_theory.csv", LINK_COLUMNS, theory, {})]

    return [item for pair in _map(one, _link_jobs(sc, seeds), threads) for item in pair]


def _run_capacity(sc, seeds, threads):
    def one(job):
        c, kind, s = job
        pts = analysis.capacity_curve(c.scheme, _setup(sc, c.beta_db), sc.snr_grid_db, kind,
                                      sc.n_trials, s)
        rows = [(p.snr_db, p.bpcu, c.scheme.value, sc.profile, kind.value, sc.seed, sc.n_trials)
                for p in pts]
        return (f"capacity_{c.label}_{kind.value.lower()}.csv", LINK_COLUMNS, rows,
                {"zf_resampled": sum(p.n_rejected for p in pts)})

    return _map(one, _link_jobs(sc, seeds), threads)


def _run_sinr(sc, seeds, threads):
    def one(job):
        c, kind, s = job
        setup = _setup(sc, c.beta_db)
        window = setup.window()
        eta = power_norm(c.scheme, window)
        rows, resampled = [], 0
        for snr_db, child in zip(sc.snr_grid_db, spawn(s, len(sc.snr_grid_db))):
            rng = np.random.default_rng(child)
            snr = 10.0 ** (snr_db / 10.0)
            reject = analysis.zf_reject(setup, eta, snr) if kind is eq.EqualizerKind.ZF else None
            H, n_rej = analysis.draw_responses(setup, sc.n_trials, rng, reject)
            resampled += n_rej
            gains = eq.make_equalizer(eq.effective_channel(H, window, eta, snr), kind)
            report = analysis.sinr_for(c.scheme, gains)
            rows.append((snr_db, float(np.mean(report.sinr_lin)), c.scheme.value, sc.profile,
                         kind.value, sc.seed, sc.n_trials))
        return (f"sinr_{c.label}_{kind.value.lower()}.csv", LINK_COLUMNS, rows,
                {"zf_resampled": resampled})

    return _map(one, _link_jobs(sc, seeds), threads)


RUNNERS = {
    "papr_ccdf": _run_papr,
    "oob_psd": _run_psd,
    "uncoded_ber": _run_ber,
    "capacity": _run_capacity,
    "sinr_table": _run_sinr,
}


def run(scenario, out_dir, threads=1):
    """Execute a validated scenario; returns the manifest dict."""
    t0 = time.perf_counter()
    seeds = spawn(scenario.seed, len(scenario.curves))
    results = RUNNERS[scenario.experiment](scenario, seeds, max(1, int(threads)))
    target = Path(out_dir) / scenario.name
    target.mkdir(parents=True, exist_ok=True)
    files, summary = [], {}
    for fname, columns, rows, info in results:
        (target / fname).write_text(_csv_text(columns, rows))
        files.append(fname)
        if info:
            summary[fname] = info
    wall = time.perf_counter() - t0
    manifest = {
        "scenario": scenario.raw,
        "seed": scenario.seed,
        "library_version": __version__,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "wall_time_s": wall,
        "budget_s": scenario.budget_s,
        "files": files,
        "summary": summary,
    }
    (target / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))
    return manifest


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _emit_errors(diagnostics):
    for d in diagnostics:
        print(json.dumps(d.as_dict()), file=sys.stderr)


def export_llrs(args):
    scheme = modem.Scheme.parse(args.scheme)
    cfg = OfdmConfig(n_sc=args.n_sc, n_fft=args.n_fft, n_cp=args.n_cp, scs_hz=args.scs_hz)
    setup = analysis.LinkSetup(profile=chan.load_profile(args.profile), cfg=cfg,
                               f_doppler_hz=args.doppler_hz, beta_db=args.beta_db,
                               mse_db=args.mse_db)
    rng = np.random.default_rng(args.seed)
    window = setup.window()
    eta = power_norm(scheme, window)
    snr = 10.0 ** (args.snr_db / 10.0)
    real, _ = analysis.draw_realizations(setup, args.blocks, rng)
    bits = modem.random_bits(rng, scheme, cfg.n_sc, args.blocks)
    from .waveform import transmit
    y = chan.apply_channel(transmit(bits, scheme, window, cfg, eta), real, 0, snr, rng)
    h_tilde = eq.effective_channel(chan.freq_response(real, 0, cfg), window, eta, snr)
    h_hat = chan.perturb_estimate(h_tilde, args.mse_db, rng) if args.mse_db is not None else h_tilde
    gains = eq.make_equalizer(h_hat, args.equalizer)
    r = eq.despread(eq.equalize(eq.ofdm_demodulate(y, cfg), gains))
    report = analysis.sinr_for(scheme, gains)
    llrs = eq.compute_llrs(eq.soft_symbols(r, scheme), scheme, report.sinr_lin, report.mu)
    rows = [(b, i, int(bit), float(v)) for b in range(args.blocks)
            for i, (bit, v) in enumerate(zip(bits[b], llrs[b]))]
    text = _csv_text(["block", "bit_index", "bit", "llr"], rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def build_parser():
    p = argparse.ArgumentParser(prog="dftsofdm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or bundled scenario")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir", default="results")
    r.add_argument("--trials", type=int, help="override n_trials")
    r.add_argument("--threads", type=int, default=1)

    sub.add_parser("list", help="list bundled scenarios")

    v = sub.add_parser("validate", help="check a scenario without running it")
    v.add_argument("scenario")

    x = sub.add_parser("export-llrs", help="write SINR-scaled LLRs for random blocks as CSV")
    x.add_argument("--scheme", default="RO_QPSK")
    x.add_argument("--profile", default="NTN-TDL-C")
    x.add_argument("--equalizer", default="MMSE")
    x.add_argument("--snr-db", type=float, default=5.0)
    x.add_argument("--beta-db", type=float, default=0.0)
    x.add_argument("--doppler-hz", type=float, default=200.0)
    x.add_argument("--mse-db", type=float)
    x.add_argument("--n-sc", type=int, default=24)
    x.add_argument("--n-fft", type=int, default=1024)
    x.add_argument("--n-cp", type=int, default=72)
    x.add_argument("--scs-hz", type=float, default=15e3)
    x.add_argument("--blocks", type=int, default=1)
    x.add_argument("--seed", type=int, required=True)
    x.add_argument("--out", default="-")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            for name in bundled_scenarios():
                raw = read_scenario(name)
                print(f"{name}\t{raw.get('experiment')}\t{raw.get('description', '')}")
            return 0
        if args.command == "validate":
            _, diags = validate(read_scenario(args.scenario))
            if diags:
                _emit_errors(diags)
                return 2
            print("ok")
            return 0
        if args.command == "export-llrs":
            export_llrs(args)
            return 0
        scenario = load(args.scenario, {"seed": args.seed, "n_trials": args.trials})
        manifest = run(scenario, args.out_dir, args.threads)
        print(json.dumps({"scenario": scenario.name, "files": manifest["files"],
                          "wall_time_s": round(manifest["wall_time_s"], 3)}))
        return 0
    except ScenarioError as exc:
        _emit_errors(exc.diagnostics)
        return 2
    except (ValueError, SingularChannelError, OSError) as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
