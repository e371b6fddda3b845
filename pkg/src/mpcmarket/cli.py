"""Operator command-line interface.

Commands: run, gen-data, keygen, inspect, bench.
Exit codes: 0 success, 1 verification failure, 2 configuration rejection,
3 I/O or transport failure.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytics import datagen
from .analytics.ld import PlanRejected
from .circuits.bristol import parse_circuit, serialize_circuit
from .circuits.ir import CircuitError, gate_stats
from .garbling import HEADER_SIZE
from .he import bfv
from .he.bfv import HeParams, HeParamsError
from .protocol.channels import TransportError
from .protocol.computations import LdComputation, LrComputation
from .protocol.messages import ProtocolError
from .protocol.runner import (
    VerificationError,
    run_protocol1,
    run_protocol2,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigRejected(ValueError):
    """A run configuration violates a stated constraint."""


@dataclass
class RunConfig:
    workload: str = "ld"
    backend: str = "gc"
    m_instances: int = 1
    count_bits: int = 11
    threshold_num: int = 3841
    threshold_den: int = 1000
    range_bits: int = 10
    rows: int = 10
    makers: int = 1
    n_degree: int = 8192
    t_bits: int = 21
    batch: bool = True
    transport: str = "inproc"
    seed: int = 0
    repeat: int = 10
    verify: bool = True
    data: str | None = None
    model: str | None = None
    save_circuit: str | None = None
    jsonl: str | None = None

    def validate(self) -> None:
        if self.workload not in ("ld", "lr"):
            raise ConfigRejected(f"workload must be ld or lr, got {self.workload!r}")
        if self.backend not in ("gc", "he"):
            raise ConfigRejected(f"backend must be gc or he, got {self.backend!r}")
        if self.transport not in ("inproc", "tcp"):
            raise ConfigRejected(f"transport must be inproc or tcp, got {self.transport!r}")
        if self.m_instances < 1:
            raise ConfigRejected("M must be >= 1")
        if self.repeat < 1:
            raise ConfigRejected("repeat must be >= 1")
        if not (3 <= self.count_bits <= 12):
            raise ConfigRejected(f"count-bits {self.count_bits} outside [3, 12]")
        if not (2 <= self.range_bits <= 16):
            raise ConfigRejected(f"range-bits {self.range_bits} outside [2, 16]")
        if self.makers < 1:
            raise ConfigRejected("makers must be >= 1")


def _load_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigRejected(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


_CONFIG_TYPES = {
    "m_instances": int, "count_bits": int, "threshold_num": int,
    "threshold_den": int, "range_bits": int, "rows": int, "makers": int,
    "n_degree": int, "t_bits": int, "seed": int, "repeat": int,
    "batch": lambda v: v.lower() in ("1", "true", "yes"),
    "verify": lambda v: v.lower() in ("1", "true", "yes"),
}


def _emit(records: list[dict], jsonl: str | None) -> None:
    if jsonl:
        with open(jsonl, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _split_round_robin(groups: list[str], makers: int) -> list[dict[str, int]]:
    buckets: list[list[str]] = [[] for _ in range(makers)]
    for i, g in enumerate(groups):
        buckets[i % makers].append(g)
    return buckets  # names only; values filled by caller


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines)


def _maker_inputs_for(groups: dict[str, int], makers: int) -> list[dict[str, int]]:
    names = list(groups)
    buckets = _split_round_robin(names, min(makers, len(names)))
    return [{name: groups[name] for name in bucket} for bucket in buckets if bucket]


def cmd_run(cfg: RunConfig) -> int:
    cfg.validate()
    records: list[dict] = []
    if cfg.workload == "ld":
        comp = LdComputation(
            count_bits=cfg.count_bits,
            m_instances=cfg.m_instances,
            threshold_num=cfg.threshold_num,
            threshold_den=cfg.threshold_den,
        )
        if cfg.data:
            counts = datagen.read_haplotype_csv(cfg.data)
        else:
            counts = datagen.gen_haplotype_counts(
                cfg.seed, cfg.m_instances, n_total=min(200, (1 << cfg.count_bits) - 1)
            )
        if len(counts) < cfg.m_instances:
            raise ConfigRejected(
                f"need {cfg.m_instances} haplotype rows, file has {len(counts)}"
            )
        groups: dict[str, int] = {}
        for i in range(cfg.m_instances):
            c = counts[i]
            for name, v in zip(("n_AB", "n_Ab", "n_aB", "n_ab"), c):
                groups[f"i{i}.{name}"] = v
        maker_inputs = _maker_inputs_for(groups, cfg.makers)
        st = gate_stats(comp.circuit)
        if cfg.save_circuit:
            Path(cfg.save_circuit).write_text(serialize_circuit(comp.circuit))

        runs = []
        for r in range(cfg.repeat):
            if cfg.backend == "gc":
                out = run_protocol2(
                    comp, maker_inputs, transport=cfg.transport,
                    seed=cfg.seed + r, verify=cfg.verify,
                )
            elif cfg.batch or cfg.m_instances == 1:
                params = HeParams.default(cfg.n_degree, t_bits=cfg.t_bits)
                out = run_protocol1(
                    comp, maker_inputs, params, transport=cfg.transport,
                    seed=cfg.seed + r, verify=cfg.verify,
                )
            else:
                # sequential scalar sessions, one LD instance each
                params = HeParams.default(cfg.n_degree, t_bits=cfg.t_bits)
                comp1 = LdComputation(
                    count_bits=cfg.count_bits,
                    threshold_num=cfg.threshold_num,
                    threshold_den=cfg.threshold_den,
                )
                decisions = []
                oracle_decisions = []
                t0 = time.perf_counter()
                for i in range(cfg.m_instances):
                    sub = {
                        f"i0.{name}": groups[f"i{i}.{name}"]
                        for name in ("n_AB", "n_Ab", "n_aB", "n_ab")
                    }
                    sub_out = run_protocol1(
                        comp1, _maker_inputs_for(sub, cfg.makers), params,
                        transport=cfg.transport, seed=cfg.seed + r * 1000 + i,
                        verify=cfg.verify,
                    )
                    decisions.extend(sub_out.result["decisions"])
                    if sub_out.oracle is not None:
                        oracle_decisions.extend(sub_out.oracle["decisions"])
                sub_out.result = {"decisions": decisions}
                sub_out.oracle = {"decisions": oracle_decisions} if cfg.verify else None
                sub_out.timings["total_s"] = time.perf_counter() - t0
                out = sub_out
            runs.append(out)
        comm = runs[0].transcript.total_bytes("GarbledCircuitMsg", "InputLabels")
        rec = {
            "workload": "ld", "backend": cfg.backend, "M": cfg.m_instances,
            "gates": st.total, "non_xor": st.non_xor,
            "comm_bytes": comm if cfg.backend == "gc" else runs[0].transcript.total_bytes(),
            "garbling_ms": _mean_ms(runs, "garble_s"),
            "evaluation_ms": _mean_ms(runs, "evaluate_s" if cfg.backend == "gc" else "he_eval_s"),
            "total_ms": _mean_ms(runs, "total_s"),
            "decisions": runs[0].result["decisions"],
            "verified": all(r.verified for r in runs),
            "repeat": cfg.repeat, "seed": cfg.seed, "transport": cfg.transport,
        }
        records.append(rec)
        print(_table(
            ["M", "garbling ms", "evaluation ms", "#gates", "#non-XOR", "comm bytes"],
            [[str(cfg.m_instances), f"{rec['garbling_ms']:.1f}", f"{rec['evaluation_ms']:.1f}",
              str(st.total), str(st.non_xor), str(rec["comm_bytes"])]],
        ))
        print(f"decisions: {rec['decisions']}")
        print(f"verified against plaintext oracle: {rec['verified']}")
    else:
        model = (
            datagen.load_bundled_model() if cfg.model is None else __import__(
                "mpcmarket.analytics.lr", fromlist=["load_model"]
            ).load_model(cfg.model)
        )
        comp = LrComputation(model=model, range_bits=cfg.range_bits)
        if cfg.data:
            rows, _labels = datagen.load_lr_csv(cfg.data, model)
        else:
            rows, _labels = datagen.load_bundled_dataset(model)
        rows = rows[: cfg.rows]
        st = gate_stats(comp.circuit)
        if cfg.save_circuit:
            Path(cfg.save_circuit).write_text(serialize_circuit(comp.circuit))
        mask = (1 << model.spec.total_bits) - 1
        probs = []
        garble_ts, eval_ts, totals = [], [], []
        comm = 0
        params = HeParams.default(4096) if cfg.backend == "he" else None
        for i, row in enumerate(rows):
            maker_input = {f"x{j}": row[j] & mask for j in range(model.dim)}
            if cfg.backend == "gc":
                out = run_protocol2(
                    comp, [maker_input], transport=cfg.transport,
                    seed=cfg.seed + i, verify=cfg.verify,
                )
                garble_ts.append(out.timings.get("garble_s", 0.0))
                eval_ts.append(out.timings.get("evaluate_s", 0.0))
            else:
                out = run_protocol1(
                    comp, [maker_input], params, transport=cfg.transport,
                    seed=cfg.seed + i, verify=cfg.verify,
                )
                eval_ts.append(out.timings.get("he_eval_s", 0.0))
            totals.append(out.timings["total_s"])
            comm = out.transcript.total_bytes("GarbledCircuitMsg", "InputLabels")
            probs.append(out.result["probability"])
        rec = {
            "workload": "lr", "backend": cfg.backend, "range_bits": cfg.range_bits,
            "rows": len(rows), "gates": st.total, "non_xor": st.non_xor,
            "comm_bytes": comm,
            "garbling_ms": 1e3 * statistics.mean(garble_ts) if garble_ts else None,
            "evaluation_ms": 1e3 * statistics.mean(eval_ts) if eval_ts else None,
            "total_ms": 1e3 * statistics.mean(totals),
            "verified": True, "seed": cfg.seed, "transport": cfg.transport,
        }
        records.append(rec)
        print(_table(
            ["range", "garbling ms", "evaluation ms", "#gates", "#non-XOR", "comm bytes"],
            [[str(cfg.range_bits),
              f"{rec['garbling_ms']:.1f}" if rec["garbling_ms"] else "-",
              f"{rec['evaluation_ms']:.1f}" if rec["evaluation_ms"] else "-",
              str(st.total), str(st.non_xor), str(comm)]],
        ))
        print(f"first probabilities: {[round(p, 6) for p in probs[:5]]}")
        print(f"verified against plaintext oracle: True ({len(rows)} rows)")
    _emit(records, cfg.jsonl)
    return EXIT_OK


def _mean_ms(runs, key: str) -> float:
    vals = [r.timings.get(key) for r in runs]
    vals = [v for v in vals if v is not None]
    return 1e3 * statistics.mean(vals) if vals else 0.0


def cmd_gen_data(args) -> int:
    if args.kind == "haplotypes":
        counts = datagen.gen_haplotype_counts(
            args.seed, args.rows, n_total=args.N, target_d=args.D
        )
        datagen.write_haplotype_csv(args.out, counts)
        print(f"wrote {len(counts)} haplotype rows to {args.out}")
    elif args.kind == "lr-samples":
        rows = datagen.gen_lr_samples(args.seed, args.rows, args.dims)
        datagen.write_lr_csv(args.out, rows)
        print(f"wrote {len(rows)} x {args.dims} sample rows to {args.out}")
    else:
        raise ConfigRejected(f"unknown data kind {args.kind!r}")
    return EXIT_OK


def cmd_keygen(args) -> int:
    params = HeParams.default(args.n, t_bits=args.t_bits)
    sk, pk, rk = bfv.keygen(params, seed=args.seed)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.params.json").write_text(
        json.dumps(
            {
                "n": params.n,
                "q_primes": list(params.q_primes),
                "t": params.t,
                "noise_sigma": params.noise_sigma,
                "note": bfv.SECURITY_NOTE,
            },
            indent=2,
        )
    )
    Path(f"{prefix}.sk").write_bytes(bfv.secret_key_to_bytes(sk))
    Path(f"{prefix}.pk").write_bytes(bfv.public_key_to_bytes(pk))
    Path(f"{prefix}.rk").write_bytes(bfv.relin_key_to_bytes(rk))
    print(f"wrote {prefix}.params.json, .sk, .pk, .rk  (n={params.n}, t={params.t})")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        text = Path(args.circuit).read_text()
    except OSError as exc:
        print(f"cannot read {args.circuit}: {exc}", file=sys.stderr)
        return EXIT_IO
    circuit = parse_circuit(text)
    st = gate_stats(circuit)
    groups = ", ".join(f"{g.name}[{g.width}]" for g in circuit.input_groups)
    print(f"gates:            {st.total}")
    print(f"non-XOR gates:    {st.non_xor}")
    print(f"input bits:       {circuit.n_inputs}  ({groups})")
    print(f"output bits:      {len(circuit.output_wires)}")
    print(f"garbled size:     {HEADER_SIZE + 32 * st.non_xor} bytes (header {HEADER_SIZE} + 32 x non-XOR)")
    return EXIT_OK


def cmd_bench(args) -> int:
    records: list[dict] = []
    if args.workload == "ld" and args.backend == "gc":
        rows = []
        for m in args.M:
            comp = LdComputation(count_bits=args.count_bits, m_instances=m)
            counts = datagen.gen_haplotype_counts(args.seed, m, n_total=200)
            groups = {}
            for i, c in enumerate(counts):
                for name, v in zip(("n_AB", "n_Ab", "n_aB", "n_ab"), c):
                    groups[f"i{i}.{name}"] = v
            st = gate_stats(comp.circuit)
            garbles, evals, comms = [], [], 0
            for r in range(args.repeat):
                out = run_protocol2(comp, [groups], seed=args.seed + r)
                garbles.append(out.timings["garble_s"])
                evals.append(out.timings["evaluate_s"])
                comms = out.transcript.total_bytes("GarbledCircuitMsg", "InputLabels")
            rec = {
                "bench": "gc-ld", "M": m, "gates": st.total, "non_xor": st.non_xor,
                "garbling_ms": 1e3 * statistics.mean(garbles),
                "evaluation_ms": 1e3 * statistics.mean(evals),
                "comm_bytes": comms,
            }
            records.append(rec)
            rows.append([str(m), f"{rec['garbling_ms']:.1f}", f"{rec['evaluation_ms']:.1f}",
                         str(st.total), str(st.non_xor), f"{comms/1e6:.2f} MB"])
        print(_table(["M", "garbling ms", "evaluation ms", "#gates", "#non-XOR", "comm"], rows))
    elif args.workload == "ld" and args.backend == "he":
        params = HeParams.default(args.n, t_bits=args.t_bits)
        rows = []
        for m in args.M:
            comp = LdComputation(count_bits=args.count_bits, m_instances=m)
            counts = datagen.gen_haplotype_counts(args.seed, m, n_total=200)
            groups = {}
            for i, c in enumerate(counts):
                for name, v in zip(("n_AB", "n_Ab", "n_aB", "n_ab"), c):
                    groups[f"i{i}.{name}"] = v
            t0 = time.perf_counter()
            out = run_protocol1(comp, [groups], params, seed=args.seed)
            batch_s = time.perf_counter() - t0
            scalar_s = None
            if args.compare_scalar:
                t0 = time.perf_counter()
                for i in range(m):
                    comp1 = LdComputation(count_bits=args.count_bits, m_instances=1)
                    sub = {f"i0.{k.split('.', 1)[1]}": v for k, v in groups.items()
                           if k.startswith(f"i{i}.")}
                    out1 = run_protocol1(comp1, [sub], params, seed=args.seed + 1 + i)
                    assert out1.result["decisions"][0] == out.result["decisions"][i]
                scalar_s = time.perf_counter() - t0
            rec = {
                "bench": "he-ld", "M": m, "batch_s": batch_s,
                "batch_amortized_s": batch_s / m,
                "scalar_s": scalar_s,
                "scalar_amortized_s": scalar_s / m if scalar_s else None,
            }
            records.append(rec)
            rows.append([str(m), f"{batch_s:.1f}", f"{batch_s/m:.2f}",
                         f"{scalar_s:.1f}" if scalar_s else "-",
                         f"{scalar_s/m:.2f}" if scalar_s else "-"])
        print(_table(["M", "batch s", "batch/test s", "scalar s", "scalar/test s"], rows))
    elif args.workload == "lr":
        model = datagen.load_bundled_model()
        data_rows, _ = datagen.load_bundled_dataset(model)
        mask = (1 << model.spec.total_bits) - 1
        rows = []
        for k in args.range_bits:
            comp = LrComputation(model=model, range_bits=k)
            st = gate_stats(comp.circuit)
            garbles, evals, comm = [], [], 0
            for r in range(args.repeat):
                maker_input = {f"x{j}": data_rows[r][j] & mask for j in range(model.dim)}
                out = run_protocol2(comp, [maker_input], seed=args.seed + r)
                garbles.append(out.timings["garble_s"])
                evals.append(out.timings["evaluate_s"])
                comm = out.transcript.total_bytes("GarbledCircuitMsg", "InputLabels")
            rec = {
                "bench": "gc-lr", "range": k, "gates": st.total, "non_xor": st.non_xor,
                "garbling_ms": 1e3 * statistics.mean(garbles),
                "evaluation_ms": 1e3 * statistics.mean(evals),
                "comm_bytes": comm,
            }
            records.append(rec)
            rows.append([str(k), f"{rec['garbling_ms']:.1f}", f"{rec['evaluation_ms']:.1f}",
                         str(st.total), str(st.non_xor), f"{comm/1e6:.2f} MB"])
        print(_table(["range", "garbling ms", "evaluation ms", "#gates", "#non-XOR", "comm"], rows))
    else:
        raise ConfigRejected(f"unsupported bench combination {args.workload}/{args.backend}")
    _emit(records, args.jsonl)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpcmarket", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a protocol end to end")
    run.add_argument("--workload", choices=("ld", "lr"))
    run.add_argument("--backend", choices=("gc", "he"))
    run.add_argument("--M", type=int, dest="m_instances")
    run.add_argument("--count-bits", type=int, dest="count_bits")
    run.add_argument("--threshold", help="chi-square threshold as num/den")
    run.add_argument("--range-bits", type=int, dest="range_bits")
    run.add_argument("--rows", type=int)
    run.add_argument("--makers", type=int)
    run.add_argument("--n", type=int, dest="n_degree")
    run.add_argument("--t-bits", type=int, dest="t_bits")
    run.add_argument("--batch", action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--transport", choices=("inproc", "tcp"))
    run.add_argument("--seed", type=int)
    run.add_argument("--repeat", type=int)
    run.add_argument("--verify", action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--data")
    run.add_argument("--model")
    run.add_argument("--save-circuit", dest="save_circuit")
    run.add_argument("--jsonl")
    run.add_argument("--config")

    gen = sub.add_parser("gen-data", help="write deterministic synthetic fixtures")
    gen.add_argument("--kind", choices=("haplotypes", "lr-samples"), required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--rows", type=int, default=10)
    gen.add_argument("--N", type=int, default=200)
    gen.add_argument("--D", type=float, default=None)
    gen.add_argument("--dims", type=int, default=30)
    gen.add_argument("--seed", type=int, default=0)

    kg = sub.add_parser("keygen", help="generate and store BFV keys")
    kg.add_argument("--n", type=int, default=8192)
    kg.add_argument("--t-bits", type=int, default=21)
    kg.add_argument("--out", required=True)
    kg.add_argument("--seed", type=int, default=0)

    ins = sub.add_parser("inspect", help="print circuit-file statistics")
    ins.add_argument("circuit")

    bench = sub.add_parser("bench", help="table-shaped benchmark reports")
    bench.add_argument("--workload", choices=("ld", "lr"), default="ld")
    bench.add_argument("--backend", choices=("gc", "he"), default="gc")
    bench.add_argument("--M", type=int, nargs="+", default=[10])
    bench.add_argument("--count-bits", type=int, default=8)
    bench.add_argument("--range-bits", type=int, nargs="+", default=[10, 11, 12])
    bench.add_argument("--n", type=int, default=8192)
    bench.add_argument("--t-bits", type=int, default=21)
    bench.add_argument("--repeat", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--compare-scalar", action="store_true")
    bench.add_argument("--jsonl")
    return ap


def _run_config_from_args(args) -> RunConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    cfg = RunConfig()
    if args.config:
        for key, value in _load_config_file(args.config).items():
            if key == "threshold":
                _apply_threshold(cfg, value)
                continue
            if not hasattr(cfg, key):
                raise ConfigRejected(f"unknown config key {key!r}")
            conv = _CONFIG_TYPES.get(key, str)
            setattr(cfg, key, conv(value))
    for name in vars(cfg):
        arg_val = getattr(args, name, None)
        if arg_val is not None:
            setattr(cfg, name, arg_val)
    if args.threshold is not None:
        _apply_threshold(cfg, args.threshold)
    return cfg


def _apply_threshold(cfg: RunConfig, spec: str) -> None:
    num, _, den = spec.partition("/")
    try:
        cfg.threshold_num, cfg.threshold_den = int(num), int(den or 1)
    except ValueError:
        raise ConfigRejected(f"threshold must be num/den, got {spec!r}") from None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_run_config_from_args(args))
        if args.command == "gen-data":
            return cmd_gen_data(args)
        if args.command == "keygen":
            return cmd_keygen(args)
        if args.command == "inspect":
            return cmd_inspect(args)
        if args.command == "bench":
            return cmd_bench(args)
        raise ConfigRejected(f"unknown command {args.command!r}")
    except VerificationError as exc:
        print(f"VERIFICATION FAILED: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ConfigRejected, PlanRejected, HeParamsError, CircuitError, ProtocolError) as exc:
        print(f"configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, OSError) as exc:
        print(f"transport/io failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
