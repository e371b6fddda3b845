"""Command-line interface: commands, exit codes, determinism."""

import json

import pytest

from mpcmarket.circuits import build_adder, serialize_circuit
from mpcmarket.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main


class TestRun:
    def test_ld_gc_small(self, capsys):
        rc = main(["run", "--workload", "ld", "--backend", "gc", "--M", "1",
                   "--repeat", "1", "--seed", "3"])
        out = capsys.readouterr().out
        assert rc == EXIT_OK
        assert "verified against plaintext oracle: True" in out
        assert "#non-XOR" in out

    def test_ld_gc_report_jsonl(self, tmp_path, capsys):
        rec_path = tmp_path / "report.jsonl"
        rc = main(["run", "--workload", "ld", "--M", "2", "--repeat", "1",
                   "--seed", "5", "--jsonl", str(rec_path)])
        assert rc == EXIT_OK
        rec = json.loads(rec_path.read_text().splitlines()[0])
        assert rec["workload"] == "ld" and rec["M"] == 2
        assert rec["verified"] is True
        assert rec["non_xor"] > 0

    def test_lr_gc_rows(self, capsys):
        rc = main(["run", "--workload", "lr", "--rows", "1", "--repeat", "1",
                   "--seed", "1"])
        assert rc == EXIT_OK
        assert "verified against plaintext oracle: True" in capsys.readouterr().out

    def test_config_rejection_exit_code(self, capsys):
        rc = main(["run", "--workload", "ld", "--count-bits", "20"])
        assert rc == EXIT_CONFIG
        assert "configuration rejected" in capsys.readouterr().err

    def test_he_depth_rejection_exit_code(self, capsys):
        # LD needs depth 3; n=4096 cannot host it, rejected before any work
        rc = main(["run", "--workload", "ld", "--backend", "he", "--n", "4096",
                   "--repeat", "1"])
        assert rc == EXIT_CONFIG
        assert "rejected" in capsys.readouterr().err

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("workload=ld\nbackend=gc\nm_instances=2\nrepeat=1\nseed=9\n")
        rc = main(["run", "--config", str(cfg), "--M", "1"])
        out = capsys.readouterr().out
        assert rc == EXIT_OK
        assert "decisions: [" in out and out.count(",") >= 0
        # --M 1 overrides m_instances=2 from the file
        assert "decisions: [True]" in out or "decisions: [False]" in out

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("wrkload=ld\n")
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG

    def test_save_circuit(self, tmp_path):
        path = tmp_path / "ld.btxt"
        rc = main(["run", "--workload", "ld", "--M", "1", "--repeat", "1",
                   "--save-circuit", str(path)])
        assert rc == EXIT_OK
        assert path.read_text().startswith("13255 ")

    def test_report_reproducible_modulo_timings(self, tmp_path):
        recs = []
        for name in ("r1.jsonl", "r2.jsonl"):
            path = tmp_path / name
            assert main(["run", "--workload", "ld", "--M", "2", "--repeat", "1",
                         "--seed", "21", "--jsonl", str(path)]) == EXIT_OK
            rec = json.loads(path.read_text().splitlines()[0])
            recs.append({k: v for k, v in rec.items() if not k.endswith("_ms")})
        assert recs[0] == recs[1]


class TestGenData:
    def test_haplotypes_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["gen-data", "--kind", "haplotypes", "--out", str(a),
                     "--rows", "8", "--N", "200", "--seed", "4"]) == EXIT_OK
        assert main(["gen-data", "--kind", "haplotypes", "--out", str(b),
                     "--rows", "8", "--N", "200", "--seed", "4"]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_equilibrium_family_exact(self, tmp_path):
        out = tmp_path / "eq.csv"
        assert main(["gen-data", "--kind", "haplotypes", "--out", str(out),
                     "--rows", "6", "--N", "240", "--D", "0", "--seed", "2"]) == EXIT_OK
        from mpcmarket.analytics.datagen import read_haplotype_csv

        for c in read_haplotype_csv(str(out)):
            n_A, _, n_B, _ = c.margins
            assert c.total * c.n_AB == n_A * n_B

    def test_lr_samples_shape(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["gen-data", "--kind", "lr-samples", "--out", str(out),
                     "--rows", "569", "--dims", "30", "--seed", "1"]) == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 570  # header + rows
        assert len(lines[1].split(",")) == 30


class TestInspect:
    def test_adder_stats(self, tmp_path, capsys):
        path = tmp_path / "adder8.btxt"
        path.write_text(serialize_circuit(build_adder(8)))
        assert main(["inspect", str(path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "non-XOR gates:    7" in out
        assert "garbled size:" in out

    def test_xor_only_circuit(self, tmp_path, capsys):
        from mpcmarket.circuits import CircuitBuilder

        b = CircuitBuilder()
        x = b.add_input_group("x", 4)
        y = b.add_input_group("y", 4)
        c = b.build([b.xor(a, bb) for a, bb in zip(x, y)])
        path = tmp_path / "xor.btxt"
        path.write_text(serialize_circuit(c))
        assert main(["inspect", str(path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "non-XOR gates:    0" in out
        from mpcmarket.garbling import HEADER_SIZE

        assert f"garbled size:     {HEADER_SIZE} bytes" in out

    def test_missing_file_is_io_error(self, capsys):
        assert main(["inspect", "/nonexistent/file.btxt"]) == EXIT_IO


class TestKeygen:
    def test_writes_key_files(self, tmp_path, capsys):
        prefix = tmp_path / "keys" / "k"
        assert main(["keygen", "--n", "4096", "--out", str(prefix), "--seed", "7"]) == EXIT_OK
        assert (tmp_path / "keys" / "k.sk").exists()
        assert (tmp_path / "keys" / "k.pk").exists()
        assert (tmp_path / "keys" / "k.rk").exists()
        meta = json.loads((tmp_path / "keys" / "k.params.json").read_text())
        assert meta["n"] == 4096
        assert "not production-audited" in meta["note"]


class TestBench:
    def test_gc_ld_shape(self, tmp_path, capsys):
        rec_path = tmp_path / "bench.jsonl"
        rc = main(["bench", "--workload", "ld", "--backend", "gc", "--M", "1",
                   "--count-bits", "8", "--repeat", "1", "--jsonl", str(rec_path)])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "garbling ms" in out and "#non-XOR" in out
        rec = json.loads(rec_path.read_text().splitlines()[0])
        assert rec["bench"] == "gc-ld" and rec["M"] == 1

    def test_gc_lr_shape(self, capsys):
        rc = main(["bench", "--workload", "lr", "--range-bits", "10", "--repeat", "1"])
        assert rc == EXIT_OK
        assert "range" in capsys.readouterr().out
