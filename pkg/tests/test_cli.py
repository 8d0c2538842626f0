"""End-to-end tests of the command-line surface: every subcommand, the
config schema, the exit-code contract, and the emitted files."""

import csv
import json
import math

import numpy as np
import pytest

import framenet as fn
from framenet.cli import main
from framenet.commands import solve_layer_width
from framenet.config import ConfigError, load_config, validate_config


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


SMALL_DATA = {
    "groups": 3,
    "subclasses": 2,
    "base_dim": 8,
    "frames_per_class": 80,
    "group_separation": 10.0,
    "subclass_separation": 4.0,
    "noise_std": 1.0,
    "seed": 5,
    "dev_fraction": 0.2,
}

SMALL_TRAIN = {
    "network": {"hidden_layers": [{"kind": "dense", "units": 16}], "init_scale": 0.3},
    "optimizer": {"kind": "nag", "learning_rate": 0.2},
    "training": {"batch_size": 64, "max_epochs": 3, "tolerance": 0.0},
}


class TestConfigSchema:
    def test_defaults_validate(self):
        cfg = load_config(None)
        assert validate_config(cfg) == cfg

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown config sections"):
            validate_config({"dataa": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys.*noise_stdd"):
            validate_config({"data": {"noise_stdd": 1.0}})

    def test_misspelled_layer_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            validate_config(
                {"network": {"hidden_layers": [{"kind": "dense", "unit": 4}]}}
            )

    def test_momentum_mode_keys_enforced(self):
        with pytest.raises(ConfigError, match="missing keys"):
            validate_config({"optimizer": {"momentum": {"mode": "constant"}}})

    def test_type_errors_are_reported_with_path(self):
        with pytest.raises(ConfigError, match="data.groups"):
            validate_config({"data": {"groups": "ten"}})


class TestGenData:
    def test_generates_reloadable_dataset(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path, {"data": {**SMALL_DATA, "groups": 10, "subclasses": 3}}
        )
        rc = main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 0
        d = fn.load_dataset(tmp_path / "dataset.frn")
        assert d.num_classes == 30
        assert "K=30" in capsys.readouterr().out

    def test_same_config_twice_identical_files(self, tmp_path):
        cfg = write_config(tmp_path, {"data": SMALL_DATA})
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/dataset.frn").read_bytes() == (
            tmp_path / "b/dataset.frn"
        ).read_bytes()

    def test_permute_flag_is_seeded_column_shuffle(self, tmp_path):
        cfg = write_config(tmp_path, {"data": SMALL_DATA})
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "plain")])
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "p1"), "--permute"])
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "p2"), "--permute"])
        plain = fn.load_dataset(tmp_path / "plain/dataset.frn")
        p1 = fn.load_dataset(tmp_path / "p1/dataset.frn")
        p2 = fn.load_dataset(tmp_path / "p2/dataset.frn")
        assert np.array_equal(p1.frames, p2.frames)
        assert not np.array_equal(p1.frames, plain.frames)
        assert np.array_equal(np.sort(p1.frames, 1), np.sort(plain.frames, 1))

    def test_invalid_spec_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"data": {**SMALL_DATA, "groups": 0}})
        rc = main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 1
        assert "error" in capsys.readouterr().err


@pytest.fixture()
def trained(tmp_path):
    cfg_doc = {"data": SMALL_DATA, **SMALL_TRAIN}
    cfg = write_config(tmp_path, cfg_doc)
    main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
    data = str(tmp_path / "dataset.frn")
    rc = main(["train", data, "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    return tmp_path, cfg, data


class TestTrainCommand:
    def test_outputs_exist_with_exact_csv_columns(self, trained):
        tmp_path, cfg, data = trained
        assert (tmp_path / "model.fnw").exists()
        assert (tmp_path / "model.fnw.meta.json").exists()
        with open(tmp_path / "train_log.csv") as f:
            rows = list(csv.reader(f))
        assert rows[0] == [
            "epoch", "train_ce", "dev_ce", "dev_acc", "lr", "mu", "labels_changed",
        ]
        assert len(rows) >= 2

    def test_deterministic_rerun(self, tmp_path):
        cfg_doc = {"data": SMALL_DATA, **SMALL_TRAIN}
        cfg = write_config(tmp_path, cfg_doc)
        main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        data = str(tmp_path / "dataset.frn")
        main(["train", data, "--config", cfg, "--out", str(tmp_path / "r1")])
        main(["train", data, "--config", cfg, "--out", str(tmp_path / "r2")])
        assert (tmp_path / "r1/model.fnw").read_bytes() == (
            tmp_path / "r2/model.fnw"
        ).read_bytes()
        assert (tmp_path / "r1/train_log.csv").read_text() == (
            tmp_path / "r2/train_log.csv"
        ).read_text()

    def test_resume_continues_epoch_numbering(self, trained):
        tmp_path, cfg, data = trained
        rc = main(
            [
                "train", data, "--config", cfg, "--out", str(tmp_path),
                "--resume", str(tmp_path / "model.fnw"),
            ]
        )
        assert rc == 0
        with open(tmp_path / "train_log.csv") as f:
            rows = list(csv.reader(f))[1:]
        epochs = [int(r[0]) for r in rows]
        assert epochs == sorted(epochs)
        assert epochs[0] == 1 and epochs[-1] == 6  # 3 + 3 more
        meta = json.loads((tmp_path / "model.fnw.meta.json").read_text())
        assert meta["epochs_completed"] == 6

    def test_divergence_exits_two(self, tmp_path, capsys):
        cfg_doc = {
            "data": SMALL_DATA,
            "network": SMALL_TRAIN["network"],
            "optimizer": {
                "kind": "cm",
                "learning_rate": 1e200,
                "momentum": {"mode": "constant", "mu": 0.9},
            },
            "training": SMALL_TRAIN["training"],
        }
        cfg = write_config(tmp_path, cfg_doc)
        main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        rc = main(
            ["train", str(tmp_path / "dataset.frn"), "--config", cfg, "--out", str(tmp_path)]
        )
        assert rc == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_missing_data_file_exits_three(self, tmp_path):
        cfg = write_config(tmp_path, {"data": SMALL_DATA, **SMALL_TRAIN})
        rc = main(["train", str(tmp_path / "nope.frn"), "--config", cfg, "--out", str(tmp_path)])
        assert rc == 3

    def test_corrupted_data_header_exits_three(self, tmp_path):
        cfg = write_config(tmp_path, {"data": SMALL_DATA, **SMALL_TRAIN})
        bad = tmp_path / "bad.frn"
        bad.write_bytes(b"FRNX" + b"\x00" * 64)
        rc = main(["train", str(bad), "--config", cfg, "--out", str(tmp_path)])
        assert rc == 3

    def test_unknown_config_key_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"training": {"dropout_rate": 0.1}})
        rc = main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 1
        assert "dropout_rate" in capsys.readouterr().err

    def test_conv_training_on_spliced_data(self, tmp_path):
        cfg_doc = {
            "data": {**SMALL_DATA, "context": 1},
            "network": {
                "hidden_layers": [
                    {"kind": "conv", "maps": 3, "filter_t": 2, "filter_f": 3,
                     "pool_t": 1, "pool_f": 2},
                    {"kind": "dense", "units": 12},
                ],
                "init_scale": 0.3,
            },
            "optimizer": SMALL_TRAIN["optimizer"],
            "training": SMALL_TRAIN["training"],
        }
        cfg = write_config(tmp_path, cfg_doc)
        main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        rc = main(
            ["train", str(tmp_path / "dataset.frn"), "--config", cfg, "--out", str(tmp_path)]
        )
        assert rc == 0
        net = fn.load_checkpoint(tmp_path / "model.fnw")
        assert isinstance(net.specs[0], fn.Conv)


class TestEvalCommand:
    def test_eval_on_training_data_matches_final_log_row(self, tmp_path):
        # dev_fraction 0 -> the whole file is the training split, so the
        # eval CE must reproduce the final logged train_ce exactly
        cfg_doc = {
            "data": {**SMALL_DATA, "dev_fraction": 0.0},
            **SMALL_TRAIN,
        }
        cfg = write_config(tmp_path, cfg_doc)
        main(["gen-data", "--config", cfg, "--out", str(tmp_path)])
        data = str(tmp_path / "dataset.frn")
        main(["train", data, "--config", cfg, "--out", str(tmp_path)])
        with open(tmp_path / "train_log.csv") as f:
            final = list(csv.DictReader(f))[-1]
        rc = main(
            ["eval", str(tmp_path / "model.fnw"), data, "--config", cfg,
             "--out", str(tmp_path)]
        )
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert math.isclose(metrics["cross_entropy"], float(final["train_ce"]), abs_tol=1e-9)
        assert math.isclose(metrics["accuracy"], float(final["dev_acc"]), abs_tol=1e-12)

    def test_uniform_priors_preserve_argmax_accuracy(self, trained):
        tmp_path, cfg, data = trained
        rc = main(
            ["eval", str(tmp_path / "model.fnw"), data, "--config", cfg,
             "--priors", "--out", str(tmp_path)]
        )
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        # balanced synthetic classes -> smoothed priors are exactly uniform
        assert metrics["scaled_accuracy"] == metrics["accuracy"]

    def test_json_schema_stable_across_runs(self, trained):
        tmp_path, cfg, data = trained
        main(["eval", str(tmp_path / "model.fnw"), data, "--config", cfg,
              "--out", str(tmp_path / "e1")])
        main(["eval", str(tmp_path / "model.fnw"), data, "--config", cfg,
              "--out", str(tmp_path / "e2")])
        assert (tmp_path / "e1/metrics.json").read_text() == (
            tmp_path / "e2/metrics.json"
        ).read_text()

    def test_confusion_counts_sum_to_occurrences(self, trained):
        tmp_path, cfg, data = trained
        main(["eval", str(tmp_path / "model.fnw"), data, "--config", cfg,
              "--out", str(tmp_path)])
        m = json.loads((tmp_path / "metrics.json").read_text())
        conf = m["confusion"]
        for occ, cor, wi, out in zip(
            conf["occurrences"], conf["correct"],
            conf["within_group_errors"], conf["out_of_group_errors"],
        ):
            assert cor + wi + out == occ


class TestAnalyzeCommand:
    def test_csvs_and_identities(self, trained):
        tmp_path, cfg, data = trained
        rc = main(
            ["analyze", str(tmp_path / "model.fnw"), data, "--config", cfg,
             "--out", str(tmp_path / "an")]
        )
        assert rc == 0
        with open(tmp_path / "an/scree.csv") as f:
            scree_rows = list(csv.DictReader(f))
        assert len(scree_rows) == 16  # one row per hidden unit
        probs_sum = sum(float(r["probability"]) for r in scree_rows)
        with open(tmp_path / "an/code_length.csv") as f:
            (cl_row,) = list(csv.DictReader(f))
        assert abs(float(cl_row["mean_active"]) - probs_sum) < 1e-9
        assert int(cl_row["width"]) == 16
        with open(tmp_path / "an/confusion.csv") as f:
            conf_rows = list(csv.DictReader(f))
        assert len(conf_rows) == 3  # one per group

    def test_rerun_is_identical(self, trained):
        tmp_path, cfg, data = trained
        for sub in ("a1", "a2"):
            main(["analyze", str(tmp_path / "model.fnw"), data, "--config", cfg,
                  "--out", str(tmp_path / sub)])
        for name in ("scree.csv", "code_length.csv", "confusion.csv"):
            assert (tmp_path / "a1" / name).read_text() == (
                tmp_path / "a2" / name
            ).read_text()


class TestSweepCommand:
    def test_solver_reproduces_paper_width(self):
        # inverting the parameter-count formula at the published size
        assert solve_layer_width(36_920_090, 5, 840, 8986) == 2048

    def test_solver_monotone_and_feasibility(self):
        # even a width-1 net needs 95 params here, so 50 is infeasible
        assert solve_layer_width(50, 3, 50, 20) == 0
        w1 = solve_layer_width(10_000, 1, 50, 20)
        w2 = solve_layer_width(20_000, 1, 50, 20)
        assert w2 > w1 >= 1

    def test_sweep_summary_row_count(self, tmp_path):
        cfg_doc = {
            "data": SMALL_DATA,
            "network": SMALL_TRAIN["network"],
            "optimizer": SMALL_TRAIN["optimizer"],
            "training": {**SMALL_TRAIN["training"], "max_epochs": 1},
            "sweep": {
                "target_params": [600, 2000],
                "depths": [1, 3],
                "optimizers": ["cm", "nag"],
            },
        }
        cfg = write_config(tmp_path, cfg_doc)
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw")])
        assert rc == 0
        with open(tmp_path / "sw/summary.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 8  # 2 sizes x 2 depths x 2 optimizers
        assert rows[0].keys() == {
            "params", "layers", "layer_size", "optimizer", "dev_ce", "dev_acc", "error",
        }

    def test_infeasible_target_recorded_and_sweep_continues(self, tmp_path):
        cfg_doc = {
            "data": SMALL_DATA,
            "network": SMALL_TRAIN["network"],
            "optimizer": SMALL_TRAIN["optimizer"],
            "training": {**SMALL_TRAIN["training"], "max_epochs": 1},
            "sweep": {"target_params": [5, 2000], "depths": [1], "optimizers": ["nag"]},
        }
        cfg = write_config(tmp_path, cfg_doc)
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw")])
        assert rc == 0
        with open(tmp_path / "sw/summary.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 2
        assert "infeasible" in rows[0]["error"]
        assert rows[1]["error"] == "" and rows[1]["dev_acc"] != ""

    def test_depth_list_mirrors_table_rows(self, tmp_path):
        cfg_doc = {
            "data": {**SMALL_DATA, "frames_per_class": 40},
            "network": SMALL_TRAIN["network"],
            "optimizer": SMALL_TRAIN["optimizer"],
            "training": {**SMALL_TRAIN["training"], "max_epochs": 1},
            "sweep": {"target_params": [3000], "depths": [1, 3, 5, 7], "optimizers": ["nag"]},
        }
        cfg = write_config(tmp_path, cfg_doc)
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw")])
        assert rc == 0
        with open(tmp_path / "sw/summary.csv") as f:
            rows = list(csv.DictReader(f))
        assert [int(r["layers"]) for r in rows] == [1, 3, 5, 7]


class TestMasterSeed:
    def test_seed_flag_threads_through(self, tmp_path):
        cfg = write_config(tmp_path, {"data": SMALL_DATA})
        main(["gen-data", "--config", cfg, "--seed", "99", "--out", str(tmp_path / "s1")])
        main(["gen-data", "--config", cfg, "--seed", "99", "--out", str(tmp_path / "s2")])
        main(["gen-data", "--config", cfg, "--seed", "100", "--out", str(tmp_path / "s3")])
        b1 = (tmp_path / "s1/dataset.frn").read_bytes()
        b2 = (tmp_path / "s2/dataset.frn").read_bytes()
        b3 = (tmp_path / "s3/dataset.frn").read_bytes()
        assert b1 == b2 != b3
